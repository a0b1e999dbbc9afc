#pragma once

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "crotad/autodiff.hpp"
#include "crotad/node2vec.hpp"
#include "crotad/params.hpp"
#include "crotad/stats.hpp"

namespace crotad {

struct EncoderConfig {
    int cell_dim = 64;      // base cell embedding size d_c
    int gat_dim = 32;       // route-wise GAT output size per layer
    int gat_heads = 4;
    int gat_layers = 1;
    int attn_dim = 32;      // pair-scorer size d'
    int hidden_dim = 128;   // encoder width d
    int proj_dim = 64;      // contrast space d_z
    int window_length = 5;  // L
    double leaky_slope = 0.2;
    bool use_route_gat = true;   // ablation: fused vector = base embedding only
    bool trainable_base = false;  // ablation: random learned cell table
};

inline void to_json(nlohmann::json& j, const EncoderConfig& c) {
    j = nlohmann::json{{"cell_dim", c.cell_dim},       {"gat_dim", c.gat_dim},
                       {"gat_heads", c.gat_heads},     {"gat_layers", c.gat_layers},
                       {"attn_dim", c.attn_dim},       {"hidden_dim", c.hidden_dim},
                       {"proj_dim", c.proj_dim},       {"window_length", c.window_length},
                       {"leaky_slope", c.leaky_slope}, {"use_route_gat", c.use_route_gat},
                       {"trainable_base", c.trainable_base}};
}

inline void from_json(const nlohmann::json& j, EncoderConfig& c) {
    j.at("cell_dim").get_to(c.cell_dim);
    j.at("gat_dim").get_to(c.gat_dim);
    j.at("gat_heads").get_to(c.gat_heads);
    j.at("gat_layers").get_to(c.gat_layers);
    j.at("attn_dim").get_to(c.attn_dim);
    j.at("hidden_dim").get_to(c.hidden_dim);
    j.at("proj_dim").get_to(c.proj_dim);
    j.at("window_length").get_to(c.window_length);
    j.at("leaky_slope").get_to(c.leaky_slope);
    j.at("use_route_gat").get_to(c.use_route_gat);
    j.at("trainable_base").get_to(c.trainable_base);
}

/// Route-aware window encoder: per-itinerary GAT over the frequently
/// visited subgraph, fusion with base cell embeddings, GRU over the fused
/// sequence seeded from the itinerary embedding, attention pooling, a
/// projection head for the contrast space, an autoregressive reconstruction
/// decoder and a two-action Q head.
struct EncoderModel {
    EncoderConfig cfg;
    int vocab_size = 0;  // |U| + specials; matches the embedding table
    int resolution = 0;
    std::vector<std::string> od_keys;  // sorted
    std::unordered_map<std::string, int> od_index;
    ParamStore params;

    int od_of(const ODPair& od) const {
        auto it = od_index.find(od.key);
        if (it == od_index.end()) throw InvalidArgumentError("unknown itinerary: " + od.key);
        return it->second;
    }
};

inline EncoderModel build_encoder(const EncoderConfig& cfg, std::vector<std::string> od_keys,
                                  const CellEmbeddingTable& base, std::uint64_t seed) {
    if (cfg.gat_dim % cfg.gat_heads != 0)
        throw InvalidArgumentError("gat_dim must be divisible by gat_heads");
    if (base.dim != cfg.cell_dim)
        throw InvalidArgumentError("embedding table dim does not match encoder cell_dim");
    EncoderModel m;
    m.cfg = cfg;
    m.vocab_size = static_cast<int>(base.table.cols());
    m.resolution = base.resolution;
    std::sort(od_keys.begin(), od_keys.end());
    m.od_keys = std::move(od_keys);
    for (std::size_t i = 0; i < m.od_keys.size(); ++i)
        m.od_index[m.od_keys[i]] = static_cast<int>(i);

    Rng rng(derive_seed(seed, 0xE7C0DE, 0));
    auto& p = m.params;
    const int d = cfg.hidden_dim, dc = cfg.cell_dim, dg = cfg.gat_dim;
    const int head_dim = dg / cfg.gat_heads;

    if (cfg.trainable_base) p.add_uniform("base.table", dc, m.vocab_size, rng, 0.1);

    for (int l = 0; l < cfg.gat_layers; ++l) {
        const int in_dim = l == 0 ? dc : dg;
        for (int h = 0; h < cfg.gat_heads; ++h) {
            const std::string pre = "gat.l" + std::to_string(l) + ".h" + std::to_string(h) + ".";
            p.add_glorot(pre + "W1a", cfg.attn_dim, in_dim, rng);
            p.add_glorot(pre + "W1b", cfg.attn_dim, in_dim, rng);
            p.add_glorot(pre + "a", 1, cfg.attn_dim, rng);
            p.add_glorot(pre + "W2", head_dim, in_dim, rng);
        }
    }
    p.add_uniform("gat.unknown", dg, 1, rng, 0.1);
    p.add_glorot("fuse.W", d, dg + dc, rng);
    p.add("fuse.b", d, 1);
    p.add_uniform("enc.mask", d, 1, rng, 0.1);
    p.add_uniform("od.table", d, std::max<std::size_t>(m.od_keys.size(), 1), rng, 0.1);
    p.add_glorot("init.W", d, d, rng);
    p.add("init.b", d, 1);
    for (const char* gate : {"z", "r", "h"}) {
        p.add_glorot(std::string("rnn.W") + gate, d, d, rng);
        p.add_glorot(std::string("rnn.U") + gate, d, d, rng);
        p.add(std::string("rnn.b") + gate, d, 1);
        p.add_glorot(std::string("dec.W") + gate, d, dc, rng);
        p.add_glorot(std::string("dec.U") + gate, d, d, rng);
        p.add(std::string("dec.b") + gate, d, 1);
    }
    p.add_glorot("pool.Wq", d, d, rng);
    p.add_glorot("pool.Wk", d, d, rng);
    p.add_glorot("pool.W", d, d, rng);
    p.add("pool.b", d, 1);
    p.add_glorot("proj.W1", d, d, rng);
    p.add("proj.b1", d, 1);
    p.add_glorot("proj.W2", cfg.proj_dim, d, rng);
    p.add("proj.b2", cfg.proj_dim, 1);
    p.add_glorot("dec.Wout", m.vocab_size, d, rng);
    p.add("dec.bout", m.vocab_size, 1);
    const int qh = std::max(d / 2, 8);
    p.add_glorot("q.W1", qh, d, rng);
    p.add("q.b1", qh, 1);
    p.add_glorot("q.W2", 2, qh, rng);
    p.add("q.b2", 2, 1);
    return m;
}

// ---------------------------------------------------------------------------
// Batched forward pass
// ---------------------------------------------------------------------------

struct WindowRef {
    int od = 0;  // model itinerary index
    const Window* cells = nullptr;
};

struct BatchEncoding {
    ad::Var h;                // hidden_dim x B
    ad::Var z;                // proj_dim x B
    std::vector<int> col_of;  // input order -> column
};

/// Builds per-itinerary fused cell matrices and encodes window batches on
/// one tape. Construct one per forward pass.
class BatchEncoder {
public:
    BatchEncoder(Ctx& ctx, const EncoderModel& model, const CellEmbeddingTable& base,
                 const std::map<ODPair, RouteSubgraph>& subgraphs)
        : ctx_(ctx), model_(model), base_(base), subgraphs_(subgraphs) {}

    /// Route-wise GAT + fusion over one itinerary's subgraph plus fallback
    /// columns for the given off-route cells. Optionally collects the
    /// per-layer, per-head attention matrices.
    struct Fused {
        ad::Var F;
        std::unordered_map<CellId, int> col;
    };

    const Fused& fused_for(int od, const std::set<CellId>& extra_cells,
                           std::vector<ad::Mat>* attention_out = nullptr) {
        auto it = fused_.find(od);
        if (it != fused_.end() && attention_out == nullptr) {
            bool covered = true;
            for (const CellId& c : extra_cells)
                if (!it->second.col.count(c)) {
                    covered = false;
                    break;
                }
            if (covered) return it->second;
        }
        Fused f = build_fused(od, extra_cells, attention_out);
        return fused_[od] = std::move(f);
    }

    BatchEncoding encode(const std::vector<WindowRef>& windows) {
        if (windows.empty()) throw InvalidArgumentError("empty encode batch");
        for (const auto& w : windows)
            if (!w.cells || w.cells->empty()) throw InvalidArgumentError("empty window");

        // Fallback cells per itinerary.
        std::map<int, std::set<CellId>> extras;
        for (const auto& w : windows) {
            auto& ex = extras[w.od];
            const RouteSubgraph& sub = subgraph_of(w.od);
            for (const CellId& c : *w.cells)
                if (c != mask_token() && sub.index_of(c) < 0) ex.insert(c);
        }
        for (const auto& [od, ex] : extras) fused_for(od, ex);

        // Group by window length; stable by (od, input order) inside a group.
        std::map<std::size_t, std::vector<int>> groups;
        for (std::size_t i = 0; i < windows.size(); ++i)
            groups[windows[i].cells->size()].push_back(static_cast<int>(i));
        for (auto& [len, idxs] : groups)
            std::stable_sort(idxs.begin(), idxs.end(),
                             [&](int a, int b) { return windows[static_cast<std::size_t>(a)].od <
                                                        windows[static_cast<std::size_t>(b)].od; });

        std::vector<ad::Var> h_parts, z_parts;
        std::vector<int> col_of(windows.size(), -1);
        int col_base = 0;
        for (const auto& [len, idxs] : groups) {
            auto [h, z] = encode_group(windows, idxs, static_cast<Eigen::Index>(len));
            h_parts.push_back(h);
            z_parts.push_back(z);
            for (std::size_t j = 0; j < idxs.size(); ++j)
                col_of[static_cast<std::size_t>(idxs[j])] = col_base + static_cast<int>(j);
            col_base += static_cast<int>(idxs.size());
        }
        BatchEncoding out;
        out.h = h_parts.size() == 1 ? h_parts[0] : ad::hcat(ctx_.tape, h_parts);
        out.z = z_parts.size() == 1 ? z_parts[0] : ad::hcat(ctx_.tape, z_parts);
        out.col_of = std::move(col_of);
        return out;
    }

    /// Two-action Q values for encoded states.
    ad::Var q_values(ad::Var h) {
        ad::Var a1 = ad::elu(ad::add_colvec(ad::matmul(ctx_.p("q.W1"), h), ctx_.p("q.b1")));
        return ad::add_colvec(ad::matmul(ctx_.p("q.W2"), a1), ctx_.p("q.b2"));
    }

    /// Teacher-forced reconstruction loss for one length group.
    /// `targets` holds vocab columns, all of equal length; h0 columns align
    /// with them. Returns (1 x B) per-window token-mean cross-entropies.
    ad::Var decode_loss(ad::Var h0, const std::vector<std::vector<int>>& targets) {
        if (targets.empty()) throw InvalidArgumentError("decode_loss without targets");
        const std::size_t len = targets[0].size();
        for (const auto& t : targets)
            if (t.size() != len || t.empty())
                throw InvalidArgumentError("decode_loss requires equal non-empty targets");
        ad::Var base_var = base_table();
        ad::Var H = h0;
        ad::Var acc;
        for (std::size_t t = 0; t < len; ++t) {
            std::vector<int> inputs(targets.size());
            for (std::size_t j = 0; j < targets.size(); ++j)
                inputs[j] = t == 0 ? base_.start_col() : targets[j][t - 1];
            ad::Var X = ad::gather_cols(base_var, inputs);
            H = gru_step("dec.", X, H);
            ad::Var logits = ad::add_colvec(ad::matmul(ctx_.p("dec.Wout"), H), ctx_.p("dec.bout"));
            std::vector<int> step_targets(targets.size());
            for (std::size_t j = 0; j < targets.size(); ++j) step_targets[j] = targets[j][t];
            ad::Var lt = ad::softmax_xent_cols(logits, std::move(step_targets));
            acc = acc.valid() ? ad::add(acc, lt) : lt;
        }
        return ad::scale(acc, 1.0 / static_cast<double>(len));
    }

    /// Step-by-step output distributions for one window (teacher forcing).
    std::vector<Eigen::VectorXd> decode_distributions(ad::Var h0, const std::vector<int>& targets) {
        ad::Var base_var = base_table();
        ad::Var H = h0;
        std::vector<Eigen::VectorXd> out;
        for (std::size_t t = 0; t < targets.size(); ++t) {
            const int input = t == 0 ? base_.start_col() : targets[t - 1];
            ad::Var X = ad::gather_cols(base_var, {input});
            H = gru_step("dec.", X, H);
            ad::Var logits = ad::add_colvec(ad::matmul(ctx_.p("dec.Wout"), H), ctx_.p("dec.bout"));
            out.push_back(ad::softmax_cols(logits).val().col(0));
        }
        return out;
    }

    ad::Var base_table() {
        if (model_.cfg.trainable_base) return ctx_.p("base.table");
        if (!base_const_.valid()) base_const_ = ctx_.constant(base_.table);
        return base_const_;
    }

    const RouteSubgraph& subgraph_of(int od) const {
        const ODPair key{model_.od_keys[static_cast<std::size_t>(od)]};
        auto it = subgraphs_.find(key);
        if (it == subgraphs_.end()) throw MissingArtifactError("no route subgraph for " + key.key);
        return it->second;
    }

private:
    std::pair<ad::Var, ad::Var> encode_group(const std::vector<WindowRef>& windows,
                                             const std::vector<int>& idxs, Eigen::Index len) {
        const int B = static_cast<int>(idxs.size());
        std::vector<int> od_cols(static_cast<std::size_t>(B));
        for (int j = 0; j < B; ++j)
            od_cols[static_cast<std::size_t>(j)] = windows[static_cast<std::size_t>(idxs[static_cast<std::size_t>(j)])].od;
        ad::Var R = ad::gather_cols(ctx_.p("od.table"), od_cols);
        ad::Var H = ad::tanh_(ad::add_colvec(ad::matmul(ctx_.p("init.W"), R), ctx_.p("init.b")));

        std::vector<ad::Var> hs;
        hs.reserve(static_cast<std::size_t>(len));
        for (Eigen::Index t = 0; t < len; ++t) {
            ad::Var X = gather_step(windows, idxs, t);
            H = gru_step("rnn.", X, H);
            hs.push_back(H);
        }

        // Attention pooling conditioned on the itinerary embedding.
        ad::Var q = ad::matmul(ctx_.p("pool.Wq"), R);
        const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(model_.cfg.hidden_dim));
        std::vector<ad::Var> score_rows;
        score_rows.reserve(hs.size());
        for (const ad::Var& ht : hs)
            score_rows.push_back(
                ad::scale(ad::dot_cols(q, ad::matmul(ctx_.p("pool.Wk"), ht)), inv_sqrt_d));
        ad::Var A = ad::softmax_cols(score_rows.size() == 1 ? score_rows[0]
                                                            : ad::vcat(ctx_.tape, score_rows));
        ad::Var ctxv;
        for (std::size_t t = 0; t < hs.size(); ++t) {
            ad::Var term = ad::mul_rowvec(hs[t], ad::rows(A, static_cast<Eigen::Index>(t), 1));
            ctxv = ctxv.valid() ? ad::add(ctxv, term) : term;
        }
        ad::Var h = ad::add_colvec(ad::matmul(ctx_.p("pool.W"), ctxv), ctx_.p("pool.b"));
        ad::Var z = ad::add_colvec(
            ad::matmul(ctx_.p("proj.W2"),
                       ad::elu(ad::add_colvec(ad::matmul(ctx_.p("proj.W1"), h), ctx_.p("proj.b1")))),
            ctx_.p("proj.b2"));
        return {h, z};
    }

    /// Per-timestep input: columns gathered from each window's itinerary
    /// fused matrix, chunked by contiguous od runs.
    ad::Var gather_step(const std::vector<WindowRef>& windows, const std::vector<int>& idxs,
                        Eigen::Index t) {
        std::vector<ad::Var> chunks;
        std::vector<int> cols;
        int run_od = windows[static_cast<std::size_t>(idxs[0])].od;
        auto flush = [&]() {
            if (cols.empty()) return;
            chunks.push_back(ad::gather_cols(fused_.at(run_od).F, cols));
            cols.clear();
        };
        for (int idx : idxs) {
            const auto& w = windows[static_cast<std::size_t>(idx)];
            if (w.od != run_od) {
                flush();
                run_od = w.od;
            }
            cols.push_back(fused_.at(w.od).col.at((*w.cells)[static_cast<std::size_t>(t)]));
        }
        flush();
        return chunks.size() == 1 ? chunks[0] : ad::hcat(ctx_.tape, chunks);
    }

    ad::Var gru_step(const std::string& pre, ad::Var X, ad::Var H) {
        ad::Var z = ad::sigmoid(ad::add_colvec(
            ad::add(ad::matmul(ctx_.p(pre + "Wz"), X), ad::matmul(ctx_.p(pre + "Uz"), H)),
            ctx_.p(pre + "bz")));
        ad::Var r = ad::sigmoid(ad::add_colvec(
            ad::add(ad::matmul(ctx_.p(pre + "Wr"), X), ad::matmul(ctx_.p(pre + "Ur"), H)),
            ctx_.p(pre + "br")));
        ad::Var hb = ad::tanh_(ad::add_colvec(
            ad::add(ad::matmul(ctx_.p(pre + "Wh"), X),
                    ad::matmul(ctx_.p(pre + "Uh"), ad::cwise_mul(r, H))),
            ctx_.p(pre + "bh")));
        return ad::add(ad::cwise_mul(ad::one_minus(z), H), ad::cwise_mul(z, hb));
    }

    Fused build_fused(int od, const std::set<CellId>& extra_cells,
                      std::vector<ad::Mat>* attention_out) {
        const RouteSubgraph& sub = subgraph_of(od);
        const int N = static_cast<int>(sub.vertices.size());
        ad::Var base_var = base_table();
        const EncoderConfig& cfg = model_.cfg;

        Fused f;
        std::vector<ad::Var> parts;

        if (N > 0) {
            std::vector<int> vert_cols(static_cast<std::size_t>(N));
            for (int j = 0; j < N; ++j)
                vert_cols[static_cast<std::size_t>(j)] = base_.col_of(sub.vertices[static_cast<std::size_t>(j)]);
            ad::Var H0 = ad::gather_cols(base_var, vert_cols);

            ad::Var Hgat;
            if (cfg.use_route_gat) {
                // Additive mask: attention only over out-neighbors; isolated
                // vertices attend to themselves.
                ad::Mat mask = ad::Mat::Constant(N, N, -1e9);
                for (int j = 0; j < N; ++j) {
                    const auto& nbrs = sub.out_nbrs[static_cast<std::size_t>(j)];
                    if (nbrs.empty()) {
                        mask(j, j) = 0.0;
                    } else {
                        for (int k : nbrs) mask(k, j) = 0.0;
                    }
                }
                ad::Var mask_var = ctx_.constant(mask);

                ad::Var H = H0;
                for (int l = 0; l < cfg.gat_layers; ++l) {
                    std::vector<ad::Var> heads;
                    for (int m = 0; m < cfg.gat_heads; ++m) {
                        const std::string pre =
                            "gat.l" + std::to_string(l) + ".h" + std::to_string(m) + ".";
                        ad::Var U = ad::matmul(ctx_.p(pre + "W1a"), H);
                        ad::Var V = ad::matmul(ctx_.p(pre + "W1b"), H);
                        ad::Var P = ad::add(ad::repeat_each_col(U, N), ad::tile_cols(V, N));
                        ad::Var E = ad::matmul(ctx_.p(pre + "a"),
                                               ad::leaky_relu(P, cfg.leaky_slope));
                        ad::Var S = ad::reshape(E, N, N);  // S(k, j) = e(h_j, h_k)
                        ad::Var A = ad::softmax_cols(ad::add(S, mask_var));
                        if (attention_out) attention_out->push_back(A.val());
                        heads.push_back(ad::elu(ad::matmul(ad::matmul(ctx_.p(pre + "W2"), H), A)));
                    }
                    H = heads.size() == 1 ? heads[0] : ad::vcat(ctx_.tape, heads);
                }
                Hgat = H;
            } else {
                Hgat = ctx_.constant(ad::Mat::Zero(cfg.gat_dim, N));
            }
            parts.push_back(fuse(ad::vcat(ctx_.tape, {Hgat, H0})));
            for (int j = 0; j < N; ++j) f.col[sub.vertices[static_cast<std::size_t>(j)]] = j;
        }

        if (!extra_cells.empty()) {
            std::vector<int> cols;
            cols.reserve(extra_cells.size());
            int next = static_cast<int>(f.col.size());
            for (const CellId& c : extra_cells) {
                cols.push_back(base_.col_of(c));
                f.col[c] = next++;
            }
            ad::Var Eb = ad::gather_cols(base_var, cols);
            ad::Var G = ad::tile_cols(ctx_.p("gat.unknown"), static_cast<int>(extra_cells.size()));
            parts.push_back(fuse(ad::vcat(ctx_.tape, {G, Eb})));
        }

        f.col[mask_token()] = static_cast<int>(f.col.size());
        parts.push_back(ctx_.p("enc.mask"));

        f.F = parts.size() == 1 ? parts[0] : ad::hcat(ctx_.tape, parts);
        return f;
    }

    ad::Var fuse(ad::Var gat_and_base) {
        return ad::add_colvec(ad::matmul(ctx_.p("fuse.W"), gat_and_base), ctx_.p("fuse.b"));
    }

    Ctx& ctx_;
    const EncoderModel& model_;
    const CellEmbeddingTable& base_;
    const std::map<ODPair, RouteSubgraph>& subgraphs_;
    std::map<int, Fused> fused_;
    ad::Var base_const_;
};

// ---------------------------------------------------------------------------
// Single-window conveniences (inference)
// ---------------------------------------------------------------------------

struct WindowEmbedding {
    Eigen::VectorXd h;
    Eigen::VectorXd z;
};

inline WindowEmbedding encode_window(const EncoderModel& model, const CellEmbeddingTable& base,
                                     const std::map<ODPair, RouteSubgraph>& subgraphs,
                                     const ODPair& od, const Window& window) {
    ad::Tape tape;
    Ctx ctx{tape, const_cast<ParamStore&>(model.params), false};
    BatchEncoder enc(ctx, model, base, subgraphs);
    std::vector<WindowRef> refs{WindowRef{model.od_of(od), &window}};
    BatchEncoding be = enc.encode(refs);
    return WindowEmbedding{be.h.val().col(be.col_of[0]), be.z.val().col(be.col_of[0])};
}

/// Teacher-forced reconstruction distributions for one window given the
/// encoder output of its (possibly masked) version.
inline std::vector<Eigen::VectorXd> decode_reconstruct(const EncoderModel& model,
                                                       const CellEmbeddingTable& base,
                                                       const Eigen::VectorXd& h0,
                                                       const std::vector<int>& target_cols) {
    if (target_cols.empty()) throw InvalidArgumentError("empty reconstruction target");
    ad::Tape tape;
    Ctx ctx{tape, const_cast<ParamStore&>(model.params), false};
    static const std::map<ODPair, RouteSubgraph> kNoSubgraphs;
    BatchEncoder enc(ctx, model, base, kNoSubgraphs);
    ad::Var h0v = ctx.constant(h0);
    return enc.decode_distributions(h0v, target_cols);
}

/// GAT + fusion diagnostics for one itinerary (used by tests and tooling).
struct RouteEmbedResult {
    std::vector<CellId> vertices;
    ad::Mat gat_output;               // gat_dim x N
    ad::Mat fused;                    // hidden_dim x N
    std::vector<ad::Mat> attention;   // per layer*head, each N x N, columns sum to 1
};

inline RouteEmbedResult gat_route_embed(const EncoderModel& model, const CellEmbeddingTable& base,
                                        const ItineraryStats& stats,
                                        const HierarchicalGraph& graph) {
    std::map<ODPair, RouteSubgraph> subs;
    subs[stats.od] = route_subgraph(stats, graph);
    ad::Tape tape;
    Ctx ctx{tape, const_cast<ParamStore&>(model.params), false};
    BatchEncoder enc(ctx, model, base, subs);
    RouteEmbedResult out;
    out.vertices = subs[stats.od].vertices;
    const int od = model.od_of(stats.od);
    const auto& fused = enc.fused_for(od, {}, &out.attention);
    const int N = static_cast<int>(out.vertices.size());
    out.fused = fused.F.val().leftCols(N);
    return out;
}

/// Single feed-forward fusion of one GAT output with one base embedding.
inline Eigen::VectorXd fuse_cell(const EncoderModel& model, const Eigen::VectorXd& h_gat,
                                 const Eigen::VectorXd& c_base) {
    Eigen::VectorXd input(h_gat.size() + c_base.size());
    input << h_gat, c_base;
    return model.params.value("fuse.W") * input + model.params.value("fuse.b").col(0);
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON config block + named parameter blobs.
// ---------------------------------------------------------------------------

inline void save_encoder(const EncoderModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    const char magic[8] = {'C', 'R', 'O', 'C', 'K', 'P', 'T', '1'};
    out.write(magic, 8);
    nlohmann::json j;
    j["config"] = m.cfg;
    j["vocab_size"] = m.vocab_size;
    j["resolution"] = m.resolution;
    j["od_keys"] = m.od_keys;
    const std::string blob = j.dump();
    const std::int64_t len = static_cast<std::int64_t>(blob.size());
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(blob.data(), len);
    write_param_blobs(out, m.params);
    if (!out) throw IoError("short checkpoint write: " + path);
}

inline EncoderModel load_encoder(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "CROCKPT1") throw IoError("bad checkpoint magic");
    std::int64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 8);
    if (!in || len <= 0 || len > (1 << 26)) throw IoError("bad checkpoint header length");
    std::string blob(static_cast<std::size_t>(len), '\0');
    in.read(blob.data(), len);
    const nlohmann::json j = nlohmann::json::parse(blob);
    EncoderModel m;
    m.cfg = j.at("config").get<EncoderConfig>();
    m.vocab_size = j.at("vocab_size").get<int>();
    m.resolution = j.at("resolution").get<int>();
    m.od_keys = j.at("od_keys").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < m.od_keys.size(); ++i)
        m.od_index[m.od_keys[i]] = static_cast<int>(i);
    m.params = read_param_blobs(in);
    return m;
}

/// Dimension consistency between a checkpoint, its embedding table and the
/// itinerary stats it will be used with.
inline void validate_encoder(const EncoderModel& m, const CellEmbeddingTable& base,
                             const std::map<ODPair, ItineraryStats>& stats) {
    if (base.dim != m.cfg.cell_dim)
        throw MissingArtifactError("embedding table dim does not match checkpoint");
    if (static_cast<int>(base.table.cols()) != m.vocab_size)
        throw MissingArtifactError("embedding table vocabulary does not match checkpoint");
    if (base.resolution != m.resolution)
        throw MissingArtifactError("embedding table resolution does not match checkpoint");
    for (const auto& key : m.od_keys)
        if (!stats.count(ODPair{key}))
            throw MissingArtifactError("stats file missing itinerary " + key);
}

}  // namespace crotad
