#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_map>
#include <vector>

#include "crotad/graphs.hpp"
#include "crotad/rng.hpp"
#include "crotad/types.hpp"

namespace crotad {

// Reserved token ids for the three special embedding rows. Resolution
// nibble 15 is never produced by the indexers.
inline CellId mask_token() { return make_cell(15, 0xFFFFFFFFFFFFFFDULL); }
inline CellId start_token() { return make_cell(15, 0xFFFFFFFFFFFFFFEULL); }
inline CellId unknown_token() { return make_cell(15, 0xFFFFFFFFFFFFFFFULL); }

/// Base cell embeddings plus the mask / start / unknown token vectors.
/// Columns of `table` follow `cells` order; specials occupy the last three
/// columns.
struct CellEmbeddingTable {
    int dim = 0;
    int resolution = 0;
    std::vector<CellId> cells;
    std::unordered_map<CellId, int> index;
    Eigen::MatrixXd table;  // dim x (|cells| + 3)

    int mask_col() const { return static_cast<int>(cells.size()); }
    int start_col() const { return static_cast<int>(cells.size()) + 1; }
    int unknown_col() const { return static_cast<int>(cells.size()) + 2; }

    bool contains(CellId c) const { return index.count(c) > 0; }

    /// Column for a cell; unknown cells fall back to the unknown token.
    int col_of(CellId c) const {
        if (c == mask_token()) return mask_col();
        if (c == start_token()) return start_col();
        auto it = index.find(c);
        return it == index.end() ? unknown_col() : it->second;
    }

    Eigen::VectorXd vec(CellId c) const { return table.col(col_of(c)); }
};

struct Node2VecParams {
    int dim = 64;
    int walks_per_node = 10;
    int walk_length = 40;
    double p = 1.0;
    double q = 1.0;
    int window = 5;
    int epochs = 5;
    int negatives = 5;
    double learning_rate = 0.025;
    std::uint64_t seed = 1;
};

namespace detail {

struct CompactGraph {
    std::vector<CellId> cells;                // sorted
    std::vector<std::vector<int>> out_nbrs;   // sorted per vertex

    bool has_edge(int u, int v) const {
        const auto& n = out_nbrs[static_cast<std::size_t>(u)];
        return std::binary_search(n.begin(), n.end(), v);
    }
};

inline CompactGraph compact(const HierarchicalGraph& g) {
    CompactGraph cg;
    cg.cells = g.vertex_list();
    std::unordered_map<CellId, int> idx;
    idx.reserve(cg.cells.size());
    for (std::size_t i = 0; i < cg.cells.size(); ++i) idx[cg.cells[i]] = static_cast<int>(i);
    cg.out_nbrs.resize(cg.cells.size());
    for (const auto& [edge, tags] : g.edges) {
        (void)tags;
        cg.out_nbrs[static_cast<std::size_t>(idx.at(edge.first))].push_back(idx.at(edge.second));
    }
    for (auto& n : cg.out_nbrs) {
        std::sort(n.begin(), n.end());
        n.erase(std::unique(n.begin(), n.end()), n.end());
    }
    return cg;
}

}  // namespace detail

/// Second-order biased random walks (return parameter p, in-out parameter
/// q). Walks stop early at dead ends. Each (node, walk) pair draws from its
/// own derived seed, so generation order never affects the stream.
inline std::vector<std::vector<int>> generate_walks(const detail::CompactGraph& g,
                                                    const Node2VecParams& params) {
    std::vector<std::vector<int>> walks;
    walks.reserve(g.cells.size() * static_cast<std::size_t>(params.walks_per_node));
    std::vector<double> weights;
    for (std::size_t node = 0; node < g.cells.size(); ++node) {
        for (int w = 0; w < params.walks_per_node; ++w) {
            Rng rng(derive_seed(params.seed, node, static_cast<std::uint64_t>(w)));
            std::vector<int> walk{static_cast<int>(node)};
            while (static_cast<int>(walk.size()) < params.walk_length) {
                const int cur = walk.back();
                const auto& nbrs = g.out_nbrs[static_cast<std::size_t>(cur)];
                if (nbrs.empty()) break;
                int next;
                if (walk.size() == 1) {
                    next = nbrs[rng.index(nbrs.size())];
                } else {
                    const int prev = walk[walk.size() - 2];
                    weights.clear();
                    double total = 0.0;
                    for (int cand : nbrs) {
                        double wgt;
                        if (cand == prev)
                            wgt = 1.0 / params.p;
                        else if (g.has_edge(prev, cand))
                            wgt = 1.0;
                        else
                            wgt = 1.0 / params.q;
                        total += wgt;
                        weights.push_back(total);
                    }
                    const double u = rng.uniform() * total;
                    next = nbrs[static_cast<std::size_t>(
                        std::lower_bound(weights.begin(), weights.end(), u) - weights.begin())];
                }
                walk.push_back(next);
            }
            walks.push_back(std::move(walk));
        }
    }
    return walks;
}

/// Skip-gram with negative sampling over the walk corpus. Isolated vertices
/// keep their seeded random initialization.
inline CellEmbeddingTable train_cell_embeddings(const HierarchicalGraph& g,
                                                const Node2VecParams& params) {
    if (g.vertices.empty()) throw InsufficientDataError("cannot embed an empty graph");
    if (params.dim < 2) throw InvalidArgumentError("embedding dim must be >= 2");

    const auto cg = detail::compact(g);
    const int n = static_cast<int>(cg.cells.size());
    const int dim = params.dim;

    CellEmbeddingTable out;
    out.dim = dim;
    out.resolution = g.resolution;
    out.cells = cg.cells;
    for (int i = 0; i < n; ++i) out.index[cg.cells[static_cast<std::size_t>(i)]] = i;

    Rng init_rng(derive_seed(params.seed, 0x11, 0));
    Eigen::MatrixXd in_vecs(dim, n), out_vecs = Eigen::MatrixXd::Zero(dim, n);
    for (int c = 0; c < n; ++c)
        for (int d = 0; d < dim; ++d) in_vecs(d, c) = (init_rng.uniform() - 0.5) / dim;

    const auto walks = generate_walks(cg, params);

    // Unigram^0.75 negative-sampling table.
    std::vector<double> counts(static_cast<std::size_t>(n), 1.0);
    for (const auto& walk : walks)
        for (int v : walk) counts[static_cast<std::size_t>(v)] += 1.0;
    std::vector<double> neg_cdf(static_cast<std::size_t>(n));
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += std::pow(counts[static_cast<std::size_t>(i)], 0.75);
        neg_cdf[static_cast<std::size_t>(i)] = acc;
    }
    auto sample_negative = [&](Rng& rng) {
        const double u = rng.uniform() * acc;
        return static_cast<int>(std::lower_bound(neg_cdf.begin(), neg_cdf.end(), u) -
                                neg_cdf.begin());
    };

    std::vector<std::size_t> order(walks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    Eigen::VectorXd grad_center(dim);
    Rng rng(derive_seed(params.seed, 0x22, 0));
    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        const double lr = std::max(params.learning_rate *
                                       (1.0 - static_cast<double>(epoch) / params.epochs),
                                   params.learning_rate * 1e-3);
        rng.shuffle(order);
        for (const std::size_t wi : order) {
            const auto& walk = walks[wi];
            const int len = static_cast<int>(walk.size());
            for (int i = 0; i < len; ++i) {
                const int radius = 1 + static_cast<int>(rng.index(
                                           static_cast<std::size_t>(params.window)));
                const int center = walk[static_cast<std::size_t>(i)];
                auto v = in_vecs.col(center);
                for (int j = std::max(0, i - radius); j <= std::min(len - 1, i + radius); ++j) {
                    if (j == i) continue;
                    grad_center.setZero();
                    const int pos = walk[static_cast<std::size_t>(j)];
                    for (int k = 0; k <= params.negatives; ++k) {
                        int target;
                        double label;
                        if (k == 0) {
                            target = pos;
                            label = 1.0;
                        } else {
                            target = sample_negative(rng);
                            if (target == pos) continue;
                            label = 0.0;
                        }
                        auto u = out_vecs.col(target);
                        const double score = 1.0 / (1.0 + std::exp(-v.dot(u)));
                        const double gate = (label - score) * lr;
                        grad_center += gate * u;
                        u += gate * v;
                    }
                    v += grad_center;
                }
            }
        }
    }

    out.table.resize(dim, n + 3);
    out.table.leftCols(n) = in_vecs;
    Rng special_rng(derive_seed(params.seed, 0x33, 0));
    for (int s = 0; s < 3; ++s)
        for (int d = 0; d < dim; ++d) out.table(d, n + s) = (special_rng.uniform() - 0.5) * 0.2;
    return out;
}

inline CellEmbeddingTable train_cell_embeddings_random(const HierarchicalGraph& g, int dim,
                                                       std::uint64_t seed) {
    CellEmbeddingTable out;
    out.dim = dim;
    out.resolution = g.resolution;
    out.cells = g.vertex_list();
    for (std::size_t i = 0; i < out.cells.size(); ++i)
        out.index[out.cells[i]] = static_cast<int>(i);
    Rng rng(derive_seed(seed, 0x44, 0));
    out.table.resize(dim, static_cast<int>(out.cells.size()) + 3);
    for (int c = 0; c < out.table.cols(); ++c)
        for (int d = 0; d < dim; ++d) out.table(d, c) = (rng.uniform() - 0.5) * 0.2;
    return out;
}

// ---------------------------------------------------------------------------
// Binary table persistence: header (magic, dim, count, resolution) then one
// row per column: cell id (u64 LE) + float32 components. Token columns are
// written under their reserved ids.
// ---------------------------------------------------------------------------

inline void save_embedding_table(const CellEmbeddingTable& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write embedding table: " + path);
    const char magic[8] = {'C', 'R', 'O', 'E', 'M', 'B', '0', '1'};
    out.write(magic, 8);
    const std::int32_t dim = t.dim, resolution = t.resolution;
    const std::int64_t count = t.table.cols();
    out.write(reinterpret_cast<const char*>(&dim), 4);
    out.write(reinterpret_cast<const char*>(&count), 8);
    out.write(reinterpret_cast<const char*>(&resolution), 4);
    std::vector<float> row(static_cast<std::size_t>(dim));
    const CellId specials[3] = {mask_token(), start_token(), unknown_token()};
    for (std::int64_t c = 0; c < count; ++c) {
        const CellId id = c < static_cast<std::int64_t>(t.cells.size())
                              ? t.cells[static_cast<std::size_t>(c)]
                              : specials[c - static_cast<std::int64_t>(t.cells.size())];
        out.write(reinterpret_cast<const char*>(&id.v), 8);
        for (int d = 0; d < dim; ++d) row[static_cast<std::size_t>(d)] = static_cast<float>(t.table(d, c));
        out.write(reinterpret_cast<const char*>(row.data()), dim * 4);
    }
    if (!out) throw IoError("short write: " + path);
}

inline CellEmbeddingTable load_embedding_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read embedding table: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "CROEMB01") throw IoError("bad embedding table magic");
    std::int32_t dim = 0, resolution = 0;
    std::int64_t count = 0;
    in.read(reinterpret_cast<char*>(&dim), 4);
    in.read(reinterpret_cast<char*>(&count), 8);
    in.read(reinterpret_cast<char*>(&resolution), 4);
    if (!in || dim <= 0 || count < 3) throw IoError("bad embedding table header");
    CellEmbeddingTable t;
    t.dim = dim;
    t.resolution = resolution;
    t.table.resize(dim, count);
    std::vector<float> row(static_cast<std::size_t>(dim));
    for (std::int64_t c = 0; c < count; ++c) {
        CellId id;
        in.read(reinterpret_cast<char*>(&id.v), 8);
        in.read(reinterpret_cast<char*>(row.data()), dim * 4);
        if (!in) throw IoError("truncated embedding table");
        for (int d = 0; d < dim; ++d) t.table(d, c) = row[static_cast<std::size_t>(d)];
        if (c < count - 3) {
            t.cells.push_back(id);
            t.index[id] = static_cast<int>(c);
        }
    }
    return t;
}

}  // namespace crotad
