#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_set>
#include <vector>

#include "crotad/indexer.hpp"
#include "crotad/rng.hpp"
#include "crotad/stats.hpp"

namespace crotad {

struct AugmentationParams {
    int rho1 = 2;       // mask budget
    int rho2 = 2;       // rear-truncation budget
    int rho3 = 2;       // head-truncation budget
    int k_replace = 2;  // hop range for replacement negatives
    int window_length = 5;
    // Mixture over the seven negative transforms, normalized at dispatch.
    std::vector<double> negative_weights = std::vector<double>(7, 1.0);
};

/// Per-itinerary sampling context: S_pos membership plus the enumerated
/// complement within the cell universe.
struct AugmentContext {
    const ItineraryStats* stats = nullptr;
    const HexIndexer* indexer = nullptr;
    std::vector<CellId> pos_cells;      // sorted
    std::vector<CellId> non_pos_cells;  // universe minus s_pos, sorted
};

inline AugmentContext make_augment_context(const ItineraryStats& stats, const HexIndexer& indexer,
                                           const std::vector<CellId>& universe) {
    AugmentContext ctx;
    ctx.stats = &stats;
    ctx.indexer = &indexer;
    ctx.pos_cells.assign(stats.s_pos.begin(), stats.s_pos.end());
    for (const CellId& c : universe)
        if (!stats.in_s_pos(c)) ctx.non_pos_cells.push_back(c);
    std::sort(ctx.non_pos_cells.begin(), ctx.non_pos_cells.end());
    return ctx;
}

// ---------------------------------------------------------------------------
// Positive views
// ---------------------------------------------------------------------------

/// Drop m ~ U{0..rho1} cells at random positions; at least one cell
/// survives.
inline Window random_mask(const Window& w, int rho1, Rng& rng) {
    const int len = static_cast<int>(w.size());
    int m = static_cast<int>(rng.uniform_int(0, rho1));
    m = std::min(m, len - 1);
    if (m <= 0) return w;
    std::vector<int> idx(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) idx[static_cast<std::size_t>(i)] = i;
    rng.shuffle(idx);
    std::unordered_set<int> drop(idx.begin(), idx.begin() + m);
    Window out;
    out.reserve(static_cast<std::size_t>(len - m));
    for (int i = 0; i < len; ++i)
        if (!drop.count(i)) out.push_back(w[static_cast<std::size_t>(i)]);
    return out;
}

/// Keep a prefix of length ceil(m), m ~ U(0, rho2]; kept length >= 1.
inline Window truncate_rear(const Window& w, int rho2, Rng& rng) {
    const int len = static_cast<int>(w.size());
    int keep = static_cast<int>(std::ceil(rng.uniform() * rho2));
    keep = std::clamp(keep, 1, len);
    return Window(w.begin(), w.begin() + keep);
}

/// Keep a suffix of length ceil(m), m ~ U(0, rho3]; kept length >= 1.
inline Window truncate_head(const Window& w, int rho3, Rng& rng) {
    const int len = static_cast<int>(w.size());
    int keep = static_cast<int>(std::ceil(rng.uniform() * rho3));
    keep = std::clamp(keep, 1, len);
    return Window(w.end() - keep, w.end());
}

/// One uniformly chosen positive transform.
inline Window sample_positive_view(const Window& w, const AugmentationParams& params, Rng& rng) {
    switch (rng.uniform_int(0, 2)) {
        case 0: return random_mask(w, params.rho1, rng);
        case 1: return truncate_rear(w, params.rho2, rng);
        default: return truncate_head(w, params.rho3, rng);
    }
}

// ---------------------------------------------------------------------------
// Negative samples
// ---------------------------------------------------------------------------

enum class ReplaceMode { interior, head, rear };

namespace detail {

/// Random infrequently-visited cell within k hops of `orig`, or nullopt.
inline std::optional<CellId> off_route_neighbor(const AugmentContext& ctx, CellId orig, int k,
                                                Rng& rng) {
    std::vector<CellId> ring = ctx.indexer->k_hop_neighbors(orig, k);
    std::vector<CellId> candidates;
    candidates.reserve(ring.size());
    for (const CellId& c : ring)
        if (c != orig && !ctx.stats->in_s_pos(c)) candidates.push_back(c);
    if (candidates.empty()) return std::nullopt;
    return candidates[rng.index(candidates.size())];
}

}  // namespace detail

/// Replace m ~ U{1..L} cells with off-route k-hop neighbors. Interior mode
/// re-draws a stuck position up to L times before falling back to a uniform
/// off-route cell; head/rear replace the first/last m positions.
inline Window neg_random_replace(const Window& w, const AugmentContext& ctx, int k,
                                 ReplaceMode mode, Rng& rng) {
    if (ctx.non_pos_cells.empty()) throw InsufficientDataError("no off-route cells to sample");
    const int len = static_cast<int>(w.size());
    const int m = static_cast<int>(rng.uniform_int(1, len));
    Window out = w;

    std::vector<int> positions;
    if (mode == ReplaceMode::head) {
        for (int i = 0; i < m; ++i) positions.push_back(i);
    } else if (mode == ReplaceMode::rear) {
        for (int i = len - m; i < len; ++i) positions.push_back(i);
    } else {
        std::vector<int> idx(static_cast<std::size_t>(len));
        for (int i = 0; i < len; ++i) idx[static_cast<std::size_t>(i)] = i;
        rng.shuffle(idx);
        positions.assign(idx.begin(), idx.begin() + m);
        std::sort(positions.begin(), positions.end());
    }

    for (std::size_t pi = 0; pi < positions.size(); ++pi) {
        int pos = positions[pi];
        std::optional<CellId> repl = detail::off_route_neighbor(ctx, w[static_cast<std::size_t>(pos)], k, rng);
        if (mode == ReplaceMode::interior) {
            int attempts = 0;
            while (!repl && attempts < len) {
                pos = static_cast<int>(rng.index(static_cast<std::size_t>(len)));
                repl = detail::off_route_neighbor(ctx, w[static_cast<std::size_t>(pos)], k, rng);
                ++attempts;
            }
        }
        if (!repl) repl = ctx.non_pos_cells[rng.index(ctx.non_pos_cells.size())];
        out[static_cast<std::size_t>(pos)] = *repl;
    }
    return out;
}

enum class CombinationSource { neg, pos };

/// L cells sampled i.i.d. from the infrequently (neg) or frequently (pos)
/// visited set.
inline Window neg_random_combination(const AugmentContext& ctx, int length,
                                     CombinationSource source, Rng& rng) {
    const auto& pool = source == CombinationSource::neg ? ctx.non_pos_cells : ctx.pos_cells;
    if (pool.empty()) throw InsufficientDataError("empty combination source set");
    Window out;
    out.reserve(static_cast<std::size_t>(length));
    for (int i = 0; i < length; ++i) out.push_back(pool[rng.index(pool.size())]);
    return out;
}

/// Uniform non-identity permutation of the window.
inline Window neg_shuffle(const Window& w, Rng& rng) {
    if (std::adjacent_find(w.begin(), w.end(), std::not_equal_to<>()) == w.end())
        return w;  // all cells equal; no distinct permutation exists
    Window out = w;
    do {
        rng.shuffle(out);
    } while (out == w);
    return out;
}

/// Loop pattern: the final k_seg cells followed by the reversed walk back
/// toward the front, truncated to the window length.
inline Window neg_repeat(const Window& w, int k_seg, Rng&) {
    const int len = static_cast<int>(w.size());
    k_seg = std::clamp(k_seg, 1, len);
    Window out;
    out.reserve(static_cast<std::size_t>(len));
    for (int i = len - k_seg; i < len; ++i) out.push_back(w[static_cast<std::size_t>(i)]);
    for (int i = len - 2; i >= 0 && static_cast<int>(out.size()) < len; --i)
        out.push_back(w[static_cast<std::size_t>(i)]);
    return out;
}

inline Window neg_repeat(const Window& w, Rng& rng) {
    const int len = static_cast<int>(w.size());
    const int hi = std::max(2, len / 2);
    return neg_repeat(w, static_cast<int>(rng.uniform_int(len >= 4 ? 2 : 1, len >= 4 ? hi : 1)), rng);
}

/// Split at uniform k in {1..L-1} and swap the two parts (rotation).
inline Window neg_slice_permute(const Window& w, Rng& rng) {
    const int len = static_cast<int>(w.size());
    const int k = static_cast<int>(rng.uniform_int(1, len - 1));
    Window out(w.begin() + k, w.end());
    out.insert(out.end(), w.begin(), w.begin() + k);
    return out;
}

inline Window neg_slice_permute_at(const Window& w, int k) {
    Window out(w.begin() + k, w.end());
    out.insert(out.end(), w.begin(), w.begin() + k);
    return out;
}

/// Dispatch over the seven negative transforms. Head and rear replacement
/// form one transform slot, mirroring the transform catalogue.
inline Window sample_negative(const Window& w, const AugmentContext& ctx,
                              const AugmentationParams& params, Rng& rng) {
    const auto& wts = params.negative_weights;
    if (wts.size() != 7) throw InvalidArgumentError("expected 7 negative-transform weights");
    double total = 0.0;
    for (double v : wts) total += v;
    if (total <= 0.0) throw InvalidArgumentError("negative-transform weights sum to zero");
    double u = rng.uniform() * total;
    int pick = 0;
    for (; pick < 6; ++pick) {
        u -= wts[static_cast<std::size_t>(pick)];
        if (u < 0) break;
    }
    switch (pick) {
        case 0: return neg_random_replace(w, ctx, params.k_replace, ReplaceMode::interior, rng);
        case 1:
            return neg_random_replace(w, ctx, params.k_replace,
                                      rng.bernoulli(0.5) ? ReplaceMode::head : ReplaceMode::rear,
                                      rng);
        case 2: return neg_random_combination(ctx, static_cast<int>(w.size()), CombinationSource::neg, rng);
        case 3: return neg_shuffle(w, rng);
        case 4: return neg_repeat(w, rng);
        case 5: return neg_slice_permute(w, rng);
        default: return neg_random_combination(ctx, static_cast<int>(w.size()), CombinationSource::pos, rng);
    }
}

}  // namespace crotad
