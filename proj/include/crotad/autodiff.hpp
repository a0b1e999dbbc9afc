#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "crotad/types.hpp"

namespace crotad::ad {

using Mat = Eigen::MatrixXd;

/// Reverse-mode tape over dense matrices. Nodes are created in topological
/// order; backward walks the tape once in reverse. Granularity is whole
/// matrices, so closure overhead is negligible next to the matmuls.
class Tape {
public:
    struct Node {
        Mat val;
        Mat grad;  // empty until touched
        std::function<void(Tape&)> back;
        bool requires_grad = false;
    };

    int add_leaf(Mat v, bool requires_grad) {
        nodes_.push_back(Node{std::move(v), {}, nullptr, requires_grad});
        return static_cast<int>(nodes_.size()) - 1;
    }

    int add_node(Mat v, bool requires_grad, std::function<void(Tape&)> back) {
        nodes_.push_back(Node{std::move(v), {}, requires_grad ? std::move(back) : nullptr,
                              requires_grad});
        return static_cast<int>(nodes_.size()) - 1;
    }

    const Mat& val(int i) const { return nodes_[static_cast<std::size_t>(i)].val; }

    Mat& grad(int i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad.size() == 0) n.grad = Mat::Zero(n.val.rows(), n.val.cols());
        return n.grad;
    }

    bool grad_touched(int i) const { return nodes_[static_cast<std::size_t>(i)].grad.size() != 0; }

    bool requires_grad(int i) const { return nodes_[static_cast<std::size_t>(i)].requires_grad; }

    /// Seed d(loss)/d(loss) = 1 and propagate. `loss` must be 1x1.
    void backward(int loss) {
        if (val(loss).rows() != 1 || val(loss).cols() != 1)
            throw InvalidArgumentError("backward requires a scalar loss node");
        grad(loss)(0, 0) = 1.0;
        for (int i = loss; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.back && n.grad.size() != 0) n.back(*this);
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;
};

struct Var {
    Tape* tape = nullptr;
    int i = -1;

    const Mat& val() const { return tape->val(i); }
    Eigen::Index rows() const { return val().rows(); }
    Eigen::Index cols() const { return val().cols(); }
    bool valid() const { return tape != nullptr && i >= 0; }
};

inline Var constant(Tape& t, Mat v) { return Var{&t, t.add_leaf(std::move(v), false)}; }

inline Var leaf(Tape& t, Mat v, bool requires_grad) {
    return Var{&t, t.add_leaf(std::move(v), requires_grad)};
}

namespace detail {
inline void check_same_tape(const Var& a, const Var& b) {
    if (a.tape != b.tape) throw InvalidArgumentError("vars from different tapes");
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Arithmetic
// ---------------------------------------------------------------------------

inline Var add(Var a, Var b) {
    detail::check_same_tape(a, b);
    Tape& t = *a.tape;
    const bool rg = t.requires_grad(a.i) || t.requires_grad(b.i);
    int idx = t.add_node(a.val() + b.val(), rg, [ai = a.i, bi = b.i, self = (int)t.size()](Tape& tp) {
        const Mat& g = tp.grad(self);
        if (tp.requires_grad(ai)) tp.grad(ai) += g;
        if (tp.requires_grad(bi)) tp.grad(bi) += g;
    });
    return Var{&t, idx};
}

inline Var sub(Var a, Var b) {
    detail::check_same_tape(a, b);
    Tape& t = *a.tape;
    const bool rg = t.requires_grad(a.i) || t.requires_grad(b.i);
    int idx = t.add_node(a.val() - b.val(), rg, [ai = a.i, bi = b.i, self = (int)t.size()](Tape& tp) {
        const Mat& g = tp.grad(self);
        if (tp.requires_grad(ai)) tp.grad(ai) += g;
        if (tp.requires_grad(bi)) tp.grad(bi) -= g;
    });
    return Var{&t, idx};
}

inline Var scale(Var a, double s) {
    Tape& t = *a.tape;
    int idx = t.add_node(a.val() * s, t.requires_grad(a.i),
                         [ai = a.i, s, self = (int)t.size()](Tape& tp) {
                             tp.grad(ai) += tp.grad(self) * s;
                         });
    return Var{&t, idx};
}

inline Var add_scalar(Var a, double s) {
    Tape& t = *a.tape;
    int idx = t.add_node(a.val().array() + s, t.requires_grad(a.i),
                         [ai = a.i, self = (int)t.size()](Tape& tp) {
                             tp.grad(ai) += tp.grad(self);
                         });
    return Var{&t, idx};
}

inline Var matmul(Var a, Var b) {
    detail::check_same_tape(a, b);
    Tape& t = *a.tape;
    if (a.cols() != b.rows()) throw InvalidArgumentError("matmul shape mismatch");
    const bool rg = t.requires_grad(a.i) || t.requires_grad(b.i);
    int idx = t.add_node(a.val() * b.val(), rg, [ai = a.i, bi = b.i, self = (int)t.size()](Tape& tp) {
        const Mat& g = tp.grad(self);
        if (tp.requires_grad(ai)) tp.grad(ai).noalias() += g * tp.val(bi).transpose();
        if (tp.requires_grad(bi)) tp.grad(bi).noalias() += tp.val(ai).transpose() * g;
    });
    return Var{&t, idx};
}

inline Var transpose(Var a) {
    Tape& t = *a.tape;
    int idx = t.add_node(a.val().transpose(), t.requires_grad(a.i),
                         [ai = a.i, self = (int)t.size()](Tape& tp) {
                             tp.grad(ai) += tp.grad(self).transpose();
                         });
    return Var{&t, idx};
}

inline Var cwise_mul(Var a, Var b) {
    detail::check_same_tape(a, b);
    Tape& t = *a.tape;
    const bool rg = t.requires_grad(a.i) || t.requires_grad(b.i);
    int idx = t.add_node(a.val().cwiseProduct(b.val()), rg,
                         [ai = a.i, bi = b.i, self = (int)t.size()](Tape& tp) {
                             const Mat& g = tp.grad(self);
                             if (tp.requires_grad(ai)) tp.grad(ai) += g.cwiseProduct(tp.val(bi));
                             if (tp.requires_grad(bi)) tp.grad(bi) += g.cwiseProduct(tp.val(ai));
                         });
    return Var{&t, idx};
}

inline Var one_minus(Var a) {
    Tape& t = *a.tape;
    int idx = t.add_node((1.0 - a.val().array()).matrix(), t.requires_grad(a.i),
                         [ai = a.i, self = (int)t.size()](Tape& tp) {
                             tp.grad(ai) -= tp.grad(self);
                         });
    return Var{&t, idx};
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

inline Var sigmoid(Var a) {
    Tape& t = *a.tape;
    Mat y = (1.0 / (1.0 + (-a.val().array()).exp())).matrix();
    int idx = t.add_node(std::move(y), t.requires_grad(a.i),
                         [ai = a.i, self = (int)t.size()](Tape& tp) {
                             const Mat& yv = tp.val(self);
                             tp.grad(ai).array() +=
                                 tp.grad(self).array() * yv.array() * (1.0 - yv.array());
                         });
    return Var{&t, idx};
}

inline Var tanh_(Var a) {
    Tape& t = *a.tape;
    int idx = t.add_node(a.val().array().tanh().matrix(), t.requires_grad(a.i),
                         [ai = a.i, self = (int)t.size()](Tape& tp) {
                             const auto& yv = tp.val(self).array();
                             tp.grad(ai).array() += tp.grad(self).array() * (1.0 - yv * yv);
                         });
    return Var{&t, idx};
}

inline Var elu(Var a) {
    Tape& t = *a.tape;
    const auto& x = a.val().array();
    Mat y = (x > 0.0).select(x, x.exp() - 1.0).matrix();
    int idx = t.add_node(std::move(y), t.requires_grad(a.i),
                         [ai = a.i, self = (int)t.size()](Tape& tp) {
                             const auto& yv = tp.val(self).array();
                             // dy/dx = 1 for x>0 (y>0), else exp(x) = y + 1.
                             tp.grad(ai).array() +=
                                 tp.grad(self).array() * (yv > 0.0).select(
                                     Eigen::ArrayXXd::Ones(yv.rows(), yv.cols()), yv + 1.0);
                         });
    return Var{&t, idx};
}

inline Var leaky_relu(Var a, double slope) {
    Tape& t = *a.tape;
    const auto& x = a.val().array();
    Mat y = (x > 0.0).select(x, x * slope).matrix();
    int idx = t.add_node(std::move(y), t.requires_grad(a.i),
                         [ai = a.i, slope, self = (int)t.size()](Tape& tp) {
                             const auto& xv = tp.val(ai).array();
                             tp.grad(ai).array() +=
                                 tp.grad(self).array() *
                                 (xv > 0.0).select(Eigen::ArrayXXd::Ones(xv.rows(), xv.cols()),
                                                   Eigen::ArrayXXd::Constant(xv.rows(), xv.cols(), slope));
                         });
    return Var{&t, idx};
}

inline Var exp_(Var a) {
    Tape& t = *a.tape;
    int idx = t.add_node(a.val().array().exp().matrix(), t.requires_grad(a.i),
                         [ai = a.i, self = (int)t.size()](Tape& tp) {
                             tp.grad(ai).array() += tp.grad(self).array() * tp.val(self).array();
                         });
    return Var{&t, idx};
}

inline Var log_(Var a) {
    Tape& t = *a.tape;
    int idx = t.add_node(a.val().array().log().matrix(), t.requires_grad(a.i),
                         [ai = a.i, self = (int)t.size()](Tape& tp) {
                             tp.grad(ai).array() += tp.grad(self).array() / tp.val(ai).array();
                         });
    return Var{&t, idx};
}

// ---------------------------------------------------------------------------
// Shape and selection
// ---------------------------------------------------------------------------

inline Var hcat(Tape& t, const std::vector<Var>& parts) {
    if (parts.empty()) throw InvalidArgumentError("hcat of nothing");
    Eigen::Index rows = parts[0].rows(), cols = 0;
    bool rg = false;
    for (const Var& p : parts) {
        if (p.rows() != rows) throw InvalidArgumentError("hcat row mismatch");
        cols += p.cols();
        rg = rg || t.requires_grad(p.i);
    }
    Mat v(rows, cols);
    Eigen::Index off = 0;
    std::vector<std::pair<int, Eigen::Index>> spans;
    for (const Var& p : parts) {
        v.middleCols(off, p.cols()) = p.val();
        spans.push_back({p.i, p.cols()});
        off += p.cols();
    }
    int idx = t.add_node(std::move(v), rg, [spans, self = (int)t.size()](Tape& tp) {
        const Mat& g = tp.grad(self);
        Eigen::Index o = 0;
        for (const auto& [pi, n] : spans) {
            if (tp.requires_grad(pi)) tp.grad(pi) += g.middleCols(o, n);
            o += n;
        }
    });
    return Var{&t, idx};
}

inline Var vcat(Tape& t, const std::vector<Var>& parts) {
    if (parts.empty()) throw InvalidArgumentError("vcat of nothing");
    Eigen::Index cols = parts[0].cols(), rows = 0;
    bool rg = false;
    for (const Var& p : parts) {
        if (p.cols() != cols) throw InvalidArgumentError("vcat col mismatch");
        rows += p.rows();
        rg = rg || t.requires_grad(p.i);
    }
    Mat v(rows, cols);
    Eigen::Index off = 0;
    std::vector<std::pair<int, Eigen::Index>> spans;
    for (const Var& p : parts) {
        v.middleRows(off, p.rows()) = p.val();
        spans.push_back({p.i, p.rows()});
        off += p.rows();
    }
    int idx = t.add_node(std::move(v), rg, [spans, self = (int)t.size()](Tape& tp) {
        const Mat& g = tp.grad(self);
        Eigen::Index o = 0;
        for (const auto& [pi, n] : spans) {
            if (tp.requires_grad(pi)) tp.grad(pi) += g.middleRows(o, n);
            o += n;
        }
    });
    return Var{&t, idx};
}

inline Var gather_cols(Var a, std::vector<int> cols) {
    Tape& t = *a.tape;
    Mat v(a.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) v.col(static_cast<Eigen::Index>(j)) = a.val().col(cols[j]);
    int idx = t.add_node(std::move(v), t.requires_grad(a.i),
                         [ai = a.i, cols = std::move(cols), self = (int)t.size()](Tape& tp) {
                             const Mat& g = tp.grad(self);
                             Mat& ga = tp.grad(ai);
                             for (std::size_t j = 0; j < cols.size(); ++j)
                                 ga.col(cols[j]) += g.col(static_cast<Eigen::Index>(j));
                         });
    return Var{&t, idx};
}

inline Var rows(Var a, Eigen::Index r0, Eigen::Index n) {
    Tape& t = *a.tape;
    int idx = t.add_node(a.val().middleRows(r0, n), t.requires_grad(a.i),
                         [ai = a.i, r0, n, self = (int)t.size()](Tape& tp) {
                             tp.grad(ai).middleRows(r0, n) += tp.grad(self);
                         });
    return Var{&t, idx};
}

inline Var reshape(Var a, Eigen::Index r, Eigen::Index c) {
    Tape& t = *a.tape;
    if (a.rows() * a.cols() != r * c) throw InvalidArgumentError("reshape size mismatch");
    Mat v = a.val();
    v.resize(r, c);  // column-major relayout
    int idx = t.add_node(std::move(v), t.requires_grad(a.i),
                         [ai = a.i, self = (int)t.size()](Tape& tp) {
                             Mat g = tp.grad(self);
                             const Mat& av = tp.val(ai);
                             g.resize(av.rows(), av.cols());
                             tp.grad(ai) += g;
                         });
    return Var{&t, idx};
}

/// [A A ... A] (`times` copies).
inline Var tile_cols(Var a, int times) {
    Tape& t = *a.tape;
    const Eigen::Index n = a.cols();
    Mat v(a.rows(), n * times);
    for (int k = 0; k < times; ++k) v.middleCols(k * n, n) = a.val();
    int idx = t.add_node(std::move(v), t.requires_grad(a.i),
                         [ai = a.i, times, n, self = (int)t.size()](Tape& tp) {
                             const Mat& g = tp.grad(self);
                             Mat& ga = tp.grad(ai);
                             for (int k = 0; k < times; ++k) ga += g.middleCols(k * n, n);
                         });
    return Var{&t, idx};
}

/// [a0 a0 .. a0 a1 a1 .. a1 ...] (each column repeated `times`).
inline Var repeat_each_col(Var a, int times) {
    Tape& t = *a.tape;
    const Eigen::Index n = a.cols();
    Mat v(a.rows(), n * times);
    for (Eigen::Index j = 0; j < n; ++j)
        for (int k = 0; k < times; ++k) v.col(j * times + k) = a.val().col(j);
    int idx = t.add_node(std::move(v), t.requires_grad(a.i),
                         [ai = a.i, times, n, self = (int)t.size()](Tape& tp) {
                             const Mat& g = tp.grad(self);
                             Mat& ga = tp.grad(ai);
                             for (Eigen::Index j = 0; j < n; ++j)
                                 for (int k = 0; k < times; ++k) ga.col(j) += g.col(j * times + k);
                         });
    return Var{&t, idx};
}

// ---------------------------------------------------------------------------
// Reductions and broadcasts
// ---------------------------------------------------------------------------

inline Var sum_all(Var a) {
    Tape& t = *a.tape;
    Mat v(1, 1);
    v(0, 0) = a.val().sum();
    int idx = t.add_node(std::move(v), t.requires_grad(a.i),
                         [ai = a.i, self = (int)t.size()](Tape& tp) {
                             tp.grad(ai).array() += tp.grad(self)(0, 0);
                         });
    return Var{&t, idx};
}

inline Var mean_all(Var a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.rows() * a.cols())); }

/// Column sums: (r x c) -> (1 x c).
inline Var sum_rows(Var a) {
    Tape& t = *a.tape;
    int idx = t.add_node(a.val().colwise().sum(), t.requires_grad(a.i),
                         [ai = a.i, self = (int)t.size()](Tape& tp) {
                             const Mat& g = tp.grad(self);
                             tp.grad(ai).array().rowwise() += g.row(0).array();
                         });
    return Var{&t, idx};
}

/// Row sums: (r x c) -> (r x 1).
inline Var sum_cols(Var a) {
    Tape& t = *a.tape;
    int idx = t.add_node(a.val().rowwise().sum(), t.requires_grad(a.i),
                         [ai = a.i, self = (int)t.size()](Tape& tp) {
                             const Mat& g = tp.grad(self);
                             tp.grad(ai).array().colwise() += g.col(0).array();
                         });
    return Var{&t, idx};
}

/// M (r x c) + b (r x 1) broadcast over columns.
inline Var add_colvec(Var a, Var b) {
    detail::check_same_tape(a, b);
    Tape& t = *a.tape;
    if (b.cols() != 1 || a.rows() != b.rows()) throw InvalidArgumentError("add_colvec shape");
    const bool rg = t.requires_grad(a.i) || t.requires_grad(b.i);
    int idx = t.add_node((a.val().array().colwise() + b.val().col(0).array()).matrix(), rg,
                         [ai = a.i, bi = b.i, self = (int)t.size()](Tape& tp) {
                             const Mat& g = tp.grad(self);
                             if (tp.requires_grad(ai)) tp.grad(ai) += g;
                             if (tp.requires_grad(bi)) tp.grad(bi).col(0) += g.rowwise().sum();
                         });
    return Var{&t, idx};
}

/// M (r x c) * w (1 x c) broadcast over rows.
inline Var mul_rowvec(Var a, Var b) {
    detail::check_same_tape(a, b);
    Tape& t = *a.tape;
    if (b.rows() != 1 || a.cols() != b.cols()) throw InvalidArgumentError("mul_rowvec shape");
    const bool rg = t.requires_grad(a.i) || t.requires_grad(b.i);
    int idx = t.add_node((a.val().array().rowwise() * b.val().row(0).array()).matrix(), rg,
                         [ai = a.i, bi = b.i, self = (int)t.size()](Tape& tp) {
                             const Mat& g = tp.grad(self);
                             if (tp.requires_grad(ai))
                                 tp.grad(ai).array() += g.array().rowwise() * tp.val(bi).row(0).array();
                             if (tp.requires_grad(bi))
                                 tp.grad(bi).row(0).array() +=
                                     (g.array() * tp.val(ai).array()).colwise().sum();
                         });
    return Var{&t, idx};
}

/// Per-column dot products: (d x B, d x B) -> (1 x B).
inline Var dot_cols(Var a, Var b) {
    detail::check_same_tape(a, b);
    Tape& t = *a.tape;
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidArgumentError("dot_cols shape");
    Mat v = (a.val().array() * b.val().array()).colwise().sum().matrix();
    const bool rg = t.requires_grad(a.i) || t.requires_grad(b.i);
    int idx = t.add_node(std::move(v), rg, [ai = a.i, bi = b.i, self = (int)t.size()](Tape& tp) {
        const Mat& g = tp.grad(self);
        if (tp.requires_grad(ai))
            tp.grad(ai).array() += tp.val(bi).array().rowwise() * g.row(0).array();
        if (tp.requires_grad(bi))
            tp.grad(bi).array() += tp.val(ai).array().rowwise() * g.row(0).array();
    });
    return Var{&t, idx};
}

// ---------------------------------------------------------------------------
// Softmax family
// ---------------------------------------------------------------------------

inline Var softmax_cols(Var a) {
    Tape& t = *a.tape;
    Mat v = a.val();
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        auto col = v.col(j).array();
        col -= col.maxCoeff();
        col = col.exp();
        col /= col.sum();
    }
    int idx = t.add_node(std::move(v), t.requires_grad(a.i),
                         [ai = a.i, self = (int)t.size()](Tape& tp) {
                             const Mat& y = tp.val(self);
                             const Mat& g = tp.grad(self);
                             Mat gy = g.cwiseProduct(y);
                             Eigen::RowVectorXd dots = gy.colwise().sum();
                             tp.grad(ai) += gy - (y.array().rowwise() * dots.array()).matrix();
                         });
    return Var{&t, idx};
}

/// Stable log-sum-exp over each column: (r x c) -> (1 x c).
inline Var logsumexp_cols(Var a) {
    Tape& t = *a.tape;
    Mat v(1, a.cols());
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const auto col = a.val().col(j).array();
        const double m = col.maxCoeff();
        v(0, j) = m + std::log((col - m).exp().sum());
    }
    int idx = t.add_node(std::move(v), t.requires_grad(a.i),
                         [ai = a.i, self = (int)t.size()](Tape& tp) {
                             const Mat& x = tp.val(ai);
                             const Mat& lse = tp.val(self);
                             const Mat& g = tp.grad(self);
                             tp.grad(ai).array() +=
                                 (x.array().rowwise() - lse.row(0).array()).exp().rowwise() *
                                 g.row(0).array();
                         });
    return Var{&t, idx};
}

/// Fused per-column softmax cross-entropy against integer targets:
/// (V x B) logits -> (1 x B) losses.
inline Var softmax_xent_cols(Var logits, std::vector<int> targets) {
    Tape& t = *logits.tape;
    if (static_cast<Eigen::Index>(targets.size()) != logits.cols())
        throw InvalidArgumentError("one target per column required");
    Mat losses(1, logits.cols());
    Mat probs = logits.val();
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
        auto col = probs.col(j).array();
        const double m = col.maxCoeff();
        col -= m;
        col = col.exp();
        const double z = col.sum();
        col /= z;
        losses(0, j) = -std::log(std::max(col(targets[static_cast<std::size_t>(j)]), 1e-300));
    }
    int idx = t.add_node(std::move(losses), t.requires_grad(logits.i),
                         [li = logits.i, targets = std::move(targets), probs = std::move(probs),
                          self = (int)t.size()](Tape& tp) {
                             const Mat& g = tp.grad(self);
                             Mat& gl = tp.grad(li);
                             for (Eigen::Index j = 0; j < probs.cols(); ++j) {
                                 gl.col(j) += probs.col(j) * g(0, j);
                                 gl(targets[static_cast<std::size_t>(j)], j) -= g(0, j);
                             }
                         });
    return Var{&t, idx};
}

/// Normalize each column to unit L2 norm (guarded at 1e-12).
inline Var l2_normalize_cols(Var a) {
    Tape& t = *a.tape;
    Mat v = a.val();
    Eigen::RowVectorXd norms(a.cols());
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        norms(j) = std::max(v.col(j).norm(), 1e-12);
        v.col(j) /= norms(j);
    }
    int idx = t.add_node(std::move(v), t.requires_grad(a.i),
                         [ai = a.i, norms = std::move(norms), self = (int)t.size()](Tape& tp) {
                             const Mat& y = tp.val(self);
                             const Mat& g = tp.grad(self);
                             Mat& ga = tp.grad(ai);
                             for (Eigen::Index j = 0; j < y.cols(); ++j) {
                                 const double dot = y.col(j).dot(g.col(j));
                                 ga.col(j) += (g.col(j) - y.col(j) * dot) / norms(j);
                             }
                         });
    return Var{&t, idx};
}

// ---------------------------------------------------------------------------
// Finite-difference checking support
// ---------------------------------------------------------------------------

/// Central-difference derivative of `f` w.r.t. one coordinate of `x`.
inline double central_difference(const std::function<double()>& f, double& x, double h) {
    const double saved = x;
    x = saved + h;
    const double up = f();
    x = saved - h;
    const double down = f();
    x = saved;
    return (up - down) / (2.0 * h);
}

}  // namespace crotad::ad
