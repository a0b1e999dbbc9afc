#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>

#include "crotad/autodiff.hpp"
#include "crotad/rng.hpp"

namespace crotad {

/// Named parameter matrices with gradient buffers and Adam moments.
/// std::map keeps iteration order deterministic.
class ParamStore {
public:
    struct Entry {
        ad::Mat value;
        ad::Mat grad;
        ad::Mat m;
        ad::Mat v;
    };

    ad::Mat& add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
        auto [it, inserted] = entries_.try_emplace(name);
        if (!inserted) throw InvalidArgumentError("duplicate parameter: " + name);
        it->second.value = ad::Mat::Zero(rows, cols);
        it->second.grad = ad::Mat::Zero(rows, cols);
        it->second.m = ad::Mat::Zero(rows, cols);
        it->second.v = ad::Mat::Zero(rows, cols);
        return it->second.value;
    }

    ad::Mat& add_uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& rng,
                         double scale) {
        ad::Mat& m = add(name, rows, cols);
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = (rng.uniform() * 2.0 - 1.0) * scale;
        return m;
    }

    /// Glorot-style scale for a (fan_out x fan_in) matrix.
    ad::Mat& add_glorot(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
        return add_uniform(name, rows, cols, rng,
                           std::sqrt(6.0 / static_cast<double>(rows + cols)));
    }

    bool has(const std::string& name) const { return entries_.count(name) > 0; }

    ad::Mat& value(const std::string& name) { return at(name).value; }
    const ad::Mat& value(const std::string& name) const { return at(name).value; }
    ad::Mat& grad(const std::string& name) { return at(name).grad; }

    void zero_grads() {
        for (auto& [name, e] : entries_) e.grad.setZero();
    }

    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
        ++step_;
        const double bc1 = 1.0 - std::pow(beta1, step_);
        const double bc2 = 1.0 - std::pow(beta2, step_);
        for (auto& [name, e] : entries_) {
            e.m = beta1 * e.m + (1.0 - beta1) * e.grad;
            e.v = beta2 * e.v + (1.0 - beta2) * e.grad.cwiseProduct(e.grad);
            e.value.array() -=
                lr * (e.m.array() / bc1) / ((e.v.array() / bc2).sqrt() + eps);
        }
    }

    std::map<std::string, Entry>& entries() { return entries_; }
    const std::map<std::string, Entry>& entries() const { return entries_; }

    std::int64_t adam_steps() const { return step_; }

    /// Deep copy of values only (target-network snapshots).
    ParamStore snapshot_values() const {
        ParamStore out;
        for (const auto& [name, e] : entries_) {
            auto& ne = out.entries_[name];
            ne.value = e.value;
            ne.grad = ad::Mat::Zero(e.value.rows(), e.value.cols());
            ne.m = ne.grad;
            ne.v = ne.grad;
        }
        return out;
    }

private:
    Entry& at(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw InvalidArgumentError("unknown parameter: " + name);
        return it->second;
    }
    const Entry& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw InvalidArgumentError("unknown parameter: " + name);
        return it->second;
    }

    std::map<std::string, Entry> entries_;
    std::int64_t step_ = 0;
};

/// One forward pass worth of tape state. Parameters bind lazily as leaves
/// so repeated uses share one node and gradients accumulate; flush_grads()
/// moves tape gradients into the store after backward().
struct Ctx {
    ad::Tape& tape;
    ParamStore& store;
    bool train = true;

    ad::Var p(const std::string& name) {
        auto it = bound_.find(name);
        if (it != bound_.end()) return ad::Var{&tape, it->second};
        ad::Var v = ad::leaf(tape, store.value(name), train);
        bound_.emplace(name, v.i);
        return v;
    }

    ad::Var constant(ad::Mat m) { return ad::leaf(tape, std::move(m), false); }

    void flush_grads() {
        for (const auto& [name, idx] : bound_)
            if (tape.grad_touched(idx)) store.grad(name) += tape.grad(idx);
    }

private:
    std::unordered_map<std::string, int> bound_;
};

// ---------------------------------------------------------------------------
// Parameter blob serialization (shared by checkpoints)
// ---------------------------------------------------------------------------

inline void write_param_blobs(std::ostream& out, const ParamStore& store) {
    const std::int64_t count = static_cast<std::int64_t>(store.entries().size());
    out.write(reinterpret_cast<const char*>(&count), 8);
    for (const auto& [name, e] : store.entries()) {
        const std::int32_t name_len = static_cast<std::int32_t>(name.size());
        out.write(reinterpret_cast<const char*>(&name_len), 4);
        out.write(name.data(), name_len);
        const std::int64_t rows = e.value.rows(), cols = e.value.cols();
        out.write(reinterpret_cast<const char*>(&rows), 8);
        out.write(reinterpret_cast<const char*>(&cols), 8);
        out.write(reinterpret_cast<const char*>(e.value.data()),
                  static_cast<std::streamsize>(sizeof(double)) * rows * cols);
    }
}

inline ParamStore read_param_blobs(std::istream& in) {
    ParamStore store;
    std::int64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 8);
    if (!in || count < 0) throw IoError("bad parameter blob count");
    for (std::int64_t i = 0; i < count; ++i) {
        std::int32_t name_len = 0;
        in.read(reinterpret_cast<char*>(&name_len), 4);
        if (!in || name_len <= 0 || name_len > 4096) throw IoError("bad parameter name length");
        std::string name(static_cast<std::size_t>(name_len), '\0');
        in.read(name.data(), name_len);
        std::int64_t rows = 0, cols = 0;
        in.read(reinterpret_cast<char*>(&rows), 8);
        in.read(reinterpret_cast<char*>(&cols), 8);
        if (!in || rows <= 0 || cols <= 0) throw IoError("bad parameter shape");
        ad::Mat& m = store.add(name, rows, cols);
        in.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double)) * rows * cols);
        if (!in) throw IoError("truncated parameter blob");
    }
    return store;
}

}  // namespace crotad
