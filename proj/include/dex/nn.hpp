#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dex/rng.hpp"

namespace dex::nn {

struct Slice {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const { return rows * cols; }
};

/// All trainable values of a model in one flat vector, addressed by named row-major slices.
/// A flat layout makes SGD, finite-difference checks and checkpoints uniform.
class Parameters {
public:
    std::size_t add(std::string name, std::size_t rows, std::size_t cols) {
        layout_.push_back({std::move(name), values.size(), rows, cols});
        values.resize(values.size() + rows * cols, 0.0);
        return layout_.size() - 1;
    }

    double* ptr(std::size_t slice) { return values.data() + layout_[slice].offset; }
    const double* ptr(std::size_t slice) const { return values.data() + layout_[slice].offset; }
    std::span<double> view(std::size_t slice) { return {ptr(slice), layout_[slice].size()}; }
    std::span<const double> view(std::size_t slice) const { return {ptr(slice), layout_[slice].size()}; }
    const Slice& slice(std::size_t i) const { return layout_[i]; }
    const std::vector<Slice>& layout() const { return layout_; }
    std::size_t size() const { return values.size(); }

    bool all_finite() const {
        for (double v : values) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    nlohmann::json to_json() const {
        nlohmann::json slices = nlohmann::json::array();
        for (const auto& s : layout_) slices.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}});
        return {{"layout", slices}, {"values", values}};
    }

    /// Loads values into an identically laid-out parameter set.
    void load_json(const nlohmann::json& j) {
        const auto& slices = j.at("layout");
        if (slices.size() != layout_.size()) throw std::runtime_error("checkpoint layout mismatch");
        for (std::size_t i = 0; i < layout_.size(); ++i) {
            if (slices[i].at("name") != layout_[i].name || slices[i].at("rows") != layout_[i].rows ||
                slices[i].at("cols") != layout_[i].cols) {
                throw std::runtime_error("checkpoint layout mismatch at " + layout_[i].name);
            }
        }
        auto v = j.at("values").get<std::vector<double>>();
        if (v.size() != values.size()) throw std::runtime_error("checkpoint value count mismatch");
        values = std::move(v);
    }

    std::vector<double> values;

private:
    std::vector<Slice> layout_;
};

inline void fill_normal(std::span<double> out, Rng& rng, double stddev) {
    for (double& v : out) v = rng.normal() * stddev;
}

/// y = W x (+ b)
inline void matvec(const double* w, std::size_t rows, std::size_t cols, const double* x, const double* b, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = w + r * cols;
        double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
        std::size_t c = 0;
        for (; c + 4 <= cols; c += 4) {
            a0 += row[c] * x[c];
            a1 += row[c + 1] * x[c + 1];
            a2 += row[c + 2] * x[c + 2];
            a3 += row[c + 3] * x[c + 3];
        }
        for (; c < cols; ++c) a0 += row[c] * x[c];
        y[r] = (b ? b[r] : 0.0) + ((a0 + a1) + (a2 + a3));
    }
}

/// dx += W^T dy
inline void matvec_t_acc(const double* w, std::size_t rows, std::size_t cols, const double* dy, double* dx) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double g = dy[r];
        if (g == 0.0) continue;
        const double* row = w + r * cols;
        for (std::size_t c = 0; c < cols; ++c) dx[c] += row[c] * g;
    }
}

/// dW += dy x^T
inline void outer_acc(double* dw, std::size_t rows, std::size_t cols, const double* dy, const double* x) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double g = dy[r];
        if (g == 0.0) continue;
        double* row = dw + r * cols;
        for (std::size_t c = 0; c < cols; ++c) row[c] += g * x[c];
    }
}

inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(sigmoid(z)) without overflow.
inline double log_sigmoid(double z) {
    return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

/// Scales `grad` so its L2 norm is at most `max_norm`; returns the norm before clipping.
inline double clip_norm(std::vector<double>& grad, double max_norm) {
    double sq = 0;
    for (double g : grad) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (double& g : grad) g *= s;
    }
    return norm;
}

} // namespace dex::nn
