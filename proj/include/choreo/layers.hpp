#pragma once
#ifndef CHOREO_LAYERS_HPP
#define CHOREO_LAYERS_HPP

#include <cmath>
#include <functional>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "choreo/core.hpp"

namespace choreo {

// Callback used to walk every parameter tensor of a module tree.
// Frozen tensors (trainable == false) are serialized but never perturbed by the trainer.
using ParamVisitor = std::function<void(const std::string& name, Matrix& tensor, bool trainable)>;

inline std::string join_name(std::string_view prefix, std::string_view leaf)
{
    if (prefix.empty()) return std::string(leaf);
    std::string out(prefix);
    out += '.';
    out += leaf;
    return out;
}

// Weights are drawn in double and rounded to binary32 so a saved model reloads exactly.
inline double round_f32(double v) noexcept { return static_cast<double>(static_cast<float>(v)); }

inline void init_uniform(Matrix& m, double bound, Rng& rng)
{
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : m.flat()) v = round_f32(dist(rng));
}

// y = x W + b with W stored input-major (in x out).
class Linear {
public:
    Linear() = default;
    Linear(std::size_t in, std::size_t out, bool bias = true)
        : weight_(in, out), bias_(1, out), has_bias_(bias) {}

    void init(Rng& rng, double gain = 1.0)
    {
        const double bound = gain / std::sqrt(static_cast<double>(weight_.rows()));
        init_uniform(weight_, bound, rng);
        if (has_bias_) init_uniform(bias_, bound, rng);
    }

    std::size_t in_dim() const noexcept { return weight_.rows(); }
    std::size_t out_dim() const noexcept { return weight_.cols(); }

    Matrix& weight() noexcept { return weight_; }
    const Matrix& weight() const noexcept { return weight_; }
    Matrix& bias() noexcept { return bias_; }
    const Matrix& bias() const noexcept { return bias_; }

    Matrix forward(const Matrix& x) const
    {
        if (x.cols() != in_dim())
            throw ValidationError("linear input width " + std::to_string(x.cols()) + " != " + std::to_string(in_dim()));
        using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        const std::size_t out = out_dim();
        Matrix y(x.rows(), out);
        if (x.rows() == 0) return y;
        Eigen::Map<const RowMajor> xm(x.flat().data(), static_cast<Eigen::Index>(x.rows()), static_cast<Eigen::Index>(in_dim()));
        Eigen::Map<const RowMajor> wm(weight_.flat().data(), static_cast<Eigen::Index>(in_dim()), static_cast<Eigen::Index>(out));
        Eigen::Map<RowMajor> ym(y.flat().data(), static_cast<Eigen::Index>(x.rows()), static_cast<Eigen::Index>(out));
        ym.noalias() = xm * wm;
        if (has_bias_) {
            Eigen::Map<const Eigen::RowVectorXd> bm(bias_.flat().data(), static_cast<Eigen::Index>(out));
            ym.rowwise() += bm;
        }
        return y;
    }

    void visit(std::string_view prefix, const ParamVisitor& f)
    {
        f(join_name(prefix, "weight"), weight_, true);
        if (has_bias_) f(join_name(prefix, "bias"), bias_, true);
    }

private:
    Matrix weight_;
    Matrix bias_;
    bool has_bias_ = true;
};

inline constexpr double kNormEps = 1e-5;

// Per-row layer normalization with a learned scale.
class LayerNorm {
public:
    LayerNorm() = default;
    explicit LayerNorm(std::size_t width) : scale_(1, width, 1.0) {}

    Matrix forward(const Matrix& x) const
    {
        require(x.cols() == scale_.cols(), "layer norm width mismatch");
        Matrix y(x.rows(), x.cols());
        const double n = static_cast<double>(x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r) {
            auto xr = x.row(r);
            double mean = 0.0;
            for (double v : xr) mean += v;
            mean /= n;
            double var = 0.0;
            for (double v : xr) var += (v - mean) * (v - mean);
            var /= n;
            const double inv = 1.0 / std::sqrt(var + kNormEps);
            for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) = (xr[c] - mean) * inv * scale_(0, c);
        }
        return y;
    }

    void visit(std::string_view prefix, const ParamVisitor& f) { f(join_name(prefix, "scale"), scale_, true); }

private:
    Matrix scale_;
};

// Per-frame group normalization over contiguous channel groups, no affine.
inline Matrix group_norm(const Matrix& x, std::size_t groups, double eps = kNormEps)
{
    require(groups >= 1 && x.cols() % groups == 0, "channel count must be divisible by the group count");
    const std::size_t gsize = x.cols() / groups;
    Matrix y(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (std::size_t g = 0; g < groups; ++g) {
            const std::size_t c0 = g * gsize;
            double mean = 0.0;
            for (std::size_t c = c0; c < c0 + gsize; ++c) mean += x(r, c);
            mean /= static_cast<double>(gsize);
            double var = 0.0;
            for (std::size_t c = c0; c < c0 + gsize; ++c) var += (x(r, c) - mean) * (x(r, c) - mean);
            var /= static_cast<double>(gsize);
            const double inv = 1.0 / std::sqrt(var + eps);
            for (std::size_t c = c0; c < c0 + gsize; ++c) y(r, c) = (x(r, c) - mean) * inv;
        }
    }
    return y;
}

inline Matrix apply_silu(Matrix x)
{
    for (double& v : x.flat()) v = silu(v);
    return x;
}

} // namespace choreo

#endif // CHOREO_LAYERS_HPP
