#pragma once
#ifndef CHOREO_SSM_HPP
#define CHOREO_SSM_HPP

#include <cmath>
#include <string_view>
#include <utility>
#include <vector>

#include "choreo/core.hpp"
#include "choreo/layers.hpp"

namespace choreo {

inline constexpr std::size_t kDefaultStateDim = 16;
inline constexpr double kZohSmallLimit = 1e-6;

struct Discretized {
    double a_diag;
    double b_in;
};

// Zero-order hold for one diagonal state entry. Falls back to b_in = delta * b_cont
// when |delta * a_cont| is tiny.
inline Discretized discretize_zoh(double a_cont, double b_cont, double delta)
{
    if (!std::isfinite(a_cont) || !std::isfinite(b_cont) || !std::isfinite(delta))
        throw ValidationError("discretize_zoh: non-finite input");
    if (!(delta > 0.0)) throw ValidationError("discretize_zoh: step size must be positive");
    const double x = delta * a_cont;
    const double a_diag = std::exp(x);
    const double b_in = std::abs(x) < kZohSmallLimit ? delta * b_cont : (std::expm1(x) / a_cont) * b_cont;
    return {a_diag, b_in};
}

// Discrete linear time-invariant SSM with diagonal state matrix, single input/output.
struct SsmParams {
    std::vector<double> a_diag;
    std::vector<double> b_in;
    std::vector<double> c_out;
    double delta = 1.0;

    std::size_t state_dim() const noexcept { return a_diag.size(); }

    void validate() const
    {
        require(!a_diag.empty(), "ssm params need a non-empty state");
        require(b_in.size() == a_diag.size() && c_out.size() == a_diag.size(), "ssm params: inconsistent state sizes");
        require(delta > 0.0, "ssm params: delta must be positive");
    }

    static SsmParams from_continuous(std::span<const double> a_cont, std::span<const double> b_cont,
                                     std::span<const double> c, double delta)
    {
        require(a_cont.size() == b_cont.size() && c.size() == a_cont.size(), "continuous ssm: size mismatch");
        SsmParams p;
        p.delta = delta;
        p.c_out.assign(c.begin(), c.end());
        for (std::size_t i = 0; i < a_cont.size(); ++i) {
            const auto d = discretize_zoh(a_cont[i], b_cont[i], delta);
            p.a_diag.push_back(d.a_diag);
            p.b_in.push_back(d.b_in);
        }
        return p;
    }
};

struct SsmKernel {
    std::vector<double> taps;
};

// h_t = A h_{t-1} + B x_t, y_t = C^T h_t, h_{-1} = 0.
inline std::vector<double> ssm_scan(const SsmParams& p, std::span<const double> x)
{
    p.validate();
    const std::size_t n = p.state_dim();
    std::vector<double> h(n, 0.0);
    std::vector<double> y(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            h[i] = p.a_diag[i] * h[i] + p.b_in[i] * x[t];
            acc += p.c_out[i] * h[i];
        }
        y[t] = acc;
    }
    return y;
}

// taps[j] = C^T A^j B.
inline SsmKernel ssm_kernel(const SsmParams& p, std::size_t length)
{
    p.validate();
    require(length >= 1, "ssm kernel length must be at least 1");
    SsmKernel k;
    k.taps.resize(length);
    std::vector<double> power(p.b_in);
    for (std::size_t j = 0; j < length; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < p.state_dim(); ++i) acc += p.c_out[i] * power[i];
        k.taps[j] = acc;
        for (std::size_t i = 0; i < p.state_dim(); ++i) power[i] *= p.a_diag[i];
    }
    return k;
}

// Causal convolution y_t = sum_{j<=t} taps[j] x_{t-j}.
inline std::vector<double> ssm_conv(std::span<const double> x, const SsmKernel& kernel)
{
    if (kernel.taps.size() != x.size())
        throw ValidationError("ssm_conv: kernel length " + std::to_string(kernel.taps.size()) +
                              " != input length " + std::to_string(x.size()));
    std::vector<double> y(x.size(), 0.0);
    for (std::size_t t = 0; t < x.size(); ++t) {
        double acc = 0.0;
        for (std::size_t j = 0; j <= t; ++j) acc += kernel.taps[j] * x[t - j];
        y[t] = acc;
    }
    return y;
}

// Input-dependent (selective) SSM over `width` channels sharing an N-dim state layout.
// Each channel has one continuous decay a_cont[d] < 0 shared across its states:
//   delta_t = softplus(up(down(x_t))),  B_t = proj_b(x_t),  C_t = proj_c(x_t)
//   h_t[d] = exp(delta_t[d] a_cont[d]) h_{t-1}[d] + delta_t[d] B_t x_t[d]
//   y_t[d] = C_t . h_t[d]
class SelectiveParams {
public:
    SelectiveParams() = default;
    SelectiveParams(std::size_t width, std::size_t state_dim, std::size_t dt_rank = 0)
        : a_cont_(1, width, -1.0),
          dt_down_(width, dt_rank ? dt_rank : std::max<std::size_t>(1, (width + 15) / 16), false),
          dt_up_(dt_down_.out_dim(), width),
          proj_b_(width, state_dim),
          proj_c_(width, state_dim) {}

    std::size_t width() const noexcept { return a_cont_.cols(); }
    std::size_t state_dim() const noexcept { return proj_b_.out_dim(); }

    void init(Rng& rng)
    {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (double& a : a_cont_.flat()) a = round_f32(-std::exp(std::log(16.0) * unit(rng)));
        dt_down_.init(rng);
        dt_up_.init(rng, 0.1);
        // Bias so softplus(bias) is log-uniform in [1e-3, 1e-1].
        for (double& b : dt_up_.bias().flat()) {
            const double dt = std::exp(std::log(1e-3) + (std::log(1e-1) - std::log(1e-3)) * unit(rng));
            b = round_f32(dt + std::log(-std::expm1(-dt)));
        }
        proj_b_.init(rng);
        proj_c_.init(rng);
    }

    Matrix& a_cont() noexcept { return a_cont_; }
    const Matrix& a_cont() const noexcept { return a_cont_; }
    Linear& dt_down() noexcept { return dt_down_; }
    Linear& dt_up() noexcept { return dt_up_; }
    Linear& proj_b() noexcept { return proj_b_; }
    Linear& proj_c() noexcept { return proj_c_; }
    const Linear& dt_down() const noexcept { return dt_down_; }
    const Linear& dt_up() const noexcept { return dt_up_; }
    const Linear& proj_b() const noexcept { return proj_b_; }
    const Linear& proj_c() const noexcept { return proj_c_; }

    Matrix step_sizes(const Matrix& x) const
    {
        Matrix dt = dt_up_.forward(dt_down_.forward(x));
        for (double& v : dt.flat()) v = softplus(v);
        return dt;
    }

    void visit(std::string_view prefix, const ParamVisitor& f)
    {
        f(join_name(prefix, "a_cont"), a_cont_, false);
        dt_down_.visit(join_name(prefix, "dt_down"), f);
        dt_up_.visit(join_name(prefix, "dt_up"), f);
        proj_b_.visit(join_name(prefix, "proj_b"), f);
        proj_c_.visit(join_name(prefix, "proj_c"), f);
    }

private:
    Matrix a_cont_;
    Linear dt_down_;
    Linear dt_up_;
    Linear proj_b_;
    Linear proj_c_;
};

// Per-step projections recorded by selective_scan for instrumented comparisons.
struct SelectiveTrace {
    Matrix delta;
    Matrix b;
    Matrix c;
};

inline Matrix selective_scan(const SelectiveParams& p, const Matrix& x, SelectiveTrace* trace = nullptr)
{
    if (x.cols() != p.width())
        throw ValidationError("selective_scan: input width " + std::to_string(x.cols()) + " != " +
                              std::to_string(p.width()));
    const std::size_t len = x.rows();
    const std::size_t width = p.width();
    const std::size_t ns = p.state_dim();

    Matrix dt = p.step_sizes(x);
    Matrix bm = p.proj_b().forward(x);
    Matrix cm = p.proj_c().forward(x);
    if (!dt.all_finite() || !bm.all_finite() || !cm.all_finite())
        throw NumericError("selective_scan: non-finite step size or projections");

    const double* a = p.a_cont().flat().data();
    std::vector<double> h(width * ns, 0.0);
    Matrix y(len, width);
    for (std::size_t t = 0; t < len; ++t) {
        const double* dtr = dt.row(t).data();
        const double* br = bm.row(t).data();
        const double* cr = cm.row(t).data();
        const double* xr = x.row(t).data();
        double* yr = y.row(t).data();
        for (std::size_t d = 0; d < width; ++d) {
            const double decay = std::exp(dtr[d] * a[d]);
            const double drive = dtr[d] * xr[d];
            double* hd = h.data() + d * ns;
            double acc = 0.0;
            for (std::size_t n = 0; n < ns; ++n) {
                hd[n] = decay * hd[n] + drive * br[n];
                acc += cr[n] * hd[n];
            }
            yr[d] = acc;
        }
    }
    if (trace) *trace = SelectiveTrace{std::move(dt), std::move(bm), std::move(cm)};
    return y;
}

struct TemporalBlockOptions {
    bool pre_norm = true;
    // Gated blocks apply SiLU to the scan input and multiply the scan output by SiLU(gate).
    bool gated = true;
    std::size_t expand = 1;
    std::size_t state_dim = kDefaultStateDim;
};

// Activations around the scan, recorded on request.
struct TemporalTrace {
    Matrix scan_input;
    Matrix scan_output;
};

// Mamba-style block along the length axis:
//   x + out_proj(gate * selective_scan(act(in_proj(norm(x)))))
class TemporalSsmBlock {
public:
    TemporalSsmBlock() = default;
    TemporalSsmBlock(std::size_t width, TemporalBlockOptions opts = {})
        : opts_(opts),
          norm_(width),
          in_proj_(width, width * opts.expand * (opts.gated ? 2 : 1)),
          scan_(width * opts.expand, opts.state_dim),
          out_proj_(width * opts.expand, width) {}

    void init(Rng& rng)
    {
        in_proj_.init(rng);
        scan_.init(rng);
        out_proj_.init(rng, 0.5);
    }

    std::size_t width() const noexcept { return out_proj_.out_dim(); }
    std::size_t inner() const noexcept { return scan_.width(); }
    const TemporalBlockOptions& options() const noexcept { return opts_; }

    Linear& in_proj() noexcept { return in_proj_; }
    Linear& out_proj() noexcept { return out_proj_; }
    SelectiveParams& scan() noexcept { return scan_; }
    const SelectiveParams& scan() const noexcept { return scan_; }

    // Residual branch only.
    Matrix branch(const Matrix& x, TemporalTrace* trace = nullptr) const
    {
        require(x.cols() == width(), "temporal block width mismatch");
        const Matrix proj = in_proj_.forward(opts_.pre_norm ? norm_.forward(x) : x);
        const std::size_t inner_w = inner();
        Matrix u(x.rows(), inner_w);
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 0; c < inner_w; ++c) u(r, c) = opts_.gated ? silu(proj(r, c)) : proj(r, c);

        Matrix s = selective_scan(scan_, u);
        if (trace) *trace = TemporalTrace{u, s};
        if (opts_.gated) {
            for (std::size_t r = 0; r < x.rows(); ++r)
                for (std::size_t c = 0; c < inner_w; ++c) s(r, c) *= silu(proj(r, inner_w + c));
        }
        return out_proj_.forward(s);
    }

    Matrix forward(const Matrix& x, TemporalTrace* trace = nullptr) const { return x + branch(x, trace); }

    void visit(std::string_view prefix, const ParamVisitor& f)
    {
        if (opts_.pre_norm) norm_.visit(join_name(prefix, "norm"), f);
        in_proj_.visit(join_name(prefix, "in_proj"), f);
        scan_.visit(join_name(prefix, "scan"), f);
        out_proj_.visit(join_name(prefix, "out_proj"), f);
    }

private:
    TemporalBlockOptions opts_;
    LayerNorm norm_;
    Linear in_proj_;
    SelectiveParams scan_;
    Linear out_proj_;
};

// Bidirectional scan along the channel axis: the l x E input is transposed to E tokens of
// width l, scanned forward and backward, summed, transposed back and projected per frame.
// Frame count is fixed at construction.
class SpatialSsmBlock {
public:
    SpatialSsmBlock() = default;
    SpatialSsmBlock(std::size_t frames, std::size_t width, std::size_t state_dim = kDefaultStateDim)
        : forward_(frames, state_dim), backward_(frames, state_dim), out_proj_(width, width) {}

    void init(Rng& rng)
    {
        forward_.init(rng);
        backward_.init(rng);
        out_proj_.init(rng, 0.5);
    }

    std::size_t frames() const noexcept { return forward_.width(); }
    std::size_t width() const noexcept { return out_proj_.out_dim(); }

    SelectiveParams& forward_scan() noexcept { return forward_; }
    SelectiveParams& backward_scan() noexcept { return backward_; }
    Linear& out_proj() noexcept { return out_proj_; }

    Matrix branch(const Matrix& x) const
    {
        require(x.rows() == frames() && x.cols() == width(),
                "spatial block expects " + std::to_string(frames()) + " x " + std::to_string(width()) + " input");
        const Matrix tokens = x.transposed();
        Matrix mixed = selective_scan(forward_, tokens);
        mixed += selective_scan(backward_, tokens.reversed_rows()).reversed_rows();
        return out_proj_.forward(mixed.transposed());
    }

    Matrix forward(const Matrix& x) const { return x + branch(x); }

    void visit(std::string_view prefix, const ParamVisitor& f)
    {
        forward_.visit(join_name(prefix, "fwd"), f);
        backward_.visit(join_name(prefix, "bwd"), f);
        out_proj_.visit(join_name(prefix, "out_proj"), f);
    }

private:
    SelectiveParams forward_;
    SelectiveParams backward_;
    Linear out_proj_;
};

} // namespace choreo

#endif // CHOREO_SSM_HPP
