#pragma once
#ifndef CHOREO_DIFFUSION_HPP
#define CHOREO_DIFFUSION_HPP

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "choreo/core.hpp"

namespace choreo {

enum class ScheduleKind { linear, cosine };

inline constexpr std::size_t kDefaultTrainSteps = 1000;
inline constexpr std::size_t kDefaultSampleSteps = 50;
inline constexpr double kDefaultSoftScale = 0.5;

// alpha_bar[t - 1] for t = 1..T; alpha_bar(0) is defined as 1.
class DiffusionSchedule {
public:
    DiffusionSchedule() = default;
    explicit DiffusionSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar))
    {
        require(alpha_bar_.size() >= 2, "schedule needs at least two steps");
        for (std::size_t i = 0; i < alpha_bar_.size(); ++i) {
            require(alpha_bar_[i] > 0.0 && alpha_bar_[i] < 1.0, "alpha_bar must lie in (0, 1)");
            if (i > 0) require(alpha_bar_[i] < alpha_bar_[i - 1], "alpha_bar must be strictly decreasing");
        }
    }

    std::size_t steps() const noexcept { return alpha_bar_.size(); }
    const std::vector<double>& alpha_bar() const noexcept { return alpha_bar_; }

    double alpha_bar(std::size_t t) const
    {
        if (t == 0) return 1.0;
        if (t > alpha_bar_.size())
            throw ValidationError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(alpha_bar_.size()) + "]");
        return alpha_bar_[t - 1];
    }

private:
    std::vector<double> alpha_bar_;
};

// Linear: beta rises from 1e-4 to min(0.999, 0.02 * 1000 / T), the standard DDPM range at T = 1000.
// Cosine: squared-cosine alpha_bar with the first beta capped at 5e-3 and all betas at 0.999,
// which keeps alpha_bar_1 > 0.99 and alpha_bar_T < 0.05 for every T >= 2.
inline DiffusionSchedule make_schedule(std::size_t steps, ScheduleKind kind = ScheduleKind::linear)
{
    if (steps < 2) throw ValidationError("schedule needs T >= 2");
    const double n = static_cast<double>(steps);
    std::vector<double> betas(steps);
    if (kind == ScheduleKind::linear) {
        const double start = 1e-4;
        const double end = std::min(0.999, 0.02 * 1000.0 / n);
        for (std::size_t i = 0; i < steps; ++i) betas[i] = start + (end - start) * static_cast<double>(i) / (n - 1.0);
    } else {
        constexpr double s = 0.008;
        auto f = [&](double t) {
            const double c = std::cos((t / n + s) / (1.0 + s) * std::numbers::pi / 2.0);
            return c * c;
        };
        for (std::size_t i = 0; i < steps; ++i) {
            const double ratio = f(static_cast<double>(i + 1)) / f(static_cast<double>(i));
            betas[i] = std::clamp(1.0 - ratio, 1e-8, 0.999);
        }
        betas[0] = std::min(betas[0], 5e-3);
    }
    std::vector<double> alpha_bar(steps);
    double acc = 1.0;
    for (std::size_t i = 0; i < steps; ++i) {
        acc *= 1.0 - betas[i];
        alpha_bar[i] = acc;
    }
    return DiffusionSchedule(std::move(alpha_bar));
}

// z_t = sqrt(alpha_bar_t) x + sqrt(1 - alpha_bar_t) noise
inline Matrix forward_noise(const Matrix& x, std::size_t t, const Matrix& noise, const DiffusionSchedule& sched)
{
    require(x.same_shape(noise), "forward_noise: noise shape mismatch");
    if (t < 1 || t > sched.steps())
        throw ValidationError("forward_noise: timestep " + std::to_string(t) + " outside [1, " + std::to_string(sched.steps()) + "]");
    const double a = std::sqrt(sched.alpha_bar(t));
    const double s = std::sqrt(1.0 - sched.alpha_bar(t));
    Matrix z(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) z.flat()[i] = a * x.flat()[i] + s * noise.flat()[i];
    return z;
}

// Deterministic (eta = 0) DDIM update from t to t_prev using an x0 prediction.
inline Matrix ddim_step(const Matrix& z_t, const Matrix& x0_hat, std::size_t t, std::size_t t_prev,
                        const DiffusionSchedule& sched)
{
    require(z_t.same_shape(x0_hat), "ddim_step: shape mismatch");
    require(t >= 1 && t_prev <= t, "ddim_step: need 1 <= t and t_prev <= t");
    if (t_prev == t) return z_t;
    const double ab = sched.alpha_bar(t);
    const double ab_prev = sched.alpha_bar(t_prev);
    const double sa = std::sqrt(ab);
    const double sn = std::sqrt(1.0 - ab);
    const double sa_prev = std::sqrt(ab_prev);
    const double sn_prev = std::sqrt(1.0 - ab_prev);
    Matrix out(z_t.rows(), z_t.cols());
    for (std::size_t i = 0; i < z_t.size(); ++i) {
        const double x0 = x0_hat.flat()[i];
        const double eps = (z_t.flat()[i] - sa * x0) / sn;
        out.flat()[i] = sa_prev * x0 + sn_prev * eps;
    }
    return out;
}

// Evenly spaced descending timesteps round(k T / S), k = S..1.
inline std::vector<std::size_t> ddim_timesteps(std::size_t train_steps, std::size_t sample_steps)
{
    require(sample_steps >= 1 && sample_steps <= train_steps, "sample steps must lie in [1, T]");
    std::vector<std::size_t> ts;
    ts.reserve(sample_steps);
    for (std::size_t k = sample_steps; k >= 1; --k)
        ts.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(k) * static_cast<double>(train_steps) /
                                                           static_cast<double>(sample_steps))));
    return ts;
}

// Frames pinned to given content: `frames[i]` is overwritten with `content.row(i)`.
struct FrameConstraint {
    std::vector<std::size_t> frames;
    Matrix content;

    bool empty() const noexcept { return frames.empty(); }
};

struct GuidanceConfig {
    FrameConstraint hard;
    FrameConstraint soft;
    double soft_scale = kDefaultSoftScale;
};

struct SampleOptions {
    std::size_t steps = kDefaultSampleSteps;
    std::uint64_t seed = 0;
};

struct SampleStats {
    std::size_t soft_activations = 0;
    std::size_t denoiser_calls = 0;
};

inline void validate_constraint(const FrameConstraint& c, std::size_t frames, std::size_t width, const char* what)
{
    if (c.frames.empty()) return;
    if (c.content.rows() != c.frames.size() || c.content.cols() != width)
        throw ValidationError(std::string(what) + " cue content does not match its frame list");
    for (auto f : c.frames)
        if (f >= frames)
            throw ValidationError(std::string(what) + " cue frame " + std::to_string(f) + " outside window of " +
                                  std::to_string(frames));
}

inline void overwrite_noised(Matrix& z, const FrameConstraint& c, std::size_t t, const DiffusionSchedule& sched, Rng& rng)
{
    Matrix noise = normal_matrix(c.content.rows(), c.content.cols(), rng);
    const Matrix noised = forward_noise(c.content, t, noise, sched);
    for (std::size_t i = 0; i < c.frames.size(); ++i) z.set_row(c.frames[i], noised.row(i));
}

// DDIM sampling with inpainting. `denoiser(z_t, t)` returns an x0 prediction; the
// condition is bound inside it. Per step: hard frames are replaced by their cues noised
// to level t; while t > T * soft_scale soft frames are likewise replaced. The result has
// hard frames set exactly to the cues.
template <class Denoiser>
Matrix sample(Denoiser&& denoiser, std::size_t frames, std::size_t width, const DiffusionSchedule& sched,
              const GuidanceConfig& guidance, const SampleOptions& opts, SampleStats* stats = nullptr)
{
    validate_constraint(guidance.hard, frames, width, "hard");
    validate_constraint(guidance.soft, frames, width, "soft");
    require(guidance.soft_scale >= 0.0 && guidance.soft_scale <= 1.0, "soft guidance scale must lie in [0, 1]");

    Rng rng(opts.seed);
    Matrix z = normal_matrix(frames, width, rng);
    const auto ts = ddim_timesteps(sched.steps(), opts.steps);
    const double soft_threshold = static_cast<double>(sched.steps()) * guidance.soft_scale;
    SampleStats local;

    for (std::size_t i = 0; i < ts.size(); ++i) {
        const std::size_t t = ts[i];
        const std::size_t t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
        if (!guidance.hard.empty()) overwrite_noised(z, guidance.hard, t, sched, rng);
        if (!guidance.soft.empty() && static_cast<double>(t) > soft_threshold) {
            overwrite_noised(z, guidance.soft, t, sched, rng);
            ++local.soft_activations;
        }
        Matrix x0 = denoiser(z, t);
        ++local.denoiser_calls;
        require(x0.same_shape(z), "denoiser returned the wrong shape");
        if (!x0.all_finite()) throw NumericError("denoiser produced non-finite values at t = " + std::to_string(t));
        z = ddim_step(z, x0, t, t_prev, sched);
    }
    for (std::size_t i = 0; i < guidance.hard.frames.size(); ++i) z.set_row(guidance.hard.frames[i], guidance.hard.content.row(i));
    if (stats) *stats = local;
    return z;
}

// Replace the first and last L_key/2 frames of the noisy input with clean frames.
inline Matrix boundary_teacher_forcing(const Matrix& noisy, const Matrix& clean, std::size_t key_length)
{
    require(noisy.same_shape(clean), "teacher forcing: shape mismatch");
    if (key_length % 2 != 0) throw ValidationError("teacher forcing: L_key must be even");
    require(key_length <= noisy.rows(), "teacher forcing: L_key exceeds window length");
    const std::size_t half = key_length / 2;
    Matrix out = noisy;
    for (std::size_t i = 0; i < half; ++i) {
        out.set_row(i, clean.row(i));
        out.set_row(noisy.rows() - 1 - i, clean.row(noisy.rows() - 1 - i));
    }
    return out;
}

} // namespace choreo

#endif // CHOREO_DIFFUSION_HPP
