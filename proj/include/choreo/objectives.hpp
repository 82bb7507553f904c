#pragma once
#ifndef CHOREO_OBJECTIVES_HPP
#define CHOREO_OBJECTIVES_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "choreo/beat_prior.hpp"
#include "choreo/core.hpp"
#include "choreo/decoder.hpp"
#include "choreo/diffusion.hpp"
#include "choreo/kinematics.hpp"

namespace choreo {

struct LossWeights {
    double pos = 0.0;
    double vel = 0.0;
    double acc = 0.0;
    double foot = 0.0;
    double trans = 0.0;

    void validate() const
    {
        require(pos >= 0.0 && vel >= 0.0 && acc >= 0.0 && foot >= 0.0 && trans >= 0.0, "loss weights must be nonnegative");
    }

    static LossWeights finedance() { return {1.0, 2.964, 2.964, 20.0, 0.5}; }
    static LossWeights aistpp() { return {0.636, 2.964, 2.964, 10.942, 0.5}; }
};

struct LossReport {
    double simple = 0.0;
    double pos = 0.0;
    double vel = 0.0;
    double acc = 0.0;
    double foot = 0.0;
    double trans = 0.0;
    double total = 0.0;
};

inline void require_same_shape(const MotionSequence& a, const MotionSequence& b, const char* what)
{
    if (!a.frames.same_shape(b.frames)) throw ValidationError(std::string(what) + ": motion shapes differ");
}

inline double loss_simple(const MotionSequence& d, const MotionSequence& d_hat)
{
    require_same_shape(d, d_hat, "loss_simple");
    require(d.frames.size() > 0, "loss_simple: empty motion");
    double acc = 0.0;
    for (std::size_t i = 0; i < d.frames.size(); ++i) {
        const double e = d.frames.flat()[i] - d_hat.frames.flat()[i];
        acc += e * e;
    }
    return acc / static_cast<double>(d.frames.size());
}

// Mean over frames of the squared joint-position error summed over all joints.
inline double loss_pos(const MotionSequence& d, const MotionSequence& d_hat, const Skeleton& skel)
{
    require_same_shape(d, d_hat, "loss_pos");
    require(d.length() >= 1, "loss_pos: empty motion");
    const auto p = forward_kinematics(d, skel);
    const auto q = forward_kinematics(d_hat, skel);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
        const double e = p.data.flat()[i] - q.data.flat()[i];
        acc += e * e;
    }
    return acc / static_cast<double>(d.length());
}

enum class ContactMode {
    soft,     // raw predicted channels, keeps the training loss continuous
    threshold // channels >= 0.5 become 1, else 0
};

inline Matrix predicted_contacts(const MotionSequence& d_hat, ContactMode mode)
{
    Matrix y(d_hat.length(), kContactChannels);
    for (std::size_t f = 0; f < d_hat.length(); ++f)
        for (std::size_t c = 0; c < kContactChannels; ++c) {
            const double v = d_hat.frames(f, c);
            y(f, c) = mode == ContactMode::soft ? v : (v >= 0.5 ? 1.0 : 0.0);
        }
    return y;
}

// Foot displacement between consecutive frames gated by the contact of the earlier frame.
// Foot joint k pairs with contact channel k.
inline double loss_foot(const MotionSequence& d_hat, const Matrix& contacts, const Skeleton& skel)
{
    if (d_hat.length() < 2) throw ValidationError("loss_foot needs at least two frames");
    require(skel.foot_joints.size() == kContactChannels, "loss_foot expects four foot joints");
    require(contacts.rows() == d_hat.length() && contacts.cols() == kContactChannels, "loss_foot: contact shape mismatch");
    const auto feet = fk_foot(d_hat, skel);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < d_hat.length(); ++i)
        for (std::size_t k = 0; k < kContactChannels; ++k) {
            const double y = contacts(i, k);
            for (std::size_t a = 0; a < 3; ++a) {
                const double dv = (feet.data(i + 1, 3 * k + a) - feet.data(i, 3 * k + a)) * y;
                acc += dv * dv;
            }
        }
    return acc / static_cast<double>(d_hat.length() - 1);
}

inline double loss_foot(const MotionSequence& d_hat, const Skeleton& skel, ContactMode mode = ContactMode::soft)
{
    return loss_foot(d_hat, predicted_contacts(d_hat, mode), skel);
}

struct VelAcc {
    double vel = 0.0;
    double acc = 0.0;
};

namespace detail {

// Velocity and acceleration losses restricted to columns [c0, c1).
inline VelAcc vel_acc_columns(const Matrix& d, const Matrix& e, std::size_t c0, std::size_t c1)
{
    const std::size_t l = d.rows();
    VelAcc out;
    for (std::size_t i = 0; i + 1 < l; ++i)
        for (std::size_t c = c0; c < c1; ++c) {
            const double dv = (d(i + 1, c) - d(i, c)) - (e(i + 1, c) - e(i, c));
            out.vel += dv * dv;
        }
    for (std::size_t i = 0; i + 2 < l; ++i)
        for (std::size_t c = c0; c < c1; ++c) {
            const double va = (d(i + 2, c) - d(i + 1, c)) - (d(i + 1, c) - d(i, c));
            const double vb = (e(i + 2, c) - e(i + 1, c)) - (e(i + 1, c) - e(i, c));
            out.acc += (va - vb) * (va - vb);
        }
    out.vel /= static_cast<double>(l - 1);
    out.acc /= static_cast<double>(l - 2);
    return out;
}

} // namespace detail

inline VelAcc loss_vel_acc(const MotionSequence& d, const MotionSequence& d_hat)
{
    require_same_shape(d, d_hat, "loss_vel_acc");
    if (d.length() < 3) throw ValidationError("velocity/acceleration losses need at least three frames");
    return detail::vel_acc_columns(d.frames, d_hat.frames, 0, d.dims());
}

// Velocity plus acceleration loss on the root-translation channels.
inline double loss_trans(const MotionSequence& d, const MotionSequence& d_hat)
{
    require_same_shape(d, d_hat, "loss_trans");
    if (d.length() < 3) throw ValidationError("translation loss needs at least three frames");
    require(d.dims() >= kRotationOffset, "loss_trans: motion too narrow");
    const auto va = detail::vel_acc_columns(d.frames, d_hat.frames, kRootOffset, kRootOffset + 3);
    return va.vel + va.acc;
}

inline double loss_total(const LossReport& r, const LossWeights& w)
{
    return r.simple + w.pos * r.pos + w.vel * r.vel + w.acc * r.acc + w.foot * r.foot + w.trans * r.trans;
}

struct LossOptions {
    bool include_trans = false; // local fine-tune mode
    ContactMode contacts = ContactMode::soft;
};

inline LossReport compute_losses(const MotionSequence& d, const MotionSequence& d_hat, const Skeleton& skel,
                                 const LossWeights& w, const LossOptions& opts = {})
{
    w.validate();
    LossReport r;
    r.simple = loss_simple(d, d_hat);
    r.pos = loss_pos(d, d_hat, skel);
    const auto va = loss_vel_acc(d, d_hat);
    r.vel = va.vel;
    r.acc = va.acc;
    r.foot = loss_foot(d_hat, skel, opts.contacts);
    if (opts.include_trans) r.trans = loss_trans(d, d_hat);
    r.total = loss_total(r, w);
    return r;
}

// One training example: a clean window, its condition and a fixed noise draw.
struct TrainingBatch {
    MotionSequence clean;
    Matrix music;
    std::vector<double> beat_prior;
    std::size_t t = 1;
    Matrix noise;
    std::size_t key_length = 0; // boundary teacher forcing when > 0
};

inline LossReport evaluate_batch(const DanceDecoder& model, const TrainingBatch& batch, const Skeleton& skel,
                                 const LossWeights& w, const DiffusionSchedule& sched, const LossOptions& opts = {})
{
    Matrix noisy = forward_noise(batch.clean.frames, batch.t, batch.noise, sched);
    if (batch.key_length > 0) noisy = boundary_teacher_forcing(noisy, batch.clean.frames, batch.key_length);
    const MotionSequence pred{model.forward(noisy, batch.t, batch.music, batch.beat_prior), batch.clean.fps};
    return compute_losses(batch.clean, pred, skel, w, opts);
}

// Simultaneous-perturbation gradient estimate averaged over `samples` Rademacher draws.
// Only coordinates listed in `active` are perturbed (all when empty).
// A positive `clip` bounds each directional-difference estimate to [-clip, clip].
inline std::vector<double> spsa_gradient(const std::function<double(std::span<const double>)>& loss,
                                         std::span<const double> theta, double perturbation, Rng& rng,
                                         std::size_t samples = 1, std::span<const std::size_t> active = {},
                                         double clip = 0.0)
{
    require(perturbation > 0.0 && samples >= 1, "spsa: perturbation and sample count must be positive");
    std::vector<std::size_t> idx(active.begin(), active.end());
    if (idx.empty()) {
        idx.resize(theta.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    }
    std::vector<double> grad(theta.size(), 0.0);
    std::vector<double> plus(theta.begin(), theta.end());
    std::vector<double> minus(theta.begin(), theta.end());
    std::vector<double> sign(idx.size());
    std::bernoulli_distribution coin(0.5);
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t k = 0; k < idx.size(); ++k) {
            sign[k] = coin(rng) ? 1.0 : -1.0;
            plus[idx[k]] = theta[idx[k]] + perturbation * sign[k];
            minus[idx[k]] = theta[idx[k]] - perturbation * sign[k];
        }
        const double lp = loss(plus);
        const double lm = loss(minus);
        if (!std::isfinite(lp) || !std::isfinite(lm)) throw NumericError("spsa: non-finite loss");
        double diff = (lp - lm) / (2.0 * perturbation);
        if (clip > 0.0) diff = std::clamp(diff, -clip, clip);
        for (std::size_t k = 0; k < idx.size(); ++k) grad[idx[k]] += diff / sign[k] / static_cast<double>(samples);
    }
    return grad;
}

struct StepResult {
    LossReport before;
    double step_norm = 0.0;
};

// Running mean of the squared gradient estimate; the update is divided by its root.
struct RmsState {
    double decay = 0.9;
    double mean_sq = 0.0;
    bool primed = false;

    double scale(double sq)
    {
        mean_sq = primed ? decay * mean_sq + (1.0 - decay) * sq : sq;
        primed = true;
        return mean_sq > 0.0 ? 1.0 / std::sqrt(mean_sq) : 0.0;
    }
};

// One SPSA step (two perturbed evaluations) on every trainable parameter.
// With `rms` the raw estimate is normalized by its running RMS.
inline StepResult toy_train_step(DanceDecoder& model, const TrainingBatch& batch, const Skeleton& skel,
                                 const LossWeights& w, const DiffusionSchedule& sched, double step_size,
                                 double perturbation, std::uint64_t seed, const LossOptions& opts = {},
                                 double clip = 0.0, RmsState* rms = nullptr)
{
    StepResult out;
    out.before = evaluate_batch(model, batch, skel, w, sched, opts);
    if (!std::isfinite(out.before.total)) throw NumericError("toy trainer: non-finite loss");
    if (step_size == 0.0) return out;

    const std::vector<double> theta = model.flat_parameters();
    DanceDecoder probe = model;
    auto loss = [&](std::span<const double> p) {
        probe.set_flat_parameters(p);
        return evaluate_batch(probe, batch, skel, w, sched, opts).total;
    };
    Rng rng(seed);
    const auto grad = spsa_gradient(loss, theta, perturbation, rng, 1, {}, clip);
    double scale = 1.0;
    if (rms) {
        double sq = 0.0;
        for (double g : grad) sq += g * g;
        scale = rms->scale(sq / static_cast<double>(grad.size()));
    }
    std::vector<double> next(theta);
    double norm = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
        const double d = step_size * scale * grad[i];
        next[i] -= d;
        norm += d * d;
    }
    out.step_norm = std::sqrt(norm);
    model.set_flat_parameters(next);
    return out;
}

// SPSA gain sequences a_k = a / (k + 1 + A)^alpha, c_k = c / (k + 1)^gamma.
struct SpsaSchedule {
    double a = 0.1;
    double c = 0.01;
    double stability = 50.0;
    double alpha = 0.602;
    double gamma = 0.101;
    double clip = 0.0;
    bool normalize = true;

    double step(std::size_t k) const { return a / std::pow(static_cast<double>(k) + 1.0 + stability, alpha); }
    double perturbation(std::size_t k) const { return c / std::pow(static_cast<double>(k) + 1.0, gamma); }
};

// Runs `steps` SPSA updates; returns the loss before each step plus the final loss.
inline std::vector<LossReport> train_toy(DanceDecoder& model, const TrainingBatch& batch, const Skeleton& skel,
                                         const LossWeights& w, const DiffusionSchedule& sched, std::size_t steps,
                                         const SpsaSchedule& gains, std::uint64_t seed, const LossOptions& opts = {})
{
    std::vector<LossReport> curve;
    curve.reserve(steps + 1);
    RmsState rms;
    for (std::size_t k = 0; k < steps; ++k) {
        const auto r = toy_train_step(model, batch, skel, w, sched, gains.step(k), gains.perturbation(k),
                                      hash64(seed, k, 0), opts, gains.clip, gains.normalize ? &rms : nullptr);
        curve.push_back(r.before);
    }
    curve.push_back(evaluate_batch(model, batch, skel, w, sched, opts));
    return curve;
}

// Small decoder used by the overfit sanity check (width 16, 2 blocks).
inline DecoderConfig toy_decoder_config(std::size_t motion_dim, std::size_t frames)
{
    DecoderConfig cfg;
    cfg.width = 16;
    cfg.blocks = 2;
    cfg.groups = 4;
    cfg.state_dim = 4;
    cfg.motion_dim = motion_dim;
    cfg.spatial_frames = frames;
    return cfg;
}

// Synthetic single-sequence batch: the rest pose with smooth rotation wiggles, a left/right
// contact switch and a slow root drift, against random music with a beat every 8 frames.
inline TrainingBatch make_toy_batch(const Skeleton& skel, std::size_t frames, std::size_t t, std::uint64_t seed = 42)
{
    require(frames >= 3, "toy batch needs at least 3 frames");
    TrainingBatch b;
    b.clean = rest_motion(skel, frames);
    for (std::size_t f = 0; f < frames; ++f) {
        const double ff = static_cast<double>(f);
        for (std::size_t j = 0; j < skel.joint_count(); ++j) {
            const double jj = static_cast<double>(j);
            b.clean.frames(f, kRotationOffset + 6 * j + 1) += 0.2 * std::sin(0.3 * ff + jj);
            b.clean.frames(f, kRotationOffset + 6 * j + 5) += 0.1 * std::cos(0.2 * ff + jj);
        }
        b.clean.frames(f, 0) = f < frames / 2 ? 1.0 : 0.0;
        b.clean.frames(f, 2) = f < frames / 2 ? 0.0 : 1.0;
        b.clean.frames(f, kRootOffset) = 0.01 * ff;
    }
    Rng rng(seed);
    b.music = normal_matrix(frames, kMusicDim, rng);
    BeatMask mask;
    for (std::size_t f = 0; f < frames; ++f) {
        mask.mask.push_back(f % 8 == 0 ? 1 : 0);
        b.music(f, kMusicDim - 1) = f % 8 == 0 ? 1.0 : 0.0;
    }
    b.beat_prior = gaussian_beat_prior(mask).values;
    b.t = t;
    b.noise = normal_matrix(frames, skel.motion_dim(), rng);
    return b;
}

} // namespace choreo

#endif // CHOREO_OBJECTIVES_HPP
