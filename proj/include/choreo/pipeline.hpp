#pragma once
#ifndef CHOREO_PIPELINE_HPP
#define CHOREO_PIPELINE_HPP

#include <algorithm>
#include <atomic>
#include <exception>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "choreo/beat_prior.hpp"
#include "choreo/core.hpp"
#include "choreo/decoder.hpp"
#include "choreo/diffusion.hpp"
#include "choreo/kinematics.hpp"
#include "choreo/objectives.hpp"

namespace choreo {

inline constexpr std::size_t kHardCues = 5;
inline constexpr std::size_t kSoftCues = 8;
inline constexpr std::size_t kKeyClips = kHardCues + kSoftCues;
inline constexpr std::size_t kSoftInstances = 2 * kSoftCues;
// Window index reserved for the global stage when deriving seeds.
inline constexpr std::uint64_t kGlobalWindow = ~0ULL;

struct PipelineConfig {
    std::size_t length = 0;
    std::size_t segment_length = 1024; // N
    std::size_t window_length = 256;   // n
    std::size_t key_length = 8;        // L_key
    double soft_scale = kDefaultSoftScale;
    std::size_t sample_steps = kDefaultSampleSteps;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;

    std::size_t segments() const noexcept { return (length + segment_length - 1) / segment_length; }
    std::size_t windows_per_segment() const noexcept { return segment_length / window_length; }

    void validate() const
    {
        require(length >= 1, "dance length must be at least one frame");
        const bool n_ok = segment_length == 128 || segment_length == 256 || segment_length == 1024;
        if (!n_ok) throw ValidationError("segment length must be 128, 256 or 1024, got " + std::to_string(segment_length));
        if (window_length != 64 && window_length != 256)
            throw ValidationError("window length must be 64 or 256, got " + std::to_string(window_length));
        require(segment_length % window_length == 0, "window length must divide segment length");
        require(key_length >= 2 && key_length % 2 == 0, "key length must be even and >= 2");
        require(key_length <= window_length, "key length exceeds window length");
        require(soft_scale >= 0.0 && soft_scale <= 1.0, "soft scale must lie in [0, 1]");
        require(sample_steps >= 1, "need at least one sampling step");
        require(jobs >= 1, "need at least one worker");
    }
};

struct Preset {
    std::string name;
    std::size_t segment_length;
    std::size_t window_length;
    std::size_t key_length;
    std::size_t motion_dim;
    LossWeights weights;

    Skeleton skeleton() const { return skeleton_for_motion_dim(motion_dim); }
};

inline Preset preset_finedance() { return {"finedance", 1024, 256, 8, 139, LossWeights::finedance()}; }
inline Preset preset_aistpp() { return {"aistpp", 128, 64, 4, 151, LossWeights::aistpp()}; }

inline Preset preset_by_name(const std::string& name)
{
    if (name == "finedance") return preset_finedance();
    if (name == "aistpp") return preset_aistpp();
    throw ValidationError("unknown preset '" + name + "' (expected finedance or aistpp)");
}

// One N-frame slice of the conditioning; frames past `valid` are zero padding.
struct Segment {
    std::size_t index = 0;
    std::size_t offset = 0;
    std::size_t valid = 0;
    Matrix music;
    std::vector<double> prior;
};

inline std::vector<Segment> segment_inputs(const Matrix& music, std::span<const double> prior, const PipelineConfig& cfg)
{
    cfg.validate();
    if (music.rows() != cfg.length || prior.size() != cfg.length)
        throw ValidationError("segment_inputs: expected " + std::to_string(cfg.length) + " frames of music and prior, got " +
                              std::to_string(music.rows()) + " and " + std::to_string(prior.size()));
    const std::size_t big_n = cfg.segment_length;
    std::vector<Segment> out;
    for (std::size_t k = 0; k < cfg.segments(); ++k) {
        Segment s;
        s.index = k;
        s.offset = k * big_n;
        s.valid = std::min(big_n, cfg.length - s.offset);
        s.music = Matrix(big_n, music.cols());
        s.music.set_rows(0, music.slice_rows(s.offset, s.valid));
        s.prior.assign(big_n, 0.0);
        std::copy_n(prior.begin() + static_cast<std::ptrdiff_t>(s.offset), s.valid, s.prior.begin());
        out.push_back(std::move(s));
    }
    return out;
}

struct KeyMotions {
    std::vector<Matrix> hard;
    std::vector<Matrix> soft;

    const Matrix& clip(std::size_t i) const { return i < kHardCues ? hard.at(i) : soft.at(i - kHardCues); }
};

// The global stage denoises a 13 * L_key latent against the whole segment condition.
// With `previous`, the first L_key frames are inpainted with the previous segment's last clip.
inline KeyMotions generate_key_motions(const Segment& seg, const DanceDecoder& global, const PipelineConfig& cfg,
                                       const DiffusionSchedule& sched, const KeyMotions* previous = nullptr)
{
    const auto& mc = global.config();
    if (mc.spatial_block_enabled) throw ValidationError("global model must have the spatial block disabled");
    if (mc.diffusion_steps != sched.steps()) throw ValidationError("global model and schedule disagree on T");
    if (mc.music_dim != seg.music.cols()) throw ValidationError("global model music width does not match features");

    const std::size_t lk = cfg.key_length;
    const std::size_t dim = mc.motion_dim;
    const ConditionTokens cond = global.condition(seg.music, seg.prior);
    GuidanceConfig guidance;
    guidance.soft_scale = cfg.soft_scale;
    if (previous) {
        const Matrix& last = previous->soft.back();
        require(last.rows() == lk && last.cols() == dim, "previous key motions have the wrong shape");
        guidance.hard.content = last;
        for (std::size_t f = 0; f < lk; ++f) guidance.hard.frames.push_back(f);
    }
    auto denoise = [&](const Matrix& z, std::size_t t) { return global.forward(z, t, cond); };
    const Matrix latent = sample(denoise, kKeyClips * lk, dim, sched, guidance,
                                 {cfg.sample_steps, hash64(cfg.seed, seg.index, kGlobalWindow)});
    KeyMotions keys;
    for (std::size_t c = 0; c < kKeyClips; ++c) {
        Matrix clip = latent.slice_rows(c * lk, lk);
        (c < kHardCues ? keys.hard : keys.soft).push_back(std::move(clip));
    }
    return keys;
}

// Soft-cue instance q: even q is soft clip q / 2, odd q its mirror.
inline std::vector<Matrix> soft_instances(const KeyMotions& keys, const Skeleton& skel)
{
    std::vector<Matrix> out;
    out.reserve(kSoftInstances);
    for (const Matrix& s : keys.soft) {
        out.push_back(s);
        out.push_back(mirror_motion({s}, skel).frames);
    }
    return out;
}

struct SoftPlacement {
    std::size_t instance = 0;
    std::size_t start = 0;
};

struct WindowGuidance {
    std::size_t segment = 0;
    std::size_t window = 0;
    std::size_t start_cue = 0;
    std::size_t end_cue = 0;
    std::vector<SoftPlacement> placements;
    std::size_t skipped = 0;
    GuidanceConfig guidance;
};

namespace detail {

inline std::size_t boundary_cue(std::size_t boundary, std::size_t windows)
{
    return static_cast<std::size_t>(std::llround(static_cast<double>(boundary * (kHardCues - 1)) / static_cast<double>(windows)));
}

inline void append_rows(FrameConstraint& c, std::size_t first_frame, const Matrix& src, std::size_t src_row, std::size_t count)
{
    Matrix grown(c.content.rows() + count, src.cols());
    if (c.content.rows() > 0) grown.set_rows(0, c.content);
    for (std::size_t i = 0; i < count; ++i) {
        grown.set_row(c.content.rows() + i, src.row(src_row + i));
        c.frames.push_back(first_frame + i);
    }
    c.content = std::move(grown);
}

} // namespace detail

// Guidance for every window of one segment. `next` is the following segment's key motions
// (whose first hard cue is the shared seam), or null for the final segment.
inline std::vector<WindowGuidance> augment_and_place_cues(const Segment& seg, const KeyMotions& keys,
                                                          const KeyMotions* next, const Skeleton& skel,
                                                          const PipelineConfig& cfg)
{
    require(keys.hard.size() == kHardCues && keys.soft.size() == kSoftCues, "key motions must hold 5 hard and 8 soft clips");
    const std::size_t n = cfg.window_length;
    const std::size_t lk = cfg.key_length;
    const std::size_t half = lk / 2;
    const std::size_t windows = cfg.windows_per_segment();
    const auto instances = soft_instances(keys, skel);

    std::vector<WindowGuidance> out;
    for (std::size_t j = 0; j < windows; ++j) {
        WindowGuidance wg;
        wg.segment = seg.index;
        wg.window = j;
        wg.guidance.soft_scale = cfg.soft_scale;
        wg.start_cue = detail::boundary_cue(j, windows);
        wg.end_cue = detail::boundary_cue(j + 1, windows);
        const bool seam = j + 1 == windows && next != nullptr;
        const Matrix& start = keys.hard.at(wg.start_cue);
        const Matrix& end = seam ? next->hard.at(0) : keys.hard.at(wg.end_cue);
        detail::append_rows(wg.guidance.hard, 0, start, half, half);
        detail::append_rows(wg.guidance.hard, n - half, end, 0, half);

        std::vector<std::uint8_t> used(n, 0);
        for (auto f : wg.guidance.hard.frames) used[f] = 1;

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        const auto prior = std::span<const double>(seg.prior).subspan(j * n, n);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return prior[a] > prior[b]; });

        for (std::size_t q = j * kSoftInstances / windows; q < (j + 1) * kSoftInstances / windows; ++q) {
            bool placed = false;
            for (std::size_t centre : order) {
                const std::size_t start_frame = std::min(centre > half ? centre - half : 0, n - lk);
                if (std::any_of(used.begin() + static_cast<std::ptrdiff_t>(start_frame),
                                used.begin() + static_cast<std::ptrdiff_t>(start_frame + lk), [](auto u) { return u != 0; }))
                    continue;
                std::fill_n(used.begin() + static_cast<std::ptrdiff_t>(start_frame), lk, 1);
                detail::append_rows(wg.guidance.soft, start_frame, instances[q], 0, lk);
                wg.placements.push_back({q, start_frame});
                placed = true;
                break;
            }
            if (!placed) ++wg.skipped;
        }
        out.push_back(std::move(wg));
    }
    return out;
}

struct WindowTask {
    std::size_t segment = 0;
    std::size_t window = 0;
    Matrix music;
    std::vector<double> prior;
    GuidanceConfig guidance;
    std::uint64_t seed = 0;
};

namespace detail {

[[noreturn]] inline void rethrow_with_window(std::exception_ptr ep, const WindowTask& t)
{
    const std::string where = "segment " + std::to_string(t.segment) + " window " + std::to_string(t.window) + ": ";
    try {
        std::rethrow_exception(ep);
    } catch (const NumericError& e) {
        throw NumericError(where + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(where + e.what());
    } catch (const std::exception& e) {
        throw Error(where + e.what());
    }
}

} // namespace detail

// Samples every window with the local model on up to `jobs` threads; results are indexed
// like `tasks`, so the output does not depend on scheduling.
inline std::vector<Matrix> decode_windows_parallel(const std::vector<WindowTask>& tasks, const DanceDecoder& local,
                                                   const DiffusionSchedule& sched, std::size_t steps, std::size_t jobs)
{
    const auto& mc = local.config();
    if (mc.diffusion_steps != sched.steps()) throw ValidationError("local model and schedule disagree on T");
    std::vector<Matrix> results(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    auto run_one = [&](std::size_t i) {
        const WindowTask& t = tasks[i];
        try {
            const ConditionTokens cond = local.condition(t.music, t.prior);
            auto denoise = [&](const Matrix& z, std::size_t ts) { return local.forward(z, ts, cond); };
            results[i] = sample(denoise, t.music.rows(), mc.motion_dim, sched, t.guidance, {steps, t.seed});
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const std::size_t workers = std::min(std::max<std::size_t>(jobs, 1), std::max<std::size_t>(tasks.size(), 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < tasks.size(); i = next++) run_one(i);
            });
        for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (errors[i]) detail::rethrow_with_window(errors[i], tasks[i]);
    return results;
}

inline MotionSequence stitch_full_dance(const std::vector<Matrix>& windows, const PipelineConfig& cfg, std::size_t motion_dim)
{
    cfg.validate();
    const std::size_t expected = cfg.segments() * cfg.windows_per_segment();
    if (windows.size() != expected)
        throw ValidationError("stitch: expected " + std::to_string(expected) + " windows, got " + std::to_string(windows.size()));
    MotionSequence out{Matrix(cfg.length, motion_dim)};
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const Matrix& w = windows[i];
        if (w.rows() != cfg.window_length || w.cols() != motion_dim)
            throw ValidationError("stitch: window " + std::to_string(i) + " is missing or has the wrong shape");
        const std::size_t begin = i * cfg.window_length;
        if (begin >= cfg.length) continue;
        const std::size_t count = std::min(cfg.window_length, cfg.length - begin);
        out.frames.set_rows(begin, w.slice_rows(0, count));
    }
    return out;
}

struct DanceResult {
    MotionSequence motion;
    std::vector<Segment> segments;
    std::vector<KeyMotions> keys;
    std::vector<WindowGuidance> windows;
};

inline void check_models(const DanceDecoder& global, const DanceDecoder& local, const PipelineConfig& cfg)
{
    const auto& g = global.config();
    const auto& l = local.config();
    if (g.motion_dim != l.motion_dim) throw ValidationError("global and local models disagree on motion width");
    if (!l.spatial_block_enabled || l.spatial_frames != cfg.window_length)
        throw ValidationError("local model must carry a spatial block sized to the window length");
    if (g.diffusion_steps != l.diffusion_steps) throw ValidationError("global and local models disagree on T");
}

// Full two-stage inference. Global key motions are produced segment by segment (each
// segment continues from the previous one); local windows then decode independently.
inline DanceResult generate_dance(const Matrix& music, std::span<const double> prior, const DanceDecoder& global,
                                  const DanceDecoder& local, const Skeleton& skel, const PipelineConfig& cfg)
{
    cfg.validate();
    check_models(global, local, cfg);
    if (skel.motion_dim() != local.config().motion_dim) throw ValidationError("skeleton does not match model motion width");
    const DiffusionSchedule sched = make_schedule(global.config().diffusion_steps);

    DanceResult res;
    res.segments = segment_inputs(music, prior, cfg);
    for (const auto& seg : res.segments)
        res.keys.push_back(generate_key_motions(seg, global, cfg, sched, res.keys.empty() ? nullptr : &res.keys.back()));

    std::vector<WindowTask> tasks;
    const std::size_t n = cfg.window_length;
    for (std::size_t k = 0; k < res.segments.size(); ++k) {
        const Segment& seg = res.segments[k];
        auto guides = augment_and_place_cues(seg, res.keys[k], k + 1 < res.keys.size() ? &res.keys[k + 1] : nullptr, skel, cfg);
        for (auto& g : guides) {
            WindowTask t;
            t.segment = k;
            t.window = g.window;
            t.music = seg.music.slice_rows(g.window * n, n);
            t.prior.assign(seg.prior.begin() + static_cast<std::ptrdiff_t>(g.window * n),
                           seg.prior.begin() + static_cast<std::ptrdiff_t>((g.window + 1) * n));
            t.guidance = g.guidance;
            t.seed = hash64(cfg.seed, k, g.window);
            tasks.push_back(std::move(t));
            res.windows.push_back(std::move(g));
        }
    }
    const auto decoded = decode_windows_parallel(tasks, local, sched, cfg.sample_steps, cfg.jobs);
    res.motion = stitch_full_dance(decoded, cfg, local.config().motion_dim);
    return res;
}

} // namespace choreo

#endif // CHOREO_PIPELINE_HPP
