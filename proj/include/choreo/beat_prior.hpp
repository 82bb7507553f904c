#pragma once
#ifndef CHOREO_BEAT_PRIOR_HPP
#define CHOREO_BEAT_PRIOR_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "choreo/core.hpp"

namespace choreo {

inline constexpr std::size_t kMusicDim = 35;
inline constexpr double kDefaultFps = 30.0;
inline constexpr double kDefaultBeatAlpha = 0.25;

// Per-frame acoustic features; the last column is a binary beat flag.
struct MusicFeatures {
    Matrix frames;
    double fps = kDefaultFps;

    std::size_t length() const noexcept { return frames.rows(); }

    void validate() const
    {
        require(frames.rows() >= 1, "music features need at least one frame");
        require(frames.cols() == kMusicDim, "music features must have 35 columns, got " + std::to_string(frames.cols()));
        require(frames.all_finite(), "music features contain non-finite values");
    }
};

struct BeatMask {
    std::vector<std::uint8_t> mask;

    std::size_t size() const noexcept { return mask.size(); }
    std::size_t beat_count() const noexcept
    {
        std::size_t n = 0;
        for (auto v : mask) n += v;
        return n;
    }

    static BeatMask from_values(std::span<const double> values)
    {
        BeatMask out;
        out.mask.reserve(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double v = values[i];
            if (v != 0.0 && v != 1.0)
                throw ValidationError("beat mask entry " + std::to_string(i) + " is not binary");
            out.mask.push_back(v == 1.0 ? 1 : 0);
        }
        return out;
    }
};

// Frame distance to the nearest beat. kNoBeat saturates when no beat exists on either side.
struct NbdSequence {
    static constexpr std::size_t kNoBeat = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> values;
};

struct IntervalSequence {
    std::vector<std::size_t> values;
};

struct BeatPrior {
    std::vector<double> values;
    double alpha = kDefaultBeatAlpha;
};

inline BeatMask extract_beat_mask(const MusicFeatures& features)
{
    features.validate();
    const std::size_t last = features.frames.cols() - 1;
    std::vector<double> column(features.length());
    for (std::size_t i = 0; i < column.size(); ++i) column[i] = features.frames(i, last);
    return BeatMask::from_values(column);
}

inline NbdSequence nearest_beat_distance(const BeatMask& beats)
{
    const std::size_t n = beats.size();
    NbdSequence out;
    out.values.assign(n, NbdSequence::kNoBeat);

    // Forward pass: distance to the preceding beat; backward pass: following beat.
    std::size_t last = NbdSequence::kNoBeat;
    for (std::size_t i = 0; i < n; ++i) {
        if (beats.mask[i]) last = i;
        if (last != NbdSequence::kNoBeat) out.values[i] = i - last;
    }
    std::size_t next = NbdSequence::kNoBeat;
    for (std::size_t i = n; i-- > 0;) {
        if (beats.mask[i]) next = i;
        if (next != NbdSequence::kNoBeat) out.values[i] = std::min(out.values[i], next - i);
    }
    return out;
}

// Interval lengths over the beat list augmented with frames 0 and L-1. Intervals are
// half-open, so a beat shared by two intervals takes the one it starts; the last frame
// takes the last interval.
inline IntervalSequence inter_beat_interval(const BeatMask& beats)
{
    const std::size_t n = beats.size();
    require(n >= 2, "inter-beat interval needs at least two frames");

    std::vector<std::size_t> anchors{0};
    for (std::size_t i = 0; i < n; ++i)
        if (beats.mask[i] && i != anchors.back()) anchors.push_back(i);
    if (anchors.back() != n - 1) anchors.push_back(n - 1);

    IntervalSequence out;
    out.values.resize(n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k + 2 < anchors.size() && i >= anchors[k + 1]) ++k;
        out.values[i] = anchors[k + 1] - anchors[k];
    }
    return out;
}

inline BeatPrior gaussian_beat_prior(const BeatMask& beats, double alpha = kDefaultBeatAlpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("beat prior alpha must lie in (0, 1)");
    BeatPrior out;
    out.alpha = alpha;
    out.values.assign(beats.size(), 0.0);
    if (beats.size() == 0 || beats.beat_count() == 0) return out;
    if (beats.size() == 1) {
        out.values[0] = 1.0;
        return out;
    }

    const auto nbd = nearest_beat_distance(beats);
    const auto interval = inter_beat_interval(beats);
    for (std::size_t i = 0; i < beats.size(); ++i) {
        const double d = static_cast<double>(nbd.values[i]);
        const double width = alpha * static_cast<double>(interval.values[i]);
        out.values[i] = std::exp(-(d * d) / (2.0 * width * width));
    }
    return out;
}

} // namespace choreo

#endif // CHOREO_BEAT_PRIOR_HPP
