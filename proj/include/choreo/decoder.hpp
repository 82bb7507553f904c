#pragma once
#ifndef CHOREO_DECODER_HPP
#define CHOREO_DECODER_HPP

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "choreo/beat_prior.hpp"
#include "choreo/core.hpp"
#include "choreo/layers.hpp"
#include "choreo/ssm.hpp"

namespace choreo {

struct DecoderConfig {
    std::size_t width = 64;
    std::size_t blocks = 8;
    std::size_t groups = 8;
    std::size_t ffn_expand = 4;
    std::size_t motion_dim = 151;
    std::size_t music_dim = kMusicDim;
    std::size_t state_dim = kDefaultStateDim;
    std::size_t diffusion_steps = 1000;
    bool spatial_block_enabled = true;
    // Frame count the spatial block is built for; only meaningful when enabled.
    std::size_t spatial_frames = 64;
    bool cmm_bidirectional = true;

    void validate() const
    {
        require(blocks >= 1, "decoder needs at least one block");
        require(width >= 2 && width % 2 == 0, "latent width must be even and >= 2");
        require(groups >= 1 && width % groups == 0, "latent width must be divisible by the group count");
        require(ffn_expand >= 1 && motion_dim >= 1 && music_dim >= 1 && state_dim >= 1, "decoder dims must be positive");
        require(diffusion_steps >= 2, "decoder needs at least two diffusion steps");
        require(!spatial_block_enabled || spatial_frames >= 1, "spatial block needs a frame count");
    }

    friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

struct ConditionTokens {
    Matrix data;
};

struct TimestepTokens {
    Matrix data; // 2 x E
};

struct ModulationParams {
    std::vector<double> gamma;
    std::vector<double> beta;
};

// (1 + gamma) * GroupNorm(z) + beta, per frame.
inline Matrix adalm(const Matrix& z, const ModulationParams& mod, std::size_t groups)
{
    require(mod.gamma.size() == z.cols() && mod.beta.size() == z.cols(), "adalm: modulation width mismatch");
    Matrix y = group_norm(z, groups);
    for (std::size_t r = 0; r < y.rows(); ++r)
        for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) = (1.0 + mod.gamma[c]) * y(r, c) + mod.beta[c];
    return y;
}

// Mean over the rows of [c_m; e_t], then an affine map split into (gamma, beta).
inline ModulationParams modulation_params(const ConditionTokens& c_m, const TimestepTokens& e_t, const Linear& proj)
{
    require(c_m.data.cols() == e_t.data.cols(), "modulation: condition and timestep widths differ");
    const std::size_t width = c_m.data.cols();
    require(proj.in_dim() == width && proj.out_dim() == 2 * width, "modulation: projection shape mismatch");
    Matrix pooled(1, width);
    const double rows = static_cast<double>(c_m.data.rows() + e_t.data.rows());
    for (const Matrix* m : {&c_m.data, &e_t.data})
        for (std::size_t r = 0; r < m->rows(); ++r)
            for (std::size_t c = 0; c < width; ++c) pooled(0, c) += (*m)(r, c);
    for (double& v : pooled.flat()) v /= rows;
    const Matrix out = proj.forward(pooled);
    ModulationParams mod;
    mod.gamma.assign(out.flat().begin(), out.flat().begin() + static_cast<std::ptrdiff_t>(width));
    mod.beta.assign(out.flat().begin() + static_cast<std::ptrdiff_t>(width), out.flat().end());
    return mod;
}

inline std::vector<double> sinusoidal_embedding(double t, std::size_t width)
{
    std::vector<double> e(width, 0.0);
    const std::size_t half = width / 2;
    for (std::size_t k = 0; k < half; ++k) {
        const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
        e[k] = std::sin(t * freq);
        e[half + k] = std::cos(t * freq);
    }
    return e;
}

// MLP lift of [music; beat prior] followed by one temporal SSM encoder block.
class MusicBeatMixer {
public:
    MusicBeatMixer() = default;
    MusicBeatMixer(std::size_t music_dim, std::size_t width, std::size_t state_dim)
        : lift_(music_dim + 1, width), mix_(width, width), encoder_(width, {.state_dim = state_dim}) {}

    void init(Rng& rng)
    {
        lift_.init(rng);
        mix_.init(rng);
        encoder_.init(rng);
    }

    ConditionTokens forward(const Matrix& music, std::span<const double> beat_prior) const
    {
        if (music.rows() != beat_prior.size())
            throw ValidationError("mixer: music has " + std::to_string(music.rows()) + " frames but beat prior has " +
                                  std::to_string(beat_prior.size()));
        require(music.cols() + 1 == lift_.in_dim(), "mixer: music feature width mismatch");
        Matrix joined(music.rows(), music.cols() + 1);
        for (std::size_t r = 0; r < music.rows(); ++r) {
            std::copy(music.row(r).begin(), music.row(r).end(), joined.row(r).begin());
            joined(r, music.cols()) = beat_prior[r];
        }
        return {encoder_.forward(mix_.forward(apply_silu(lift_.forward(joined))))};
    }

    void visit(std::string_view prefix, const ParamVisitor& f)
    {
        lift_.visit(join_name(prefix, "lift"), f);
        mix_.visit(join_name(prefix, "mix"), f);
        encoder_.visit(join_name(prefix, "encoder"), f);
    }

private:
    Linear lift_;
    Linear mix_;
    TemporalSsmBlock encoder_;
};

// Two tokens from one sinusoidal embedding through two independent affine heads.
class TimestepEmbedder {
public:
    TimestepEmbedder() = default;
    TimestepEmbedder(std::size_t width, std::size_t steps) : steps_(steps), head_a_(width, width), head_b_(width, width) {}

    void init(Rng& rng)
    {
        head_a_.init(rng);
        head_b_.init(rng);
    }

    TimestepTokens forward(std::size_t t) const
    {
        if (t < 1 || t > steps_)
            throw ValidationError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(steps_) + "]");
        const std::size_t width = head_a_.in_dim();
        const auto emb = sinusoidal_embedding(static_cast<double>(t), width);
        const Matrix e(1, width, emb);
        TimestepTokens out{Matrix(2, width)};
        out.data.set_rows(0, head_a_.forward(e));
        out.data.set_rows(1, head_b_.forward(e));
        return out;
    }

    void visit(std::string_view prefix, const ParamVisitor& f)
    {
        head_a_.visit(join_name(prefix, "head_a"), f);
        head_b_.visit(join_name(prefix, "head_b"), f);
    }

private:
    std::size_t steps_ = 1000;
    Linear head_a_;
    Linear head_b_;
};

// Single-modal stack: two temporal blocks, then the bidirectional spatial block when enabled.
class Smm {
public:
    Smm() = default;
    Smm(const DecoderConfig& cfg)
        : first_(cfg.width, {.state_dim = cfg.state_dim}),
          second_(cfg.width, {.state_dim = cfg.state_dim}),
          spatial_enabled_(cfg.spatial_block_enabled)
    {
        if (spatial_enabled_) spatial_ = SpatialSsmBlock(cfg.spatial_frames, cfg.width, cfg.state_dim);
    }

    void init(Rng& rng)
    {
        first_.init(rng);
        second_.init(rng);
        if (spatial_enabled_) spatial_.init(rng);
    }

    bool spatial_enabled() const noexcept { return spatial_enabled_; }
    void set_spatial_enabled(bool on)
    {
        require(!on || spatial_.frames() > 0, "spatial block was never constructed");
        spatial_enabled_ = on;
    }

    TemporalSsmBlock& first() noexcept { return first_; }
    TemporalSsmBlock& second() noexcept { return second_; }
    SpatialSsmBlock& spatial() noexcept { return spatial_; }

    Matrix forward(const Matrix& z) const
    {
        Matrix out = second_.forward(first_.forward(z));
        if (spatial_enabled_) out = spatial_.forward(out);
        return out;
    }

    void visit(std::string_view prefix, const ParamVisitor& f)
    {
        first_.visit(join_name(prefix, "t0"), f);
        second_.visit(join_name(prefix, "t1"), f);
        if (spatial_.frames() > 0) spatial_.visit(join_name(prefix, "spatial"), f);
    }

private:
    TemporalSsmBlock first_;
    TemporalSsmBlock second_;
    SpatialSsmBlock spatial_;
    bool spatial_enabled_ = false;
};

// Cross-modal block: temporal SSM over [z; c_m; e_t], keep the first l rows, add z.
// Bidirectional mode adds a second block run over the reversed concatenation.
class Cmm {
public:
    Cmm() = default;
    Cmm(std::size_t width, std::size_t state_dim, bool bidirectional, TemporalBlockOptions opts = {})
        : bidirectional_(bidirectional)
    {
        opts.state_dim = state_dim;
        forward_ = TemporalSsmBlock(width, opts);
        if (bidirectional_) backward_ = TemporalSsmBlock(width, opts);
    }

    void init(Rng& rng)
    {
        forward_.init(rng);
        if (bidirectional_) backward_.init(rng);
    }

    bool bidirectional() const noexcept { return bidirectional_; }
    TemporalSsmBlock& forward_block() noexcept { return forward_; }
    TemporalSsmBlock& backward_block() noexcept { return backward_; }

    Matrix forward(const Matrix& z, const ConditionTokens& c_m, const TimestepTokens& e_t) const
    {
        if (c_m.data.cols() != z.cols() || e_t.data.cols() != z.cols())
            throw ValidationError("cmm: motion, condition and timestep widths must match");
        const Matrix joined = vstack(vstack(z, c_m.data), e_t.data);
        Matrix mixed = forward_.branch(joined);
        if (bidirectional_) mixed += backward_.branch(joined.reversed_rows()).reversed_rows();
        return z + mixed.slice_rows(0, z.rows());
    }

    void visit(std::string_view prefix, const ParamVisitor& f)
    {
        forward_.visit(join_name(prefix, "fwd"), f);
        if (bidirectional_) backward_.visit(join_name(prefix, "bwd"), f);
    }

private:
    bool bidirectional_ = true;
    TemporalSsmBlock forward_;
    TemporalSsmBlock backward_;
};

class Ffn {
public:
    Ffn() = default;
    Ffn(std::size_t width, std::size_t expand) : up_(width, width * expand), down_(width * expand, width) {}

    void init(Rng& rng)
    {
        up_.init(rng);
        down_.init(rng, 0.5);
    }

    Matrix forward(const Matrix& x) const { return down_.forward(apply_silu(up_.forward(x))); }

    void visit(std::string_view prefix, const ParamVisitor& f)
    {
        up_.visit(join_name(prefix, "up"), f);
        down_.visit(join_name(prefix, "down"), f);
    }

private:
    Linear up_;
    Linear down_;
};

// z -> AdaLM -> SMM -> +z -> AdaLM -> CMM -> +z -> AdaLM -> FFN -> +z
class DecoderBlock {
public:
    DecoderBlock() = default;
    explicit DecoderBlock(const DecoderConfig& cfg)
        : groups_(cfg.groups),
          mod_smm_(cfg.width, 2 * cfg.width),
          mod_cmm_(cfg.width, 2 * cfg.width),
          mod_ffn_(cfg.width, 2 * cfg.width),
          smm_(cfg),
          cmm_(cfg.width, cfg.state_dim, cfg.cmm_bidirectional),
          ffn_(cfg.width, cfg.ffn_expand) {}

    void init(Rng& rng)
    {
        mod_smm_.init(rng, 0.5);
        mod_cmm_.init(rng, 0.5);
        mod_ffn_.init(rng, 0.5);
        smm_.init(rng);
        cmm_.init(rng);
        ffn_.init(rng);
    }

    Smm& smm() noexcept { return smm_; }
    Cmm& cmm() noexcept { return cmm_; }

    Matrix forward(Matrix z, const ConditionTokens& c_m, const TimestepTokens& e_t) const
    {
        Matrix h = adalm(z, modulation_params(c_m, e_t, mod_smm_), groups_);
        z += smm_.forward(h) - h;
        h = adalm(z, modulation_params(c_m, e_t, mod_cmm_), groups_);
        z += cmm_.forward(h, c_m, e_t) - h;
        h = adalm(z, modulation_params(c_m, e_t, mod_ffn_), groups_);
        z += ffn_.forward(h);
        return z;
    }

    void visit(std::string_view prefix, const ParamVisitor& f)
    {
        mod_smm_.visit(join_name(prefix, "mod_smm"), f);
        mod_cmm_.visit(join_name(prefix, "mod_cmm"), f);
        mod_ffn_.visit(join_name(prefix, "mod_ffn"), f);
        smm_.visit(join_name(prefix, "smm"), f);
        cmm_.visit(join_name(prefix, "cmm"), f);
        ffn_.visit(join_name(prefix, "ffn"), f);
    }

private:
    std::size_t groups_ = 8;
    Linear mod_smm_;
    Linear mod_cmm_;
    Linear mod_ffn_;
    Smm smm_;
    Cmm cmm_;
    Ffn ffn_;
};

// Denoising network predicting the clean motion from a noisy one.
class DanceDecoder {
public:
    DanceDecoder() = default;
    explicit DanceDecoder(const DecoderConfig& cfg) : cfg_(cfg)
    {
        cfg_.validate();
        mixer_ = MusicBeatMixer(cfg.music_dim, cfg.width, cfg.state_dim);
        timestep_ = TimestepEmbedder(cfg.width, cfg.diffusion_steps);
        in_a_ = Linear(cfg.motion_dim, cfg.width);
        in_b_ = Linear(cfg.width, cfg.width);
        final_norm_ = LayerNorm(cfg.width);
        out_a_ = Linear(cfg.width, cfg.width);
        out_b_ = Linear(cfg.width, cfg.motion_dim);
        blocks_.reserve(cfg.blocks);
        for (std::size_t i = 0; i < cfg.blocks; ++i) blocks_.emplace_back(cfg);
    }

    static DanceDecoder random(const DecoderConfig& cfg, std::uint64_t seed)
    {
        DanceDecoder d(cfg);
        Rng rng(seed);
        d.init(rng);
        return d;
    }

    void init(Rng& rng)
    {
        mixer_.init(rng);
        timestep_.init(rng);
        in_a_.init(rng);
        in_b_.init(rng);
        for (auto& b : blocks_) b.init(rng);
        out_a_.init(rng);
        out_b_.init(rng);
    }

    const DecoderConfig& config() const noexcept { return cfg_; }
    std::vector<DecoderBlock>& blocks() noexcept { return blocks_; }
    MusicBeatMixer& mixer() noexcept { return mixer_; }

    ConditionTokens condition(const Matrix& music, std::span<const double> beat_prior) const
    {
        return mixer_.forward(music, beat_prior);
    }

    TimestepTokens timestep(std::size_t t) const { return timestep_.forward(t); }

    Matrix forward(const Matrix& noisy, std::size_t t, const ConditionTokens& c_m) const
    {
        if (noisy.cols() != cfg_.motion_dim)
            throw ValidationError("decoder: motion width " + std::to_string(noisy.cols()) + " != " +
                                  std::to_string(cfg_.motion_dim));
        require(noisy.rows() >= 1, "decoder: empty motion");
        if (cfg_.spatial_block_enabled && noisy.rows() != cfg_.spatial_frames)
            throw ValidationError("decoder: spatial block expects " + std::to_string(cfg_.spatial_frames) +
                                  " frames, got " + std::to_string(noisy.rows()));
        const TimestepTokens e_t = timestep_.forward(t);
        Matrix z = in_b_.forward(apply_silu(in_a_.forward(noisy)));
        for (const auto& block : blocks_) z = block.forward(std::move(z), c_m, e_t);
        return out_b_.forward(apply_silu(out_a_.forward(final_norm_.forward(z))));
    }

    Matrix forward(const Matrix& noisy, std::size_t t, const Matrix& music, std::span<const double> beat_prior) const
    {
        return forward(noisy, t, condition(music, beat_prior));
    }

    void visit(const ParamVisitor& f)
    {
        mixer_.visit("mixer", f);
        timestep_.visit("timestep", f);
        in_a_.visit("in_mlp.0", f);
        in_b_.visit("in_mlp.1", f);
        for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].visit("blocks." + std::to_string(i), f);
        final_norm_.visit("final_norm", f);
        out_a_.visit("out_mlp.0", f);
        out_b_.visit("out_mlp.1", f);
    }

    std::size_t parameter_count(bool trainable_only = false)
    {
        std::size_t n = 0;
        visit([&](const std::string&, Matrix& m, bool trainable) {
            if (trainable || !trainable_only) n += m.size();
        });
        return n;
    }

    // Trainable parameters flattened in visit order.
    std::vector<double> flat_parameters()
    {
        std::vector<double> out;
        visit([&](const std::string&, Matrix& m, bool trainable) {
            if (trainable) out.insert(out.end(), m.flat().begin(), m.flat().end());
        });
        return out;
    }

    void set_flat_parameters(std::span<const double> values)
    {
        std::size_t pos = 0;
        visit([&](const std::string&, Matrix& m, bool trainable) {
            if (!trainable) return;
            require(pos + m.size() <= values.size(), "flat parameter vector too short");
            std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), m.size(), m.flat().begin());
            pos += m.size();
        });
        require(pos == values.size(), "flat parameter vector too long");
    }

private:
    DecoderConfig cfg_;
    MusicBeatMixer mixer_;
    TimestepEmbedder timestep_;
    Linear in_a_;
    Linear in_b_;
    std::vector<DecoderBlock> blocks_;
    LayerNorm final_norm_;
    Linear out_a_;
    Linear out_b_;
};

} // namespace choreo

#endif // CHOREO_DECODER_HPP
