#include <gtest/gtest.h>

#include "choreo/pipeline.hpp"

using namespace choreo;

namespace {

DecoderConfig tiny(std::size_t motion_dim, bool spatial, std::size_t frames)
{
    DecoderConfig c;
    c.width = 8;
    c.blocks = 1;
    c.groups = 2;
    c.ffn_expand = 2;
    c.state_dim = 2;
    c.motion_dim = motion_dim;
    c.spatial_block_enabled = spatial;
    c.spatial_frames = frames;
    return c;
}

struct Fixture {
    PipelineConfig cfg;
    Skeleton skel;
    DanceDecoder global;
    DanceDecoder local;
    Matrix music;
    std::vector<double> prior;
};

Fixture make_fixture(std::size_t length, std::size_t big_n, std::size_t n, std::size_t lk, std::size_t steps = 4)
{
    Fixture f;
    f.cfg.length = length;
    f.cfg.segment_length = big_n;
    f.cfg.window_length = n;
    f.cfg.key_length = lk;
    f.cfg.sample_steps = steps;
    f.cfg.seed = 17;
    f.skel = skeleton_body22();
    f.global = DanceDecoder::random(tiny(139, false, 0), 1);
    f.local = DanceDecoder::random(tiny(139, true, n), 2);
    Rng rng(3);
    f.music = normal_matrix(length, kMusicDim, rng);
    BeatMask mask;
    for (std::size_t i = 0; i < length; ++i) {
        const bool beat = i % 15 == 0;
        f.music(i, kMusicDim - 1) = beat ? 1.0 : 0.0;
        mask.mask.push_back(beat ? 1 : 0);
    }
    f.prior = gaussian_beat_prior(mask).values;
    return f;
}

KeyMotions numbered_keys(std::size_t lk, std::size_t dim)
{
    KeyMotions k;
    for (std::size_t c = 0; c < kKeyClips; ++c) {
        Matrix m(lk, dim);
        for (std::size_t i = 0; i < m.size(); ++i) m.flat()[i] = 1000.0 * static_cast<double>(c) + static_cast<double>(i);
        (c < kHardCues ? k.hard : k.soft).push_back(m);
    }
    return k;
}

} // namespace

TEST(PipelineConfig, StructuralConstants)
{
    EXPECT_EQ(kHardCues, 5u);
    EXPECT_EQ(kSoftCues, 8u);
    EXPECT_EQ(kKeyClips, 13u);
    EXPECT_EQ(kSoftInstances, 16u);
    const auto fd = preset_finedance();
    EXPECT_EQ(fd.segment_length, 1024u);
    EXPECT_EQ(fd.window_length, 256u);
    EXPECT_EQ(fd.key_length, 8u);
    const auto ai = preset_aistpp();
    EXPECT_EQ(ai.segment_length, 128u);
    EXPECT_EQ(ai.window_length, 64u);
    EXPECT_EQ(ai.key_length, 4u);
    EXPECT_THROW(preset_by_name("salsa"), ValidationError);
}

TEST(PipelineConfig, Validation)
{
    PipelineConfig c;
    c.length = 100;
    EXPECT_NO_THROW(c.validate());
    c.segment_length = 512;
    EXPECT_THROW(c.validate(), ValidationError);
    c.segment_length = 1024;
    c.window_length = 128;
    EXPECT_THROW(c.validate(), ValidationError);
    c.window_length = 256;
    c.key_length = 7;
    EXPECT_THROW(c.validate(), ValidationError);
    c.key_length = 8;
    c.length = 0;
    EXPECT_THROW(c.validate(), ValidationError);
    c.length = 100;
    c.soft_scale = 1.2;
    EXPECT_THROW(c.validate(), ValidationError);
    c.soft_scale = 0.5;
    c.length = 2049;
    EXPECT_EQ(c.segments(), 3u);
    EXPECT_EQ(c.windows_per_segment(), 4u);
}

TEST(Segments, PadTheTail)
{
    auto f = make_fixture(300, 128, 64, 4);
    const auto segs = segment_inputs(f.music, f.prior, f.cfg);
    ASSERT_EQ(segs.size(), 3u);
    EXPECT_EQ(segs[2].offset, 256u);
    EXPECT_EQ(segs[2].valid, 44u);
    EXPECT_EQ(segs[2].music.rows(), 128u);
    EXPECT_EQ(segs[2].music(43, 0), f.music(299, 0));
    EXPECT_EQ(segs[2].music(44, 0), 0.0);
    EXPECT_EQ(segs[2].prior[127], 0.0);
    f.prior.pop_back();
    EXPECT_THROW(segment_inputs(f.music, f.prior, f.cfg), ValidationError);
}

TEST(SoftInstances, InterleavesClipsAndMirrors)
{
    const auto skel = skeleton_body22();
    const auto keys = numbered_keys(4, 139);
    const auto inst = soft_instances(keys, skel);
    ASSERT_EQ(inst.size(), 16u);
    for (std::size_t q = 0; q < 8; ++q) {
        EXPECT_EQ(inst[2 * q], keys.soft[q]);
        EXPECT_EQ(inst[2 * q + 1], mirror_motion({keys.soft[q]}, skel).frames);
    }
}

TEST(CuePlacement, HardCueHalvesAndBoundaryMapping)
{
    auto f = make_fixture(1024, 1024, 256, 8);
    const auto segs = segment_inputs(f.music, f.prior, f.cfg);
    const auto keys = numbered_keys(8, 139);
    const auto guides = augment_and_place_cues(segs[0], keys, nullptr, f.skel, f.cfg);
    ASSERT_EQ(guides.size(), 4u);
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_EQ(guides[j].start_cue, j);
        EXPECT_EQ(guides[j].end_cue, j + 1);
        const auto& hard = guides[j].guidance.hard;
        ASSERT_EQ(hard.frames.size(), 8u);
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_EQ(hard.frames[i], i);
            EXPECT_EQ(hard.frames[4 + i], 252 + i);
            EXPECT_EQ(hard.content(i, 5), keys.hard[j](4 + i, 5));
            EXPECT_EQ(hard.content(4 + i, 5), keys.hard[j + 1](i, 5));
        }
    }

    auto a = make_fixture(128, 128, 64, 4);
    const auto two = augment_and_place_cues(segment_inputs(a.music, a.prior, a.cfg)[0], numbered_keys(4, 139), nullptr, a.skel, a.cfg);
    ASSERT_EQ(two.size(), 2u);
    EXPECT_EQ(two[0].start_cue, 0u);
    EXPECT_EQ(two[0].end_cue, 2u);
    EXPECT_EQ(two[1].end_cue, 4u);
}

TEST(CuePlacement, SixteenInstancesWithoutOverlap)
{
    auto f = make_fixture(1024, 1024, 256, 8);
    const auto segs = segment_inputs(f.music, f.prior, f.cfg);
    const auto guides = augment_and_place_cues(segs[0], numbered_keys(8, 139), nullptr, f.skel, f.cfg);
    std::vector<std::size_t> seen;
    for (const auto& g : guides) {
        EXPECT_EQ(g.skipped, 0u);
        std::vector<int> used(256, 0);
        for (auto fr : g.guidance.hard.frames) ++used[fr];
        for (const auto& p : g.placements) {
            seen.push_back(p.instance);
            ASSERT_LE(p.start + 8, 256u);
            for (std::size_t i = 0; i < 8; ++i) ++used[p.start + i];
        }
        for (int u : used) ASSERT_LE(u, 1);
        EXPECT_EQ(g.guidance.soft.frames.size(), 8 * g.placements.size());
    }
    ASSERT_EQ(seen.size(), 16u);
    for (std::size_t q = 0; q < 16; ++q) EXPECT_EQ(seen[q], q);
}

TEST(CuePlacement, FirstInstanceCentresOnTheStrongestPriorFrame)
{
    auto f = make_fixture(1024, 1024, 256, 8);
    auto segs = segment_inputs(f.music, f.prior, f.cfg);
    std::fill(segs[0].prior.begin(), segs[0].prior.end(), 0.0);
    segs[0].prior[100] = 1.0;
    segs[0].prior[101] = 0.9;
    const auto g = augment_and_place_cues(segs[0], numbered_keys(8, 139), nullptr, f.skel, f.cfg)[0];
    ASSERT_FALSE(g.placements.empty());
    EXPECT_EQ(g.placements[0].start, 96u);
    // 101 now overlaps, ties at zero fall to the earliest free frame
    EXPECT_EQ(g.placements[1].start, 4u);
}

TEST(CuePlacement, CrowdedWindowsCountSkips)
{
    auto f = make_fixture(128, 128, 64, 8);
    const auto guides = augment_and_place_cues(segment_inputs(f.music, f.prior, f.cfg)[0], numbered_keys(8, 139), nullptr, f.skel, f.cfg);
    for (const auto& g : guides) {
        EXPECT_EQ(g.placements.size() + g.skipped, 8u);
        EXPECT_GT(g.skipped, 0u);
    }
}

TEST(CuePlacement, SeamUsesNextSegmentFirstHardCue)
{
    auto f = make_fixture(2048, 1024, 256, 8);
    const auto segs = segment_inputs(f.music, f.prior, f.cfg);
    const auto keys = numbered_keys(8, 139);
    auto next = numbered_keys(8, 139);
    for (double& v : next.hard[0].flat()) v = -v - 1.0;
    const auto g = augment_and_place_cues(segs[0], keys, &next, f.skel, f.cfg);
    const auto& hard = g.back().guidance.hard;
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(hard.content.row(4 + i)[3], next.hard[0](i, 3));
}

TEST(Pipeline, SequentialAndParallelAreByteIdentical)
{
    for (auto [len, big_n, n, lk] : {std::tuple{300u, 128u, 64u, 4u}, std::tuple{1000u, 1024u, 256u, 8u}}) {
        auto f = make_fixture(len, big_n, n, lk, 3);
        f.cfg.jobs = 1;
        const auto a = generate_dance(f.music, f.prior, f.global, f.local, f.skel, f.cfg);
        f.cfg.jobs = 4;
        const auto b = generate_dance(f.music, f.prior, f.global, f.local, f.skel, f.cfg);
        EXPECT_EQ(a.motion.frames, b.motion.frames);
        EXPECT_EQ(a.motion.length(), len);
        EXPECT_TRUE(a.motion.frames.all_finite());
    }
}

TEST(Pipeline, StructuralInvariants)
{
    auto f = make_fixture(300, 128, 64, 4, 3);
    f.cfg.jobs = 2;
    const auto r = generate_dance(f.music, f.prior, f.global, f.local, f.skel, f.cfg);
    ASSERT_EQ(r.keys.size(), 3u);
    for (const auto& k : r.keys) {
        EXPECT_EQ(k.hard.size() + k.soft.size(), 13u);
        for (std::size_t c = 0; c < 13; ++c) EXPECT_EQ(k.clip(c).rows(), 4u);
    }
    // each segment continues from the previous one's last clip
    for (std::size_t s = 1; s < r.keys.size(); ++s) EXPECT_EQ(r.keys[s].hard[0], r.keys[s - 1].soft.back());

    std::size_t placed = 0;
    for (const auto& w : r.windows) {
        if (w.segment == 0) placed += w.placements.size();
        const std::size_t base = (w.segment * 2 + w.window) * 64;
        const auto& h = w.guidance.hard;
        for (std::size_t i = 0; i < h.frames.size(); ++i) {
            if (base + h.frames[i] >= 300) continue;
            for (std::size_t c = 0; c < 139; ++c) ASSERT_EQ(r.motion.frames(base + h.frames[i], c), h.content(i, c));
        }
    }
    EXPECT_EQ(placed, 16u);

    // the L_key frames straddling a segment boundary are the shared clip
    for (std::size_t s = 1; s < r.keys.size(); ++s) {
        const std::size_t seam = s * 128;
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t c = 0; c < 139; ++c) ASSERT_EQ(r.motion.frames(seam - 2 + i, c), r.keys[s].hard[0](i, c));
    }
}

TEST(Pipeline, SeedChangesOutput)
{
    auto f = make_fixture(128, 128, 64, 4, 2);
    const auto a = generate_dance(f.music, f.prior, f.global, f.local, f.skel, f.cfg);
    f.cfg.seed = 18;
    const auto b = generate_dance(f.music, f.prior, f.global, f.local, f.skel, f.cfg);
    EXPECT_NE(a.motion.frames, b.motion.frames);
}

TEST(Pipeline, ModelChecks)
{
    auto f = make_fixture(128, 128, 64, 4, 2);
    EXPECT_THROW(generate_dance(f.music, f.prior, f.local, f.local, f.skel, f.cfg), ValidationError);
    const auto wrong = DanceDecoder::random(tiny(139, true, 32), 5);
    EXPECT_THROW(generate_dance(f.music, f.prior, f.global, wrong, f.skel, f.cfg), ValidationError);
    EXPECT_THROW(generate_dance(f.music, f.prior, f.global, f.local, skeleton_smpl24(), f.cfg), ValidationError);
}

TEST(Pipeline, WorkerErrorsNameTheWindow)
{
    auto f = make_fixture(128, 128, 64, 4, 2);
    std::vector<WindowTask> tasks(2);
    for (std::size_t i = 0; i < 2; ++i) {
        tasks[i].window = i;
        tasks[i].music = f.music.slice_rows(0, 64);
        tasks[i].prior.assign(64, 0.5);
    }
    tasks[1].prior.pop_back();
    const auto sched = make_schedule(1000);
    try {
        decode_windows_parallel(tasks, f.local, sched, 2, 2);
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("window 1"), std::string::npos);
    }
}

TEST(Stitch, RejectsMissingWindows)
{
    PipelineConfig c;
    c.length = 200;
    c.segment_length = 128;
    c.window_length = 64;
    c.key_length = 4;
    std::vector<Matrix> w(4, Matrix(64, 10));
    EXPECT_EQ(stitch_full_dance(w, c, 10).length(), 200u);
    w.pop_back();
    EXPECT_THROW(stitch_full_dance(w, c, 10), ValidationError);
}
