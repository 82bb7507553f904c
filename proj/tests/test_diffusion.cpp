#include <gtest/gtest.h>

#include <set>

#include "choreo/diffusion.hpp"

using namespace choreo;

namespace {

FrameConstraint constraint(std::vector<std::size_t> frames, std::size_t width, double base)
{
    FrameConstraint c{std::move(frames), Matrix()};
    c.content = Matrix(c.frames.size(), width);
    for (std::size_t i = 0; i < c.content.size(); ++i) c.content.flat()[i] = base + 0.37 * static_cast<double>(i);
    return c;
}

} // namespace

TEST(Schedule, MonotoneAndBounded)
{
    for (auto kind : {ScheduleKind::linear, ScheduleKind::cosine})
        for (std::size_t steps : {2u, 10u, 100u, 1000u}) {
            const auto s = make_schedule(steps, kind);
            ASSERT_EQ(s.steps(), steps);
            EXPECT_EQ(s.alpha_bar(0), 1.0);
            for (std::size_t t = 1; t <= steps; ++t) {
                EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
                EXPECT_GT(s.alpha_bar(t), 0.0);
            }
        }
    const auto lin = make_schedule(1000);
    EXPECT_NEAR(lin.alpha_bar(1), 1.0 - 1e-4, 1e-15);
    EXPECT_LT(lin.alpha_bar(1000), 1e-4);
    const auto cos = make_schedule(1000, ScheduleKind::cosine);
    EXPECT_GT(cos.alpha_bar(1), 0.99);
    EXPECT_LT(cos.alpha_bar(1000), 0.05);
}

TEST(Schedule, Rejections)
{
    EXPECT_THROW(make_schedule(1), ValidationError);
    EXPECT_THROW(DiffusionSchedule({0.9, 0.95}), ValidationError);
    EXPECT_THROW(DiffusionSchedule({0.9, 1.0}), ValidationError);
    EXPECT_THROW(make_schedule(10).alpha_bar(11), ValidationError);
}

TEST(ForwardNoise, MatchesClosedFormAndMoments)
{
    const auto s = make_schedule(1000);
    const Matrix x(1, 1, 2.0);
    const Matrix e(1, 1, -1.5);
    const Matrix z = forward_noise(x, 300, e, s);
    EXPECT_DOUBLE_EQ(z(0, 0), std::sqrt(s.alpha_bar(300)) * 2.0 - std::sqrt(1.0 - s.alpha_bar(300)) * 1.5);

    Rng rng(1);
    const std::size_t n = 200000;
    const Matrix xs(n, 1, 1.0);
    const Matrix zs = forward_noise(xs, 500, normal_matrix(n, 1, rng), s);
    double mean = 0.0, var = 0.0;
    for (double v : zs.flat()) mean += v;
    mean /= static_cast<double>(n);
    for (double v : zs.flat()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    EXPECT_NEAR(mean, std::sqrt(s.alpha_bar(500)), 0.01);
    EXPECT_NEAR(var, 1.0 - s.alpha_bar(500), 0.01);

    EXPECT_THROW(forward_noise(x, 0, e, s), ValidationError);
    EXPECT_THROW(forward_noise(x, 1001, e, s), ValidationError);
}

TEST(Ddim, TimestepsAreEvenlySpacedAndDescending)
{
    const auto ts = ddim_timesteps(1000, 50);
    ASSERT_EQ(ts.size(), 50u);
    EXPECT_EQ(ts.front(), 1000u);
    EXPECT_EQ(ts.back(), 20u);
    for (std::size_t i = 1; i < ts.size(); ++i) EXPECT_EQ(ts[i - 1] - ts[i], 20u);
    const auto odd = ddim_timesteps(10, 3);
    EXPECT_EQ(odd, (std::vector<std::size_t>{10, 7, 3}));
    EXPECT_THROW(ddim_timesteps(10, 11), ValidationError);
}

TEST(Ddim, StepWithTrueX0AndNoiseLandsOnTheNoisedTarget)
{
    const auto s = make_schedule(1000);
    Rng rng(2);
    const Matrix x0 = normal_matrix(4, 3, rng);
    const Matrix eps = normal_matrix(4, 3, rng);
    const Matrix z = forward_noise(x0, 600, eps, s);
    const Matrix prev = ddim_step(z, x0, 600, 400, s);
    EXPECT_LT(max_abs_diff(prev, forward_noise(x0, 400, eps, s)), 1e-12);
    EXPECT_LT(max_abs_diff(ddim_step(z, x0, 600, 0, s), x0), 1e-12);
}

TEST(Sampler, OracleDenoiserRecoversTargetFromAnySeed)
{
    const auto s = make_schedule(1000);
    Rng rng(3);
    const Matrix target = normal_matrix(24, 7, rng);
    auto oracle = [&](const Matrix&, std::size_t) { return target; };
    for (std::uint64_t seed : {0ULL, 1ULL, 99ULL, 123456789ULL}) {
        SampleStats stats;
        const Matrix out = sample(oracle, 24, 7, s, GuidanceConfig{}, SampleOptions{50, seed}, &stats);
        EXPECT_LT(max_abs_diff(out, target), 1e-5);
        EXPECT_EQ(stats.denoiser_calls, 50u);
    }
}

TEST(Sampler, HardCuesAreBitExactAndSoftCuesStopAtScale)
{
    const auto s = make_schedule(1000);
    GuidanceConfig g;
    g.hard = constraint({0, 1, 2, 3, 60, 61, 62, 63}, 5, 1.0);
    g.soft = constraint({20, 21, 22, 23}, 5, -2.0);
    g.soft_scale = 0.5;
    auto denoiser = [](const Matrix& z, std::size_t t) { return z * (0.3 + 1e-4 * static_cast<double>(t)); };
    SampleStats stats;
    const Matrix out = sample(denoiser, 64, 5, s, g, SampleOptions{50, 7}, &stats);
    for (std::size_t i = 0; i < g.hard.frames.size(); ++i)
        for (std::size_t c = 0; c < 5; ++c) ASSERT_EQ(out(g.hard.frames[i], c), g.hard.content(i, c));
    // t = 1000, 980, ..., 520 exceed 500
    EXPECT_EQ(stats.soft_activations, 25u);

    g.soft_scale = 1.0;
    sample(denoiser, 64, 5, s, g, SampleOptions{50, 7}, &stats);
    EXPECT_EQ(stats.soft_activations, 0u);
    g.soft_scale = 0.0;
    sample(denoiser, 64, 5, s, g, SampleOptions{50, 7}, &stats);
    EXPECT_EQ(stats.soft_activations, 50u);
}

TEST(Sampler, SameSeedSameOutput)
{
    const auto s = make_schedule(100);
    auto denoiser = [](const Matrix& z, std::size_t) { return z * 0.5; };
    GuidanceConfig g;
    g.hard = constraint({3}, 2, 0.0);
    const Matrix a = sample(denoiser, 8, 2, s, g, SampleOptions{10, 5});
    const Matrix b = sample(denoiser, 8, 2, s, g, SampleOptions{10, 5});
    const Matrix c = sample(denoiser, 8, 2, s, g, SampleOptions{10, 6});
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
}

TEST(Sampler, Errors)
{
    const auto s = make_schedule(100);
    auto denoiser = [](const Matrix& z, std::size_t) { return z; };
    GuidanceConfig g;
    g.hard = constraint({8}, 2, 0.0);
    EXPECT_THROW(sample(denoiser, 8, 2, s, g, SampleOptions{10, 0}), ValidationError);
    g.hard = constraint({1}, 3, 0.0);
    EXPECT_THROW(sample(denoiser, 8, 2, s, g, SampleOptions{10, 0}), ValidationError);
    g = GuidanceConfig{};
    g.soft_scale = 1.5;
    EXPECT_THROW(sample(denoiser, 8, 2, s, g, SampleOptions{10, 0}), ValidationError);
    auto nan = [](const Matrix& z, std::size_t) { return z * std::nan(""); };
    EXPECT_THROW(sample(nan, 8, 2, s, GuidanceConfig{}, SampleOptions{10, 0}), NumericError);
}

TEST(TeacherForcing, ReplacesBoundaryHalves)
{
    Rng rng(4);
    const Matrix noisy = normal_matrix(16, 3, rng);
    const Matrix clean = normal_matrix(16, 3, rng);
    const Matrix out = boundary_teacher_forcing(noisy, clean, 8);
    for (std::size_t f = 0; f < 16; ++f) {
        const bool edge = f < 4 || f >= 12;
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out(f, c), edge ? clean(f, c) : noisy(f, c));
    }
    EXPECT_THROW(boundary_teacher_forcing(noisy, clean, 7), ValidationError);
    EXPECT_THROW(boundary_teacher_forcing(noisy, clean, 18), ValidationError);
}
