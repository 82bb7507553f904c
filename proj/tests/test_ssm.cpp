#include <gtest/gtest.h>

#include "choreo/ssm.hpp"
#include "oracles.hpp"

using namespace choreo;

namespace {

SsmParams random_lti(Rng& rng, std::size_t n)
{
    std::uniform_real_distribution<double> a(-3.0, -0.05), u(-1.0, 1.0), dt(0.01, 0.5);
    std::vector<double> ac(n), bc(n), c(n);
    for (std::size_t i = 0; i < n; ++i) {
        ac[i] = a(rng);
        bc[i] = u(rng);
        c[i] = u(rng);
    }
    return SsmParams::from_continuous(ac, bc, c, dt(rng));
}

std::vector<double> random_signal(Rng& rng, std::size_t len)
{
    std::vector<double> x(len);
    fill_normal(x, rng);
    return x;
}

} // namespace

TEST(Zoh, MatchesClosedForm)
{
    const auto d = discretize_zoh(-2.0, 0.5, 0.1);
    EXPECT_NEAR(d.a_diag, std::exp(-0.2), 1e-15);
    EXPECT_NEAR(d.b_in, (std::exp(-0.2) - 1.0) / -2.0 * 0.5, 1e-15);
}

TEST(Zoh, SmallProductFallsBackToEuler)
{
    const auto d = discretize_zoh(-1e-9, 3.0, 0.5);
    EXPECT_DOUBLE_EQ(d.b_in, 1.5);
    const auto z = discretize_zoh(0.0, 3.0, 0.5);
    EXPECT_DOUBLE_EQ(z.a_diag, 1.0);
    EXPECT_DOUBLE_EQ(z.b_in, 1.5);
}

TEST(Zoh, RejectsBadInput)
{
    EXPECT_THROW(discretize_zoh(-1.0, 1.0, 0.0), ValidationError);
    EXPECT_THROW(discretize_zoh(-1.0, 1.0, -0.1), ValidationError);
    EXPECT_THROW(discretize_zoh(std::nan(""), 1.0, 0.1), ValidationError);
}

TEST(Lti, ScalarKernelIsGeometric)
{
    SsmParams p{{0.5}, {2.0}, {3.0}, 1.0};
    const auto k = ssm_kernel(p, 5);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(k.taps[j], 6.0 * std::pow(0.5, static_cast<double>(j)));
}

TEST(Lti, ImpulseResponseEqualsKernel)
{
    Rng rng(3);
    const auto p = random_lti(rng, 8);
    std::vector<double> impulse(20, 0.0);
    impulse[0] = 1.0;
    const auto y = ssm_scan(p, impulse);
    const auto k = ssm_kernel(p, 20);
    EXPECT_LT(max_abs_diff(y, k.taps), 1e-14);
}

TEST(Lti, ScanEqualsConvolutionOn500RandomSystems)
{
    Rng rng(21);
    std::uniform_int_distribution<std::size_t> len(1, 64), ns(1, 16);
    double worst = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto p = random_lti(rng, ns(rng));
        const auto x = random_signal(rng, len(rng));
        const auto scan = ssm_scan(p, x);
        const auto conv = ssm_conv(x, ssm_kernel(p, x.size()));
        worst = std::max(worst, max_abs_diff(scan, conv));
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(Lti, KernelMatchesPowerOracle)
{
    Rng rng(22);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = random_lti(rng, 6);
        const auto k = ssm_kernel(p, 30);
        for (std::size_t j = 0; j < 30; ++j) {
            double want = 0.0;
            for (std::size_t i = 0; i < 6; ++i) want += p.c_out[i] * std::pow(p.a_diag[i], static_cast<double>(j)) * p.b_in[i];
            ASSERT_NEAR(k.taps[j], want, 1e-12);
        }
    }
}

TEST(Lti, ConvRejectsLengthMismatch)
{
    const std::vector<double> x(4, 1.0);
    EXPECT_THROW(ssm_conv(x, SsmKernel{{1.0, 2.0}}), ValidationError);
}

TEST(Lti, RejectsInconsistentParams)
{
    SsmParams p{{0.5, 0.2}, {1.0}, {1.0, 1.0}, 1.0};
    const std::vector<double> x(3, 1.0);
    EXPECT_THROW(ssm_scan(p, x), ValidationError);
    EXPECT_THROW(ssm_kernel(SsmParams{}, 3), ValidationError);
}

TEST(Selective, MatchesNaiveOracleOn200Cases)
{
    Rng rng(31);
    std::uniform_int_distribution<std::size_t> len(1, 32), width(1, 4), ns(1, 16);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        SelectiveParams p(width(rng), ns(rng));
        p.init(rng);
        const Matrix x = normal_matrix(len(rng), p.width(), rng);
        worst = std::max(worst, max_abs_diff(selective_scan(p, x), oracle::selective_scan(p, x)));
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(Selective, StepSizesArePositiveAndDecayBelowOne)
{
    Rng rng(32);
    SelectiveParams p(8, 4);
    p.init(rng);
    for (double a : p.a_cont().flat()) {
        EXPECT_LT(a, 0.0);
        EXPECT_GE(a, -16.0);
    }
    SelectiveTrace trace;
    selective_scan(p, normal_matrix(12, 8, rng), &trace);
    ASSERT_EQ(trace.delta.rows(), 12u);
    ASSERT_EQ(trace.b.cols(), 4u);
    for (double d : trace.delta.flat()) EXPECT_GT(d, 0.0);
}

TEST(Selective, IsCausal)
{
    Rng rng(33);
    SelectiveParams p(4, 8);
    p.init(rng);
    Matrix x = normal_matrix(20, 4, rng);
    const Matrix y0 = selective_scan(p, x);
    for (std::size_t c = 0; c < 4; ++c) x(12, c) += 5.0;
    const Matrix y1 = selective_scan(p, x);
    EXPECT_EQ(y0.slice_rows(0, 12), y1.slice_rows(0, 12));
    EXPECT_GT(max_abs_diff(y0.slice_rows(12, 8), y1.slice_rows(12, 8)), 0.0);
}

TEST(Selective, ErrorCategories)
{
    Rng rng(34);
    SelectiveParams p(4, 2);
    p.init(rng);
    EXPECT_THROW(selective_scan(p, Matrix(3, 5)), ValidationError);
    Matrix bad(3, 4);
    bad(1, 2) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(selective_scan(p, bad), NumericError);
}

TEST(TemporalBlock, ShapesAndCausality)
{
    Rng rng(41);
    TemporalSsmBlock block(16, {.state_dim = 4});
    block.init(rng);
    Matrix x = normal_matrix(30, 16, rng);
    const Matrix y0 = block.forward(x);
    ASSERT_EQ(y0.rows(), 30u);
    ASSERT_EQ(y0.cols(), 16u);
    x(20, 3) += 1.0;
    const Matrix y1 = block.forward(x);
    EXPECT_EQ(y0.slice_rows(0, 20), y1.slice_rows(0, 20));
}

TEST(TemporalBlock, ResidualIsIdentityWithZeroOutput)
{
    Rng rng(42);
    TemporalSsmBlock block(8, {.state_dim = 4});
    block.init(rng);
    for (double& w : block.out_proj().weight().flat()) w = 0.0;
    for (double& b : block.out_proj().bias().flat()) b = 0.0;
    const Matrix x = normal_matrix(10, 8, rng);
    EXPECT_EQ(block.forward(x), x);
}

TEST(TemporalBlock, UngatedExpandedVariant)
{
    Rng rng(43);
    TemporalSsmBlock block(8, {.pre_norm = false, .gated = false, .expand = 2, .state_dim = 4});
    block.init(rng);
    EXPECT_EQ(block.inner(), 16u);
    EXPECT_EQ(block.in_proj().out_dim(), 16u);
    TemporalTrace trace;
    const Matrix x = normal_matrix(6, 8, rng);
    block.forward(x, &trace);
    EXPECT_EQ(max_abs_diff(trace.scan_input, block.in_proj().forward(x)), 0.0);
}

TEST(SpatialBlock, MixesAcrossChannelsAndChecksShape)
{
    Rng rng(44);
    SpatialSsmBlock block(12, 8, 4);
    block.init(rng);
    Matrix x = normal_matrix(12, 8, rng);
    const Matrix y0 = block.branch(x);
    // the backward scan lets the first channel see the last one
    x(5, 7) += 1.0;
    const Matrix y1 = block.branch(x);
    double moved = 0.0;
    for (std::size_t r = 0; r < 12; ++r) moved = std::max(moved, std::abs(y1(r, 0) - y0(r, 0)));
    EXPECT_GT(moved, 0.0);
    EXPECT_THROW(block.forward(Matrix(11, 8)), ValidationError);
}
