#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "choreo/metrics.hpp"
#include "oracles.hpp"

using namespace choreo;

namespace {

// Standardize a column to the given mean and unit sample variance.
Matrix standardized(std::size_t n, double mean, std::uint64_t seed)
{
    Rng rng(seed);
    Matrix m = normal_matrix(n, 1, rng);
    double mu = 0.0, var = 0.0;
    for (double v : m.flat()) mu += v;
    mu /= static_cast<double>(n);
    for (double v : m.flat()) var += (v - mu) * (v - mu);
    const double sd = std::sqrt(var / static_cast<double>(n - 1));
    for (double& v : m.flat()) v = (v - mu) / sd + mean;
    return m;
}

// Tr sqrt(Sa Sb) from the (real, nonnegative) eigenvalues of the non-symmetric product.
double fid_oracle(const Matrix& a, const Matrix& b)
{
    auto stats = [](const Matrix& m, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
        const auto n = static_cast<Eigen::Index>(m.rows()), d = static_cast<Eigen::Index>(m.cols());
        mu = Eigen::VectorXd::Zero(d);
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index c = 0; c < d; ++c) mu(c) += m(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) / static_cast<double>(n);
        cov = Eigen::MatrixXd::Zero(d, d);
        for (Eigen::Index r = 0; r < n; ++r)
            for (Eigen::Index i = 0; i < d; ++i)
                for (Eigen::Index j = 0; j < d; ++j)
                    cov(i, j) += (m(static_cast<std::size_t>(r), static_cast<std::size_t>(i)) - mu(i)) *
                                 (m(static_cast<std::size_t>(r), static_cast<std::size_t>(j)) - mu(j)) / static_cast<double>(n - 1);
    };
    Eigen::VectorXd ma, mb;
    Eigen::MatrixXd ca, cb;
    stats(a, ma, ca);
    stats(b, mb, cb);
    Eigen::EigenSolver<Eigen::MatrixXd> es(ca * cb);
    double tr = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) tr += std::sqrt(std::max(es.eigenvalues()(i).real(), 0.0));
    return (ma - mb).squaredNorm() + ca.trace() + cb.trace() - 2.0 * tr;
}

double pfc_oracle(const MotionSequence& m, const Skeleton& s)
{
    const Matrix p = oracle::fk(m, s);
    const std::size_t l = m.length(), nj = s.joint_count();
    auto com = [&](std::size_t f, std::size_t k) {
        double c = 0.0;
        for (std::size_t j = 0; j < nj; ++j) c += p(f, 3 * j + k);
        return c / static_cast<double>(nj);
    };
    auto foot_step = [&](std::size_t f, std::size_t j) {
        double d = 0.0;
        for (std::size_t k = 0; k < 3; ++k) d += std::pow(p(f + 1, 3 * j + k) - p(f, 3 * j + k), 2);
        return std::sqrt(d);
    };
    std::vector<double> acc;
    for (std::size_t f = 0; f + 2 < l; ++f) {
        double sq = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            double a = (com(f + 2, k) - 2.0 * com(f + 1, k) + com(f, k)) * m.fps * m.fps;
            if (k == 1 && a < 0.0) a = 0.0;
            sq += a * a;
        }
        acc.push_back(std::sqrt(sq));
    }
    const double peak = *std::max_element(acc.begin(), acc.end());
    double total = 0.0;
    for (std::size_t f = 0; f + 2 < l; ++f) {
        const double left = std::min(foot_step(f + 1, s.foot_joints[0]), foot_step(f + 1, s.foot_joints[1]));
        const double right = std::min(foot_step(f + 1, s.foot_joints[2]), foot_step(f + 1, s.foot_joints[3]));
        total += left * right * acc[f] / peak;
    }
    return total / static_cast<double>(l - 2);
}

BeatMask mask_at(std::size_t len, std::initializer_list<std::size_t> beats)
{
    BeatMask m;
    m.mask.assign(len, 0);
    for (auto b : beats) m.mask[b] = 1;
    return m;
}

} // namespace

TEST(Fid, SelfDistanceIsZero)
{
    Rng rng(1);
    const Matrix x = normal_matrix(40, 6, rng);
    EXPECT_LT(frechet_distance(x, x), 1e-8);
    const Matrix wide = normal_matrix(10, 30, rng);
    EXPECT_LT(frechet_distance(wide, wide), 1e-8);
}

TEST(Fid, OneDimensionalMomentMatchedSets)
{
    const Matrix a = standardized(500, 0.0, 2);
    const Matrix b = standardized(700, 1.0, 3);
    EXPECT_NEAR(frechet_distance(a, b), 1.0, 1e-6);
    const Matrix c = standardized(300, 3.0, 4);
    EXPECT_NEAR(frechet_distance(a, c), 9.0, 1e-6);
}

TEST(Fid, MatchesProductEigenvalueOracle)
{
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix a = normal_matrix(30, 5, rng);
        Matrix b = normal_matrix(25, 5, rng) * 1.7;
        for (std::size_t r = 0; r < b.rows(); ++r) b(r, 2) += 0.5 * b(r, 0) + 1.0;
        const double got = frechet_distance(a, b);
        EXPECT_NEAR(got, fid_oracle(a, b), 1e-8 * std::max(1.0, got));
        EXPECT_NEAR(got, frechet_distance(b, a), 1e-8 * std::max(1.0, got));
    }
}

TEST(Fid, Errors)
{
    EXPECT_THROW(frechet_distance(Matrix(5, 3), Matrix(5, 4)), ValidationError);
    EXPECT_THROW(frechet_distance(Matrix(1, 3), Matrix(5, 3)), ValidationError);
}

TEST(Features, Dimensions)
{
    const auto s = skeleton_smpl24();
    const auto m = rest_motion(s, 10);
    EXPECT_EQ(extract_features(m, s, FeatureKind::kinematic).size(), 96u);
    EXPECT_EQ(extract_features(m, s, FeatureKind::geometric).size(), 18u);
    EXPECT_EQ(feature_dim(FeatureKind::kinematic, 22), 88u);
    EXPECT_THROW(extract_features(rest_motion(s, 2), s, FeatureKind::kinematic), ValidationError);
}

TEST(Features, ConstantVelocityKinematics)
{
    const auto s = skeleton_body22();
    auto m = rest_motion(s, 20);
    for (std::size_t f = 0; f < 20; ++f) m.frames(f, kRootOffset) = 0.02 * static_cast<double>(f);
    const auto k = extract_features(m, s, FeatureKind::kinematic);
    for (std::size_t j = 0; j < 22; ++j) {
        EXPECT_NEAR(k[4 * j], 0.6, 1e-12);
        EXPECT_NEAR(k[4 * j + 1], 0.0, 1e-12);
        EXPECT_NEAR(k[4 * j + 2], 0.0, 1e-9);
        EXPECT_NEAR(k[4 * j + 3], 0.0, 1e-9);
    }
}

TEST(Features, GeometricHistogramIsNormalized)
{
    Rng rng(6);
    const auto s = skeleton_smpl24();
    const auto m = oracle::random_motion(s, 8, rng);
    const auto g = extract_features(m, s, FeatureKind::geometric);
    double sum = 0.0;
    for (std::size_t i = 0; i < kGeometricBins; ++i) {
        EXPECT_GE(g[i], 0.0);
        sum += g[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_GT(g[kGeometricBins], 0.0);

    // translation does not change pairwise distances
    auto moved = m;
    for (std::size_t f = 0; f < 8; ++f) moved.frames(f, kRootOffset + 2) += 3.0;
    const auto g2 = extract_features(moved, s, FeatureKind::geometric);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], g2[i], 1e-9);
}

TEST(Pfc, StationaryMotionScoresZero)
{
    const auto s = skeleton_smpl24();
    EXPECT_EQ(pfc(rest_motion(s, 30), s), 0.0);
}

TEST(Pfc, MatchesLoopOracleAndScalesWithVelocity)
{
    const auto s = skeleton_smpl24();
    auto m = rest_motion(s, 40);
    for (std::size_t f = 0; f < 40; ++f) {
        const double t = static_cast<double>(f);
        m.frames(f, kRootOffset) = 0.05 * std::sin(0.4 * t);
        m.frames(f, kRootOffset + 1) = 0.9 + 0.03 * std::sin(0.7 * t);
        m.frames(f, kRootOffset + 2) = 0.01 * t * t / 40.0;
    }
    const double base = pfc(m, s);
    EXPECT_GT(base, 0.0);
    EXPECT_NEAR(base, pfc_oracle(m, s), 1e-12);

    // doubling every displacement doubles foot speeds and COM acceleration alike; the
    // acceleration term is normalized, so the score grows by the foot-speed product's 4x
    auto fast = m;
    for (std::size_t f = 0; f < 40; ++f)
        for (std::size_t k = 0; k < 3; ++k) fast.frames(f, kRootOffset + k) = 2.0 * m.frames(f, kRootOffset + k);
    EXPECT_NEAR(pfc(fast, s), 4.0 * base, 1e-12);
    EXPECT_NEAR(pfc(fast, s), pfc_oracle(fast, s), 1e-12);

    Rng rng(7);
    const auto r = oracle::random_motion(s, 25, rng);
    EXPECT_NEAR(pfc(r, s), pfc_oracle(r, s), 1e-10);
    EXPECT_THROW(pfc(rest_motion(s, 2), s), ValidationError);
}

TEST(MotionBeats, LocalMaximaAboveThreshold)
{
    const std::vector<double> s{0.0, 1.0, 0.5, 0.05, 0.08, 0.0, 2.0, 2.0, 1.0};
    // 4 is a strict maximum but below 0.1 * 2, the plateau at 6-7 is not strict
    EXPECT_EQ(local_maxima(s, 0.1), (std::vector<std::size_t>{1}));
    EXPECT_EQ(local_maxima(s, 0.0), (std::vector<std::size_t>{1, 4}));
    EXPECT_TRUE(local_maxima(std::vector<double>{1.0, 2.0}, 0.1).empty());
}

TEST(MotionBeats, DetectsSpeedPeaks)
{
    const auto s = skeleton_body22();
    auto m = rest_motion(s, 40);
    double x = 0.0;
    for (std::size_t f = 0; f < 40; ++f) {
        // speed peaks every 10 frames
        x += 0.01 + 0.05 * std::pow(std::cos(std::numbers::pi * static_cast<double>(f) / 10.0), 2);
        m.frames(f, kRootOffset) = x;
    }
    const auto beats = detect_motion_beats(m, s);
    EXPECT_EQ(beats, (std::vector<std::size_t>{9, 19, 29}));
    const auto speed = joint_speed(m, s);
    EXPECT_EQ(speed.size(), 39u);
}

TEST(Bas, CoincidentAndOffsetBeats)
{
    const auto music = mask_at(100, {10, 40, 70});
    const std::vector<std::size_t> same{10, 40, 70};
    EXPECT_NEAR(beat_alignment_score(music, same, 3.0), 1.0, 1e-12);
    const std::vector<std::size_t> shifted{13, 43, 73};
    EXPECT_NEAR(beat_alignment_score(music, shifted, 3.0), std::exp(-0.5), 1e-6);
    const std::vector<std::size_t> before{7, 37, 67};
    EXPECT_NEAR(beat_alignment_score(music, before, 3.0), std::exp(-0.5), 1e-6);
}

TEST(Bas, NearestBeatAndEdgeCases)
{
    const auto music = mask_at(50, {20});
    const std::vector<std::size_t> beats{5, 18, 30};
    EXPECT_NEAR(beat_alignment_score(music, beats, 3.0), std::exp(-4.0 / 18.0), 1e-12);
    EXPECT_EQ(beat_alignment_score(music, std::vector<std::size_t>{}, 3.0), 0.0);
    EXPECT_THROW(beat_alignment_score(mask_at(10, {}), beats, 3.0), ValidationError);
    EXPECT_THROW(beat_alignment_score(music, std::vector<std::size_t>{30, 5}, 3.0), ValidationError);
    EXPECT_THROW(beat_alignment_score(music, beats, 0.0), ValidationError);
}

TEST(Diversity, MatchesAllPairsOracle)
{
    Rng rng(8);
    const Matrix f = normal_matrix(15, 7, rng);
    EXPECT_NEAR(diversity(f), oracle::diversity(f), 1e-12);
    EXPECT_EQ(diversity(Matrix(4, 3, 2.0)), 0.0);
    EXPECT_THROW(diversity(Matrix(1, 3)), ValidationError);
}
