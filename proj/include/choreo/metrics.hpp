#pragma once
#ifndef CHOREO_METRICS_HPP
#define CHOREO_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "choreo/beat_prior.hpp"
#include "choreo/core.hpp"
#include "choreo/kinematics.hpp"

namespace choreo {

enum class FeatureKind { kinematic, geometric };

inline constexpr std::size_t kGeometricBins = 16;
inline constexpr double kGeometricRange = 2.0; // metres; the last bin also takes longer distances
inline constexpr double kDefaultBasSigma = 3.0;
inline constexpr double kDefaultBeatThreshold = 0.1;

struct FeatureMatrix {
    Matrix rows;
    FeatureKind kind = FeatureKind::kinematic;
};

inline std::size_t feature_dim(FeatureKind kind, std::size_t joints)
{
    return kind == FeatureKind::kinematic ? 4 * joints : kGeometricBins + 2;
}

namespace detail {

inline double dist3(const Matrix& p, std::size_t fa, std::size_t fb, std::size_t j)
{
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double d = p(fa, 3 * j + k) - p(fb, 3 * j + k);
        s += d * d;
    }
    return std::sqrt(s);
}

inline void mean_std(std::span<const double> v, double& mean, double& sd)
{
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    sd = std::sqrt(var / static_cast<double>(v.size()));
}

} // namespace detail

// kinematic: per joint [mean speed, std speed, mean |accel|, std |accel|] (SI units via fps).
// geometric: normalized histogram of pairwise joint distances plus their mean and std.
inline std::vector<double> extract_features(const MotionSequence& motion, const Skeleton& skel, FeatureKind kind)
{
    if (motion.length() < 3) throw ValidationError("features need at least 3 frames");
    const JointPositions pos = forward_kinematics(motion, skel);
    const std::size_t nj = pos.joints;
    const std::size_t len = pos.frames();
    std::vector<double> out;
    out.reserve(feature_dim(kind, nj));
    if (kind == FeatureKind::kinematic) {
        std::vector<double> speed(len - 1), acc(len - 2);
        for (std::size_t j = 0; j < nj; ++j) {
            std::vector<Vec3> vel(len - 1);
            for (std::size_t f = 0; f + 1 < len; ++f) {
                for (std::size_t k = 0; k < 3; ++k) vel[f][k] = (pos.data(f + 1, 3 * j + k) - pos.data(f, 3 * j + k)) * motion.fps;
                speed[f] = std::hypot(vel[f][0], vel[f][1], vel[f][2]);
            }
            for (std::size_t f = 0; f + 2 < len; ++f)
                acc[f] = std::hypot(vel[f + 1][0] - vel[f][0], vel[f + 1][1] - vel[f][1], vel[f + 1][2] - vel[f][2]) * motion.fps;
            double m, s;
            detail::mean_std(speed, m, s);
            out.push_back(m);
            out.push_back(s);
            detail::mean_std(acc, m, s);
            out.push_back(m);
            out.push_back(s);
        }
        return out;
    }
    std::vector<double> hist(kGeometricBins, 0.0);
    std::vector<double> dists;
    dists.reserve(len * nj * (nj - 1) / 2);
    for (std::size_t f = 0; f < len; ++f)
        for (std::size_t a = 0; a < nj; ++a)
            for (std::size_t b = a + 1; b < nj; ++b) {
                double s = 0.0;
                for (std::size_t k = 0; k < 3; ++k) {
                    const double d = pos.data(f, 3 * a + k) - pos.data(f, 3 * b + k);
                    s += d * d;
                }
                const double d = std::sqrt(s);
                dists.push_back(d);
                const auto bin = static_cast<std::size_t>(d / kGeometricRange * static_cast<double>(kGeometricBins));
                hist[std::min(bin, kGeometricBins - 1)] += 1.0;
            }
    for (double& h : hist) h /= static_cast<double>(std::max<std::size_t>(dists.size(), 1));
    out = hist;
    double m = 0.0, s = 0.0;
    if (!dists.empty()) detail::mean_std(dists, m, s);
    out.push_back(m);
    out.push_back(s);
    return out;
}

inline FeatureMatrix extract_feature_matrix(const std::vector<MotionSequence>& motions, const Skeleton& skel, FeatureKind kind)
{
    require(!motions.empty(), "need at least one motion");
    FeatureMatrix fm{Matrix(motions.size(), feature_dim(kind, skel.joint_count())), kind};
    for (std::size_t i = 0; i < motions.size(); ++i) fm.rows.set_row(i, extract_features(motions[i], skel, kind));
    return fm;
}

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), sample covariances (n - 1).
// The trace of the square root is taken as Tr((sqrt(S_a) S_b sqrt(S_a))^(1/2)), which is symmetric.
inline double frechet_distance(const Matrix& fa, const Matrix& fb)
{
    if (fa.cols() != fb.cols()) throw ValidationError("frechet distance: feature widths differ");
    require(fa.rows() >= 2 && fb.rows() >= 2, "frechet distance needs at least two samples per set");
    using Mat = Eigen::MatrixXd;
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    auto stats = [](const Matrix& m, Eigen::VectorXd& mu, Mat& cov) {
        Eigen::Map<const RowMajor> x(m.flat().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
        mu = x.colwise().mean().transpose();
        const Mat centred = x.rowwise() - mu.transpose();
        cov = (centred.transpose() * centred) / static_cast<double>(m.rows() - 1);
    };
    Eigen::VectorXd mu_a, mu_b;
    Mat cov_a, cov_b;
    stats(fa, mu_a, cov_a);
    stats(fb, mu_b, cov_b);

    Eigen::SelfAdjointEigenSolver<Mat> ea(cov_a);
    const Eigen::VectorXd root = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Mat sqrt_a = ea.eigenvectors() * root.asDiagonal() * ea.eigenvectors().transpose();
    const Mat inner = sqrt_a * cov_b * sqrt_a;
    Eigen::SelfAdjointEigenSolver<Mat> ei(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
    const double tr_sqrt = ei.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    const double d = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
    return std::max(d, 0.0);
}

inline double frechet_distance(const FeatureMatrix& a, const FeatureMatrix& b)
{
    require(a.kind == b.kind, "frechet distance: feature kinds differ");
    return frechet_distance(a.rows, b.rows);
}

// Foot-contact physics score on the centre of mass (mean joint position). COM acceleration
// counts vertical motion only upward and is normalized by its sequence maximum; each frame is
// weighted by the product of the two feet's speeds (per-frame displacement, min of heel and toe).
inline double pfc(const MotionSequence& motion, const Skeleton& skel)
{
    if (motion.length() < 3) throw ValidationError("pfc needs at least 3 frames");
    require(skel.foot_joints.size() == 4, "pfc expects four foot joints (left heel, left toe, right heel, right toe)");
    const JointPositions pos = forward_kinematics(motion, skel);
    const std::size_t len = pos.frames();
    const std::size_t nj = pos.joints;
    const double fps = motion.fps;
    std::vector<Vec3> com(len, Vec3{0, 0, 0});
    for (std::size_t f = 0; f < len; ++f)
        for (std::size_t j = 0; j < nj; ++j)
            for (std::size_t k = 0; k < 3; ++k) com[f][k] += pos.data(f, 3 * j + k) / static_cast<double>(nj);

    std::vector<double> acc(len - 2);
    double peak = 0.0;
    for (std::size_t f = 0; f + 2 < len; ++f) {
        Vec3 a;
        for (std::size_t k = 0; k < 3; ++k) a[k] = (com[f + 2][k] - 2.0 * com[f + 1][k] + com[f][k]) * fps * fps;
        a[1] = std::max(a[1], 0.0);
        acc[f] = std::hypot(a[0], a[1], a[2]);
        peak = std::max(peak, acc[f]);
    }
    if (peak == 0.0) return 0.0;

    const auto& fj = skel.foot_joints;
    double total = 0.0;
    for (std::size_t f = 0; f + 2 < len; ++f) {
        const double left = std::min(detail::dist3(pos.data, f + 2, f + 1, fj[0]), detail::dist3(pos.data, f + 2, f + 1, fj[1]));
        const double right = std::min(detail::dist3(pos.data, f + 2, f + 1, fj[2]), detail::dist3(pos.data, f + 2, f + 1, fj[3]));
        total += left * right * acc[f] / peak;
    }
    return total / static_cast<double>(len - 2);
}

// Total joint speed per frame: s[f] = sum_j |p_j(f + 1) - p_j(f)|, f = 0..l-2.
inline std::vector<double> joint_speed(const MotionSequence& motion, const Skeleton& skel)
{
    const JointPositions pos = forward_kinematics(motion, skel);
    std::vector<double> s(pos.frames() > 0 ? pos.frames() - 1 : 0, 0.0);
    for (std::size_t f = 0; f < s.size(); ++f)
        for (std::size_t j = 0; j < pos.joints; ++j) s[f] += detail::dist3(pos.data, f + 1, f, j);
    return s;
}

// Strict local maxima of a speed curve that reach threshold * max.
inline std::vector<std::size_t> local_maxima(std::span<const double> s, double threshold)
{
    std::vector<std::size_t> out;
    if (s.size() < 3) return out;
    const double peak = *std::max_element(s.begin(), s.end());
    for (std::size_t f = 1; f + 1 < s.size(); ++f)
        if (s[f] > s[f - 1] && s[f] > s[f + 1] && s[f] >= threshold * peak) out.push_back(f);
    return out;
}

inline std::vector<std::size_t> detect_motion_beats(const MotionSequence& motion, const Skeleton& skel,
                                                    double threshold = kDefaultBeatThreshold)
{
    if (motion.length() < 3) throw ValidationError("motion beat detection needs at least 3 frames");
    return local_maxima(joint_speed(motion, skel), threshold);
}

inline double beat_alignment_score(const BeatMask& music, std::span<const std::size_t> motion_beats,
                                   double sigma = kDefaultBasSigma)
{
    require(sigma > 0.0, "BAS sigma must be positive");
    if (music.beat_count() == 0) throw ValidationError("BAS needs at least one music beat");
    if (motion_beats.empty()) return 0.0;
    if (!std::is_sorted(motion_beats.begin(), motion_beats.end())) throw ValidationError("BAS: motion beats must be sorted");
    double total = 0.0;
    for (std::size_t t = 0; t < music.size(); ++t) {
        if (!music.mask[t]) continue;
        // motion beats are sorted, so the nearest one brackets t
        const auto it = std::lower_bound(motion_beats.begin(), motion_beats.end(), t);
        double best = std::numeric_limits<double>::infinity();
        if (it != motion_beats.end()) best = static_cast<double>(*it - t);
        if (it != motion_beats.begin()) best = std::min(best, static_cast<double>(t - *std::prev(it)));
        total += std::exp(-best * best / (2.0 * sigma * sigma));
    }
    return total / static_cast<double>(music.beat_count());
}

inline double diversity(const Matrix& features)
{
    if (features.rows() < 2) throw ValidationError("diversity needs at least two rows");
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < features.rows(); ++a)
        for (std::size_t b = a + 1; b < features.rows(); ++b) {
            double s = 0.0;
            for (std::size_t c = 0; c < features.cols(); ++c) {
                const double d = features(a, c) - features(b, c);
                s += d * d;
            }
            total += std::sqrt(s);
            ++pairs;
        }
    return total / static_cast<double>(pairs);
}

} // namespace choreo

#endif // CHOREO_METRICS_HPP
