#pragma once
#ifndef CHOREO_KINEMATICS_HPP
#define CHOREO_KINEMATICS_HPP

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "choreo/beat_prior.hpp"
#include "choreo/core.hpp"

namespace choreo {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>; // row-major

// Frame layout: [contacts (4) | root translation (3) | 6D rotation per joint].
// Contacts are ordered left heel, left toe, right heel, right toe.
inline constexpr std::size_t kContactChannels = 4;
inline constexpr std::size_t kRootOffset = 4;
inline constexpr std::size_t kRotationOffset = 7;

constexpr std::size_t motion_dim_for_joints(std::size_t joints) noexcept { return kRotationOffset + 6 * joints; }

inline std::size_t joints_for_motion_dim(std::size_t dim)
{
    if (dim < kRotationOffset + 6 || (dim - kRotationOffset) % 6 != 0)
        throw ValidationError("motion width " + std::to_string(dim) + " is not 7 + 6J");
    return (dim - kRotationOffset) / 6;
}

struct MotionSequence {
    Matrix frames;
    double fps = kDefaultFps;

    std::size_t length() const noexcept { return frames.rows(); }
    std::size_t dims() const noexcept { return frames.cols(); }
};

struct Skeleton {
    std::vector<std::string> joint_names;
    std::vector<int> parents;
    std::vector<Vec3> offsets;
    std::vector<std::size_t> foot_joints;
    std::vector<std::pair<std::size_t, std::size_t>> mirror_pairs;

    std::size_t joint_count() const noexcept { return parents.size(); }
    std::size_t motion_dim() const noexcept { return motion_dim_for_joints(joint_count()); }

    // Parents-before-children order; throws on anything that is not a tree rooted at joint 0.
    std::vector<std::size_t> topological_order() const
    {
        const std::size_t n = parents.size();
        require(n >= 1, "skeleton has no joints");
        require(parents[0] == -1, "joint 0 must be the root");
        std::vector<std::vector<std::size_t>> children(n);
        for (std::size_t j = 1; j < n; ++j) {
            const int p = parents[j];
            if (p < 0 || static_cast<std::size_t>(p) >= n || static_cast<std::size_t>(p) == j)
                throw ValidationError("joint " + std::to_string(j) + " has an invalid parent");
            children[static_cast<std::size_t>(p)].push_back(j);
        }
        std::vector<std::size_t> order{0};
        for (std::size_t i = 0; i < order.size(); ++i)
            for (auto c : children[order[i]]) order.push_back(c);
        if (order.size() != n) throw ValidationError("skeleton parent array contains a cycle");
        return order;
    }

    void validate() const
    {
        topological_order();
        require(offsets.size() == parents.size(), "skeleton offsets do not match joint count");
        require(joint_names.empty() || joint_names.size() == parents.size(), "skeleton names do not match joint count");
        for (auto f : foot_joints) require(f < joint_count(), "foot joint index out of range");
        std::vector<bool> seen(joint_count(), false);
        for (auto [a, b] : mirror_pairs) {
            require(a < joint_count() && b < joint_count() && a != b, "mirror pair index out of range");
            require(!seen[a] && !seen[b], "mirror pairs must be disjoint");
            seen[a] = seen[b] = true;
        }
    }
};

namespace detail {

inline Skeleton make_smpl_like(bool with_hands)
{
    // SMPL-style body tree, y up, left = +x. Offsets in meters, symmetrized across the
    // sagittal plane so mirroring is exact.
    Skeleton s;
    s.joint_names = {"pelvis",     "left_hip",       "right_hip",      "spine1",     "left_knee",
                     "right_knee", "spine2",         "left_ankle",     "right_ankle", "spine3",
                     "left_foot",  "right_foot",     "neck",           "left_collar", "right_collar",
                     "head",       "left_shoulder",  "right_shoulder", "left_elbow", "right_elbow",
                     "left_wrist", "right_wrist",    "left_hand",      "right_hand"};
    s.parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
    s.offsets = {
        {0.0, 0.0, 0.0},           {0.0595, -0.0864, -0.0110}, {-0.0595, -0.0864, -0.0110}, {0.0, 0.1244, -0.0384},
        {0.0434, -0.3848, 0.0016}, {-0.0434, -0.3848, 0.0016}, {0.0, 0.1380, 0.0268},       {-0.0170, -0.4235, -0.0360},
        {0.0170, -0.4235, -0.0360}, {0.0, 0.0560, 0.0029},     {0.0380, -0.0612, 0.1262},   {-0.0380, -0.0612, 0.1262},
        {0.0, 0.2116, -0.0335},    {0.0774, 0.1133, -0.0213},  {-0.0774, 0.1133, -0.0213},  {0.0, 0.0889, 0.0504},
        {0.1181, 0.0461, -0.0138}, {-0.1181, 0.0461, -0.0138}, {0.2577, -0.0150, -0.0271},  {-0.2577, -0.0150, -0.0271},
        {0.2674, 0.0098, -0.0067}, {-0.2674, 0.0098, -0.0067}, {0.0878, -0.0103, -0.0131},  {-0.0878, -0.0103, -0.0131},
    };
    s.foot_joints = {7, 10, 8, 11};
    s.mirror_pairs = {{1, 2}, {4, 5}, {7, 8}, {10, 11}, {13, 14}, {16, 17}, {18, 19}, {20, 21}, {22, 23}};
    if (!with_hands) {
        s.joint_names.resize(22);
        s.parents.resize(22);
        s.offsets.resize(22);
        s.mirror_pairs.pop_back();
    }
    return s;
}

} // namespace detail

// 24 joints, D_motion = 151.
inline Skeleton skeleton_smpl24() { return detail::make_smpl_like(true); }
// 22 joints (no hands), D_motion = 139.
inline Skeleton skeleton_body22() { return detail::make_smpl_like(false); }

inline Skeleton skeleton_for_motion_dim(std::size_t dim)
{
    if (dim == skeleton_smpl24().motion_dim()) return skeleton_smpl24();
    if (dim == skeleton_body22().motion_dim()) return skeleton_body22();
    throw ValidationError("no built-in skeleton for motion width " + std::to_string(dim));
}

inline Mat3 matmul(const Mat3& a, const Mat3& b) noexcept
{
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) {
            const double aik = a[i * 3 + k];
            for (int j = 0; j < 3; ++j) c[i * 3 + j] += aik * b[k * 3 + j];
        }
    return c;
}

inline Vec3 rotate(const Mat3& m, const Vec3& v) noexcept
{
    return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2], m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
            m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

inline constexpr Mat3 kIdentity3{1, 0, 0, 0, 1, 0, 0, 0, 1};

// Gram-Schmidt on the two 3-vectors of a 6D chunk; they become the first two columns.
inline Mat3 rotation_from_6d(std::span<const double> six)
{
    require(six.size() == 6, "6D rotation needs six values");
    const Vec3 a{six[0], six[1], six[2]};
    const Vec3 b{six[3], six[4], six[5]};
    const double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
    if (!(na >= 1e-8)) throw NumericError("6D rotation: first vector is degenerate");
    const Vec3 e1{a[0] / na, a[1] / na, a[2] / na};
    const double d = e1[0] * b[0] + e1[1] * b[1] + e1[2] * b[2];
    Vec3 u{b[0] - d * e1[0], b[1] - d * e1[1], b[2] - d * e1[2]};
    const double nu = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    if (!(nu >= 1e-8)) throw NumericError("6D rotation: second vector is parallel to the first");
    const Vec3 e2{u[0] / nu, u[1] / nu, u[2] / nu};
    const Vec3 e3{e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]};
    return {e1[0], e2[0], e3[0], e1[1], e2[1], e3[1], e1[2], e2[2], e3[2]};
}

struct DecodedFrame {
    std::array<double, kContactChannels> contacts{};
    Vec3 root{};
    std::vector<Mat3> rotations;
};

inline DecodedFrame decode_frame(std::span<const double> frame, const Skeleton& skel)
{
    if (frame.size() != skel.motion_dim())
        throw ValidationError("frame width " + std::to_string(frame.size()) + " != " + std::to_string(skel.motion_dim()));
    DecodedFrame out;
    for (std::size_t i = 0; i < kContactChannels; ++i) out.contacts[i] = frame[i];
    for (std::size_t i = 0; i < 3; ++i) out.root[i] = frame[kRootOffset + i];
    out.rotations.reserve(skel.joint_count());
    for (std::size_t j = 0; j < skel.joint_count(); ++j)
        out.rotations.push_back(rotation_from_6d(frame.subspan(kRotationOffset + 6 * j, 6)));
    return out;
}

// Joint positions, one row per frame, laid out joint-major (x, y, z per joint).
struct JointPositions {
    Matrix data;
    std::size_t joints = 0;

    std::size_t frames() const noexcept { return data.rows(); }
    Vec3 at(std::size_t frame, std::size_t joint) const
    {
        return {data(frame, 3 * joint), data(frame, 3 * joint + 1), data(frame, 3 * joint + 2)};
    }
};

inline JointPositions forward_kinematics(const MotionSequence& motion, const Skeleton& skel)
{
    skel.validate();
    const auto order = skel.topological_order();
    if (motion.dims() != skel.motion_dim())
        throw ValidationError("motion width " + std::to_string(motion.dims()) + " does not match skeleton (" +
                              std::to_string(skel.motion_dim()) + ")");
    const std::size_t nj = skel.joint_count();
    JointPositions out{Matrix(motion.length(), 3 * nj), nj};
    std::vector<Mat3> global(nj);
    std::vector<Vec3> pos(nj);
    for (std::size_t f = 0; f < motion.length(); ++f) {
        const auto frame = motion.frames.row(f);
        for (auto j : order) {
            const Mat3 local = rotation_from_6d(frame.subspan(kRotationOffset + 6 * j, 6));
            if (skel.parents[j] < 0) {
                global[j] = local;
                for (int k = 0; k < 3; ++k) pos[j][k] = frame[kRootOffset + k] + skel.offsets[j][k];
            } else {
                const auto p = static_cast<std::size_t>(skel.parents[j]);
                global[j] = matmul(global[p], local);
                const Vec3 off = rotate(global[p], skel.offsets[j]);
                for (int k = 0; k < 3; ++k) pos[j][k] = pos[p][k] + off[k];
            }
        }
        for (std::size_t j = 0; j < nj; ++j)
            for (int k = 0; k < 3; ++k) out.data(f, 3 * j + k) = pos[j][k];
    }
    return out;
}

inline JointPositions select_joints(const JointPositions& all, std::span<const std::size_t> joints)
{
    JointPositions out{Matrix(all.frames(), 3 * joints.size()), joints.size()};
    for (std::size_t f = 0; f < all.frames(); ++f)
        for (std::size_t i = 0; i < joints.size(); ++i)
            for (std::size_t k = 0; k < 3; ++k) out.data(f, 3 * i + k) = all.data(f, 3 * joints[i] + k);
    return out;
}

inline JointPositions fk_foot(const MotionSequence& motion, const Skeleton& skel)
{
    if (skel.foot_joints.empty()) throw ValidationError("skeleton has no foot joints");
    return select_joints(forward_kinematics(motion, skel), skel.foot_joints);
}

// Reflection through the x = 0 plane: swap paired joints and contact sides, conjugate each
// rotation by diag(-1, 1, 1) and negate root x. Applied to raw 6D values, so it is an exact
// involution even for non-orthonormal chunks.
inline MotionSequence mirror_motion(const MotionSequence& motion, const Skeleton& skel)
{
    if (motion.dims() != skel.motion_dim()) throw ValidationError("mirror: motion width does not match skeleton");
    std::vector<std::size_t> partner(skel.joint_count());
    for (std::size_t j = 0; j < partner.size(); ++j) partner[j] = j;
    for (auto [a, b] : skel.mirror_pairs) {
        partner[a] = b;
        partner[b] = a;
    }
    MotionSequence out{Matrix(motion.length(), motion.dims()), motion.fps};
    for (std::size_t f = 0; f < motion.length(); ++f) {
        const auto src = motion.frames.row(f);
        auto dst = out.frames.row(f);
        dst[0] = src[2];
        dst[1] = src[3];
        dst[2] = src[0];
        dst[3] = src[1];
        dst[kRootOffset] = -src[kRootOffset];
        dst[kRootOffset + 1] = src[kRootOffset + 1];
        dst[kRootOffset + 2] = src[kRootOffset + 2];
        for (std::size_t j = 0; j < skel.joint_count(); ++j) {
            const auto s = src.subspan(kRotationOffset + 6 * partner[j], 6);
            auto d = dst.subspan(kRotationOffset + 6 * j, 6);
            // column 0 -> -M a, column 1 -> M b with M = diag(-1, 1, 1)
            d[0] = s[0];
            d[1] = -s[1];
            d[2] = -s[2];
            d[3] = -s[3];
            d[4] = s[4];
            d[5] = s[5];
        }
    }
    return out;
}

// Rest pose with identity rotations at the given root height.
inline MotionSequence rest_motion(const Skeleton& skel, std::size_t frames, double root_height = 0.9)
{
    MotionSequence m{Matrix(frames, skel.motion_dim())};
    for (std::size_t f = 0; f < frames; ++f) {
        m.frames(f, kRootOffset + 1) = root_height;
        for (std::size_t j = 0; j < skel.joint_count(); ++j) {
            m.frames(f, kRotationOffset + 6 * j) = 1.0;
            m.frames(f, kRotationOffset + 6 * j + 4) = 1.0;
        }
    }
    return m;
}

} // namespace choreo

#endif // CHOREO_KINEMATICS_HPP
