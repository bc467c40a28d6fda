// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <gtest/gtest.h>

namespace gags {
namespace {

using testing::camera;

CameraPose random_pose(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return CameraPose(Eigen::Vector4d(n(rng), n(rng), n(rng), n(rng)), Eigen::Vector3d(n(rng), n(rng), n(rng)));
}

TEST(BackProject, PrincipalPointLiesOnOpticalAxis) {
    const auto intr = camera(64, 48, 50.0);
    const Eigen::Vector3d p = back_project<double>({intr.principal_x, intr.principal_y}, 5.0, intr, CameraPose());
    EXPECT_NEAR(p.x(), 0.0, 1e-12);
    EXPECT_NEAR(p.y(), 0.0, 1e-12);
    EXPECT_NEAR(p.z(), 5.0, 1e-12);
}

TEST(BackProject, OneFocalLengthRightGivesUnitSlope) {
    const auto intr = camera(200, 100, 50.0);
    const double d = 3.5;
    const Eigen::Vector3d p = back_project<double>({intr.principal_x + intr.focal_x, intr.principal_y}, d, intr, {});
    EXPECT_NEAR(p.x(), d, 1e-12);
    EXPECT_NEAR(p.y(), 0.0, 1e-12);
    EXPECT_NEAR(p.z(), d, 1e-12);
}

TEST(BackProject, RejectsNonPositiveDepth) {
    const auto intr = camera(10, 10, 10.0);
    EXPECT_THROW(back_project<double>({5, 5}, 0.0, intr, {}), InputError);
    EXPECT_THROW(back_project<double>({5, 5}, -1.0, intr, {}), InputError);
    EXPECT_THROW(back_project<double>({5, 5}, std::nan(""), intr, {}), InputError);
}

TEST(ProjectPoint, AxisAndSlope) {
    const auto intr = camera(200, 100, 50.0);
    auto a = project_point({0, 0, 5}, intr, {});
    EXPECT_TRUE(a.in_front);
    EXPECT_NEAR(a.pixel.x(), intr.principal_x, 1e-12);
    EXPECT_NEAR(a.pixel.y(), intr.principal_y, 1e-12);
    EXPECT_DOUBLE_EQ(a.depth, 5.0);
    auto b = project_point({2, 0, 2}, intr, {});
    EXPECT_NEAR(b.pixel.x(), intr.principal_x + intr.focal_x, 1e-12);
    EXPECT_NEAR(b.pixel.y(), intr.principal_y, 1e-12);
}

TEST(ProjectPoint, BehindCameraIsFlagged) {
    const auto intr = camera(10, 10, 10.0);
    EXPECT_FALSE(project_point({0, 0, -1}, intr, {}).in_front);
    EXPECT_FALSE(project_point({0, 0, 0}, intr, {}).in_front);
}

TEST(ProjectPoint, RoundTripWithBackProject) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        auto intr = camera(320, 240, 100.0 + 300.0 * u(rng));
        intr.focal_y = intr.focal_x * (0.8 + 0.4 * u(rng));
        const auto pose = random_pose(rng);
        const Eigen::Vector2d px(320 * u(rng), 240 * u(rng));
        const double d = 0.1 + 20.0 * u(rng);
        const Eigen::Vector3d w = back_project<double>(px, d, intr, pose);
        const auto pp = project_point(w, intr, pose);
        ASSERT_TRUE(pp.in_front);
        EXPECT_NEAR((pp.pixel - px).norm(), 0.0, 1e-6);
        EXPECT_NEAR(pp.depth, d, 1e-9);
        // Camera-frame invariance: the world point maps back to the same ray.
        EXPECT_NEAR((back_project<double>(pp.pixel, pp.depth, intr, pose) - w).norm(), 0.0, 1e-6);
    }
}

TEST(Quaternion, RotationIsOrthonormalAndRoundTrips) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
        q.normalize();
        if (q[0] < 0) q = -q;
        const Eigen::Matrix3d r = rotation_from_quaternion<double>(q);
        EXPECT_NEAR((r * r.transpose() - Eigen::Matrix3d::Identity()).norm(), 0.0, 1e-12);
        EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
        EXPECT_NEAR((quaternion_from_rotation<double>(r) - q).norm(), 0.0, 1e-9);
        // Agrees with Eigen's own quaternion convention.
        const Eigen::Quaterniond eq(q[0], q[1], q[2], q[3]);
        EXPECT_NEAR((eq.toRotationMatrix() - r).norm(), 0.0, 1e-12);
    }
}

TEST(Quaternion, JacobianMatchesFiniteDifferences) {
    const Eigen::Vector4d q(0.7, -0.2, 0.4, 0.3);
    const auto d = rotation_quaternion_jacobian<double>(q);
    for (int k = 0; k < 4; ++k) {
        Eigen::Vector4d qp = q, qm = q;
        qp[k] += 1e-6;
        qm[k] -= 1e-6;
        const Eigen::Matrix3d fd =
            (rotation_from_quaternion<double>(qp) - rotation_from_quaternion<double>(qm)) / 2e-6;
        EXPECT_NEAR((fd - d[k]).norm(), 0.0, 1e-8);
    }
}

TEST(CameraPose, LookAtPointsForward) {
    const Eigen::Vector3d eye(1, 2, 3), target(4, 0, 8);
    const auto pose = CameraPose::look_at(eye, target);
    const auto intr = camera(64, 64, 32.0);
    const auto pp = project_point(target, intr, pose);
    EXPECT_TRUE(pp.in_front);
    EXPECT_NEAR(pp.pixel.x(), 32.0, 1e-9);
    EXPECT_NEAR(pp.pixel.y(), 32.0, 1e-9);
    EXPECT_NEAR(pp.depth, (target - eye).norm(), 1e-9);
    // World up (+y) appears toward the top of the image (smaller row).
    EXPECT_LT(project_point(target + Eigen::Vector3d(0, 0.5, 0), intr, pose).pixel.y(), 32.0);
}

TEST(CameraPose, ZeroQuaternionRejected) {
    EXPECT_THROW(CameraPose(Eigen::Vector4d::Zero(), Eigen::Vector3d::Zero()), InputError);
}

TEST(ProjectCovariance, IsotropicOnAxis) {
    const auto intr = camera(100, 80, 60.0);
    const double s = 0.2, d = 4.0;
    const Eigen::Matrix2d c =
        project_covariance<double>(s * s * Eigen::Matrix3d::Identity(), CameraPose(), intr, {0, 0, d});
    EXPECT_NEAR(c(0, 0), std::pow(intr.focal_x * s / d, 2) + kLowPassDilation, 1e-12);
    EXPECT_NEAR(c(1, 1), std::pow(intr.focal_y * s / d, 2) + kLowPassDilation, 1e-12);
    EXPECT_NEAR(c(0, 1), 0.0, 1e-12);
}

TEST(ProjectCovariance, ZeroScaleLeavesOnlyDilation) {
    const auto intr = camera(100, 80, 60.0);
    const Eigen::Matrix2d c = project_covariance<double>(Eigen::Matrix3d::Zero(), CameraPose(), intr, {0.3, -0.2, 2});
    EXPECT_NEAR((c - kLowPassDilation * Eigen::Matrix2d::Identity()).norm(), 0.0, 1e-15);
    EXPECT_GT(c.determinant(), 0.0);
}

TEST(ProjectCovariance, MatchesNumericJacobianOfProjectPoint) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    const auto intr = camera(320, 240, 250.0);
    for (int t = 0; t < 100; ++t) {
        const auto pose = CameraPose::look_at(Eigen::Vector3d(n(rng), n(rng), n(rng) - 6.0), Eigen::Vector3d::Zero());
        const Eigen::Vector3d mu(0.5 * n(rng), 0.5 * n(rng), 0.5 * n(rng));
        Eigen::Matrix3d a;
        for (int i = 0; i < 9; ++i) a.data()[i] = 0.2 * n(rng);
        const Eigen::Matrix3d sigma = a * a.transpose() + 1e-3 * Eigen::Matrix3d::Identity();
        const Eigen::Vector3d cam = world_to_camera<double>(mu, pose);
        const Eigen::Matrix2d c = project_covariance<double>(sigma, pose, intr, cam);
        // Jacobian of the world -> pixel map by central differences.
        Eigen::Matrix<double, 2, 3> j;
        for (int k = 0; k < 3; ++k) {
            Eigen::Vector3d e = Eigen::Vector3d::Zero();
            e[k] = 1e-6;
            j.col(k) = (project_point(mu + e, intr, pose).pixel - project_point(mu - e, intr, pose).pixel) / 2e-6;
        }
        Eigen::Matrix2d ref = j * sigma * j.transpose();
        ref.diagonal().array() += kLowPassDilation;
        EXPECT_NEAR((c - c.transpose()).norm(), 0.0, 1e-12);
        EXPECT_GT(c.determinant(), 0.0);
        EXPECT_GT(c(0, 0), 0.0);
        EXPECT_LT((c - ref).norm() / ref.norm(), 1e-4);
    }
}

TEST(ProjectCovariance, RejectsPointsBehindCamera) {
    const auto intr = camera(10, 10, 10.0);
    EXPECT_THROW(project_covariance<double>(Eigen::Matrix3d::Identity(), CameraPose(), intr, {0, 0, 0}), InputError);
}

TEST(SphericalHarmonics, DegreeZeroConstant) {
    const std::vector<double> c = {0.7, -0.4, 3.0};
    const Eigen::Vector3d rgb = eval_sh<double>(c, Eigen::Vector3d(0, 0, 1), 0);
    EXPECT_NEAR(rgb[0], 0.7 * 0.28209479 + 0.5, 1e-7);
    EXPECT_NEAR(rgb[1], -0.4 * 0.28209479 + 0.5, 1e-7);
    EXPECT_DOUBLE_EQ(rgb[2], 1.0);  // clamped
}

TEST(SphericalHarmonics, ZeroCoefficientsGiveMidGray) {
    const std::vector<double> c(48, 0.0);
    const Eigen::Vector3d rgb = eval_sh<double>(c, Eigen::Vector3d(0.6, 0.0, 0.8), 3);
    EXPECT_EQ(rgb, Eigen::Vector3d::Constant(0.5));
}

// Real SH in Cartesian form, degree <= 1, taken from the standard table
// Y_1^{-1} = sqrt(3/4pi) y, Y_1^0 = sqrt(3/4pi) z, Y_1^1 = sqrt(3/4pi) x with the
// sign convention used by common splatting code (negated odd m).
TEST(SphericalHarmonics, DegreeOneMatchesPolynomialTable) {
    const double k0 = 0.5 / std::sqrt(M_PI);
    const double k1 = std::sqrt(3.0 / (4.0 * M_PI));
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        const Eigen::Vector3d d = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
        std::vector<double> c(12);
        for (auto& v : c) v = 0.2 * n(rng);
        const Eigen::Vector3d got = eval_sh_unclamped<double>(c, d, 1);
        for (int ch = 0; ch < 3; ++ch) {
            const double ref = 0.5 + k0 * c[ch] - k1 * d.y() * c[3 + ch] + k1 * d.z() * c[6 + ch] -
                               k1 * d.x() * c[9 + ch];
            EXPECT_NEAR(got[ch], ref, 1e-6);
        }
    }
}

// Orthonormality of the full degree-3 basis over the sphere, by Monte Carlo
// with a fixed sample set: E[Y_i Y_j] * 4pi ~= delta_ij.
TEST(SphericalHarmonics, BasisIsOrthonormal) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n(0.0, 1.0);
    const int samples = 200000;
    Eigen::Matrix<double, 16, 16> gram = Eigen::Matrix<double, 16, 16>::Zero();
    std::array<double, 16> b{};
    for (int s = 0; s < samples; ++s) {
        const Eigen::Vector3d d = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
        sh_basis<double>(d, 3, b);
        const Eigen::Map<Eigen::Matrix<double, 16, 1>> v(b.data());
        gram += v * v.transpose();
    }
    gram *= 4.0 * M_PI / samples;
    EXPECT_LT((gram - Eigen::Matrix<double, 16, 16>::Identity()).cwiseAbs().maxCoeff(), 0.02);
}

TEST(SphericalHarmonics, BasisGradientMatchesFiniteDifferences) {
    const Eigen::Vector3d d(0.3, -0.5, 0.81);
    std::array<Eigen::Vector3d, 16> g;
    sh_basis_gradient<double>(d, 3, g);
    for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d dp = d, dm = d;
        dp[k] += 1e-6;
        dm[k] -= 1e-6;
        std::array<double, 16> bp{}, bm{};
        sh_basis<double>(dp, 3, bp);
        sh_basis<double>(dm, 3, bm);
        for (int i = 0; i < 16; ++i) EXPECT_NEAR((bp[i] - bm[i]) / 2e-6, g[i][k], 1e-7) << "basis " << i;
    }
}

TEST(SphericalHarmonics, RejectsDegreeAboveStored) {
    const std::vector<double> c(12, 0.0);
    EXPECT_THROW(eval_sh<double>(c, Eigen::Vector3d::UnitZ(), 2), InputError);
    EXPECT_THROW(eval_sh<double>(c, Eigen::Vector3d::UnitZ(), 4), InputError);
}

}  // namespace
}  // namespace gags
