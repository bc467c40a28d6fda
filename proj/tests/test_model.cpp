// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

namespace gags {
namespace {

GaussianSet random_set(std::size_t n, int degree, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g(0.0f, 1.0f);
    GaussianSet gs(degree);
    for (std::size_t i = 0; i < n; ++i) {
        GaussianSet::Primitive p;
        p.position = {g(rng), g(rng), g(rng)};
        p.raw_scale = {g(rng), g(rng), g(rng)};
        p.raw_rotation = {g(rng) + 2.0f, g(rng), g(rng), g(rng)};
        p.raw_opacity = g(rng);
        p.raw_authenticity = g(rng);
        p.sh.resize(static_cast<std::size_t>(gs.sh_width()));
        for (auto& v : p.sh) v = g(rng);
        gs.push_back(p);
    }
    return gs;
}

TEST(Activation, ClosedForms) {
    GaussianSet gs(0);
    GaussianSet::Primitive p;
    p.raw_opacity = 0.0f;
    p.raw_scale = {0.0f, 0.0f, 0.0f};
    p.raw_authenticity = static_cast<float>(logit(0.9));
    p.raw_rotation = {2.0f, 0.0f, 0.0f, 0.0f};
    gs.push_back(p);
    const auto a = activate(gs);
    EXPECT_FLOAT_EQ(a.opacities[0], 0.5f);
    EXPECT_FLOAT_EQ(a.scales[0], 1.0f);
    EXPECT_NEAR(a.authenticities[0], 0.9f, 1e-7);
    EXPECT_NEAR(logit(0.9), 2.1972246, 1e-7);
    EXPECT_FLOAT_EQ(a.rotations[0], 1.0f);
}

TEST(Activation, ZeroRotationRejected) {
    GaussianSet gs(0);
    GaussianSet::Primitive p;
    p.raw_rotation = Vec4<float>::Zero();
    EXPECT_THROW(gs.push_back(p), InputError);
    EXPECT_EQ(gs.size(), 0u);
}

TEST(Activation, ValuesStayInOpenUnitInterval) {
    const auto gs = random_set(500, 1, 3);
    const auto a = activate(gs);
    for (std::size_t i = 0; i < gs.size(); ++i) {
        EXPECT_GT(a.opacities[i], 0.0f);
        EXPECT_LT(a.opacities[i], 1.0f);
        EXPECT_GT(a.authenticities[i], 0.0f);
        EXPECT_LT(a.authenticities[i], 1.0f);
        const float eff = a.opacities[i] * a.authenticities[i];
        EXPECT_LE(eff, std::min(a.opacities[i], a.authenticities[i]));
        EXPECT_NEAR(Eigen::Map<const Vec4<float>>(&a.rotations[4 * i]).norm(), 1.0f, 1e-6f);
    }
}

TEST(WorldCovariance, IdentityRotation) {
    const Eigen::Matrix3d c = world_covariance<double>({1, 2, 3}, {1, 0, 0, 0});
    EXPECT_EQ(c, Eigen::Vector3d(1, 4, 9).asDiagonal().toDenseMatrix());
}

TEST(WorldCovariance, QuarterTurnAboutZSwapsAxes) {
    const double h = std::sqrt(0.5);
    const Eigen::Matrix3d c = world_covariance<double>({1, 2, 1}, {h, 0, 0, h});
    EXPECT_NEAR((c - Eigen::Vector3d(4, 1, 1).asDiagonal().toDenseMatrix()).norm(), 0.0, 1e-12);
}

TEST(WorldCovariance, EigenvaluesAreSquaredScales) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.05, 2.0);
    for (int t = 0; t < 200; ++t) {
        Eigen::Vector3d s(u(rng), u(rng), u(rng));
        const Eigen::Vector4d q = Eigen::Vector4d(n(rng), n(rng), n(rng), n(rng)).normalized();
        const Eigen::Matrix3d c = world_covariance<double>(s, q);
        EXPECT_NEAR((c - c.transpose()).norm(), 0.0, 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(c);
        Eigen::Vector3d ev = es.eigenvalues();
        Eigen::Vector3d s2 = s.cwiseProduct(s);
        std::sort(s2.data(), s2.data() + 3);
        EXPECT_NEAR((ev - s2).norm(), 0.0, 1e-6);
    }
}

TEST(Checkpoint, RoundTripIsBitExact) {
    const auto gs = random_set(1000, 3, 21);
    const auto dir = testing::temp_dir("ckpt");
    save_checkpoint(gs, dir / "a.ckpt");
    const auto back = load_checkpoint(dir / "a.ckpt");
    EXPECT_EQ(back.sh_degree(), 3);
    ASSERT_EQ(back.size(), gs.size());
    auto bits_equal = [](const std::vector<float>& a, const std::vector<float>& b) {
        return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
    };
    EXPECT_TRUE(bits_equal(back.params().positions, gs.params().positions));
    EXPECT_TRUE(bits_equal(back.params().raw_scales, gs.params().raw_scales));
    EXPECT_TRUE(bits_equal(back.params().raw_rotations, gs.params().raw_rotations));
    EXPECT_TRUE(bits_equal(back.params().raw_opacities, gs.params().raw_opacities));
    EXPECT_TRUE(bits_equal(back.params().sh_coeffs, gs.params().sh_coeffs));
    EXPECT_TRUE(bits_equal(back.params().raw_authenticity, gs.params().raw_authenticity));
    std::filesystem::remove_all(dir);
}

TEST(Checkpoint, EmptySetRoundTrips) {
    const GaussianSet gs(2);
    const auto bytes = encode_checkpoint(gs);
    const auto back = decode_checkpoint({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
    EXPECT_EQ(back.size(), 0u);
    EXPECT_EQ(back.sh_degree(), 2);
    EXPECT_NO_THROW(back.validate());
}

CheckpointErrorKind decode_error(const std::string& bytes) {
    try {
        decode_checkpoint({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
    } catch (const CheckpointError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "decode succeeded";
    return CheckpointErrorKind::Io;
}

TEST(Checkpoint, DistinctLoadErrors) {
    const auto good = encode_checkpoint(random_set(4, 1, 2));
    EXPECT_EQ(decode_error(good.substr(0, good.size() - 3)), CheckpointErrorKind::Truncated);
    EXPECT_EQ(decode_error(good.substr(0, 10)), CheckpointErrorKind::Truncated);

    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_EQ(decode_error(bad_magic), CheckpointErrorKind::BadMagic);

    auto bad_version = good;
    bad_version[4] = 99;
    EXPECT_EQ(decode_error(bad_version), CheckpointErrorKind::VersionMismatch);

    auto bad_degree = good;
    bad_degree[12] = 7;
    EXPECT_EQ(decode_error(bad_degree), CheckpointErrorKind::BadDegree);

    // N larger than the payload: inconsistent count.
    auto more = good;
    more[8] = 5;
    const auto kind = decode_error(more);
    EXPECT_TRUE(kind == CheckpointErrorKind::Truncated || kind == CheckpointErrorKind::CountMismatch);

    EXPECT_EQ(decode_error(good + "xx"), CheckpointErrorKind::CountMismatch);
}

TEST(Checkpoint, TruncatedFileReturnsNoSet) {
    const auto dir = testing::temp_dir("ckpt_trunc");
    save_checkpoint(random_set(10, 0, 4), dir / "a.ckpt");
    std::filesystem::resize_file(dir / "a.ckpt", 40);
    EXPECT_THROW(load_checkpoint(dir / "a.ckpt"), CheckpointError);
    EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
    std::filesystem::remove_all(dir);
}

TEST(GaussianSet, KeepIfPreservesOrderAndCongruence) {
    auto gs = random_set(6, 2, 8);
    const auto orig = gs;
    gs.keep_if({1, 0, 1, 0, 0, 1});
    ASSERT_EQ(gs.size(), 3u);
    EXPECT_NO_THROW(gs.validate());
    const std::size_t src[] = {0, 2, 5};
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(gs.position(i), orig.position(src[i]));
        EXPECT_EQ(gs.params().raw_authenticity[i], orig.params().raw_authenticity[src[i]]);
        for (int k = 0; k < gs.sh_width(); ++k) EXPECT_EQ(gs.sh(i)[k], orig.sh(src[i])[k]);
    }
}

}  // namespace
}  // namespace gags
