// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <gtest/gtest.h>

namespace gags {
namespace {

Image<double> noise(int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 0.9);
    Image<double> img(w, h, 3);
    for (auto& v : img.data) v = u(rng);
    return img;
}

Image<double> offset(const Image<double>& a, double d) {
    auto b = a;
    for (auto& v : b.data) v += d;
    return b;
}

TEST(Psnr, IdenticalIsCapped) {
    const auto a = noise(8, 8, 1);
    EXPECT_EQ(psnr(a, a), kPsnrCap);
    EXPECT_EQ(kPsnrCap, 99.0);
}

TEST(Psnr, UniformOffsetClosedForms) {
    const auto a = noise(20, 10, 2);
    EXPECT_NEAR(psnr(a, offset(a, 0.1)), 20.0, 1e-6);
    EXPECT_NEAR(psnr(a, offset(a, 0.05)), 10.0 * std::log10(1.0 / 0.0025), 1e-6);
    EXPECT_NEAR(psnr(a, offset(a, 0.05)), 26.02, 0.001);
}

TEST(Psnr, FullMaskEqualsFullFrame) {
    const auto a = noise(15, 11, 3), b = noise(15, 11, 4);
    const Mask full(15, 11, 1, 1);
    EXPECT_NEAR(psnr(a, b, &full), psnr(a, b), 1e-6);
    const Mask none(15, 11, 1, 0);
    EXPECT_NEAR(psnr(a, b, &none, MaskMode::Outside), psnr(a, b), 1e-6);
}

TEST(Psnr, EmptySelectionIsError) {
    const auto a = noise(4, 4, 5);
    const Mask none(4, 4, 1, 0);
    EXPECT_THROW(psnr(a, a, &none), InputError);
}

TEST(Psnr, TwoByTwoToy) {
    // Left column error 0.1 in every channel, right column 0.3.
    Image<double> a(2, 2, 3, 0.5), b(2, 2, 3, 0.5);
    for (int y = 0; y < 2; ++y)
        for (int c = 0; c < 3; ++c) {
            b.at(0, y, c) = 0.6;
            b.at(1, y, c) = 0.2;
        }
    Mask left(2, 2, 1, 0);
    left.at(0, 0) = left.at(0, 1) = 1;
    EXPECT_NEAR(mse(a, b, &left), 0.01, 1e-15);
    EXPECT_NEAR(mse(a, b, &left, MaskMode::Outside), 0.09, 1e-15);
    EXPECT_NEAR(mse(a, b), 0.05, 1e-15);
    EXPECT_NEAR(psnr(a, b, &left), 20.0, 1e-9);
    EXPECT_NEAR(psnr(a, b, &left, MaskMode::Outside), 10.0 * std::log10(1.0 / 0.09), 1e-9);
}

TEST(Psnr, Symmetric) {
    const auto a = noise(9, 9, 6), b = noise(9, 9, 7);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
}

TEST(SsimMetric, IdenticalIsOneAndSymmetric) {
    const auto a = noise(30, 20, 8), b = noise(30, 20, 9);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
    EXPECT_GE(ssim(a, b), 0.0);
    EXPECT_LE(ssim(a, b), 1.0);
}

class SequenceEval : public ::testing::Test {
protected:
    void SetUp() override {
        std::mt19937_64 rng(10);
        intr_ = testing::camera(32, 24, 30.0);
        gs_ = testing::random_scene<float>(rng, 80, 1, 32, 24, 30.0);
        for (int i = 0; i < 3; ++i) {
            EvalFrame f;
            f.index = i;
            f.intrinsics = intr_;
            f.ground_truth = render(gs_, f.pose, intr_).color;
            frames_.push_back(f);
        }
    }

    CameraIntrinsics intr_;
    GaussianSet gs_{1};
    std::vector<EvalFrame> frames_;
};

TEST_F(SequenceEval, SelfEvaluationIsCapped) {
    const auto r = evaluate_sequence(gs_, frames_, {});
    EXPECT_EQ(r.frame_count, 3u);
    EXPECT_EQ(r.mean_psnr, kPsnrCap);
    EXPECT_NEAR(r.mean_ssim, 1.0, 1e-9);
    EXPECT_FALSE(r.mean_masked_psnr.has_value());
}

TEST_F(SequenceEval, AllZeroMasksOmitOccludedMetrics) {
    for (auto& f : frames_) f.mask = Mask(32, 24, 1, 0);
    const auto r = evaluate_sequence(gs_, frames_, {});
    EXPECT_FALSE(r.mean_masked_psnr.has_value());
    EXPECT_EQ(r.masked_frame_count, 0u);
    EXPECT_TRUE(r.to_json()["aggregate"]["occluded_psnr"].is_null());
}

TEST_F(SequenceEval, InjectedUniformErrorGivesClosedForm) {
    // GT = render + 0.05 everywhere, represented exactly enough in float.
    RenderSettings rs;
    rs.background = {0.3, 0.3, 0.3};
    for (auto& f : frames_) {
        f.ground_truth = render(gs_, f.pose, intr_, rs).color;
        for (auto& v : f.ground_truth->data) v += 0.05f;
        f.mask = Mask(32, 24, 1, 0);
        f.mask->at(3, 4) = 1;
    }
    const auto r = evaluate_sequence(gs_, frames_, rs);
    // Float storage of the offset limits agreement to ~1e-5 dB.
    EXPECT_NEAR(r.mean_psnr, 10.0 * std::log10(1.0 / 0.0025), 1e-4);
    ASSERT_TRUE(r.mean_masked_psnr.has_value());
    EXPECT_NEAR(*r.mean_masked_psnr, 10.0 * std::log10(1.0 / 0.0025), 1e-4);
}

TEST_F(SequenceEval, MissingGroundTruthIsSkippedAndCounted) {
    frames_[1].ground_truth.reset();
    const auto r = evaluate_sequence(gs_, frames_, {});
    EXPECT_EQ(r.frame_count, 2u);
    EXPECT_EQ(r.skipped, 1u);
}

TEST_F(SequenceEval, AggregateIsMeanOfRows) {
    for (std::size_t i = 0; i < frames_.size(); ++i) {
        for (auto& v : frames_[i].ground_truth->data) v = std::min(1.0f, v + 0.02f * float(i + 1));
        frames_[i].mask = Mask(32, 24, 1, 0);
        for (int x = 0; x < 10; ++x) frames_[i].mask->at(x, 5) = i != 2;
    }
    const auto r = evaluate_sequence(gs_, frames_, {});
    double p = 0, s = 0, m = 0;
    for (const auto& f : r.frames) {
        p += f.psnr;
        s += f.ssim;
        if (f.masked_psnr) m += *f.masked_psnr;
    }
    EXPECT_NEAR(r.mean_psnr, p / 3, 1e-12);
    EXPECT_NEAR(r.mean_ssim, s / 3, 1e-12);
    EXPECT_EQ(r.masked_frame_count, 2u);
    EXPECT_NEAR(*r.mean_masked_psnr, m / 2, 1e-12);
    const auto csv = r.to_csv();
    EXPECT_NE(csv.find("frame,psnr,ssim,occluded_psnr"), std::string::npos);
}

}  // namespace
}  // namespace gags
