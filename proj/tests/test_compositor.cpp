// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#include "support.hpp"

#include <gtest/gtest.h>

namespace gags {
namespace {

ImageF noise_image(int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    ImageF img(w, h, 3);
    for (auto& v : img.data) v = u(rng);
    return img;
}

Mask checkerboard(int w, int h) {
    Mask m(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.at(x, y) = std::uint8_t((x + y) % 2);
    return m;
}

bool bit_equal(const ImageF& a, const ImageF& b) {
    return a.same_shape(b) && std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

TEST(BlendPseudoGt, EmptyMaskKeepsOriginal) {
    const auto a = noise_image(17, 9, 1), b = noise_image(17, 9, 2);
    EXPECT_TRUE(bit_equal(blend_pseudo_gt(a, b, Mask(17, 9, 1, 0)), a));
}

TEST(BlendPseudoGt, FullMaskTakesInpainted) {
    const auto a = noise_image(17, 9, 1), b = noise_image(17, 9, 2);
    EXPECT_TRUE(bit_equal(blend_pseudo_gt(a, b, Mask(17, 9, 1, 1)), b));
}

TEST(BlendPseudoGt, CheckerboardCopiesEachSource) {
    const auto a = noise_image(16, 12, 3), b = noise_image(16, 12, 4);
    const auto m = checkerboard(16, 12);
    const auto out = blend_pseudo_gt(a, b, m);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) {
                const float want = m.at(x, y) ? b.at(x, y, c) : a.at(x, y, c);
                EXPECT_EQ(std::memcmp(&out.at(x, y, c), &want, sizeof(float)), 0);
            }
}

TEST(BlendPseudoGt, IdempotentAndChannelwise) {
    const auto a = noise_image(8, 8, 5), b = noise_image(8, 8, 6);
    const auto m = checkerboard(8, 8);
    const auto once = blend_pseudo_gt(a, b, m);
    EXPECT_TRUE(bit_equal(blend_pseudo_gt(once, b, m), once));
    EXPECT_TRUE(bit_equal(blend_pseudo_gt(a, b, m), once));
}

TEST(BlendPseudoGt, DimensionMismatchRejected) {
    EXPECT_ANY_THROW(blend_pseudo_gt(noise_image(8, 8, 1), noise_image(8, 7, 2), Mask(8, 8, 1, 0)));
    EXPECT_ANY_THROW(blend_pseudo_gt(noise_image(8, 8, 1), noise_image(8, 8, 2), Mask(7, 8, 1, 0)));
}

TEST(WeightMap, ExactValues) {
    for (double w : {0.0, 0.5, 1.0}) {
        for (std::uint8_t fill : {std::uint8_t(0), std::uint8_t(1)}) {
            const auto wm = weight_map(Mask(6, 5, 1, fill), w);
            const float want = fill ? float(w) : 1.0f;
            for (float v : wm.data) EXPECT_EQ(v, want) << "w=" << w << " M=" << int(fill);
        }
        const auto m = checkerboard(6, 5);
        const auto wm = weight_map(m, w);
        for (std::size_t p = 0; p < m.data.size(); ++p)
            EXPECT_EQ(wm.data[p], float(1.0 - (1.0 - w) * m.data[p]));
    }
}

TEST(WeightMap, OutOfRangeIsConfigError) {
    EXPECT_THROW(weight_map(Mask(2, 2, 1, 0), -0.01), ConfigError);
    EXPECT_THROW(weight_map(Mask(2, 2, 1, 0), 1.5), ConfigError);
    EXPECT_THROW(weight_map(Mask(2, 2, 1, 0), std::nan("")), ConfigError);
}

TEST(Supervision, WithoutGenerationMasksOutOccluders) {
    const auto a = noise_image(8, 8, 7), b = noise_image(8, 8, 8);
    const auto m = checkerboard(8, 8);
    const auto sf = make_supervision(a, &b, m, 0.5, false);
    EXPECT_TRUE(bit_equal(sf.target, a));
    for (std::size_t p = 0; p < m.data.size(); ++p) EXPECT_EQ(sf.weights.data[p], m.data[p] ? 0.0f : 1.0f);
    const auto full = make_supervision(a, &b, m, 0.5, true);
    EXPECT_TRUE(bit_equal(full.target, blend_pseudo_gt(a, b, m)));
    EXPECT_TRUE(bit_equal(full.weights, weight_map(m, 0.5)));
    EXPECT_ANY_THROW(make_supervision(a, nullptr, m, 0.5, true));
}

}  // namespace
}  // namespace gags
