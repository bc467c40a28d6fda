// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gags/common.hpp"

namespace gags {

/// Per-frame training target and loss weights.
struct SupervisionFrame {
    ImageF target;   // H x W x 3
    ImageF weights;  // H x W, values in {w, 1}
    Mask mask;       // H x W, 1 = generated pixel
};

namespace detail {

inline void require_mask_matches(const ImageF& img, const Mask& m, const char* what) {
    if (!m.same_extent(img.width, img.height) || m.channels != 1)
        throw InputError(std::string(what) + ": mask does not match image dimensions");
}

}  // namespace detail

/// I'(y) = M(y) ? inpainted(y) : original(y). Pixels are copied, never mixed.
inline ImageF blend_pseudo_gt(const ImageF& original, const ImageF& inpainted, const Mask& mask) {
    if (!original.same_shape(inpainted)) throw InputError("blend_pseudo_gt: image dimensions differ");
    detail::require_mask_matches(original, mask, "blend_pseudo_gt");
    ImageF out = original;
    const int ch = original.channels;
    for (std::size_t p = 0; p < mask.data.size(); ++p) {
        if (!mask.data[p]) continue;
        std::copy_n(inpainted.data.begin() + p * ch, ch, out.data.begin() + p * ch);
    }
    return out;
}

/// w_map(y) = 1 - (1 - w) M(y).
inline ImageF weight_map(const Mask& mask, double w) {
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("generated-region weight w must lie in [0, 1]");
    ImageF out(mask.width, mask.height, 1);
    const float generated = static_cast<float>(w);
    for (std::size_t p = 0; p < mask.data.size(); ++p) out.data[p] = mask.data[p] ? generated : 1.0f;
    return out;
}

/// Builds the cached target. Without generation the masked pixels keep the
/// original content and are excluded from the loss (weight 0).
inline SupervisionFrame make_supervision(const ImageF& original, const ImageF* inpainted, const Mask& mask,
                                         double w, bool use_generation) {
    detail::require_mask_matches(original, mask, "make_supervision");
    SupervisionFrame sf;
    sf.mask = mask;
    if (use_generation) {
        if (!inpainted) throw InputError("make_supervision: inpainted frame required when generation is enabled");
        sf.target = blend_pseudo_gt(original, *inpainted, mask);
        sf.weights = weight_map(mask, w);
    } else {
        sf.target = original;
        sf.weights = weight_map(mask, 0.0);
    }
    return sf;
}

}  // namespace gags
