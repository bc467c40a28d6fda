// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gags/common.hpp"

namespace gags {

struct LossConfig {
    double lambda_l1 = 0.8;
    double lambda_ssim = 0.2;
    /// Weight of generated (masked) pixels in the L1 term.
    double generated_weight = 0.5;
    int ssim_window = 11;
    double ssim_sigma = 1.5;

    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        if (lambda_l1 < 0.0 || lambda_ssim < 0.0) out.emplace_back("loss weights must be non-negative");
        if (!(lambda_l1 + lambda_ssim > 0.0)) out.emplace_back("lambda_l1 + lambda_ssim must be positive");
        if (generated_weight < 0.0 || generated_weight > 1.0) out.emplace_back("loss.w must lie in [0, 1]");
        if (ssim_window < 1 || ssim_window % 2 == 0) out.emplace_back("ssim window must be a positive odd size");
        if (!(ssim_sigma > 0.0)) out.emplace_back("ssim sigma must be positive");
        return out;
    }
};

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

namespace detail {

inline void require_same_shape(const auto& a, const auto& b, const char* what) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw InputError(std::string(what) + ": image shape mismatch");
}

template <typename T>
std::vector<T> gaussian_kernel(int size, double sigma) {
    std::vector<T> k(size);
    const int r = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - r;
        k[i] = static_cast<T>(std::exp(-d * d / (2.0 * sigma * sigma)));
        sum += k[i];
    }
    for (auto& v : k) v = static_cast<T>(v / sum);
    return k;
}

/// Separable convolution of one plane with replicated borders.
template <typename T>
void blur_plane(const std::vector<T>& src, std::vector<T>& dst, int w, int h, const std::vector<T>& k,
                std::vector<T>& tmp) {
    const int r = static_cast<int>(k.size()) / 2;
    const int taps = static_cast<int>(k.size());
    tmp.assign(src.size(), T(0));
    dst.assign(src.size(), T(0));
    std::vector<T> padded(static_cast<std::size_t>(w + 2 * r));
    for (int y = 0; y < h; ++y) {
        const T* row = src.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w + 2 * r; ++x) padded[x] = row[std::clamp(x - r, 0, w - 1)];
        T* out = tmp.data() + static_cast<std::size_t>(y) * w;
        for (int i = 0; i < taps; ++i) {
            const T ki = k[i];
            const T* in = padded.data() + i;
            for (int x = 0; x < w; ++x) out[x] += ki * in[x];
        }
    }
    for (int y = 0; y < h; ++y) {
        T* out = dst.data() + static_cast<std::size_t>(y) * w;
        for (int i = 0; i < taps; ++i) {
            const T ki = k[i];
            const T* in = tmp.data() + static_cast<std::size_t>(std::clamp(y + i - r, 0, h - 1)) * w;
            for (int x = 0; x < w; ++x) out[x] += ki * in[x];
        }
    }
}

/// Adjoint of blur_plane.
template <typename T>
void blur_plane_adjoint(const std::vector<T>& src, std::vector<T>& dst, int w, int h, const std::vector<T>& k,
                        std::vector<T>& tmp) {
    const int r = static_cast<int>(k.size()) / 2;
    const int taps = static_cast<int>(k.size());
    tmp.assign(src.size(), T(0));
    dst.assign(src.size(), T(0));
    for (int y = 0; y < h; ++y) {
        const T* in = src.data() + static_cast<std::size_t>(y) * w;
        for (int i = 0; i < taps; ++i) {
            const T ki = k[i];
            T* out = tmp.data() + static_cast<std::size_t>(std::clamp(y + i - r, 0, h - 1)) * w;
            for (int x = 0; x < w; ++x) out[x] += ki * in[x];
        }
    }
    std::vector<T> padded(static_cast<std::size_t>(w + 2 * r));
    for (int y = 0; y < h; ++y) {
        std::fill(padded.begin(), padded.end(), T(0));
        const T* in = tmp.data() + static_cast<std::size_t>(y) * w;
        for (int i = 0; i < taps; ++i) {
            const T ki = k[i];
            T* out = padded.data() + i;
            for (int x = 0; x < w; ++x) out[x] += ki * in[x];
        }
        T* out = dst.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w + 2 * r; ++x) out[std::clamp(x - r, 0, w - 1)] += padded[x];
    }
}

template <typename T>
std::vector<T> channel_plane(const Image<T>& img, int c) {
    std::vector<T> p(img.pixel_count());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = img.data[i * img.channels + c];
    return p;
}

/// Mean SSIM over all pixels and channels; optionally dMeanSSIM/da.
template <typename T>
T ssim_impl(const Image<T>& a, const Image<T>& b, int window, double sigma, Image<T>* grad_a) {
    const int w = a.width, h = a.height;
    const auto k = gaussian_kernel<T>(window, sigma);
    const T c1 = T(kSsimC1), c2 = T(kSsimC2);
    const std::size_t np = a.pixel_count();
    const T inv_count = T(1) / T(np * a.channels);
    if (grad_a) *grad_a = Image<T>(w, h, a.channels);
    std::vector<T> tmp, mx, my, exx, eyy, exy, sq, work;
    std::vector<T> d_m(np), d_xx(np), d_xy(np), back;
    T total = T(0);
    for (int c = 0; c < a.channels; ++c) {
        const auto x = channel_plane(a, c);
        const auto y = channel_plane(b, c);
        blur_plane(x, mx, w, h, k, tmp);
        blur_plane(y, my, w, h, k, tmp);
        sq.resize(np);
        for (std::size_t i = 0; i < np; ++i) sq[i] = x[i] * x[i];
        blur_plane(sq, exx, w, h, k, tmp);
        for (std::size_t i = 0; i < np; ++i) sq[i] = y[i] * y[i];
        blur_plane(sq, eyy, w, h, k, tmp);
        for (std::size_t i = 0; i < np; ++i) sq[i] = x[i] * y[i];
        blur_plane(sq, exy, w, h, k, tmp);
        for (std::size_t i = 0; i < np; ++i) {
            const T mux = mx[i], muy = my[i];
            const T vx = exx[i] - mux * mux, vy = eyy[i] - muy * muy, cxy = exy[i] - mux * muy;
            const T a1 = T(2) * mux * muy + c1, a2 = T(2) * cxy + c2;
            const T b1 = mux * mux + muy * muy + c1, b2 = vx + vy + c2;
            const T s = (a1 * a2) / (b1 * b2);
            total += s;
            if (grad_a) {
                d_m[i] = s * (T(2) * muy / a1 - T(2) * muy / a2 - T(2) * mux / b1 + T(2) * mux / b2) * inv_count;
                d_xx[i] = -s / b2 * inv_count;
                d_xy[i] = T(2) * s / a2 * inv_count;
            }
        }
        if (grad_a) {
            std::vector<T> gm, gxx, gxy;
            blur_plane_adjoint(d_m, gm, w, h, k, tmp);
            blur_plane_adjoint(d_xx, gxx, w, h, k, tmp);
            blur_plane_adjoint(d_xy, gxy, w, h, k, tmp);
            for (std::size_t i = 0; i < np; ++i)
                grad_a->data[i * a.channels + c] = gm[i] + T(2) * x[i] * gxx[i] + y[i] * gxy[i];
        }
    }
    return total * inv_count;
}

}  // namespace detail

/// Mean SSIM with a Gaussian window and replicated borders (unclamped, in [-1, 1]).
template <typename T>
T ssim_value(const Image<T>& a, const Image<T>& b, int window = 11, double sigma = 1.5) {
    detail::require_same_shape(a, b, "ssim");
    return detail::ssim_impl<T>(a, b, window, sigma, nullptr);
}

/// 1 - mean SSIM, clamped to [0, 1].
template <typename T>
T ssim_loss(const Image<T>& render, const Image<T>& target, int window = 11, double sigma = 1.5) {
    return std::clamp(T(1) - ssim_value(render, target, window, sigma), T(0), T(1));
}

/// sum_y w(y) |render - target| over channels, divided by 3HW.
template <typename T>
T weighted_l1(const Image<T>& render, const Image<T>& target, const Image<T>& weights) {
    detail::require_same_shape(render, target, "weighted_l1");
    if (!weights.same_extent(render.width, render.height) || weights.channels != 1)
        throw InputError("weighted_l1: weight map shape mismatch");
    T sum = T(0);
    const int ch = render.channels;
    for (std::size_t p = 0; p < render.pixel_count(); ++p) {
        T acc = T(0);
        for (int c = 0; c < ch; ++c) acc += std::abs(render.data[p * ch + c] - target.data[p * ch + c]);
        sum += weights.data[p] * acc;
    }
    return sum / T(render.pixel_count() * ch);
}

template <typename T>
struct LossResult {
    T total = T(0);
    T l1 = T(0);
    T ssim = T(0);  // clamped SSIM loss term
    Image<T> grad;  // dL/d(render)
};

/// lambda_l1 * L1_w + lambda_ssim * clamp(1 - SSIM, 0, 1) and its gradient.
template <typename T>
LossResult<T> total_loss(const Image<T>& render, const Image<T>& target, const Image<T>& weights,
                         const LossConfig& cfg) {
    LossResult<T> res;
    res.l1 = weighted_l1(render, target, weights);
    const T l1w = T(cfg.lambda_l1), sw = T(cfg.lambda_ssim);
    res.grad = Image<T>(render.width, render.height, render.channels);
    const int ch = render.channels;
    const T norm = T(1) / T(render.pixel_count() * ch);
    for (std::size_t p = 0; p < render.pixel_count(); ++p) {
        for (int c = 0; c < ch; ++c) {
            const T d = render.data[p * ch + c] - target.data[p * ch + c];
            const T sign = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
            res.grad.data[p * ch + c] = l1w * weights.data[p] * sign * norm;
        }
    }
    if (sw > T(0)) {
        Image<T> dssim;
        const T s = detail::ssim_impl<T>(render, target, cfg.ssim_window, cfg.ssim_sigma, &dssim);
        const T raw = T(1) - s;
        res.ssim = std::clamp(raw, T(0), T(1));
        if (raw > T(0) && raw < T(1)) {
            for (std::size_t i = 0; i < res.grad.data.size(); ++i) res.grad.data[i] -= sw * dssim.data[i];
        }
    } else {
        res.ssim = ssim_loss(render, target, cfg.ssim_window, cfg.ssim_sigma);
    }
    res.total = l1w * res.l1 + sw * res.ssim;
    return res;
}

}  // namespace gags
