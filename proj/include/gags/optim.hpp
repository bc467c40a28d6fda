// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gags/common.hpp"
#include "gags/model.hpp"
#include "gags/renderer.hpp"

#include <random>

namespace gags {

/// Per-group learning rates. The position rate is multiplied by the scene
/// extent and decays exponentially to `position_final_ratio` of its start.
struct LearningRates {
    double position = 0.00016;
    double position_final_ratio = 0.01;
    bool position_decay = true;
    double scale = 0.005;
    double rotation = 0.001;
    double opacity = 0.05;
    double authenticity = 0.05;
    double color = 0.0025;
    /// Higher-order SH coefficients use color / color_rest_divisor.
    double color_rest_divisor = 20.0;
};

/// Effective rates for one step, one per parameter array.
struct StepRates {
    double position = 0.0;
    double scale = 0.0;
    double rotation = 0.0;
    double opacity = 0.0;
    double color_dc = 0.0;
    double color_rest = 0.0;
    double authenticity = 0.0;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
};

template <typename T>
struct AdamState {
    ParamArrays<T> first;
    ParamArrays<T> second;
    long step = 0;
    long skipped = 0;

    void reset(std::size_t n, int sh_width) {
        first.resize(n, sh_width);
        second.resize(n, sh_width);
        step = 0;
    }
};

template <typename T>
bool all_finite(const ParamArrays<T>& p, int sh_width) {
    bool ok = true;
    p.for_each_array(sh_width, [&ok](const std::vector<T>& a, int) {
        for (T v : a) ok = ok && std::isfinite(v);
    });
    return ok;
}

namespace detail {

template <typename T>
void adam_update(std::vector<T>& param, const std::vector<T>& grad, std::vector<T>& m, std::vector<T>& v,
                 std::size_t begin, std::size_t end, double lr, const AdamConfig& cfg, double bc1, double bc2) {
    const T b1 = T(cfg.beta1), b2 = T(cfg.beta2), eps = T(cfg.eps);
    const T step = T(lr / bc1);
    const T inv_sqrt_bc2 = T(1.0 / std::sqrt(bc2));
    for (std::size_t k = begin; k < end; ++k) {
        const T g = grad[k];
        m[k] = b1 * m[k] + (T(1) - b1) * g;
        v[k] = b2 * v[k] + (T(1) - b2) * g * g;
        param[k] -= step * m[k] / (std::sqrt(v[k]) * inv_sqrt_bc2 + eps);
    }
}

}  // namespace detail

/// One bias-corrected Adam step over every parameter group. Returns false and
/// leaves everything untouched when a gradient is non-finite.
/// `active_sh_width` (coefficients per primitive, -1 for all) lets callers
/// skip SH bands that have never received a gradient; for those the moments
/// are zero and the update is exactly zero, so skipping changes nothing.
template <typename T>
bool adam_step(BasicGaussianSet<T>& gs, const ParamArrays<T>& grads, AdamState<T>& state, const StepRates& rates,
               const AdamConfig& cfg = {}, int active_sh_width = -1) {
    const int shw = gs.sh_width();
    if (state.first.raw_opacities.size() != gs.size() || grads.raw_opacities.size() != gs.size())
        throw InputError("adam_step: optimizer state or gradients do not match the parameter set");
    if (!all_finite(grads, shw)) {
        ++state.skipped;
        return false;
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
    auto& p = gs.params();
    auto& m = state.first;
    auto& v = state.second;
    auto run = [&](std::vector<T>& param, const std::vector<T>& g, std::vector<T>& mm, std::vector<T>& vv,
                   double lr) {
        if (lr == 0.0) return;
        detail::adam_update(param, g, mm, vv, 0, param.size(), lr, cfg, bc1, bc2);
    };
    run(p.positions, grads.positions, m.positions, v.positions, rates.position);
    run(p.raw_scales, grads.raw_scales, m.raw_scales, v.raw_scales, rates.scale);
    run(p.raw_rotations, grads.raw_rotations, m.raw_rotations, v.raw_rotations, rates.rotation);
    run(p.raw_opacities, grads.raw_opacities, m.raw_opacities, v.raw_opacities, rates.opacity);
    run(p.raw_authenticity, grads.raw_authenticity, m.raw_authenticity, v.raw_authenticity, rates.authenticity);
    const std::size_t n = gs.size();
    const int live = active_sh_width < 0 ? shw : std::min(active_sh_width, shw);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = i * static_cast<std::size_t>(shw);
        if (rates.color_dc != 0.0)
            detail::adam_update(p.sh_coeffs, grads.sh_coeffs, m.sh_coeffs, v.sh_coeffs, off, off + 3, rates.color_dc,
                                cfg, bc1, bc2);
        if (rates.color_rest != 0.0 && live > 3)
            detail::adam_update(p.sh_coeffs, grads.sh_coeffs, m.sh_coeffs, v.sh_coeffs, off + 3, off + live,
                                rates.color_rest, cfg, bc1, bc2);
    }
    return true;
}

// ---------------------------------------------------------------------------
// Density control.

struct DensifyConfig {
    /// Threshold on the mean view-space positional gradient norm (NDC units).
    double grad_threshold = 2e-4;
    int interval = 100;
    int start_iteration = 500;
    /// Densification stops after this fraction of the iteration budget.
    double until_fraction = 0.5;
    /// Primitives larger than this fraction of the scene extent are split, smaller ones cloned.
    double percent_dense = 0.01;
    double prune_opacity = 0.005;
    /// Upper bound on the primitive count after densification; 0 means unbounded.
    std::size_t max_primitives = 0;

    std::vector<std::string> problems() const {
        std::vector<std::string> out;
        if (!(grad_threshold > 0.0)) out.emplace_back("densify.grad_threshold must be positive");
        if (interval <= 0) out.emplace_back("densify.interval must be positive");
        if (!(percent_dense > 0.0)) out.emplace_back("densify.percent_dense must be positive");
        if (!(prune_opacity > 0.0)) out.emplace_back("densify.prune_opacity must be positive");
        if (until_fraction < 0.0 || until_fraction > 1.0) out.emplace_back("densify.until_fraction must lie in [0, 1]");
        return out;
    }
};

struct DensifyStats {
    std::vector<double> grad_accum;
    std::vector<int> views;

    void reset(std::size_t n) {
        grad_accum.assign(n, 0.0);
        views.assign(n, 0);
    }

    template <typename T>
    void accumulate(const GradBuffer<T>& g) {
        for (std::size_t i = 0; i < grad_accum.size(); ++i) {
            if (!g.visible[i]) continue;
            grad_accum[i] += g.screen_grad_norm[i];
            ++views[i];
        }
    }
};

struct DensifyResult {
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
};

/// Clones small high-gradient primitives, splits large ones into two children
/// (scale / 1.6, positions drawn from the parent footprint) and prunes
/// primitives whose activated opacity is below the threshold. Children copy
/// every raw parameter of their parent, authenticity included. Optimizer
/// moments of new primitives start at zero.
template <typename T>
DensifyResult densify_and_prune(BasicGaussianSet<T>& gs, AdamState<T>& state, DensifyStats& stats,
                                const DensifyConfig& cfg, double scene_extent, std::mt19937_64& rng,
                                bool grow = true) {
    const std::size_t n = gs.size();
    const int shw = gs.sh_width();
    DensifyResult res;
    if (stats.grad_accum.size() != n) stats.reset(n);

    std::vector<std::uint32_t> clone_ids, split_ids;
    if (grow) {
        const double size_limit = cfg.percent_dense * scene_extent;
        std::vector<std::pair<double, std::uint32_t>> candidates;
        for (std::uint32_t i = 0; i < n; ++i) {
            const double avg = stats.views[i] > 0 ? stats.grad_accum[i] / stats.views[i] : 0.0;
            if (avg >= cfg.grad_threshold) candidates.emplace_back(avg, i);
        }
        if (cfg.max_primitives > 0) {
            // Highest gradients first; every split and clone adds one primitive.
            const std::size_t budget = cfg.max_primitives > n ? cfg.max_primitives - n : 0;
            if (candidates.size() > budget) {
                std::stable_sort(candidates.begin(), candidates.end(),
                                 [](const auto& a, const auto& b) { return a.first > b.first; });
                candidates.resize(budget);
                std::sort(candidates.begin(), candidates.end(),
                          [](const auto& a, const auto& b) { return a.second < b.second; });
            }
        }
        for (const auto& [avg, i] : candidates) {
            (void)avg;
            if (gs.scale(i).maxCoeff() <= T(size_limit)) clone_ids.push_back(i);
            else split_ids.push_back(i);
        }
    }

    auto& p = gs.params();
    auto append_copy = [&](std::uint32_t src) {
        auto copy_row = [src](std::vector<T>& a, int width) {
            const std::size_t off = static_cast<std::size_t>(src) * width;
            for (int k = 0; k < width; ++k) a.push_back(a[off + k]);
        };
        p.for_each_array(shw, copy_row);
    };

    for (std::uint32_t i : clone_ids) append_copy(i);
    res.cloned = clone_ids.size();

    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::uint32_t i : split_ids) {
        const Vec3<T> s = gs.scale(i);
        const Mat3<T> r = rotation_from_quaternion<T>(gs.rotation(i));
        const Vec3<T> mu = gs.position(i);
        for (int child = 0; child < 2; ++child) {
            Vec3<T> sample;
            for (int k = 0; k < 3; ++k) sample[k] = T(normal(rng)) * s[k];
            const std::size_t at = gs.size();
            append_copy(i);
            const Vec3<T> pos = mu + r * sample;
            for (int k = 0; k < 3; ++k) {
                p.positions[3 * at + k] = pos[k];
                p.raw_scales[3 * at + k] = std::log(s[k] / T(1.6));
            }
        }
    }
    res.split = split_ids.size();

    const std::size_t grown = gs.size();
    AdamState<T> next;
    next.step = state.step;
    next.skipped = state.skipped;
    next.first = state.first;
    next.second = state.second;
    auto pad = [grown](std::vector<T>& a, int width) { a.resize(grown * width, T(0)); };
    next.first.for_each_array(shw, pad);
    next.second.for_each_array(shw, pad);

    std::vector<char> keep(grown, 1);
    for (std::uint32_t i : split_ids) keep[i] = 0;
    for (std::size_t i = 0; i < grown; ++i) {
        if (keep[i] && gs.opacity(i) < T(cfg.prune_opacity)) {
            keep[i] = 0;
            ++res.pruned;
        }
    }
    gs.keep_if(keep);
    BasicGaussianSet<T>::compact(next.first, keep, shw);
    BasicGaussianSet<T>::compact(next.second, keep, shw);
    state = std::move(next);
    stats.reset(gs.size());
    return res;
}

}  // namespace gags
