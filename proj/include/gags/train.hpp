// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gags/compositor.hpp"
#include "gags/loss.hpp"
#include "gags/metrics.hpp"
#include "gags/optim.hpp"
#include "gags/renderer.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <numeric>

namespace gags {

struct TrainView {
    int index = 0;
    CameraPose pose;
    CameraIntrinsics intrinsics;
    SupervisionFrame supervision;
};

struct TrainConfig {
    int iterations = 4000;
    std::uint64_t seed = 0;
    LossConfig loss;
    LearningRates lr;
    AdamConfig adam;
    DensifyConfig densify;
    bool densify_enabled = true;
    /// False freezes the authenticity parameters (no gradient step).
    bool train_authenticity = true;
    /// Active SH degree grows by one every this many iterations; 0 uses the full degree from the start.
    int sh_degree_interval = 1000;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    int threads = 1;
    int log_interval = 100;
    int checkpoint_interval = 0;
    /// Periodic checkpoints and the divergence dump go here when non-empty.
    std::filesystem::path checkpoint_dir;

    std::vector<std::string> problems() const {
        std::vector<std::string> out = loss.problems();
        for (auto& p : densify.problems()) out.push_back(std::move(p));
        if (iterations < 0) out.emplace_back("iterations must be non-negative");
        if (log_interval <= 0) out.emplace_back("log_interval must be positive");
        if (checkpoint_interval < 0) out.emplace_back("checkpoint_interval must be non-negative");
        if (sh_degree_interval < 0) out.emplace_back("sh_degree_interval must be non-negative");
        auto non_negative = [&out](double v, const char* name) {
            if (!(v >= 0.0)) out.emplace_back(std::string(name) + " must be non-negative");
        };
        non_negative(lr.position, "lr.position");
        non_negative(lr.scale, "lr.scale");
        non_negative(lr.rotation, "lr.rotation");
        non_negative(lr.opacity, "lr.opacity");
        non_negative(lr.authenticity, "lr.authenticity");
        non_negative(lr.color, "lr.color");
        if (!(lr.position_final_ratio > 0.0)) out.emplace_back("lr.position_final_ratio must be positive");
        if (!(lr.color_rest_divisor > 0.0)) out.emplace_back("lr.color_rest_divisor must be positive");
        if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) out.emplace_back("adam.beta1 must lie in [0, 1)");
        if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) out.emplace_back("adam.beta2 must lie in [0, 1)");
        if (!(adam.eps > 0.0)) out.emplace_back("adam.eps must be positive");
        return out;
    }
};

struct TrainResult {
    GaussianSet gaussians;
    /// Deterministic records: periodic loss records and a final per-frame block.
    std::vector<nlohmann::json> log;
    /// Wall-clock records, kept apart so the main log stays reproducible.
    std::vector<nlohmann::json> timing;
    long skipped_steps = 0;
    DensifyResult densify_totals;
};

/// Radius of the camera centres around their mean, padded by 10%.
inline double scene_extent(const std::vector<TrainView>& views) {
    if (views.empty()) return 1.0;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& v : views) mean += v.pose.translation;
    mean /= static_cast<double>(views.size());
    double r = 0.0;
    for (const auto& v : views) r = std::max(r, (v.pose.translation - mean).norm());
    return std::max(r, 1e-3) * 1.1;
}

inline StepRates step_rates(const LearningRates& lr, double extent, int iteration, int iterations,
                            bool train_authenticity) {
    StepRates r;
    double pos = lr.position * extent;
    if (lr.position_decay && iterations > 1) {
        const double t = std::clamp(double(iteration) / double(iterations - 1), 0.0, 1.0);
        pos *= std::pow(lr.position_final_ratio, t);
    }
    r.position = pos;
    r.scale = lr.scale;
    r.rotation = lr.rotation;
    r.opacity = lr.opacity;
    r.color_dc = lr.color;
    r.color_rest = lr.color / lr.color_rest_divisor;
    r.authenticity = train_authenticity ? lr.authenticity : 0.0;
    return r;
}

/// Training order: a fresh seeded permutation of the views for every epoch.
class FrameSchedule {
public:
    FrameSchedule(std::size_t count, std::uint64_t seed) : order_(count), cursor_(count), rng_(seed) {}

    std::size_t next() {
        if (cursor_ == order_.size()) {
            std::iota(order_.begin(), order_.end(), std::size_t{0});
            for (std::size_t i = order_.size(); i > 1; --i) {
                std::uniform_int_distribution<std::size_t> pick(0, i - 1);
                std::swap(order_[i - 1], order_[pick(rng_)]);
            }
            cursor_ = 0;
        }
        return order_[cursor_++];
    }

private:
    std::vector<std::size_t> order_;
    std::size_t cursor_;
    std::mt19937_64 rng_;
};

inline std::string checkpoint_name(int iteration) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "iter_%06d.ckpt", iteration);
    return buf;
}

/// Fits the set to the supervision frames. Each iteration renders one view,
/// evaluates the weighted loss against its target and takes one Adam step;
/// density control runs at its configured cadence.
inline TrainResult train(GaussianSet gs, const std::vector<TrainView>& views, const TrainConfig& cfg,
                         const std::function<void(const nlohmann::json&)>& on_record = {}) {
    if (auto p = cfg.problems(); !p.empty()) throw ConfigError(std::move(p));
    if (views.empty() && cfg.iterations > 0) throw InputError("train: no training views");
    for (const auto& v : views) {
        if (!v.supervision.target.same_extent(v.intrinsics.width, v.intrinsics.height) ||
            !v.supervision.weights.same_extent(v.intrinsics.width, v.intrinsics.height))
            throw InputError("train: supervision does not match camera size for frame " + std::to_string(v.index));
    }
    TrainResult result;
    auto emit = [&](nlohmann::json rec) {
        if (on_record) on_record(rec);
        result.log.push_back(std::move(rec));
    };

    const double extent = scene_extent(views);
    const int shw = gs.sh_width();
    AdamState<float> adam;
    adam.reset(gs.size(), shw);
    DensifyStats stats;
    stats.reset(gs.size());
    FrameSchedule schedule(views.size(), cfg.seed);
    std::mt19937_64 densify_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const int densify_until = static_cast<int>(std::floor(cfg.densify.until_fraction * cfg.iterations));

    RenderSettings rs;
    rs.background = cfg.background;
    rs.threads = cfg.threads;
    rs.use_authenticity = true;

    int bad_losses = 0;
    double last_finite = std::numeric_limits<double>::quiet_NaN();
    const auto t0 = std::chrono::steady_clock::now();
    for (int it = 1; it <= cfg.iterations; ++it) {
        const auto& view = views[schedule.next()];
        rs.sh_degree = cfg.sh_degree_interval > 0
            ? std::min(gs.sh_degree(), (it - 1) / cfg.sh_degree_interval)
            : gs.sh_degree();
        const auto out = render(gs, view.pose, view.intrinsics, rs);
        const auto loss = total_loss(out.color, view.supervision.target, view.supervision.weights, cfg.loss);

        if (!std::isfinite(loss.total)) {
            ++bad_losses;
            ++result.skipped_steps;
            log_warning("non-finite loss at iteration " + std::to_string(it));
            if (bad_losses >= 2) {
                std::string msg = "training diverged at iteration " + std::to_string(it) + " (frame " +
                                  std::to_string(view.index) + ", " + std::to_string(gs.size()) +
                                  " primitives, last finite loss " + std::to_string(last_finite) + ")";
                if (!cfg.checkpoint_dir.empty()) {
                    std::filesystem::create_directories(cfg.checkpoint_dir);
                    const auto dump = cfg.checkpoint_dir / "diverged.ckpt";
                    save_checkpoint(gs, dump);
                    msg += "; state written to " + dump.string();
                }
                throw DivergenceError(msg);
            }
            continue;
        }
        bad_losses = 0;
        last_finite = loss.total;

        auto grads = render_backward(gs, view.pose, view.intrinsics, out, loss.grad, cfg.threads);
        if (!cfg.train_authenticity) std::fill(grads.params.raw_authenticity.begin(),
                                               grads.params.raw_authenticity.end(), 0.0f);
        const bool densifying = cfg.densify_enabled && it <= densify_until;
        if (densifying) stats.accumulate(grads);
        const auto rates = step_rates(cfg.lr, extent, it - 1, cfg.iterations, cfg.train_authenticity);
        if (!adam_step(gs, grads.params, adam, rates, cfg.adam, 3 * sh_basis_count(rs.sh_degree))) {
            ++result.skipped_steps;
            log_warning("non-finite gradient at iteration " + std::to_string(it) + "; step skipped");
        }

        if (densifying && it >= cfg.densify.start_iteration && it % cfg.densify.interval == 0) {
            const auto d = densify_and_prune(gs, adam, stats, cfg.densify, extent, densify_rng);
            result.densify_totals.cloned += d.cloned;
            result.densify_totals.split += d.split;
            result.densify_totals.pruned += d.pruned;
        }

        if (it % cfg.log_interval == 0 || it == 1 || it == cfg.iterations) {
            emit({{"iter", it},
                  {"frame", view.index},
                  {"loss", loss.total},
                  {"l1", loss.l1},
                  {"ssim_loss", loss.ssim},
                  {"psnr", psnr(out.color, view.supervision.target)},
                  {"primitives", gs.size()}});
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            result.timing.push_back({{"iter", it}, {"seconds", secs}});
        }
        if (cfg.checkpoint_interval > 0 && !cfg.checkpoint_dir.empty() && it % cfg.checkpoint_interval == 0) {
            std::filesystem::create_directories(cfg.checkpoint_dir);
            save_checkpoint(gs, cfg.checkpoint_dir / checkpoint_name(it));
        }
    }

    // Final per-frame fit against the supervision targets at full SH degree.
    rs.sh_degree = gs.sh_degree();
    for (const auto& v : views) {
        const auto out = render(gs, v.pose, v.intrinsics, rs);
        emit({{"final_frame", v.index}, {"psnr", psnr(out.color, v.supervision.target)}});
    }
    emit({{"done", true},
          {"iterations", cfg.iterations},
          {"primitives", gs.size()},
          {"skipped_steps", result.skipped_steps},
          {"cloned", result.densify_totals.cloned},
          {"split", result.densify_totals.split},
          {"pruned", result.densify_totals.pruned}});
    result.gaussians = std::move(gs);
    return result;
}

}  // namespace gags
