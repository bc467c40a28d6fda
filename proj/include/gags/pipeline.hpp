// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// End-to-end runs: ingest -> sample -> composite -> train -> evaluate, plus
// the ablation drivers.

#include "gags/compositor.hpp"
#include "gags/config.hpp"
#include "gags/ingest.hpp"
#include "gags/metrics.hpp"
#include "gags/synth.hpp"
#include "gags/train.hpp"

#include <filesystem>
#include <fstream>

namespace gags {

inline std::vector<TrainView> make_training_views(const std::vector<FrameBundle>& bundles, const RunConfig& cfg) {
    std::vector<TrainView> views(bundles.size());
    parallel_for(bundles.size(), cfg.train.threads, [&](std::size_t i) {
        const auto& b = bundles[i];
        views[i].index = b.frame.index;
        views[i].pose = b.frame.pose;
        views[i].intrinsics = b.frame.intrinsics;
        views[i].supervision = make_supervision(b.frame.image, b.inpainted ? &*b.inpainted : nullptr, b.mask,
                                                cfg.train.loss.generated_weight, cfg.use_generation);
    });
    return views;
}

/// Primitives from the sampled depth pixels, colored by the supervision
/// targets. Authenticity starts at theta_generated inside masks and
/// theta_real elsewhere, or is pinned near 1 when the mechanism is off.
inline GaussianSet initialize_gaussians(const std::vector<FrameBundle>& bundles, const std::vector<TrainView>& views,
                                        const RunConfig& cfg, std::size_t* sampled = nullptr) {
    std::vector<FrameEstimate> frames;
    std::vector<Mask> masks;
    std::vector<ImageF> colors;
    frames.reserve(bundles.size());
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        frames.push_back(bundles[i].frame);
        masks.push_back(bundles[i].mask);
        colors.push_back(views[i].supervision.target);
    }
    SamplingParams sp = cfg.sampling;
    sp.theta_real = cfg.theta_real;
    sp.theta_generated = cfg.theta_generated;
    const auto points = select_init_points(frames, masks, sp, colors, cfg.train.threads);
    if (sampled) *sampled = points.size();
    InitParams ip = cfg.init;
    ip.use_authenticity = cfg.use_authenticity;
    return gaussians_from_points(points, ip);
}

inline TrainConfig effective_train_config(const RunConfig& cfg) {
    TrainConfig t = cfg.train;
    t.train_authenticity = cfg.use_authenticity;
    return t;
}

struct RunOutcome {
    TrainResult train;
    std::vector<TrainView> views;
    std::size_t initial_primitives = 0;
};

inline RunOutcome run_training(const std::vector<FrameBundle>& bundles, const RunConfig& cfg,
                               const std::function<void(const nlohmann::json&)>& on_record = {}) {
    if (auto p = cfg.problems(); !p.empty()) throw ConfigError(std::move(p));
    RunOutcome out;
    out.views = make_training_views(bundles, cfg);
    auto gs = initialize_gaussians(bundles, out.views, cfg);
    out.initial_primitives = gs.size();
    out.train = train(std::move(gs), out.views, effective_train_config(cfg), on_record);
    return out;
}

/// Evaluation frames at the bundle's poses, paired with `static_%05d.png`
/// ground truth and the dynamic masks when present.
inline std::vector<EvalFrame> load_eval_frames(const std::filesystem::path& cameras_dir,
                                               const std::filesystem::path& gt_dir, bool use_masks = true) {
    const auto cams = read_cameras(cameras_dir / kCamerasFile);
    std::vector<EvalFrame> frames;
    for (const auto& c : cams) {
        EvalFrame f;
        f.index = c.index;
        f.pose = c.pose;
        f.intrinsics = c.intrinsics;
        const auto gt_path = gt_dir / frame_file("static", c.index, "png");
        if (std::filesystem::exists(gt_path)) {
            f.ground_truth = read_png(gt_path);
            if (!f.ground_truth->same_extent(c.intrinsics.width, c.intrinsics.height) ||
                f.ground_truth->channels != 3)
                throw IngestError(IngestErrorKind::DimensionMismatch, gt_path.string(),
                                  "ground truth does not match camera size");
        }
        const auto mask_path = gt_dir / frame_file("mask", c.index, "png");
        if (use_masks && std::filesystem::exists(mask_path)) {
            f.mask = read_mask(mask_path);
            if (!f.mask->same_extent(c.intrinsics.width, c.intrinsics.height))
                throw IngestError(IngestErrorKind::DimensionMismatch, mask_path.string(),
                                  "mask does not match camera size");
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

inline RenderSettings eval_render_settings(const RunConfig& cfg) {
    RenderSettings rs;
    rs.background = cfg.train.background;
    rs.threads = cfg.train.threads;
    return rs;
}

inline void write_json_lines(const std::vector<nlohmann::json>& records, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    for (const auto& r : records) out << r.dump() << '\n';
}

inline void write_text(const std::string& text, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
}

// ---------------------------------------------------------------------------
// Ablations.

struct Variant {
    std::string label;
    bool authenticity = true;
    bool generation = true;
    double theta_real = 0.9;
    double theta_generated = 0.1;
};

/// Full model and its three reductions.
inline std::vector<Variant> component_variants() {
    return {{"full", true, true},
            {"no_authenticity", false, true},
            {"no_generation", true, false},
            {"no_both", false, false}};
}

/// Authenticity initialization grid (real, generated).
inline std::vector<Variant> theta_init_variants() {
    std::vector<Variant> out;
    const std::pair<double, double> grid[] = {{0.5, 0.5}, {0.7, 0.3}, {0.8, 0.2}, {0.9, 0.1}, {0.95, 0.05}};
    for (const auto& [r, g] : grid) {
        std::ostringstream os;
        os << "theta_" << r << "_" << g;
        out.push_back({os.str(), true, true, r, g});
    }
    return out;
}

struct VariantResult {
    std::string scene;
    Variant variant;
    EvalReport report;
    std::size_t primitives = 0;
    double seconds = 0.0;
};

inline RunConfig apply_variant(RunConfig cfg, const Variant& v) {
    cfg.use_authenticity = v.authenticity;
    cfg.use_generation = v.generation;
    cfg.theta_real = v.theta_real;
    cfg.theta_generated = v.theta_generated;
    return cfg;
}

/// Trains one variant on a synthesized bundle and scores it against the
/// static ground truth at the training poses.
inline VariantResult run_variant(const std::string& scene, const std::filesystem::path& bundle_dir,
                                 const std::vector<FrameBundle>& bundles, const RunConfig& base, const Variant& v) {
    const RunConfig cfg = apply_variant(base, v);
    const auto t0 = std::chrono::steady_clock::now();
    auto outcome = run_training(bundles, cfg);
    VariantResult r;
    r.scene = scene;
    r.variant = v;
    r.primitives = outcome.train.gaussians.size();
    r.report = evaluate_sequence(outcome.train.gaussians, load_eval_frames(bundle_dir, bundle_dir),
                                 eval_render_settings(cfg));
    r.report.config = resolved_config_map(cfg);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline nlohmann::json variant_json(const VariantResult& r) {
    nlohmann::json j = {{"scene", r.scene},
                        {"variant", r.variant.label},
                        {"authenticity", r.variant.authenticity},
                        {"generation", r.variant.generation},
                        {"theta_real", r.variant.theta_real},
                        {"theta_generated", r.variant.theta_generated},
                        {"psnr", r.report.mean_psnr},
                        {"ssim", r.report.mean_ssim},
                        {"primitives", r.primitives}};
    j["occluded_psnr"] = r.report.mean_masked_psnr ? nlohmann::json(*r.report.mean_masked_psnr) : nlohmann::json();
    return j;
}

/// Plain-text comparison table, one row per run.
inline std::string comparison_table(const std::vector<VariantResult>& rows) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%-10s %-20s %8s %8s %8s %10s\n", "scene", "variant", "psnr", "ssim",
                  "occ_psnr", "primitives");
    os << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%-10s %-20s %8.3f %8.4f %8.3f %10zu\n", r.scene.c_str(),
                      r.variant.label.c_str(), r.report.mean_psnr, r.report.mean_ssim,
                      r.report.mean_masked_psnr.value_or(std::nan("")), r.primitives);
        os << line;
    }
    return os.str();
}

}  // namespace gags
