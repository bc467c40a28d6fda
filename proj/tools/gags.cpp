// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: synth, train, render, eval, ablate.

#include "gags/gags.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace gags;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kIngest = 3, kDiverged = 4 };

struct Common {
    int threads = 1;
    bool quiet = false;
    bool verbose = false;
};

struct RunFlags {
    std::string config_file;
    std::vector<std::string> overrides;
    std::string sequence;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> iterations;
    bool no_authenticity = false;
    bool no_generation = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--config", f.config_file, "key = value config file");
    cmd->add_option("--set", f.overrides, "override one config key (key=value), repeatable");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--iterations", f.iterations, "optimization steps");
    cmd->add_flag("--no-authenticity", f.no_authenticity, "disable the learned authenticity scalar");
    cmd->add_flag("--no-generation", f.no_generation, "exclude masked pixels instead of using inpainted content");
}

/// defaults < config file < GAGS_* environment < flags and --set.
RunConfig build_config(const RunFlags& f, const Common& common, const fs::path& sequence, const fs::path& out) {
    ConfigBuilder b;
    if (!f.config_file.empty()) b.apply_file(f.config_file);
    b.apply_environment();
    if (!sequence.empty()) b.config().sequence = fs::absolute(sequence).lexically_normal().string();
    if (!out.empty()) b.config().output = fs::absolute(out).lexically_normal().string();
    if (f.seed) b.config().train.seed = *f.seed;
    if (f.iterations) b.config().train.iterations = *f.iterations;
    if (f.no_authenticity) b.config().use_authenticity = false;
    if (f.no_generation) b.config().use_generation = false;
    b.config().train.threads = common.threads;
    for (const auto& s : f.overrides) b.apply_override(s);
    return b.finish();
}

void write_supervision(const std::vector<TrainView>& views, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& v : views) {
        write_png(v.supervision.target, dir / frame_file("target", v.index, "png"));
        write_png(v.supervision.weights, dir / frame_file("weight", v.index, "png"));
    }
}

int cmd_synth(const std::string& builtin, const std::string& spec_file, const std::string& out,
              const std::vector<std::string>& scene_overrides, const Common& common) {
    SceneSpec spec;
    if (!builtin.empty() == !spec_file.empty()) throw ConfigError("synth: give exactly one of --builtin or --spec");
    if (!builtin.empty()) {
        auto found = find_builtin(builtin);
        if (!found) throw ConfigError("synth: unknown builtin scene '" + builtin + "' (room, yard, street)");
        spec = *found;
    } else {
        spec = load_scene(spec_file);
    }
    if (!scene_overrides.empty()) {
        std::string text = scene_to_text(spec);
        for (const auto& o : scene_overrides) text += o + "\n";
        spec = parse_scene(text);
    }
    generate(spec, out, common.threads);
    log_info("wrote " + std::to_string(spec.frames) + " frames of '" + spec.name + "' to " + out);
    return kOk;
}

int cmd_train(const RunFlags& f, bool dump_supervision, const Common& common) {
    RunConfig cfg = build_config(f, common, f.sequence, f.out);
    // Either may come from a config file, so a resolved config.txt replays a run.
    if (cfg.sequence.empty() || cfg.output.empty()) throw ConfigError("train: --sequence and --out are required");
    const fs::path out = cfg.output;
    fs::create_directories(out);
    write_text(resolved_config_text(cfg), out / "config.txt");

    const auto bundles = load_sequence(cfg.sequence, cfg.use_generation);
    cfg.train.checkpoint_dir = out / "checkpoints";
    std::ofstream log(out / "metrics.jsonl");
    auto outcome = run_training(bundles, cfg, [&](const nlohmann::json& rec) {
        log << rec.dump() << '\n';
        log.flush();
        if (rec.contains("iter")) log_info(rec.dump());
    });
    if (dump_supervision) write_supervision(outcome.views, out / "supervision");
    save_checkpoint(outcome.train.gaussians, out / "model.ckpt");
    write_json_lines(outcome.train.timing, out / "timing.jsonl");
    log_info("trained " + std::to_string(outcome.train.gaussians.size()) + " primitives; checkpoint " +
             (out / "model.ckpt").string());
    return kOk;
}

std::vector<CameraRecord> cameras_from(const fs::path& p) {
    return read_cameras(fs::is_directory(p) ? p / kCamerasFile : p);
}

int cmd_render(const std::string& checkpoint, const std::string& cameras, const std::string& out,
               bool authenticity_map, const std::string& run_config, const std::vector<double>& background,
               const Common& common) {
    const auto gs = load_checkpoint(checkpoint);
    const auto cams = cameras_from(cameras);
    fs::create_directories(out);
    RenderSettings rs;
    rs.threads = common.threads;
    std::vector<TrainView> views;
    if (!run_config.empty()) {
        // Score against the supervision a training run with this config sees.
        ConfigBuilder b;
        b.apply_file(run_config);
        const RunConfig cfg = b.finish();
        rs.background = cfg.train.background;
        views = make_training_views(load_sequence(cfg.sequence, cfg.use_generation), cfg);
    }
    if (!background.empty()) rs.background = {background[0], background[1], background[2]};
    std::ofstream report;
    if (!views.empty()) report.open(fs::path(out) / "render_report.jsonl");
    for (const auto& c : cams) {
        const auto r = render(gs, c.pose, c.intrinsics, rs);
        write_png(r.color, fs::path(out) / frame_file("render", c.index, "png"));
        if (authenticity_map) write_png(r.authenticity, fs::path(out) / frame_file("authenticity", c.index, "png"));
        const auto it = std::find_if(views.begin(), views.end(), [&](const TrainView& v) { return v.index == c.index; });
        if (it != views.end())
            report << nlohmann::json({{"frame", c.index}, {"psnr", psnr(r.color, it->supervision.target)}}).dump()
                   << '\n';
    }
    log_info("rendered " + std::to_string(cams.size()) + " views to " + out);
    return kOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& gt, const std::string& cameras,
             const std::string& out, const std::string& csv, const std::string& mode, bool no_masks,
             const Common& common) {
    const auto gs = load_checkpoint(checkpoint);
    MaskMode mm = MaskMode::Inside;
    if (mode == "outside") mm = MaskMode::Outside;
    else if (mode != "inside") throw ConfigError("eval: --mask-mode must be inside or outside");
    const fs::path cam_dir = cameras.empty() ? fs::path(gt) : fs::path(cameras);
    auto frames = load_eval_frames(cam_dir, gt, !no_masks);
    RenderSettings rs;
    rs.threads = common.threads;
    auto report = evaluate_sequence(gs, frames, rs, mm);
    report.config = {{"checkpoint", checkpoint}, {"ground_truth", gt}, {"mask_mode", mode}};
    const std::string json = report.to_json().dump(2);
    if (out.empty()) std::cout << json << '\n';
    else write_text(json + "\n", out);
    if (!csv.empty()) write_text(report.to_csv(), csv);
    return kOk;
}

int cmd_ablate(const RunFlags& f, std::vector<std::string> scenes, const std::vector<std::string>& sequences,
               std::string grid_scene, bool skip_grid, const Common& common) {
    if (f.out.empty()) throw ConfigError("ablate: --out is required");
    const fs::path out = fs::absolute(f.out).lexically_normal();
    RunConfig base = build_config(f, common, {}, out);
    fs::create_directories(out);
    write_text(resolved_config_text(base), out / "config.txt");

    std::vector<std::pair<std::string, fs::path>> inputs;
    for (const auto& s : sequences) inputs.emplace_back(fs::path(s).filename().string(), fs::path(s));
    if (scenes.empty() && sequences.empty()) scenes = {"room", "yard", "street"};
    if (!scenes.empty()) fs::create_directories(out / "data");
    for (const auto& name : scenes) {
        auto spec = find_builtin(name);
        if (!spec) throw ConfigError("ablate: unknown builtin scene '" + name + "'");
        const fs::path dir = out / "data" / name;
        if (!fs::exists(dir / kCamerasFile)) generate(*spec, dir, common.threads);
        inputs.emplace_back(name, dir);
    }
    if (grid_scene.empty() && !inputs.empty()) grid_scene = inputs.front().first;

    std::vector<VariantResult> rows;
    std::ofstream results(out / "results.jsonl");
    auto record = [&](VariantResult r) {
        results << variant_json(r).dump() << '\n';
        results.flush();
        log_info(r.scene + " " + r.variant.label + ": occluded psnr " +
                 std::to_string(r.report.mean_masked_psnr.value_or(std::nan(""))));
        rows.push_back(std::move(r));
    };
    for (const auto& [name, dir] : inputs) {
        const auto bundles = load_sequence(dir, true);
        for (const auto& v : component_variants()) record(run_variant(name, dir, bundles, base, v));
        if (!skip_grid && name == grid_scene) {
            for (const auto& v : theta_init_variants()) {
                // The default init pair is the full model already trained above.
                const auto same = std::find_if(rows.begin(), rows.end(), [&](const VariantResult& r) {
                    return r.scene == name && r.variant.label == "full" && r.variant.theta_real == v.theta_real &&
                           r.variant.theta_generated == v.theta_generated &&
                           base.theta_real == v.theta_real && base.theta_generated == v.theta_generated;
                });
                if (same != rows.end()) {
                    VariantResult copy = *same;
                    copy.variant = v;
                    record(std::move(copy));
                } else {
                    record(run_variant(name, dir, bundles, base, v));
                }
            }
        }
    }
    const std::string table = comparison_table(rows);
    write_text(table, out / "table.txt");
    std::cout << table;
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reconstruct static scenes from videos with moving occluders using Gaussian splatting"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--threads", common.threads, "worker threads (0 = all cores)")->capture_default_str();
    app.add_flag("-q,--quiet", common.quiet, "only print errors");
    app.add_flag("-v,--verbose", common.verbose, "print progress records");

    auto* synth = app.add_subcommand("synth", "generate a synthetic paired sequence");
    std::string builtin, spec_file, synth_out;
    std::vector<std::string> scene_overrides;
    synth->add_option("--builtin", builtin, "room, yard or street");
    synth->add_option("--spec", spec_file, "scene description file");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--set", scene_overrides, "override one scene key (key=value), repeatable");

    auto* train_cmd = app.add_subcommand("train", "fit a model to a sequence");
    RunFlags train_flags;
    bool dump_supervision = false;
    train_cmd->add_option("--sequence", train_flags.sequence, "input sequence directory");
    train_cmd->add_option("--out", train_flags.out, "output directory");
    add_run_flags(train_cmd, train_flags);
    train_cmd->add_flag("--dump-supervision", dump_supervision, "write training targets and weight maps");

    auto* render_cmd = app.add_subcommand("render", "render a checkpoint at given cameras");
    std::string ckpt, cameras, render_out, render_config;
    bool auth_map = false;
    std::vector<double> background;
    render_cmd->add_option("--checkpoint", ckpt, "model checkpoint")->required();
    render_cmd->add_option("--cameras", cameras, "cameras.json or a directory containing it")->required();
    render_cmd->add_option("--out", render_out, "output directory")->required();
    render_cmd->add_flag("--authenticity-map", auth_map, "also write composited authenticity maps");
    render_cmd->add_option("--config", render_config, "resolved training config; reports PSNR against its targets");
    render_cmd->add_option("--background", background, "background color r g b")->expected(3);

    auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint against static ground truth");
    std::string eval_ckpt, gt_dir, eval_cameras, eval_out, csv_out, mask_mode = "inside";
    bool no_masks = false;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    eval_cmd->add_option("--gt", gt_dir, "directory with static_%05d.png (and optional mask_%05d.png)")->required();
    eval_cmd->add_option("--cameras", eval_cameras, "cameras.json directory (default: --gt)");
    eval_cmd->add_option("--out", eval_out, "write the JSON report here instead of stdout");
    eval_cmd->add_option("--csv", csv_out, "also write a flat CSV table");
    eval_cmd->add_option("--mask-mode", mask_mode, "inside: occluded pixels; outside: background pixels");
    eval_cmd->add_flag("--no-masks", no_masks, "ignore masks, full-frame metrics only");

    auto* ablate_cmd = app.add_subcommand("ablate", "run the component ablation and the authenticity init grid");
    RunFlags ablate_flags;
    std::vector<std::string> ablate_scenes, ablate_sequences;
    std::string grid_scene;
    bool skip_grid = false;
    ablate_cmd->add_option("--out", ablate_flags.out, "output directory")->required();
    ablate_cmd->add_option("--builtin", ablate_scenes, "builtin scenes (default: all three)");
    ablate_cmd->add_option("--sequence", ablate_sequences, "existing sequence directories with static ground truth");
    ablate_cmd->add_option("--grid-scene", grid_scene, "scene for the authenticity init grid (default: first)");
    ablate_cmd->add_flag("--skip-grid", skip_grid, "only run the component ablation");
    ablate_cmd->add_option("--config", ablate_flags.config_file, "key = value config file");
    ablate_cmd->add_option("--set", ablate_flags.overrides, "override one config key (key=value), repeatable");
    ablate_cmd->add_option("--seed", ablate_flags.seed, "random seed");
    ablate_cmd->add_option("--iterations", ablate_flags.iterations, "optimization steps");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    log_level() = common.quiet ? LogLevel::Quiet : (common.verbose ? LogLevel::Info : LogLevel::Warn);
    if (common.threads < 0) {
        std::cerr << "error: --threads must be non-negative\n";
        return kConfig;
    }
    common.threads = resolve_threads(common.threads);

    try {
        if (synth->parsed()) return cmd_synth(builtin, spec_file, synth_out, scene_overrides, common);
        if (train_cmd->parsed()) return cmd_train(train_flags, dump_supervision, common);
        if (render_cmd->parsed())
            return cmd_render(ckpt, cameras, render_out, auth_map, render_config, background, common);
        if (eval_cmd->parsed())
            return cmd_eval(eval_ckpt, gt_dir, eval_cameras, eval_out, csv_out, mask_mode, no_masks, common);
        if (ablate_cmd->parsed())
            return cmd_ablate(ablate_flags, ablate_scenes, ablate_sequences, grid_scene, skip_grid, common);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error:\n";
        for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
        return kConfig;
    } catch (const IngestError& e) {
        std::cerr << "ingestion error: " << e.what() << '\n';
        return kIngest;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << '\n';
        return kIngest;
    } catch (const DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << '\n';
        return kDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}
