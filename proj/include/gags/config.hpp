// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Run configuration: flat `key = value` text. Sources are applied in order
// defaults, file, GAGS_* environment variables, command-line overrides.

#include "gags/common.hpp"
#include "gags/ingest.hpp"
#include "gags/train.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace gags {

struct RunConfig {
    std::string sequence;
    std::string output;
    bool use_authenticity = true;
    bool use_generation = true;
    double theta_real = 0.9;
    double theta_generated = 0.1;
    SamplingParams sampling;
    InitParams init;
    TrainConfig train;

    std::vector<std::string> problems() const {
        std::vector<std::string> out = train.problems();
        auto unit = [&out](double v, const char* name) {
            if (!(v >= 0.0 && v <= 1.0)) out.push_back(std::string(name) + " must lie in [0, 1]");
        };
        unit(theta_real, "theta_real");
        unit(theta_generated, "theta_generated");
        unit(train.loss.generated_weight, "w");
        if (!(sampling.keep_fraction > 0.0 && sampling.keep_fraction <= 1.0))
            out.emplace_back("sampling.keep_fraction must lie in (0, 1]");
        unit(sampling.tau_percentile, "sampling.tau_percentile");
        if (sampling.lambda_image < 0.0 || sampling.lambda_depth < 0.0)
            out.emplace_back("sampling weights must be non-negative");
        if (!(init.opacity > 0.0 && init.opacity < 1.0)) out.emplace_back("init.opacity must lie in (0, 1)");
        if (init.sh_degree < 0 || init.sh_degree > kMaxShDegree)
            out.push_back("sh_degree must lie in [0, " + std::to_string(kMaxShDegree) + "]");
        if (train.threads < 0) out.emplace_back("threads must be non-negative");
        return out;
    }
};

namespace detail {

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline bool parse_bool(const std::string& s, bool& out) {
    if (s == "true" || s == "1" || s == "on" || s == "yes") return out = true, true;
    if (s == "false" || s == "0" || s == "off" || s == "no") return out = false, true;
    return false;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
    std::istringstream is(s);
    T v{};
    is >> v;
    if (!is || !(is >> std::ws).eof()) return false;
    out = v;
    return true;
}

struct ConfigKey {
    std::string name;
    std::string help;
    std::function<std::string(const RunConfig&)> get;
    /// Returns an error message, empty on success.
    std::function<std::string(RunConfig&, const std::string&)> set;
};

template <typename Field>
ConfigKey make_key(std::string name, std::string help, Field field) {
    ConfigKey k;
    k.name = std::move(name);
    k.help = std::move(help);
    k.get = [field](const RunConfig& c) {
        const auto& v = field(c);
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, bool>) return std::string(v ? "true" : "false");
        else if constexpr (std::is_same_v<V, std::string>) return v;
        else if constexpr (std::is_same_v<V, std::filesystem::path>) return v.string();
        else if constexpr (std::is_same_v<V, Eigen::Vector3d>)
            return format_double(v.x()) + " " + format_double(v.y()) + " " + format_double(v.z());
        else if constexpr (std::is_floating_point_v<V>) return format_double(v);
        else return std::to_string(v);
    };
    k.set = [field, n = k.name](RunConfig& c, const std::string& s) -> std::string {
        auto& v = field(c);
        using V = std::decay_t<decltype(v)>;
        bool ok = true;
        if constexpr (std::is_same_v<V, bool>) ok = parse_bool(s, v);
        else if constexpr (std::is_same_v<V, std::string>) v = s;
        else if constexpr (std::is_same_v<V, std::filesystem::path>) v = s;
        else if constexpr (std::is_same_v<V, Eigen::Vector3d>) {
            std::istringstream is(s);
            Eigen::Vector3d t;
            ok = static_cast<bool>(is >> t.x() >> t.y() >> t.z()) && (is >> std::ws).eof();
            if (ok) v = t;
        } else ok = parse_number(s, v);
        return ok ? std::string() : n + ": cannot parse '" + s + "'";
    };
    return k;
}

}  // namespace detail

/// Every configurable key, in the order the resolved config is written.
inline const std::vector<detail::ConfigKey>& config_keys() {
    using detail::make_key;
    static const std::vector<detail::ConfigKey> keys = {
        make_key("sequence", "input sequence directory", [](auto& c) -> auto& { return c.sequence; }),
        make_key("output", "output directory", [](auto& c) -> auto& { return c.output; }),
        make_key("seed", "random seed for frame order and densification", [](auto& c) -> auto& { return c.train.seed; }),
        make_key("threads", "worker threads (0 = hardware concurrency)", [](auto& c) -> auto& { return c.train.threads; }),
        make_key("iterations", "optimization steps", [](auto& c) -> auto& { return c.train.iterations; }),
        make_key("log_interval", "iterations between log records", [](auto& c) -> auto& { return c.train.log_interval; }),
        make_key("checkpoint_interval", "iterations between checkpoints (0 = final only)",
                 [](auto& c) -> auto& { return c.train.checkpoint_interval; }),
        make_key("authenticity", "learn per-primitive authenticity", [](auto& c) -> auto& { return c.use_authenticity; }),
        make_key("generation", "supervise masked pixels with inpainted content",
                 [](auto& c) -> auto& { return c.use_generation; }),
        make_key("w", "loss weight of generated pixels", [](auto& c) -> auto& { return c.train.loss.generated_weight; }),
        make_key("theta_real", "initial authenticity of primitives from observed pixels",
                 [](auto& c) -> auto& { return c.theta_real; }),
        make_key("theta_generated", "initial authenticity of primitives from masked pixels",
                 [](auto& c) -> auto& { return c.theta_generated; }),
        make_key("lambda_l1", "weight of the weighted L1 term", [](auto& c) -> auto& { return c.train.loss.lambda_l1; }),
        make_key("lambda_ssim", "weight of the SSIM term", [](auto& c) -> auto& { return c.train.loss.lambda_ssim; }),
        make_key("ssim_window", "SSIM window size", [](auto& c) -> auto& { return c.train.loss.ssim_window; }),
        make_key("ssim_sigma", "SSIM window sigma", [](auto& c) -> auto& { return c.train.loss.ssim_sigma; }),
        make_key("lr.position", "position learning rate (times scene extent)",
                 [](auto& c) -> auto& { return c.train.lr.position; }),
        make_key("lr.position_final_ratio", "final / initial position learning rate",
                 [](auto& c) -> auto& { return c.train.lr.position_final_ratio; }),
        make_key("lr.position_decay", "decay the position learning rate",
                 [](auto& c) -> auto& { return c.train.lr.position_decay; }),
        make_key("lr.scale", "scale learning rate", [](auto& c) -> auto& { return c.train.lr.scale; }),
        make_key("lr.rotation", "rotation learning rate", [](auto& c) -> auto& { return c.train.lr.rotation; }),
        make_key("lr.opacity", "opacity learning rate", [](auto& c) -> auto& { return c.train.lr.opacity; }),
        make_key("lr.authenticity", "authenticity learning rate", [](auto& c) -> auto& { return c.train.lr.authenticity; }),
        make_key("lr.color", "base color learning rate", [](auto& c) -> auto& { return c.train.lr.color; }),
        make_key("lr.color_rest_divisor", "divisor for higher-order SH learning rates",
                 [](auto& c) -> auto& { return c.train.lr.color_rest_divisor; }),
        make_key("adam.beta1", "Adam first moment decay", [](auto& c) -> auto& { return c.train.adam.beta1; }),
        make_key("adam.beta2", "Adam second moment decay", [](auto& c) -> auto& { return c.train.adam.beta2; }),
        make_key("adam.eps", "Adam epsilon", [](auto& c) -> auto& { return c.train.adam.eps; }),
        make_key("densify", "enable clone/split/prune", [](auto& c) -> auto& { return c.train.densify_enabled; }),
        make_key("densify.grad_threshold", "mean screen-space gradient that triggers densification",
                 [](auto& c) -> auto& { return c.train.densify.grad_threshold; }),
        make_key("densify.interval", "iterations between density updates",
                 [](auto& c) -> auto& { return c.train.densify.interval; }),
        make_key("densify.start", "first iteration with density updates",
                 [](auto& c) -> auto& { return c.train.densify.start_iteration; }),
        make_key("densify.until_fraction", "fraction of the run with density updates",
                 [](auto& c) -> auto& { return c.train.densify.until_fraction; }),
        make_key("densify.percent_dense", "split/clone size threshold as a fraction of scene extent",
                 [](auto& c) -> auto& { return c.train.densify.percent_dense; }),
        make_key("densify.prune_opacity", "prune primitives below this opacity",
                 [](auto& c) -> auto& { return c.train.densify.prune_opacity; }),
        make_key("densify.max_primitives", "cap on primitive count (0 = none)",
                 [](auto& c) -> auto& { return c.train.densify.max_primitives; }),
        make_key("sampling.keep_fraction", "fraction of pixels kept for initialization",
                 [](auto& c) -> auto& { return c.sampling.keep_fraction; }),
        make_key("sampling.tau_percentile", "per-frame confidence percentile used as gate",
                 [](auto& c) -> auto& { return c.sampling.tau_percentile; }),
        make_key("sampling.tau", "fixed confidence gate (negative = use percentile)",
                 [](auto& c) -> auto& { return c.sampling.tau; }),
        make_key("sampling.lambda_image", "image gradient weight", [](auto& c) -> auto& { return c.sampling.lambda_image; }),
        make_key("sampling.lambda_depth", "depth gradient weight", [](auto& c) -> auto& { return c.sampling.lambda_depth; }),
        make_key("init.opacity", "initial opacity", [](auto& c) -> auto& { return c.init.opacity; }),
        make_key("sh_degree", "spherical harmonics degree", [](auto& c) -> auto& { return c.init.sh_degree; }),
        make_key("sh_degree_interval", "iterations per active SH degree step (0 = all at once)",
                 [](auto& c) -> auto& { return c.train.sh_degree_interval; }),
        make_key("background", "background color r g b", [](auto& c) -> auto& { return c.train.background; }),
    };
    return keys;
}

inline std::string config_env_name(const std::string& key) {
    std::string out = "GAGS_";
    for (char ch : key) out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return out;
}

/// Collects parse errors so every problem is reported at once.
class ConfigBuilder {
public:
    ConfigBuilder() = default;
    explicit ConfigBuilder(RunConfig base) : cfg_(std::move(base)) {}

    void set(const std::string& key, const std::string& value, const std::string& origin) {
        const auto& keys = config_keys();
        const auto it = std::find_if(keys.begin(), keys.end(), [&](const auto& k) { return k.name == key; });
        if (it == keys.end()) {
            errors_.push_back(origin + ": unknown key '" + key + "'");
            return;
        }
        if (auto err = it->set(cfg_, value); !err.empty()) errors_.push_back(origin + ": " + err);
    }

    /// Parses `key = value` text; '#' starts a comment.
    void apply_text(const std::string& text, const std::string& origin) {
        std::istringstream in(text);
        std::string line;
        int n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
            const auto eq = line.find('=');
            const std::string where = origin + ":" + std::to_string(n);
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                if (b == std::string::npos) return std::string();
                return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
            };
            if (trim(line).empty()) continue;
            if (eq == std::string::npos) {
                errors_.push_back(where + ": expected key = value");
                continue;
            }
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
        }
    }

    void apply_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) {
            errors_.push_back("cannot read config file " + path.string());
            return;
        }
        std::stringstream ss;
        ss << in.rdbuf();
        apply_text(ss.str(), path.string());
    }

    void apply_environment() {
        for (const auto& k : config_keys()) {
            const std::string env = config_env_name(k.name);
            if (const char* v = std::getenv(env.c_str())) set(k.name, v, env);
        }
    }

    /// `key=value` from a --set flag.
    void apply_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos) {
            errors_.push_back("--set " + assignment + ": expected key=value");
            return;
        }
        set(assignment.substr(0, eq), assignment.substr(eq + 1), "--set");
    }

    RunConfig& config() { return cfg_; }

    /// Throws ConfigError listing every parse and validation problem.
    RunConfig finish() const {
        auto errors = errors_;
        for (auto& p : cfg_.problems()) errors.push_back(std::move(p));
        if (!errors.empty()) throw ConfigError(std::move(errors));
        return cfg_;
    }

private:
    RunConfig cfg_;
    std::vector<std::string> errors_;
};

inline std::string resolved_config_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& k : config_keys()) out += k.name + " = " + k.get(cfg) + "\n";
    return out;
}

inline std::map<std::string, std::string> resolved_config_map(const RunConfig& cfg) {
    std::map<std::string, std::string> out;
    for (const auto& k : config_keys()) out[k.name] = k.get(cfg);
    return out;
}

}  // namespace gags
