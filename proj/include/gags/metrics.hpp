// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gags/common.hpp"
#include "gags/loss.hpp"
#include "gags/renderer.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <sstream>

namespace gags {

/// Reported instead of +inf when two images are identical.
inline constexpr double kPsnrCap = 99.0;

/// Which pixels a mask selects: those with M = 1 (occluded-region protocol)
/// or those with M = 0 (background-only protocol).
enum class MaskMode { Inside, Outside };

template <typename T>
double mse(const Image<T>& a, const Image<T>& b, const Mask* mask = nullptr, MaskMode mode = MaskMode::Inside) {
    detail::require_same_shape(a, b, "psnr");
    if (mask && (!mask->same_extent(a.width, a.height) || mask->channels != 1))
        throw InputError("psnr: mask shape mismatch");
    double sum = 0.0;
    std::size_t count = 0;
    const int ch = a.channels;
    for (std::size_t p = 0; p < a.pixel_count(); ++p) {
        if (mask) {
            const bool in = mask->data[p] != 0;
            if (in != (mode == MaskMode::Inside)) continue;
        }
        for (int c = 0; c < ch; ++c) {
            const double d = double(a.data[p * ch + c]) - double(b.data[p * ch + c]);
            sum += d * d;
        }
        count += ch;
    }
    if (count == 0) throw InputError("psnr: mask selects no pixels");
    return sum / static_cast<double>(count);
}

/// 10 log10(1 / MSE) for [0,1] images, capped at kPsnrCap.
template <typename T>
double psnr(const Image<T>& a, const Image<T>& b, const Mask* mask = nullptr, MaskMode mode = MaskMode::Inside) {
    const double m = mse(a, b, mask, mode);
    if (m <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

/// Mean SSIM (same kernel as the training loss), clamped to [0, 1].
template <typename T>
double ssim(const Image<T>& a, const Image<T>& b, int window = 11, double sigma = 1.5) {
    const auto ad = a.template cast<double>();
    const auto bd = b.template cast<double>();
    return std::clamp(ssim_value<double>(ad, bd, window, sigma), 0.0, 1.0);
}

inline bool any_set(const Mask& m) {
    return std::any_of(m.data.begin(), m.data.end(), [](std::uint8_t v) { return v != 0; });
}

struct EvalFrame {
    int index = 0;
    CameraPose pose;
    CameraIntrinsics intrinsics;
    std::optional<ImageF> ground_truth;
    std::optional<Mask> mask;
};

struct FrameMetrics {
    int index = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    std::optional<double> masked_psnr;
};

struct EvalReport {
    std::vector<FrameMetrics> frames;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    std::optional<double> mean_masked_psnr;
    std::size_t frame_count = 0;
    std::size_t masked_frame_count = 0;
    std::size_t skipped = 0;
    std::map<std::string, std::string> config;

    nlohmann::json to_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& f : frames) {
            nlohmann::json r = {{"frame", f.index}, {"psnr", f.psnr}, {"ssim", f.ssim}};
            r["occluded_psnr"] = f.masked_psnr ? nlohmann::json(*f.masked_psnr) : nlohmann::json(nullptr);
            rows.push_back(r);
        }
        nlohmann::json agg = {{"psnr", mean_psnr}, {"ssim", mean_ssim}, {"frames", frame_count},
                              {"skipped", skipped}, {"occluded_frames", masked_frame_count},
                              {"lpips", nullptr}, {"psnr_cap", kPsnrCap}};
        agg["occluded_psnr"] = mean_masked_psnr ? nlohmann::json(*mean_masked_psnr) : nlohmann::json(nullptr);
        return {{"frames", rows}, {"aggregate", agg}, {"config", config}};
    }

    std::string to_csv() const {
        std::ostringstream os;
        os.precision(10);
        os << "frame,psnr,ssim,occluded_psnr\n";
        for (const auto& f : frames) {
            os << f.index << ',' << f.psnr << ',' << f.ssim << ',';
            if (f.masked_psnr) os << *f.masked_psnr;
            os << '\n';
        }
        os << "mean," << mean_psnr << ',' << mean_ssim << ',';
        if (mean_masked_psnr) os << *mean_masked_psnr;
        os << '\n';
        return os.str();
    }
};

/// Aggregates are arithmetic means of the per-frame rows; frames without a
/// non-empty mask do not enter the occluded mean.
inline void finalize_report(EvalReport& report) {
    report.frame_count = report.frames.size();
    report.mean_psnr = report.mean_ssim = 0.0;
    double masked_sum = 0.0;
    report.masked_frame_count = 0;
    for (const auto& f : report.frames) {
        report.mean_psnr += f.psnr;
        report.mean_ssim += f.ssim;
        if (f.masked_psnr) {
            masked_sum += *f.masked_psnr;
            ++report.masked_frame_count;
        }
    }
    if (report.frame_count > 0) {
        report.mean_psnr /= static_cast<double>(report.frame_count);
        report.mean_ssim /= static_cast<double>(report.frame_count);
    }
    if (report.masked_frame_count > 0) report.mean_masked_psnr = masked_sum / double(report.masked_frame_count);
    else report.mean_masked_psnr.reset();
}

inline FrameMetrics evaluate_frame(const ImageF& rendered, const ImageF& gt, const Mask* mask, int index,
                                   MaskMode mode = MaskMode::Inside) {
    FrameMetrics m;
    m.index = index;
    m.psnr = psnr(rendered, gt);
    m.ssim = ssim(rendered, gt);
    if (mask) {
        const bool selects = mode == MaskMode::Inside
            ? any_set(*mask)
            : std::any_of(mask->data.begin(), mask->data.end(), [](std::uint8_t v) { return v == 0; });
        if (selects) m.masked_psnr = psnr(rendered, gt, mask, mode);
    }
    return m;
}

/// Renders every evaluation pose and scores it against the static ground truth.
inline EvalReport evaluate_sequence(const GaussianSet& gs, const std::vector<EvalFrame>& frames,
                                    const RenderSettings& settings, MaskMode mode = MaskMode::Inside) {
    EvalReport report;
    std::vector<std::optional<FrameMetrics>> rows(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& f = frames[i];
        if (!f.ground_truth) {
            log_warning("no ground-truth frame for index " + std::to_string(f.index) + "; skipped");
            ++report.skipped;
            continue;
        }
        const auto out = render(gs, f.pose, f.intrinsics, settings);
        rows[i] = evaluate_frame(out.color, *f.ground_truth, f.mask ? &*f.mask : nullptr, f.index, mode);
    }
    for (auto& r : rows)
        if (r) report.frames.push_back(*r);
    finalize_report(report);
    return report;
}

}  // namespace gags
