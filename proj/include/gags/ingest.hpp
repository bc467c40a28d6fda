// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gags/common.hpp"
#include "gags/geometry.hpp"
#include "gags/image_io.hpp"
#include "gags/model.hpp"

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>

namespace gags {

/// Per-frame priors as produced by an external pose/depth estimator.
struct FrameEstimate {
    int index = 0;
    ImageF image;       // H x W x 3
    ImageF depth;       // H x W
    ImageF confidence;  // H x W
    CameraPose pose;
    CameraIntrinsics intrinsics;
};

struct FrameBundle {
    FrameEstimate frame;
    Mask mask;
    std::optional<ImageF> inpainted;
};

struct CameraRecord {
    int index = 0;
    CameraPose pose;
    CameraIntrinsics intrinsics;
};

// ---------------------------------------------------------------------------
// Sequence directory layout.

inline std::string frame_file(const char* prefix, int index, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%05d.%s", prefix, index, ext);
    return buf;
}

inline constexpr const char* kCamerasFile = "cameras.json";

inline nlohmann::json cameras_to_json(const std::vector<CameraRecord>& cams) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& c : cams) {
        const auto& q = c.pose.rotation;
        const auto& t = c.pose.translation;
        frames.push_back({{"index", c.index},
                          {"rotation", {q[0], q[1], q[2], q[3]}},
                          {"translation", {t[0], t[1], t[2]}},
                          {"focal", {c.intrinsics.focal_x, c.intrinsics.focal_y}},
                          {"principal", {c.intrinsics.principal_x, c.intrinsics.principal_y}},
                          {"size", {c.intrinsics.width, c.intrinsics.height}}});
    }
    return {{"frames", frames}};
}

inline void write_cameras(const std::vector<CameraRecord>& cams, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << cameras_to_json(cams).dump(2) << '\n';
}

inline std::vector<CameraRecord> read_cameras(const std::filesystem::path& path) {
    const std::string name = path.string();
    std::ifstream in(path);
    if (!in) throw IngestError(IngestErrorKind::MissingFile, name, "cannot open camera file");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IngestError(IngestErrorKind::BadFormat, name, e.what());
    }
    std::vector<CameraRecord> cams;
    try {
        for (const auto& f : doc.at("frames")) {
            CameraRecord c;
            c.index = f.at("index").get<int>();
            if (!f.contains("rotation") || !f.contains("translation"))
                throw IngestError(IngestErrorKind::MissingPose, name,
                                  "frame " + std::to_string(c.index) + " has no pose");
            const auto q = f.at("rotation").get<std::vector<double>>();
            const auto t = f.at("translation").get<std::vector<double>>();
            const auto focal = f.at("focal").get<std::vector<double>>();
            const auto pp = f.at("principal").get<std::vector<double>>();
            const auto size = f.at("size").get<std::vector<int>>();
            if (q.size() != 4 || t.size() != 3 || focal.size() != 2 || pp.size() != 2 || size.size() != 2)
                throw IngestError(IngestErrorKind::BadFormat, name, "malformed camera entry");
            c.pose = CameraPose({q[0], q[1], q[2], q[3]}, {t[0], t[1], t[2]});
            c.intrinsics = {focal[0], focal[1], pp[0], pp[1], size[0], size[1]};
            c.intrinsics.validate();
            cams.push_back(c);
        }
    } catch (const nlohmann::json::exception& e) {
        throw IngestError(IngestErrorKind::BadFormat, name, e.what());
    } catch (const InputError& e) {
        throw IngestError(IngestErrorKind::BadFormat, name, e.what());
    }
    return cams;
}

/// Loads and validates one frame of a sequence directory.
inline FrameBundle load_frame_bundle(const std::filesystem::path& dir, int index, bool require_inpainted,
                                     const std::vector<CameraRecord>* cameras = nullptr) {
    std::vector<CameraRecord> loaded;
    if (!cameras) {
        loaded = read_cameras(dir / kCamerasFile);
        cameras = &loaded;
    }
    const auto cam = std::find_if(cameras->begin(), cameras->end(),
                                  [index](const CameraRecord& c) { return c.index == index; });
    if (cam == cameras->end())
        throw IngestError(IngestErrorKind::MissingPose, (dir / kCamerasFile).string(),
                          "no pose for frame " + std::to_string(index));

    FrameBundle b;
    FrameEstimate& f = b.frame;
    f.index = index;
    f.pose = cam->pose;
    f.intrinsics = cam->intrinsics;
    const int w = f.intrinsics.width, h = f.intrinsics.height;
    auto check_dims = [w, h](const auto& img, const std::filesystem::path& p) {
        if (img.width != w || img.height != h)
            throw IngestError(IngestErrorKind::DimensionMismatch, p.string(),
                              std::to_string(img.width) + "x" + std::to_string(img.height) + " but camera declares " +
                                  std::to_string(w) + "x" + std::to_string(h));
    };

    const auto image_path = dir / frame_file("frame", index, "png");
    f.image = read_png(image_path);
    if (f.image.channels != 3) throw IngestError(IngestErrorKind::BadFormat, image_path.string(), "expected RGB");
    check_dims(f.image, image_path);

    const auto depth_path = dir / frame_file("depth", index, "f32");
    const auto conf_path = dir / frame_file("conf", index, "f32");
    f.depth = read_f32_map(depth_path);
    check_dims(f.depth, depth_path);
    f.confidence = read_f32_map(conf_path);
    check_dims(f.confidence, conf_path);
    for (std::size_t p = 0; p < f.depth.data.size(); ++p) {
        const float c = f.confidence.data[p];
        if (!std::isfinite(c) || c < 0.0f)
            throw IngestError(IngestErrorKind::BadFormat, conf_path.string(), "confidence must be finite and >= 0");
        const float d = f.depth.data[p];
        if (c > 0.0f && !(std::isfinite(d) && d > 0.0f))
            throw IngestError(IngestErrorKind::NonFiniteDepth, depth_path.string(),
                              "non-finite or non-positive depth at confident pixel " + std::to_string(p));
    }

    const auto mask_path = dir / frame_file("mask", index, "png");
    b.mask = read_mask(mask_path);
    check_dims(b.mask, mask_path);

    const auto inpaint_path = dir / frame_file("inpaint", index, "png");
    if (std::filesystem::exists(inpaint_path)) {
        b.inpainted = read_png(inpaint_path);
        check_dims(*b.inpainted, inpaint_path);
        if (b.inpainted->channels != 3)
            throw IngestError(IngestErrorKind::BadFormat, inpaint_path.string(), "expected RGB");
    } else if (require_inpainted) {
        throw IngestError(IngestErrorKind::MissingFile, inpaint_path.string(),
                          "inpainted frame required when generation is enabled");
    }
    return b;
}

inline std::vector<FrameBundle> load_sequence(const std::filesystem::path& dir, bool require_inpainted) {
    const auto cams = read_cameras(dir / kCamerasFile);
    if (cams.empty()) throw IngestError(IngestErrorKind::BadFormat, (dir / kCamerasFile).string(), "no frames");
    std::vector<FrameBundle> out;
    out.reserve(cams.size());
    for (const auto& c : cams) out.push_back(load_frame_bundle(dir, c.index, require_inpainted, &cams));
    return out;
}

// ---------------------------------------------------------------------------
// Structure-aware sampling.

struct SamplingParams {
    double keep_fraction = 0.10;
    /// Per-frame confidence percentile used as the gate when `tau` is negative.
    double tau_percentile = 0.30;
    double tau = -1.0;
    double lambda_image = 0.5;
    double lambda_depth = 0.5;
    double theta_real = 0.9;
    double theta_generated = 0.1;
};

/// Value at fraction p of the sorted map (lower index, no interpolation).
inline double percentile(const ImageF& map, double p) {
    std::vector<float> v(map.data);
    const std::size_t k = static_cast<std::size_t>(std::floor(std::clamp(p, 0.0, 1.0) * (v.size() - 1)));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

inline double confidence_threshold(const FrameEstimate& f, const SamplingParams& p) {
    return p.tau >= 0.0 ? p.tau : percentile(f.confidence, p.tau_percentile);
}

namespace detail {

/// Central difference along x and y with replicated borders.
inline std::pair<double, double> central_gradient(const ImageF& img, int x, int y, int c) {
    const int xl = std::max(x - 1, 0), xr = std::min(x + 1, img.width - 1);
    const int yu = std::max(y - 1, 0), yd = std::min(y + 1, img.height - 1);
    return {0.5 * (double(img.at(xr, y, c)) - img.at(xl, y, c)),
            0.5 * (double(img.at(x, yd, c)) - img.at(x, yu, c))};
}

}  // namespace detail

/// S(y) = 1[conf > tau] (lambda1 |grad I| + lambda2 |grad D|).
inline double sampling_weight(const FrameEstimate& f, int x, int y, double tau, double lambda_image,
                              double lambda_depth) {
    if (!(f.confidence.at(x, y) > tau)) return 0.0;
    double gi = 0.0;
    for (int c = 0; c < f.image.channels; ++c) {
        const auto [gx, gy] = detail::central_gradient(f.image, x, y, c);
        gi += gx * gx + gy * gy;
    }
    const auto [dx, dy] = detail::central_gradient(f.depth, x, y, 0);
    return lambda_image * std::sqrt(gi) + lambda_depth * std::sqrt(dx * dx + dy * dy);
}

inline ImageF sampling_weights(const FrameEstimate& f, double tau, double lambda_image, double lambda_depth) {
    ImageF s(f.image.width, f.image.height, 1);
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x)
            s.at(x, y) = static_cast<float>(sampling_weight(f, x, y, tau, lambda_image, lambda_depth));
    return s;
}

struct InitPoint {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3f color = Eigen::Vector3f::Zero();
    int source_frame = 0;
    Eigen::Vector2i source_pixel = Eigen::Vector2i::Zero();  // (col, row)
    bool generated = false;
    double authenticity_init = 0.9;
};

/// Keeps the top `keep_fraction` of pixels by sampling weight over all
/// frames and back-projects them. Ties at the cutoff go to the smaller
/// (frame, row, col). `colors` optionally overrides the per-frame color
/// source (e.g. supervision targets).
inline std::vector<InitPoint> select_init_points(std::span<const FrameEstimate> frames, std::span<const Mask> masks,
                                                 const SamplingParams& params,
                                                 std::span<const ImageF> colors = {}, int threads = 1) {
    if (frames.empty()) throw InputError("select_init_points: at least one frame required");
    if (masks.size() != frames.size()) throw InputError("select_init_points: one mask per frame required");
    if (!colors.empty() && colors.size() != frames.size())
        throw InputError("select_init_points: one color image per frame required");

    std::vector<ImageF> weights(frames.size());
    parallel_for(frames.size(), threads, [&](std::size_t i) {
        const auto& f = frames[i];
        if (!masks[i].same_extent(f.image.width, f.image.height))
            throw InputError("select_init_points: mask dimensions differ from frame");
        weights[i] = sampling_weights(f, confidence_threshold(f, params), params.lambda_image, params.lambda_depth);
    });

    struct Candidate {
        float weight;
        std::uint32_t frame;
        std::uint32_t row;
        std::uint32_t col;
    };
    std::vector<Candidate> all;
    std::size_t total = 0;
    for (const auto& w : weights) total += w.pixel_count();
    all.reserve(total);
    bool any_positive = false;
    for (std::uint32_t i = 0; i < weights.size(); ++i) {
        const auto& w = weights[i];
        for (int y = 0; y < w.height; ++y)
            for (int x = 0; x < w.width; ++x) {
                const float s = w.at(x, y);
                any_positive |= s > 0.0f;
                all.push_back({s, i, std::uint32_t(y), std::uint32_t(x)});
            }
    }
    const std::size_t keep = std::min<std::size_t>(
        total, static_cast<std::size_t>(std::llround(params.keep_fraction * static_cast<double>(total))));

    std::vector<Candidate> chosen;
    if (any_positive) {
        auto better = [](const Candidate& a, const Candidate& b) {
            if (a.weight != b.weight) return a.weight > b.weight;
            if (a.frame != b.frame) return a.frame < b.frame;
            if (a.row != b.row) return a.row < b.row;
            return a.col < b.col;
        };
        std::nth_element(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), better);
        chosen.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep));
        std::sort(chosen.begin(), chosen.end(), better);
    } else {
        log_warning("all sampling weights are zero; falling back to uniform stratified sampling");
        for (std::size_t j = 0; j < keep; ++j) {
            const std::size_t idx = static_cast<std::size_t>(
                std::floor((static_cast<double>(j) + 0.5) * static_cast<double>(total) / static_cast<double>(keep)));
            chosen.push_back(all[idx]);
        }
    }

    std::vector<InitPoint> points;
    points.reserve(chosen.size());
    for (const auto& c : chosen) {
        const auto& f = frames[c.frame];
        const int x = static_cast<int>(c.col), y = static_cast<int>(c.row);
        const float d = f.depth.at(x, y);
        if (!(d > 0.0f) || !std::isfinite(d)) continue;  // unconfident pixel without usable depth
        InitPoint p;
        p.position = back_project<double>({x + 0.5, y + 0.5}, d, f.intrinsics, f.pose);
        const ImageF& src = colors.empty() ? f.image : colors[c.frame];
        p.color = {src.at(x, y, 0), src.at(x, y, 1), src.at(x, y, 2)};
        p.source_frame = f.index;
        p.source_pixel = {x, y};
        p.generated = masks[c.frame].at(x, y) != 0;
        p.authenticity_init = p.generated ? params.theta_generated : params.theta_real;
        points.push_back(p);
    }
    return points;
}

// ---------------------------------------------------------------------------

/// Mean squared distance to the k nearest neighbours of every point.
inline std::vector<double> mean_knn_sq_distance(const std::vector<Eigen::Vector3d>& pts, int k = 3) {
    namespace bg = boost::geometry;
    namespace bgi = boost::geometry::index;
    using Point = bg::model::point<double, 3, bg::cs::cartesian>;
    using Entry = std::pair<Point, std::uint32_t>;

    const std::size_t n = pts.size();
    std::vector<double> out(n, 1e-7);
    if (n < 2) return out;
    std::vector<Entry> entries;
    entries.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) entries.emplace_back(Point(pts[i].x(), pts[i].y(), pts[i].z()), i);
    const bgi::rtree<Entry, bgi::rstar<16>> tree(entries.begin(), entries.end());
    std::vector<Entry> found;
    found.reserve(static_cast<std::size_t>(k) + 1);
    for (std::size_t i = 0; i < n; ++i) {
        found.clear();
        tree.query(bgi::nearest(entries[i].first, static_cast<unsigned>(k + 1)), std::back_inserter(found));
        std::vector<double> d2;
        for (const auto& [p, j] : found)
            if (j != i) d2.push_back((pts[j] - pts[i]).squaredNorm());
        // Query order is unspecified; sum the k smallest in ascending order.
        std::sort(d2.begin(), d2.end());
        d2.resize(std::min<std::size_t>(d2.size(), static_cast<std::size_t>(k)));
        if (d2.empty()) continue;
        double s = 0.0;
        for (double d : d2) s += d;
        out[i] = std::max(s / static_cast<double>(d2.size()), 1e-7);
    }
    return out;
}

struct InitParams {
    int sh_degree = 3;
    double opacity = 0.1;
    /// When false every primitive gets raw authenticity logit(1 - eps).
    bool use_authenticity = true;
};

inline constexpr double kDisabledAuthenticityEps = 1e-6;

/// Isotropic primitives at the init points, sized by nearest-neighbour spacing.
inline GaussianSet gaussians_from_points(const std::vector<InitPoint>& points, const InitParams& params) {
    GaussianSet gs(params.sh_degree);
    std::vector<Eigen::Vector3d> pos;
    pos.reserve(points.size());
    for (const auto& p : points) pos.push_back(p.position);
    const auto d2 = mean_knn_sq_distance(pos);
    const float raw_opacity = static_cast<float>(logit(params.opacity));
    const float disabled_theta = static_cast<float>(logit(1.0 - kDisabledAuthenticityEps));
    for (std::size_t i = 0; i < points.size(); ++i) {
        GaussianSet::Primitive prim;
        prim.position = points[i].position.cast<float>();
        prim.raw_scale = Eigen::Vector3f::Constant(static_cast<float>(0.5 * std::log(d2[i])));
        prim.raw_opacity = raw_opacity;
        prim.sh.assign(static_cast<std::size_t>(gs.sh_width()), 0.0f);
        for (int c = 0; c < 3; ++c)
            prim.sh[c] = static_cast<float>((points[i].color[c] - 0.5) / sh_const::c0);
        prim.raw_authenticity = params.use_authenticity
            ? static_cast<float>(logit(std::clamp(points[i].authenticity_init, 1e-6, 1.0 - 1e-6)))
            : disabled_theta;
        gs.push_back(prim);
    }
    return gs;
}

}  // namespace gags
