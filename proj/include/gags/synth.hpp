// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Procedural paired sequences: a ray-cast scene of planes, boxes and spheres
// seen along one camera path twice, once with moving occluders (the dynamic
// input) and once without (the static ground truth).

#include "gags/common.hpp"
#include "gags/geometry.hpp"
#include "gags/image_io.hpp"
#include "gags/ingest.hpp"

#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>

namespace gags {

struct Texture {
    Eigen::Vector3d base = Eigen::Vector3d::Constant(0.5);
    /// Relative albedo variation in [0, 1].
    double amplitude = 0.3;
    /// Noise lattice cells per scene unit.
    double frequency = 2.0;
};

/// Infinite plane {x : normal . x = offset}.
struct PlaneShape {
    Eigen::Vector3d normal = Eigen::Vector3d::UnitY();
    double offset = 0.0;
    Texture texture;
};

/// Axis-aligned box.
struct BoxShape {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d half = Eigen::Vector3d::Constant(0.5);
    Texture texture;
};

struct SphereShape {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    double radius = 0.5;
    Texture texture;
};

enum class OccluderKind { Box, Sphere };

/// Moving object. Its centre follows the waypoints piecewise linearly over
/// the whole sequence and it is present on frames [first_frame, last_frame].
struct Occluder {
    OccluderKind kind = OccluderKind::Box;
    /// Box half extents; a sphere uses half.x as its radius.
    Eigen::Vector3d half = Eigen::Vector3d::Constant(0.3);
    Texture texture;
    int first_frame = 0;
    int last_frame = -1;  // -1: until the end
    std::vector<Eigen::Vector3d> waypoints;

    bool present(int frame) const { return frame >= first_frame && (last_frame < 0 || frame <= last_frame); }
};

struct CameraWaypoint {
    Eigen::Vector3d eye = Eigen::Vector3d::Zero();
    Eigen::Vector3d target = Eigen::Vector3d::UnitZ();
};

struct SceneSpec {
    std::string name = "custom";
    std::uint64_t seed = 1;
    int width = 160;
    int height = 120;
    int frames = 24;
    double focal = 140.0;
    /// Sub-samples per pixel axis for color.
    int supersample = 2;
    std::vector<PlaneShape> planes;
    std::vector<BoxShape> boxes;
    std::vector<SphereShape> spheres;
    std::vector<Occluder> occluders;
    std::vector<CameraWaypoint> camera;
    Eigen::Vector3d sky = Eigen::Vector3d(0.6, 0.7, 0.85);
    double sky_depth = 100.0;
    double depth_noise = 0.0;
    /// Write background depth inside masks instead of the occluder's depth.
    bool gt_background_depth = false;
    double inpaint_blur = 2.0;
    double inpaint_shift = 0.1;
    /// Positive grows the masks by this many pixels, negative erodes them.
    int mask_dilation = 0;

    std::vector<std::string> problems() const;
    CameraIntrinsics intrinsics() const {
        CameraIntrinsics k;
        k.focal_x = k.focal_y = focal;
        k.principal_x = 0.5 * width;
        k.principal_y = 0.5 * height;
        k.width = width;
        k.height = height;
        return k;
    }
};

// ---------------------------------------------------------------------------
// Procedural texture.

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline double lattice(std::uint64_t seed, std::int64_t x, std::int64_t y, std::int64_t z) {
    std::uint64_t h = mix64(seed ^ mix64(std::uint64_t(x) ^ mix64(std::uint64_t(y) ^ mix64(std::uint64_t(z)))));
    return double(h >> 11) * 0x1.0p-53;
}

inline double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

/// Trilinear value noise in [0, 1].
inline double value_noise(std::uint64_t seed, const Eigen::Vector3d& p) {
    const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
    const auto ix = std::int64_t(fx), iy = std::int64_t(fy), iz = std::int64_t(fz);
    const double tx = smooth(p.x() - fx), ty = smooth(p.y() - fy), tz = smooth(p.z() - fz);
    double acc = 0.0;
    for (int c = 0; c < 8; ++c) {
        const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
        const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
        acc += w * lattice(seed, ix + dx, iy + dy, iz + dz);
    }
    return acc;
}

inline Eigen::Vector3d shade(const Texture& t, std::uint64_t seed, const Eigen::Vector3d& p) {
    const Eigen::Vector3d q = p * t.frequency;
    const double n = 0.65 * value_noise(seed, q) + 0.35 * value_noise(seed + 1, 2.0 * q + Eigen::Vector3d(5.3, 1.7, 9.1));
    const double f = 1.0 + t.amplitude * (2.0 * n - 1.0);
    return (t.base * f).cwiseMax(0.0).cwiseMin(1.0);
}

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

inline bool ray_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& c,
                    const Eigen::Vector3d& h, double& t_hit) {
    double t0 = -std::numeric_limits<double>::infinity(), t1 = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
        const double lo = c[k] - h[k] - o[k], hi = c[k] + h[k] - o[k];
        if (std::abs(d[k]) < 1e-15) {
            if (lo > 0.0 || hi < 0.0) return false;
            continue;
        }
        double a = lo / d[k], b = hi / d[k];
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
    }
    if (t0 > t1 || t1 <= 0.0) return false;
    t_hit = t0 > 0.0 ? t0 : t1;
    return true;
}

inline bool ray_sphere(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& c, double r,
                       double& t_hit) {
    const Eigen::Vector3d oc = o - c;
    const double a = d.squaredNorm(), b = oc.dot(d), cc = oc.squaredNorm() - r * r;
    const double disc = b * b - a * cc;
    if (disc < 0.0) return false;
    const double s = std::sqrt(disc);
    double t = (-b - s) / a;
    if (t <= 0.0) t = (-b + s) / a;
    if (t <= 0.0) return false;
    t_hit = t;
    return true;
}

inline Eigen::Vector3d lerp_path(const std::vector<Eigen::Vector3d>& pts, double u) {
    if (pts.size() == 1) return pts[0];
    const double s = std::clamp(u, 0.0, 1.0) * double(pts.size() - 1);
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(s), pts.size() - 2);
    const double f = s - double(i);
    return (1.0 - f) * pts[i] + f * pts[i + 1];
}

inline double frame_param(int frame, int frames) { return frames > 1 ? double(frame) / double(frames - 1) : 0.0; }

}  // namespace detail

inline CameraPose camera_pose(const SceneSpec& spec, int frame) {
    std::vector<Eigen::Vector3d> eyes, targets;
    for (const auto& w : spec.camera) {
        eyes.push_back(w.eye);
        targets.push_back(w.target);
    }
    const double u = detail::frame_param(frame, spec.frames);
    return CameraPose::look_at(detail::lerp_path(eyes, u), detail::lerp_path(targets, u));
}

inline Eigen::Vector3d occluder_center(const SceneSpec& spec, const Occluder& o, int frame) {
    return detail::lerp_path(o.waypoints, detail::frame_param(frame, spec.frames));
}

/// Ray queries against the static scene and the per-frame occluders.
class SceneTracer {
public:
    explicit SceneTracer(const SceneSpec& spec) : spec_(spec) {}

    detail::Hit trace_static(const Eigen::Vector3d& o, const Eigen::Vector3d& d) const {
        detail::Hit hit;
        std::uint64_t id = 0;
        auto consider = [&](double t, const Texture& tex) {
            if (t < hit.t) {
                hit.t = t;
                hit.color = detail::shade(tex, spec_.seed * 131 + id, o + t * d);
            }
        };
        for (const auto& p : spec_.planes) {
            const double denom = p.normal.dot(d);
            if (std::abs(denom) > 1e-12) {
                const double t = (p.offset - p.normal.dot(o)) / denom;
                if (t > 0.0) consider(t, p.texture);
            }
            ++id;
        }
        for (const auto& b : spec_.boxes) {
            double t;
            if (detail::ray_box(o, d, b.center, b.half, t)) consider(t, b.texture);
            ++id;
        }
        for (const auto& s : spec_.spheres) {
            double t;
            if (detail::ray_sphere(o, d, s.center, s.radius, t)) consider(t, s.texture);
            ++id;
        }
        if (!std::isfinite(hit.t)) {
            hit.t = spec_.sky_depth;
            hit.color = spec_.sky;
        }
        return hit;
    }

    /// Nearest occluder hit on this frame; t = inf when none. Occluder
    /// textures are attached to the object so they move with it.
    detail::Hit trace_occluders(const Eigen::Vector3d& o, const Eigen::Vector3d& d, int frame) const {
        detail::Hit hit;
        std::uint64_t id = 1000;
        for (const auto& oc : spec_.occluders) {
            ++id;
            if (!oc.present(frame)) continue;
            const Eigen::Vector3d c = occluder_center(spec_, oc, frame);
            double t;
            const bool ok = oc.kind == OccluderKind::Box ? detail::ray_box(o, d, c, oc.half, t)
                                                         : detail::ray_sphere(o, d, c, oc.half.x(), t);
            if (ok && t < hit.t) {
                hit.t = t;
                hit.color = detail::shade(oc.texture, spec_.seed * 131 + id, o + t * d - c);
            }
        }
        return hit;
    }

private:
    const SceneSpec& spec_;
};

struct SynthFrame {
    ImageF dynamic_image;
    ImageF static_image;
    Mask mask;
    ImageF depth;
    ImageF confidence;
    ImageF inpainted;
    CameraPose pose;
};

inline ImageF gaussian_blur(const ImageF& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int r = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (auto& v : k) v /= sum;
    const int w = img.width, h = img.height, ch = img.channels;
    ImageF tmp(w, h, ch), out(w, h, ch);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) acc += k[i + r] * img.at(std::clamp(x + i, 0, w - 1), y, c);
                tmp.at(x, y, c) = float(acc);
            }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(x, std::clamp(y + i, 0, h - 1), c);
                out.at(x, y, c) = float(acc);
            }
    return out;
}

/// Corrupted copy of the static frame inside the mask: Gaussian blur with
/// sigma = blur, then a per-channel offset drawn uniformly from [-shift, shift].
/// Pixels outside the mask are copied from `outside`.
inline ImageF inpaint_oracle(const ImageF& static_frame, const ImageF& outside, const Mask& mask, double blur,
                             double shift, std::uint64_t seed) {
    if (blur < 0.0 || shift < 0.0) throw InputError("inpaint_oracle: corruption parameters must be non-negative");
    if (!static_frame.same_shape(outside) || !mask.same_extent(static_frame.width, static_frame.height))
        throw InputError("inpaint_oracle: image dimensions differ");
    const ImageF blurred = gaussian_blur(static_frame, blur);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double offset[3];
    for (double& o : offset) o = shift * u(rng);
    ImageF out = outside;
    const int ch = out.channels;
    for (std::size_t p = 0; p < mask.data.size(); ++p) {
        if (!mask.data[p]) continue;
        for (int c = 0; c < ch; ++c)
            out.data[p * ch + c] = std::clamp(float(blurred.data[p * ch + c] + offset[c % 3]), 0.0f, 1.0f);
    }
    return out;
}

inline Mask morph_mask(const Mask& m, int radius) {
    if (radius == 0) return m;
    const bool grow = radius > 0;
    const int r = std::abs(radius);
    Mask out(m.width, m.height, 1);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            bool v = !grow;
            for (int dy = -r; dy <= r && v != grow; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int xx = std::clamp(x + dx, 0, m.width - 1), yy = std::clamp(y + dy, 0, m.height - 1);
                    if ((m.at(xx, yy) != 0) == grow) {
                        v = grow;
                        break;
                    }
                }
            out.at(x, y) = v ? 1 : 0;
        }
    return out;
}

/// 1 / (1 + local standard deviation of depth over a 3x3 window).
inline ImageF depth_confidence(const ImageF& depth) {
    ImageF out(depth.width, depth.height, 1);
    for (int y = 0; y < depth.height; ++y)
        for (int x = 0; x < depth.width; ++x) {
            double s = 0.0, s2 = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const double v = depth.at(std::clamp(x + dx, 0, depth.width - 1),
                                              std::clamp(y + dy, 0, depth.height - 1));
                    s += v;
                    s2 += v * v;
                }
            const double mean = s / 9.0;
            const double var = std::max(0.0, s2 / 9.0 - mean * mean);
            out.at(x, y) = float(1.0 / (1.0 + std::sqrt(var)));
        }
    return out;
}

inline SynthFrame render_synth_frame(const SceneSpec& spec, int frame) {
    const SceneTracer tracer(spec);
    const auto intr = spec.intrinsics();
    SynthFrame f;
    f.pose = camera_pose(spec, frame);
    const int w = spec.width, h = spec.height, ss = std::max(1, spec.supersample);
    f.dynamic_image = ImageF(w, h, 3);
    f.static_image = ImageF(w, h, 3);
    f.mask = Mask(w, h, 1);
    f.depth = ImageF(w, h, 1);
    ImageF background_depth(w, h, 1);
    const Eigen::Matrix3d r = f.pose.world_from_camera();
    const Eigen::Vector3d o = f.pose.translation;
    auto ray = [&](double u, double v) {
        return Eigen::Vector3d(r * Eigen::Vector3d((u - intr.principal_x) / intr.focal_x,
                                                   (v - intr.principal_y) / intr.focal_y, 1.0));
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            Eigen::Vector3d stat = Eigen::Vector3d::Zero(), dyn = Eigen::Vector3d::Zero();
            bool covered = false;
            for (int sy = 0; sy < ss; ++sy)
                for (int sx = 0; sx < ss; ++sx) {
                    const Eigen::Vector3d d = ray(x + (sx + 0.5) / ss, y + (sy + 0.5) / ss);
                    const auto bg = tracer.trace_static(o, d);
                    const auto fg = tracer.trace_occluders(o, d, frame);
                    stat += bg.color;
                    if (fg.t < bg.t) {
                        dyn += fg.color;
                        covered = true;
                    } else {
                        dyn += bg.color;
                    }
                }
            stat /= double(ss * ss);
            dyn /= double(ss * ss);
            // The camera ray has unit z in the camera frame, so t is z-depth.
            const Eigen::Vector3d dc = ray(x + 0.5, y + 0.5);
            const auto bg = tracer.trace_static(o, dc);
            const auto fg = tracer.trace_occluders(o, dc, frame);
            background_depth.at(x, y) = float(bg.t);
            f.depth.at(x, y) = float(std::min(bg.t, fg.t));
            f.mask.at(x, y) = covered ? 1 : 0;
            for (int c = 0; c < 3; ++c) {
                f.static_image.at(x, y, c) = float(stat[c]);
                f.dynamic_image.at(x, y, c) = covered ? float(dyn[c]) : float(stat[c]);
            }
        }
    if (spec.gt_background_depth) f.depth = background_depth;
    if (spec.depth_noise > 0.0) {
        std::mt19937_64 rng(detail::mix64(spec.seed ^ (0x5151ULL + std::uint64_t(frame))));
        std::normal_distribution<double> n(0.0, spec.depth_noise);
        for (auto& v : f.depth.data) v = float(std::max(1e-3, v + n(rng)));
    }
    f.confidence = depth_confidence(f.depth);
    f.mask = morph_mask(f.mask, spec.mask_dilation);
    f.inpainted = inpaint_oracle(f.static_image, f.dynamic_image, f.mask, spec.inpaint_blur, spec.inpaint_shift,
                                 detail::mix64(spec.seed ^ (0xa11aULL + std::uint64_t(frame))));
    return f;
}

// ---------------------------------------------------------------------------
// Spec text format: flat `key = value` lines, repeated keys for list items.
//
//   plane    = nx ny nz offset  r g b amplitude frequency
//   box      = cx cy cz hx hy hz  r g b amplitude frequency
//   sphere   = cx cy cz radius  r g b amplitude frequency
//   occluder = box|sphere hx hy hz  r g b amplitude frequency  first last  x y z [x y z ...]
//   camera   = ex ey ez  tx ty tz

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::string fmt(const Eigen::Vector3d& v) { return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z()); }

inline std::string fmt(const Texture& t) {
    return fmt(t.base) + "  " + fmt(t.amplitude) + " " + fmt(t.frequency);
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

inline std::string scene_to_text(const SceneSpec& s) {
    using detail::fmt;
    std::ostringstream os;
    os << "name = " << s.name << '\n'
       << "seed = " << s.seed << '\n'
       << "width = " << s.width << '\n'
       << "height = " << s.height << '\n'
       << "frames = " << s.frames << '\n'
       << "focal = " << fmt(s.focal) << '\n'
       << "supersample = " << s.supersample << '\n'
       << "sky = " << fmt(s.sky) << '\n'
       << "sky_depth = " << fmt(s.sky_depth) << '\n'
       << "depth_noise = " << fmt(s.depth_noise) << '\n'
       << "gt_background_depth = " << (s.gt_background_depth ? "true" : "false") << '\n'
       << "inpaint_blur = " << fmt(s.inpaint_blur) << '\n'
       << "inpaint_shift = " << fmt(s.inpaint_shift) << '\n'
       << "mask_dilation = " << s.mask_dilation << '\n';
    for (const auto& c : s.camera) os << "camera = " << fmt(c.eye) << "  " << fmt(c.target) << '\n';
    for (const auto& p : s.planes) os << "plane = " << fmt(p.normal) << " " << fmt(p.offset) << "  " << fmt(p.texture) << '\n';
    for (const auto& b : s.boxes) os << "box = " << fmt(b.center) << "  " << fmt(b.half) << "  " << fmt(b.texture) << '\n';
    for (const auto& sp : s.spheres)
        os << "sphere = " << fmt(sp.center) << " " << fmt(sp.radius) << "  " << fmt(sp.texture) << '\n';
    for (const auto& o : s.occluders) {
        os << "occluder = " << (o.kind == OccluderKind::Box ? "box " : "sphere ") << fmt(o.half) << "  "
           << fmt(o.texture) << "  " << o.first_frame << ' ' << o.last_frame;
        for (const auto& w : o.waypoints) os << "  " << fmt(w);
        os << '\n';
    }
    return os.str();
}

inline SceneSpec parse_scene(const std::string& text) {
    SceneSpec s;
    std::vector<std::string> errors;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        const std::string where = "scene line " + std::to_string(lineno);
        if (eq == std::string::npos) {
            errors.push_back(where + ": expected key = value");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        std::istringstream vs(value);
        std::vector<double> nums;
        std::string first_word;
        if (key == "occluder") vs >> first_word;
        for (std::string tok; vs >> tok;) {
            try {
                std::size_t used = 0;
                nums.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                if (key != "name" && key != "gt_background_depth")
                    errors.push_back(where + ": '" + tok + "' is not a number");
            }
        }
        auto need = [&](std::size_t n, bool at_least = false) {
            const bool ok = at_least ? nums.size() >= n : nums.size() == n;
            if (!ok) errors.push_back(where + ": " + key + " expects " + (at_least ? "at least " : "") +
                                      std::to_string(n) + " numbers");
            return ok;
        };
        auto vec = [&](std::size_t at) { return Eigen::Vector3d(nums[at], nums[at + 1], nums[at + 2]); };
        auto tex = [&](std::size_t at) {
            Texture t;
            t.base = vec(at);
            t.amplitude = nums[at + 3];
            t.frequency = nums[at + 4];
            return t;
        };
        if (key == "name") s.name = value;
        else if (key == "gt_background_depth") {
            if (value == "true" || value == "1") s.gt_background_depth = true;
            else if (value == "false" || value == "0") s.gt_background_depth = false;
            else errors.push_back(where + ": gt_background_depth must be true or false");
        } else if (key == "seed") { if (need(1)) s.seed = static_cast<std::uint64_t>(nums[0]); }
        else if (key == "width") { if (need(1)) s.width = int(nums[0]); }
        else if (key == "height") { if (need(1)) s.height = int(nums[0]); }
        else if (key == "frames") { if (need(1)) s.frames = int(nums[0]); }
        else if (key == "focal") { if (need(1)) s.focal = nums[0]; }
        else if (key == "supersample") { if (need(1)) s.supersample = int(nums[0]); }
        else if (key == "sky") { if (need(3)) s.sky = vec(0); }
        else if (key == "sky_depth") { if (need(1)) s.sky_depth = nums[0]; }
        else if (key == "depth_noise") { if (need(1)) s.depth_noise = nums[0]; }
        else if (key == "inpaint_blur") { if (need(1)) s.inpaint_blur = nums[0]; }
        else if (key == "inpaint_shift") { if (need(1)) s.inpaint_shift = nums[0]; }
        else if (key == "mask_dilation") { if (need(1)) s.mask_dilation = int(nums[0]); }
        else if (key == "camera") { if (need(6)) s.camera.push_back({vec(0), vec(3)}); }
        else if (key == "plane") { if (need(9)) s.planes.push_back({vec(0), nums[3], tex(4)}); }
        else if (key == "box") { if (need(11)) s.boxes.push_back({vec(0), vec(3), tex(6)}); }
        else if (key == "sphere") { if (need(9)) s.spheres.push_back({vec(0), nums[3], tex(4)}); }
        else if (key == "occluder") {
            if (first_word != "box" && first_word != "sphere") {
                errors.push_back(where + ": occluder kind must be box or sphere");
            } else if (need(13, true)) {
                if ((nums.size() - 10) % 3 != 0) {
                    errors.push_back(where + ": occluder waypoints must be x y z triples");
                } else {
                    Occluder o;
                    o.kind = first_word == "box" ? OccluderKind::Box : OccluderKind::Sphere;
                    o.half = vec(0);
                    o.texture = tex(3);
                    o.first_frame = int(nums[8]);
                    o.last_frame = int(nums[9]);
                    for (std::size_t k = 10; k < nums.size(); k += 3) o.waypoints.push_back(vec(k));
                    s.occluders.push_back(std::move(o));
                }
            }
        } else {
            errors.push_back(where + ": unknown key '" + key + "'");
        }
    }
    for (auto& p : s.problems()) errors.push_back(std::move(p));
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return s;
}

inline SceneSpec load_scene(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read scene file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scene(ss.str());
}

namespace detail {

/// Conservative separation test between an occluder's bounding box and a
/// static shape; touching is allowed.
inline bool overlaps(const Eigen::Vector3d& c, const Eigen::Vector3d& h, const SceneSpec& s, std::string& what) {
    constexpr double tol = 1e-9;
    for (std::size_t i = 0; i < s.planes.size(); ++i) {
        const auto& p = s.planes[i];
        const Eigen::Vector3d n = p.normal.normalized();
        const double radius = h.cwiseProduct(n.cwiseAbs()).sum();
        const double dist = (n.dot(c) - p.offset / p.normal.norm());
        if (std::abs(dist) < radius - tol) {
            what = "plane " + std::to_string(i);
            return true;
        }
    }
    for (std::size_t i = 0; i < s.boxes.size(); ++i) {
        const auto& b = s.boxes[i];
        if (((c - b.center).cwiseAbs() - (h + b.half)).maxCoeff() < -tol) {
            what = "box " + std::to_string(i);
            return true;
        }
    }
    for (std::size_t i = 0; i < s.spheres.size(); ++i) {
        const auto& sp = s.spheres[i];
        const Eigen::Vector3d closest = sp.center.cwiseMax(c - h).cwiseMin(c + h);
        if ((closest - sp.center).norm() < sp.radius - tol) {
            what = "sphere " + std::to_string(i);
            return true;
        }
    }
    return false;
}

}  // namespace detail

inline std::vector<std::string> SceneSpec::problems() const {
    std::vector<std::string> out;
    if (width <= 0 || height <= 0) out.emplace_back("scene size must be positive");
    if (frames <= 0) out.emplace_back("scene frame count must be positive");
    if (!(focal > 0.0)) out.emplace_back("scene focal length must be positive");
    if (supersample <= 0) out.emplace_back("supersample must be positive");
    if (camera.empty()) out.emplace_back("scene needs at least one camera waypoint");
    for (std::size_t i = 0; i < camera.size(); ++i)
        if ((camera[i].target - camera[i].eye).norm() < 1e-9)
            out.push_back("camera waypoint " + std::to_string(i) + " looks at its own position");
    if (depth_noise < 0.0) out.emplace_back("depth_noise must be non-negative");
    if (inpaint_blur < 0.0 || inpaint_shift < 0.0) out.emplace_back("inpainting corruption must be non-negative");
    if (!(sky_depth > 0.0)) out.emplace_back("sky_depth must be positive");
    for (std::size_t i = 0; i < planes.size(); ++i)
        if (planes[i].normal.norm() < 1e-12) out.push_back("plane " + std::to_string(i) + " has a zero normal");
    for (std::size_t i = 0; i < occluders.size(); ++i) {
        const auto& o = occluders[i];
        const std::string name = "occluder " + std::to_string(i);
        if (o.waypoints.empty()) {
            out.push_back(name + " has no waypoints");
            continue;
        }
        if (o.half.minCoeff() <= 0.0) {
            out.push_back(name + " must have a positive size");
            continue;
        }
        const Eigen::Vector3d h = o.kind == OccluderKind::Box ? o.half : Eigen::Vector3d::Constant(o.half.x());
        for (int f = 0; f < frames; ++f) {
            if (!o.present(f)) continue;
            std::string what;
            if (detail::overlaps(occluder_center(*this, o, f), h, *this, what)) {
                out.push_back(name + " intersects " + what + " on frame " + std::to_string(f));
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bundle output.

inline constexpr const char* kSceneFile = "scene.txt";

/// Writes the ingest bundle plus static ground truth (`static_%05d.png`) and
/// the resolved spec. Files are staged in a sibling directory and moved into
/// place at the end, so failures leave no partial bundle.
inline void generate(const SceneSpec& spec, const std::filesystem::path& out_dir, int threads = 1) {
    namespace fs = std::filesystem;
    if (auto p = spec.problems(); !p.empty()) throw ConfigError(std::move(p));
    const fs::path target = fs::absolute(out_dir).lexically_normal();
    const fs::path parent = target.has_filename() ? target.parent_path() : target.parent_path().parent_path();
    if (!fs::is_directory(parent)) throw InputError("output parent directory does not exist: " + parent.string());
    if (fs::exists(target) && !fs::is_directory(target))
        throw InputError("output path exists and is not a directory: " + target.string());
    const fs::path stage = parent / ("." + target.filename().string() + ".partial");
    std::error_code ec;
    fs::remove_all(stage, ec);
    if (!fs::create_directory(stage, ec)) throw InputError("cannot create " + stage.string());
    try {
        std::vector<CameraRecord> cams(spec.frames);
        parallel_for(std::size_t(spec.frames), threads, [&](std::size_t i) {
            const int f = int(i);
            const auto fr = render_synth_frame(spec, f);
            write_png(fr.dynamic_image, stage / frame_file("frame", f, "png"));
            write_png(fr.static_image, stage / frame_file("static", f, "png"));
            write_png(fr.inpainted, stage / frame_file("inpaint", f, "png"));
            write_mask(fr.mask, stage / frame_file("mask", f, "png"));
            write_f32_map(fr.depth, stage / frame_file("depth", f, "f32"));
            write_f32_map(fr.confidence, stage / frame_file("conf", f, "f32"));
            cams[i] = {f, fr.pose, spec.intrinsics()};
        });
        write_cameras(cams, stage / kCamerasFile);
        std::ofstream(stage / kSceneFile) << scene_to_text(spec);
        fs::create_directories(target);
        for (const auto& e : fs::directory_iterator(stage)) fs::rename(e.path(), target / e.path().filename());
        fs::remove(stage);
    } catch (...) {
        fs::remove_all(stage, ec);
        throw;
    }
}

// ---------------------------------------------------------------------------
// Builtin scenes.

namespace detail {

inline Texture tex(double r, double g, double b, double amp = 0.35, double freq = 2.0) {
    return {Eigen::Vector3d(r, g, b), amp, freq};
}

}  // namespace detail

/// Indoor room with a short-lived person-sized occluder crossing the view.
inline SceneSpec builtin_room() {
    using detail::tex;
    using V = Eigen::Vector3d;
    SceneSpec s;
    s.name = "room";
    s.seed = 101;
    s.planes = {{V(0, 1, 0), 0.0, tex(0.55, 0.42, 0.30, 0.4, 3.0)},
                {V(0, 0, 1), 6.0, tex(0.80, 0.78, 0.70, 0.3, 1.5)},
                {V(1, 0, 0), -3.5, tex(0.45, 0.60, 0.70, 0.3, 1.5)},
                {V(1, 0, 0), 3.5, tex(0.70, 0.55, 0.55, 0.3, 1.5)},
                {V(0, 1, 0), 3.0, tex(0.90, 0.90, 0.88, 0.1, 1.0)}};
    s.boxes = {{V(-1.6, 0.5, 4.5), V(0.6, 0.5, 0.4), tex(0.30, 0.45, 0.75, 0.4, 3.0)},
               {V(1.5, 0.35, 3.8), V(0.45, 0.35, 0.45), tex(0.75, 0.40, 0.25, 0.4, 3.0)}};
    s.spheres = {{V(0.2, 0.45, 5.0), 0.45, tex(0.35, 0.70, 0.35, 0.5, 4.0)}};
    s.camera = {{V(-1.0, 1.5, -1.5), V(0.0, 0.7, 5.0)}, {V(1.0, 1.5, -1.5), V(0.0, 0.7, 5.0)}};
    Occluder person;
    person.kind = OccluderKind::Box;
    person.half = V(0.25, 0.8, 0.2);
    person.texture = tex(0.85, 0.25, 0.20, 0.2, 4.0);
    person.first_frame = 4;
    person.last_frame = 17;
    person.waypoints = {V(2.5, 0.8, 2.3), V(-2.5, 0.8, 2.3)};
    s.occluders = {person};
    return s;
}

/// Open yard with scattered objects and two small transient occluders.
inline SceneSpec builtin_yard() {
    using detail::tex;
    using V = Eigen::Vector3d;
    SceneSpec s;
    s.name = "yard";
    s.seed = 202;
    s.planes = {{V(0, 1, 0), 0.0, tex(0.35, 0.55, 0.25, 0.45, 2.5)},
                {V(0, 0, 1), 9.0, tex(0.60, 0.50, 0.40, 0.35, 1.0)}};
    s.boxes = {{V(-2.5, 0.6, 6.0), V(0.7, 0.6, 0.7), tex(0.65, 0.35, 0.25, 0.4, 2.0)},
               {V(2.2, 0.9, 7.0), V(0.5, 0.9, 0.5), tex(0.50, 0.50, 0.55, 0.4, 2.0)},
               {V(0.0, 0.25, 4.0), V(1.2, 0.25, 0.3), tex(0.70, 0.65, 0.45, 0.4, 3.0)}};
    s.spheres = {{V(-0.8, 0.6, 6.5), 0.6, tex(0.80, 0.70, 0.30, 0.5, 3.0)},
                 {V(1.2, 0.35, 5.0), 0.35, tex(0.30, 0.40, 0.80, 0.5, 3.0)}};
    s.camera = {{V(-1.5, 1.7, -1.0), V(0.0, 0.8, 7.0)}, {V(1.5, 1.5, -0.8), V(0.0, 0.8, 7.0)}};
    Occluder a;
    a.kind = OccluderKind::Sphere;
    a.half = V::Constant(0.35);
    a.texture = tex(0.20, 0.20, 0.70, 0.2, 4.0);
    a.first_frame = 0;
    a.last_frame = 11;
    a.waypoints = {V(-2.0, 0.35, 2.8), V(1.5, 0.35, 2.8)};
    Occluder b;
    b.kind = OccluderKind::Box;
    b.half = V(0.3, 0.6, 0.3);
    b.texture = tex(0.90, 0.80, 0.20, 0.2, 4.0);
    b.first_frame = 10;
    b.last_frame = 23;
    b.waypoints = {V(2.0, 0.6, 2.0), V(-1.0, 0.6, 2.0)};
    s.occluders = {a, b};
    return s;
}

/// Street canyon with a large vehicle-like occluder close to the camera for
/// most of the sequence.
inline SceneSpec builtin_street() {
    using detail::tex;
    using V = Eigen::Vector3d;
    SceneSpec s;
    s.name = "street";
    s.seed = 303;
    s.planes = {{V(0, 1, 0), 0.0, tex(0.40, 0.40, 0.42, 0.35, 2.0)},
                {V(1, 0, 0), -3.0, tex(0.75, 0.55, 0.40, 0.4, 1.5)},
                {V(1, 0, 0), 3.0, tex(0.55, 0.60, 0.70, 0.4, 1.5)},
                {V(0, 0, 1), 14.0, tex(0.80, 0.75, 0.65, 0.3, 1.0)}};
    s.boxes = {{V(-2.4, 1.0, 6.0), V(0.6, 1.0, 1.2), tex(0.45, 0.30, 0.25, 0.4, 2.0)},
               {V(2.5, 0.5, 9.0), V(0.5, 0.5, 0.8), tex(0.30, 0.55, 0.35, 0.4, 2.0)}};
    s.spheres = {{V(2.2, 0.4, 5.0), 0.4, tex(0.85, 0.60, 0.20, 0.5, 3.0)}};
    s.camera = {{V(-0.6, 1.6, -2.0), V(0.0, 1.0, 10.0)}, {V(0.6, 1.6, 0.5), V(0.0, 1.0, 10.0)}};
    Occluder bus;
    bus.kind = OccluderKind::Box;
    bus.half = V(0.9, 0.95, 1.0);
    bus.texture = tex(0.85, 0.85, 0.25, 0.25, 3.0);
    bus.first_frame = 0;
    bus.last_frame = -1;
    bus.waypoints = {V(-0.6, 0.95, 2.6), V(0.6, 0.95, 4.6)};
    s.occluders = {bus};
    return s;
}

inline std::vector<SceneSpec> builtin_suites() { return {builtin_room(), builtin_yard(), builtin_street()}; }

inline std::optional<SceneSpec> find_builtin(const std::string& name) {
    for (auto& s : builtin_suites())
        if (s.name == name) return s;
    return std::nullopt;
}

}  // namespace gags
