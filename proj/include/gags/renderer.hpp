// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gags/common.hpp"
#include "gags/geometry.hpp"
#include "gags/model.hpp"

#include <array>
#include <numeric>
#include <span>

namespace gags {

inline constexpr int kTileSize = 16;
/// Upper bound on a single contribution's effective opacity.
inline constexpr double kMaxAlpha = 0.99;
/// Compositing stops once transmittance falls below this.
inline constexpr double kMinTransmittance = 1e-4;
/// Primitives closer than this (camera-frame z) are culled.
inline constexpr double kNearPlane = 0.01;
/// Footprints are cut at squared Mahalanobis distance 9 (3 sigma); the
/// falloff is tapered to zero over [kTaperStart, 9] so the cut is C1.
inline constexpr double kCutoffMahalanobisSq = 9.0;
inline constexpr double kTaperStart = 6.25;

struct RenderSettings {
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    /// Active SH degree; negative means the set's stored degree.
    int sh_degree = -1;
    /// When false the authenticity scalar is ignored (plain opacity compositing).
    bool use_authenticity = true;
    int threads = 1;
};

/// Screen-space footprint weight for squared Mahalanobis distance q.
template <typename T>
T footprint_weight(T q) {
    if (q >= T(kCutoffMahalanobisSq)) return T(0);
    const T g = std::exp(T(-0.5) * q);
    if (q <= T(kTaperStart)) return g;
    const T s = (T(kCutoffMahalanobisSq) - q) / T(kCutoffMahalanobisSq - kTaperStart);
    return g * s * s * (T(3) - T(2) * s);
}

/// d footprint_weight / dq.
template <typename T>
T footprint_weight_derivative(T q) {
    if (q >= T(kCutoffMahalanobisSq)) return T(0);
    const T g = std::exp(T(-0.5) * q);
    if (q <= T(kTaperStart)) return T(-0.5) * g;
    const T span = T(kCutoffMahalanobisSq - kTaperStart);
    const T s = (T(kCutoffMahalanobisSq) - q) / span;
    const T w = s * s * (T(3) - T(2) * s);
    const T dw_ds = T(6) * s * (T(1) - s);
    return T(-0.5) * g * w - g * dw_ds / span;
}

/// A primitive after projection into one view.
template <typename T>
struct ScreenGaussian {
    bool visible = false;
    Vec3<T> camera_point = Vec3<T>::Zero();
    Vec2<T> center = Vec2<T>::Zero();
    T depth = T(0);
    T cov[3] = {T(0), T(0), T(0)};    // xx, xy, yy (dilated)
    T conic[3] = {T(0), T(0), T(0)};  // inverse of cov, same layout
    Vec3<T> color = Vec3<T>::Zero();  // clamped to [0,1]
    std::uint8_t color_clamped = 0;   // bit c set when channel c saturated
    T opacity = T(0);
    T authenticity = T(1);
    int px0 = 0, px1 = -1, py0 = 0, py1 = -1;  // inclusive pixel bounds of the 3 sigma box
};

template <typename T>
struct ContributorRecord {
    std::uint16_t pixel = 0;  // tile-local pixel index, row major
    T falloff = T(0);
    T alpha = T(0);          // effective opacity after modulation and clamping
    T transmittance = T(0);  // at entry
};

/// One primitive's contribution to one pixel, as seen from the image.
template <typename T>
struct PixelContribution {
    std::uint32_t primitive = 0;
    T falloff = T(0);
    T alpha = T(0);
    T transmittance = T(0);
};

template <typename T>
struct RenderTile {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open pixel range
    std::vector<std::uint32_t> primitives;  // front-to-back
    /// Records grouped by primitive slot; within a pixel they are front to back.
    std::vector<ContributorRecord<T>> records;
    std::vector<std::uint32_t> slot_offsets;  // primitives.size()+1 entries
};

template <typename T>
struct RenderOutput {
    int width = 0;
    int height = 0;
    Image<T> color;          // H x W x 3
    Image<T> alpha;          // accumulated alpha, 1 - residual transmittance
    Image<T> authenticity;   // composited authenticity (no background term)
    std::vector<ScreenGaussian<T>> screen;
    std::vector<std::uint32_t> depth_order;
    std::vector<RenderTile<T>> tiles;
    int tiles_x = 0;
    int tiles_y = 0;
    Vec3<T> background = Vec3<T>::Zero();
    int sh_degree = 0;
    bool use_authenticity = true;

    std::size_t primitive_count() const { return screen.size(); }

    /// Contributors of one pixel, front to back.
    std::vector<PixelContribution<T>> contributors(int x, int y) const {
        const auto& tile = tiles[static_cast<std::size_t>(y / kTileSize) * tiles_x + x / kTileSize];
        const auto local = static_cast<std::uint16_t>((y - tile.y0) * (tile.x1 - tile.x0) + (x - tile.x0));
        std::vector<PixelContribution<T>> out;
        for (std::size_t slot = 0; slot < tile.primitives.size(); ++slot)
            for (std::uint32_t r = tile.slot_offsets[slot]; r < tile.slot_offsets[slot + 1]; ++r) {
                const auto& rec = tile.records[r];
                if (rec.pixel == local)
                    out.push_back({tile.primitives[slot], rec.falloff, rec.alpha, rec.transmittance});
            }
        return out;
    }
};

/// Gradients of a scalar loss with respect to the raw parameters.
template <typename T>
struct GradBuffer {
    ParamArrays<T> params;
    /// Per-primitive norm of dL/d(screen center), scaled to normalized device
    /// units (x W/2, x H/2) so thresholds are resolution independent.
    std::vector<T> screen_grad_norm;
    std::vector<char> visible;
};

namespace detail {

template <typename T>
int active_degree(const BasicGaussianSet<T>& gs, const RenderSettings& s) {
    const int d = s.sh_degree < 0 ? gs.sh_degree() : s.sh_degree;
    if (d > gs.sh_degree()) throw InputError("render: active SH degree exceeds stored degree");
    return d;
}

}  // namespace detail

/// Projects every primitive into the view; culled entries have visible = false.
template <typename T>
std::vector<ScreenGaussian<T>> project_gaussians(const BasicGaussianSet<T>& gs, const CameraPose& pose,
                                                 const CameraIntrinsics& intr, const RenderSettings& settings) {
    const int degree = detail::active_degree(gs, settings);
    const std::size_t n = gs.size();
    std::vector<ScreenGaussian<T>> out(n);
    const Mat3<T> cam_from_world = pose.camera_from_world().cast<T>();
    const Vec3<T> center = pose.translation.cast<T>();
    parallel_for(n, settings.threads, [&](std::size_t i) {
        ScreenGaussian<T>& sg = out[i];
        const Vec3<T> mu = gs.position(i);
        sg.camera_point = cam_from_world * (mu - center);
        if (!(sg.camera_point.z() > T(kNearPlane))) return;
        const Mat3<T> cov3 = world_covariance<T>(gs.scale(i), gs.rotation(i));
        const Mat2<T> cov2 = project_covariance<T>(cov3, cam_from_world, intr, sg.camera_point);
        const T det = cov2(0, 0) * cov2(1, 1) - cov2(0, 1) * cov2(0, 1);
        if (!(det > T(0))) return;
        const T iz = T(1) / sg.camera_point.z();
        sg.center = {T(intr.focal_x) * sg.camera_point.x() * iz + T(intr.principal_x),
                     T(intr.focal_y) * sg.camera_point.y() * iz + T(intr.principal_y)};
        sg.depth = sg.camera_point.z();
        sg.cov[0] = cov2(0, 0);
        sg.cov[1] = cov2(0, 1);
        sg.cov[2] = cov2(1, 1);
        sg.conic[0] = cov2(1, 1) / det;
        sg.conic[1] = -cov2(0, 1) / det;
        sg.conic[2] = cov2(0, 0) / det;
        const T cutoff = std::sqrt(T(kCutoffMahalanobisSq));
        const T rx = cutoff * std::sqrt(cov2(0, 0));
        const T ry = cutoff * std::sqrt(cov2(1, 1));
        // Pixel centers sit at integer + 0.5.
        const double fx0 = std::ceil(static_cast<double>(sg.center.x() - rx) - 0.5);
        const double fx1 = std::floor(static_cast<double>(sg.center.x() + rx) - 0.5);
        const double fy0 = std::ceil(static_cast<double>(sg.center.y() - ry) - 0.5);
        const double fy1 = std::floor(static_cast<double>(sg.center.y() + ry) - 0.5);
        if (!(fx1 >= 0.0 && fy1 >= 0.0 && fx0 <= intr.width - 1 && fy0 <= intr.height - 1)) return;
        sg.px0 = static_cast<int>(std::max(fx0, 0.0));
        sg.px1 = static_cast<int>(std::min(fx1, double(intr.width - 1)));
        sg.py0 = static_cast<int>(std::max(fy0, 0.0));
        sg.py1 = static_cast<int>(std::min(fy1, double(intr.height - 1)));
        if (sg.px0 > sg.px1 || sg.py0 > sg.py1) return;

        const Vec3<T> dir = (mu - center).normalized();
        const Vec3<T> raw = eval_sh_unclamped<T>(gs.sh(i), dir, degree);
        for (int c = 0; c < 3; ++c) {
            if (raw[c] < T(0) || raw[c] > T(1)) sg.color_clamped |= std::uint8_t(1u << c);
            sg.color[c] = std::clamp(raw[c], T(0), T(1));
        }
        sg.opacity = gs.opacity(i);
        sg.authenticity = settings.use_authenticity ? gs.authenticity(i) : T(1);
        sg.visible = true;
    });
    return out;
}

/// Visible primitive ids sorted front to back by center depth; ties by id.
template <typename T>
std::vector<std::uint32_t> depth_sorted_visible(const std::vector<ScreenGaussian<T>>& screen) {
    std::vector<std::pair<T, std::uint32_t>> keyed;
    keyed.reserve(screen.size());
    for (std::uint32_t i = 0; i < screen.size(); ++i)
        if (screen[i].visible) keyed.emplace_back(screen[i].depth, i);
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::uint32_t> order(keyed.size());
    for (std::size_t k = 0; k < keyed.size(); ++k) order[k] = keyed[k].second;
    return order;
}

/// Forward splatting: alpha' = theta * alpha * g, composited front to back.
template <typename T>
RenderOutput<T> render(const BasicGaussianSet<T>& gs, const CameraPose& pose, const CameraIntrinsics& intr,
                       const RenderSettings& settings = {}) {
    intr.validate();
    gs.validate();
    RenderOutput<T> out;
    out.width = intr.width;
    out.height = intr.height;
    out.color = Image<T>(intr.width, intr.height, 3);
    out.alpha = Image<T>(intr.width, intr.height, 1);
    out.authenticity = Image<T>(intr.width, intr.height, 1);
    out.background = settings.background.cast<T>();
    out.sh_degree = detail::active_degree(gs, settings);
    out.use_authenticity = settings.use_authenticity;
    out.screen = project_gaussians(gs, pose, intr, settings);
    out.depth_order = depth_sorted_visible(out.screen);

    out.tiles_x = (intr.width + kTileSize - 1) / kTileSize;
    out.tiles_y = (intr.height + kTileSize - 1) / kTileSize;
    out.tiles.resize(static_cast<std::size_t>(out.tiles_x) * out.tiles_y);
    for (int ty = 0; ty < out.tiles_y; ++ty) {
        for (int tx = 0; tx < out.tiles_x; ++tx) {
            auto& tile = out.tiles[static_cast<std::size_t>(ty) * out.tiles_x + tx];
            tile.x0 = tx * kTileSize;
            tile.y0 = ty * kTileSize;
            tile.x1 = std::min(intr.width, tile.x0 + kTileSize);
            tile.y1 = std::min(intr.height, tile.y0 + kTileSize);
        }
    }
    for (std::uint32_t id : out.depth_order) {
        const auto& sg = out.screen[id];
        for (int ty = sg.py0 / kTileSize; ty <= sg.py1 / kTileSize; ++ty)
            for (int tx = sg.px0 / kTileSize; tx <= sg.px1 / kTileSize; ++tx)
                out.tiles[static_cast<std::size_t>(ty) * out.tiles_x + tx].primitives.push_back(id);
    }

    const T max_alpha = T(kMaxAlpha);
    const T min_t = T(kMinTransmittance);
    parallel_for(out.tiles.size(), settings.threads, [&](std::size_t t) {
        auto& tile = out.tiles[t];
        const int tw = tile.x1 - tile.x0;
        const int npix = tw * (tile.y1 - tile.y0);
        std::array<T, kTileSize * kTileSize> trans, auth;
        std::array<Vec3<T>, kTileSize * kTileSize> color;
        trans.fill(T(1));
        auth.fill(T(0));
        color.fill(Vec3<T>::Zero());
        int alive = npix;
        tile.records.clear();
        tile.records.reserve(tile.primitives.size() * 16);
        tile.slot_offsets.assign(tile.primitives.size() + 1, 0);
        // Primitive-major traversal; per pixel the order is still front to
        // back, and a pixel stops accepting contributions once its
        // transmittance falls below the threshold.
        std::size_t slot = 0;
        for (; slot < tile.primitives.size() && alive > 0; ++slot) {
            tile.slot_offsets[slot] = static_cast<std::uint32_t>(tile.records.size());
            const auto& sg = out.screen[tile.primitives[slot]];
            const int xa = std::max(sg.px0, tile.x0), xb = std::min(sg.px1, tile.x1 - 1);
            const int ya = std::max(sg.py0, tile.y0), yb = std::min(sg.py1, tile.y1 - 1);
            const T modulated = sg.authenticity * sg.opacity;
            const T cx = sg.center.x(), cy = sg.center.y();
            const T ca = sg.conic[0], cb = sg.conic[1], cc = sg.conic[2];
            for (int y = ya; y <= yb; ++y) {
                const T dy = T(y) + T(0.5) - cy;
                for (int x = xa; x <= xb; ++x) {
                    const int local = (y - tile.y0) * tw + (x - tile.x0);
                    if (trans[local] < min_t) continue;
                    const T dx = T(x) + T(0.5) - cx;
                    const T q = ca * dx * dx + T(2) * cb * dx * dy + cc * dy * dy;
                    if (q >= T(kCutoffMahalanobisSq)) continue;
                    const T g = footprint_weight(q);
                    const T a = std::min(max_alpha, modulated * g);
                    if (a <= T(0)) continue;
                    tile.records.push_back({static_cast<std::uint16_t>(local), g, a, trans[local]});
                    const T w = a * trans[local];
                    color[local] += w * sg.color;
                    auth[local] += w * sg.authenticity;
                    trans[local] *= T(1) - a;
                    if (trans[local] < min_t) --alive;
                }
            }
        }
        for (; slot <= tile.primitives.size(); ++slot)
            tile.slot_offsets[slot] = static_cast<std::uint32_t>(tile.records.size());
        for (int local = 0; local < npix; ++local) {
            const int x = tile.x0 + local % tw, y = tile.y0 + local / tw;
            const Vec3<T> c = color[local] + trans[local] * out.background;
            for (int ch = 0; ch < 3; ++ch) out.color.at(x, y, ch) = c[ch];
            out.alpha.at(x, y) = T(1) - trans[local];
            out.authenticity.at(x, y) = auth[local];
        }
    });
    return out;
}

/// Reference compositor: every visible primitive tested at every pixel in a
/// single global loop, no tiles and no bounding boxes.
template <typename T>
Image<T> render_naive(const BasicGaussianSet<T>& gs, const CameraPose& pose, const CameraIntrinsics& intr,
                      const RenderSettings& settings = {}, Image<T>* authenticity_map = nullptr) {
    intr.validate();
    const auto screen = project_gaussians(gs, pose, intr, settings);
    const auto order = depth_sorted_visible(screen);
    Image<T> img(intr.width, intr.height, 3);
    if (authenticity_map) *authenticity_map = Image<T>(intr.width, intr.height, 1);
    const Vec3<T> bg = settings.background.cast<T>();
    for (int y = 0; y < intr.height; ++y) {
        for (int x = 0; x < intr.width; ++x) {
            const Vec2<T> p(T(x) + T(0.5), T(y) + T(0.5));
            T trans = T(1);
            Vec3<T> c = Vec3<T>::Zero();
            T auth = T(0);
            for (std::uint32_t id : order) {
                if (trans < T(kMinTransmittance)) break;
                const auto& sg = screen[id];
                Mat2<T> cov;
                cov << sg.cov[0], sg.cov[1], sg.cov[1], sg.cov[2];
                const Vec2<T> d = p - sg.center;
                const T q = d.dot(cov.inverse() * d);
                const T a = std::min(T(kMaxAlpha), sg.authenticity * sg.opacity * footprint_weight(q));
                if (a <= T(0)) continue;
                c += a * trans * sg.color;
                auth += a * trans * sg.authenticity;
                trans *= T(1) - a;
            }
            c += trans * bg;
            for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = c[ch];
            if (authenticity_map) authenticity_map->at(x, y) = auth;
        }
    }
    return img;
}

/// Per-pixel expected authenticity under the render weights.
template <typename T>
Image<T> render_authenticity_map(const BasicGaussianSet<T>& gs, const CameraPose& pose,
                                 const CameraIntrinsics& intr, const RenderSettings& settings = {}) {
    return render(gs, pose, intr, settings).authenticity;
}

namespace detail {

/// Screen-space gradient slots accumulated per (tile, primitive).
template <typename T>
struct ScreenGrad {
    T center[2] = {T(0), T(0)};
    T conic[3] = {T(0), T(0), T(0)};  // wrt a, b, c of q = a dx^2 + 2 b dx dy + c dy^2
    T color[3] = {T(0), T(0), T(0)};
    T modulated_opacity = T(0);       // wrt theta * alpha

    void add(const ScreenGrad& o) {
        for (int k = 0; k < 2; ++k) center[k] += o.center[k];
        for (int k = 0; k < 3; ++k) conic[k] += o.conic[k];
        for (int k = 0; k < 3; ++k) color[k] += o.color[k];
        modulated_opacity += o.modulated_opacity;
    }
};

}  // namespace detail

/// Analytic backward pass for render(). `dl_dcolor` is dL/dC, H x W x 3.
/// Tile-local screen gradients are reduced in tile order, so results do not
/// depend on the worker count.
template <typename T>
GradBuffer<T> render_backward(const BasicGaussianSet<T>& gs, const CameraPose& pose, const CameraIntrinsics& intr,
                              const RenderOutput<T>& out, const Image<T>& dl_dcolor, int threads = 1) {
    if (out.primitive_count() != gs.size() || out.width != intr.width || out.height != intr.height)
        throw InputError("render_backward: forward output does not match the scene or camera");
    if (dl_dcolor.width != out.width || dl_dcolor.height != out.height || dl_dcolor.channels != 3)
        throw InputError("render_backward: dL/dC shape mismatch");

    const std::size_t n = gs.size();
    std::vector<std::vector<detail::ScreenGrad<T>>> tile_grads(out.tiles.size());

    parallel_for(out.tiles.size(), threads, [&](std::size_t t) {
        const auto& tile = out.tiles[t];
        auto& grads = tile_grads[t];
        grads.assign(tile.primitives.size(), {});
        const int tw = tile.x1 - tile.x0;
        const int npix = tw * (tile.y1 - tile.y0);
        std::array<Vec3<T>, kTileSize * kTileSize> dl_dc, suffix;
        std::array<T, kTileSize * kTileSize> px, py;
        for (int local = 0; local < npix; ++local) {
            const int x = tile.x0 + local % tw, y = tile.y0 + local / tw;
            dl_dc[local] = Vec3<T>(dl_dcolor.at(x, y, 0), dl_dcolor.at(x, y, 1), dl_dcolor.at(x, y, 2));
            // Suffix: everything composited behind the current record, background included.
            suffix[local] = (T(1) - out.alpha.at(x, y)) * out.background;
            px[local] = T(x) + T(0.5);
            py[local] = T(y) + T(0.5);
        }
        for (std::size_t slot = tile.primitives.size(); slot-- > 0;) {
            const auto& sg = out.screen[tile.primitives[slot]];
            const T modulated = sg.authenticity * sg.opacity;
            const T cx = sg.center.x(), cy = sg.center.y();
            const T ca = sg.conic[0], cb = sg.conic[1], cc = sg.conic[2];
            const Vec3<T> col = sg.color;
            // Local accumulators keep the per-record loop free of aliasing stores.
            T g_col0 = T(0), g_col1 = T(0), g_col2 = T(0), g_mod = T(0);
            T g_cx = T(0), g_cy = T(0), g_a = T(0), g_b = T(0), g_c = T(0);
            for (std::uint32_t r = tile.slot_offsets[slot]; r < tile.slot_offsets[slot + 1]; ++r) {
                const auto& rec = tile.records[r];
                const int local = rec.pixel;
                const Vec3<T>& dc = dl_dc[local];
                Vec3<T>& behind = suffix[local];
                const T w = rec.alpha * rec.transmittance;
                g_col0 += w * dc[0];
                g_col1 += w * dc[1];
                g_col2 += w * dc[2];
                const T dl_dalpha = (rec.transmittance * col - behind / (T(1) - rec.alpha)).dot(dc);
                behind += w * col;
                if (modulated * rec.falloff >= T(kMaxAlpha)) continue;  // clamped: no gradient
                g_mod += dl_dalpha * rec.falloff;
                const T dx = px[local] - cx, dy = py[local] - cy;
                const T q = ca * dx * dx + T(2) * cb * dx * dy + cc * dy * dy;
                // Inside the untapered core the stored falloff is exp(-q/2) itself.
                const T dg_dq = q <= T(kTaperStart) ? T(-0.5) * rec.falloff : footprint_weight_derivative(q);
                const T dl_dq = dl_dalpha * modulated * dg_dq;
                g_cx -= dl_dq * T(2) * (ca * dx + cb * dy);
                g_cy -= dl_dq * T(2) * (cb * dx + cc * dy);
                g_a += dl_dq * dx * dx;
                g_b += dl_dq * T(2) * dx * dy;
                g_c += dl_dq * dy * dy;
            }
            auto& g = grads[slot];
            g.color[0] = g_col0;
            g.color[1] = g_col1;
            g.color[2] = g_col2;
            g.modulated_opacity = g_mod;
            g.center[0] = g_cx;
            g.center[1] = g_cy;
            g.conic[0] = g_a;
            g.conic[1] = g_b;
            g.conic[2] = g_c;
        }
    });

    std::vector<detail::ScreenGrad<T>> screen(n);
    for (std::size_t t = 0; t < out.tiles.size(); ++t) {
        const auto& prims = out.tiles[t].primitives;
        for (std::size_t k = 0; k < prims.size(); ++k) screen[prims[k]].add(tile_grads[t][k]);
    }

    GradBuffer<T> grads;
    grads.params.resize(n, gs.sh_width());
    grads.screen_grad_norm.assign(n, T(0));
    grads.visible.assign(n, 0);

    const Mat3<T> world_to_cam = pose.camera_from_world().cast<T>();
    const Vec3<T> cam_center = pose.translation.cast<T>();
    const T fx = T(intr.focal_x), fy = T(intr.focal_y);
    const int degree = out.sh_degree;
    const int basis_count = sh_basis_count(degree);

    parallel_for(n, threads, [&](std::size_t i) {
        const auto& sg = out.screen[i];
        if (!sg.visible) return;
        grads.visible[i] = 1;
        const auto& sgrad = screen[i];
        auto& p = grads.params;

        // Opacity and authenticity.
        const T dl_dmod = sgrad.modulated_opacity;
        const T alpha = sg.opacity;
        if (out.use_authenticity) {
            const T theta = sg.authenticity;
            p.raw_opacities[i] = dl_dmod * theta * alpha * (T(1) - alpha);
            p.raw_authenticity[i] = dl_dmod * alpha * theta * (T(1) - theta);
        } else {
            p.raw_opacities[i] = dl_dmod * alpha * (T(1) - alpha);
        }

        const Vec3<T> mu = gs.position(i);
        Vec3<T> dl_dmu = Vec3<T>::Zero();

        // Color through SH, including the view-direction dependence on mu.
        Vec3<T> dl_drgb(sgrad.color[0], sgrad.color[1], sgrad.color[2]);
        for (int c = 0; c < 3; ++c)
            if (sg.color_clamped & (1u << c)) dl_drgb[c] = T(0);
        const Vec3<T> view = mu - cam_center;
        const T view_len = view.norm();
        const Vec3<T> dir = view / view_len;
        std::array<T, 16> basis{};
        sh_basis<T>(dir, degree, basis);
        const std::size_t sh_off = i * static_cast<std::size_t>(gs.sh_width());
        for (int k = 0; k < basis_count; ++k)
            for (int c = 0; c < 3; ++c) p.sh_coeffs[sh_off + 3 * k + c] = dl_drgb[c] * basis[k];
        if (degree > 0) {
            std::array<Vec3<T>, 16> dbasis;
            sh_basis_gradient<T>(dir, degree, dbasis);
            const auto coeffs = gs.sh(i);
            Vec3<T> dl_ddir = Vec3<T>::Zero();
            for (int k = 1; k < basis_count; ++k) {
                const T s = coeffs[3 * k] * dl_drgb[0] + coeffs[3 * k + 1] * dl_drgb[1] +
                            coeffs[3 * k + 2] * dl_drgb[2];
                dl_ddir += s * dbasis[k];
            }
            dl_dmu += (dl_ddir - dir * dir.dot(dl_ddir)) / view_len;
        }

        // Conic -> 2D covariance.
        Mat2<T> conic;
        conic << sg.conic[0], sg.conic[1], sg.conic[1], sg.conic[2];
        Mat2<T> g_conic;
        g_conic << sgrad.conic[0], T(0.5) * sgrad.conic[1], T(0.5) * sgrad.conic[1], sgrad.conic[2];
        const Mat2<T> g_cov2 = -conic * g_conic * conic;

        // 2D covariance -> 3D covariance and Jacobian.
        const Vec3<T> t = sg.camera_point;
        const Eigen::Matrix<T, 2, 3> jac = projection_jacobian<T>(t, intr);
        const Eigen::Matrix<T, 2, 3> tm = jac * world_to_cam;
        const Vec3<T> s = gs.scale(i);
        const Vec4<T> q = gs.rotation(i);
        const Mat3<T> rot = rotation_from_quaternion<T>(q);
        const Mat3<T> m = rot * s.asDiagonal();
        const Mat3<T> cov3 = m * m.transpose();
        const Mat3<T> g_cov3 = tm.transpose() * g_cov2 * tm;
        const Eigen::Matrix<T, 2, 3> g_tm = T(2) * g_cov2 * tm * cov3;
        const Eigen::Matrix<T, 2, 3> g_jac = g_tm * world_to_cam.transpose();

        const T iz = T(1) / t.z(), iz2 = iz * iz, iz3 = iz2 * iz;
        Vec3<T> dl_dcam;
        dl_dcam.x() = g_jac(0, 2) * (-fx * iz2);
        dl_dcam.y() = g_jac(1, 2) * (-fy * iz2);
        dl_dcam.z() = g_jac(0, 0) * (-fx * iz2) + g_jac(0, 2) * (T(2) * fx * t.x() * iz3) +
                      g_jac(1, 1) * (-fy * iz2) + g_jac(1, 2) * (T(2) * fy * t.y() * iz3);
        // Screen center.
        const T gu = sgrad.center[0], gv = sgrad.center[1];
        dl_dcam.x() += gu * fx * iz;
        dl_dcam.y() += gv * fy * iz;
        dl_dcam.z() += -gu * fx * t.x() * iz2 - gv * fy * t.y() * iz2;
        dl_dmu += world_to_cam.transpose() * dl_dcam;

        for (int k = 0; k < 3; ++k) p.positions[3 * i + k] = dl_dmu[k];
        grads.screen_grad_norm[i] = std::hypot(gu * T(0.5) * T(intr.width), gv * T(0.5) * T(intr.height));

        // 3D covariance -> scale and rotation.
        const Mat3<T> g_m = T(2) * g_cov3 * m;
        for (int j = 0; j < 3; ++j) {
            const T dl_ds = g_m.col(j).dot(rot.col(j));
            p.raw_scales[3 * i + j] = dl_ds * s[j];
        }
        const Mat3<T> g_rot = g_m * s.asDiagonal();
        const auto drot = rotation_quaternion_jacobian<T>(q);
        Vec4<T> g_qn;
        for (int k = 0; k < 4; ++k) g_qn[k] = g_rot.cwiseProduct(drot[k]).sum();
        const Vec4<T> raw_q = gs.raw_rotation(i);
        const T qnorm = raw_q.norm();
        const Vec4<T> g_q = (g_qn - q * q.dot(g_qn)) / qnorm;
        for (int k = 0; k < 4; ++k) p.raw_rotations[4 * i + k] = g_q[k];
    });
    return grads;
}

}  // namespace gags
