// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Shared fixtures and brute-force oracles for the test suites. The oracles
// are written from the compositing definition and avoid the library's
// projection and sorting code paths.

#include "gags/gags.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <unistd.h>

namespace gags::testing {

inline CameraIntrinsics camera(int w, int h, double f) {
    CameraIntrinsics c;
    c.focal_x = c.focal_y = f;
    c.principal_x = w / 2.0;
    c.principal_y = h / 2.0;
    c.width = w;
    c.height = h;
    return c;
}

/// N primitives in front of the identity camera, spread over the view of a
/// w x h image with focal f. Opacities and colors stay away from clamps.
template <typename T>
BasicGaussianSet<T> random_scene(std::mt19937_64& rng, int n, int sh_degree, int w, int h, double f,
                                 double theta_lo = 0.3, double theta_hi = 0.95) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BasicGaussianSet<T> gs(sh_degree);
    for (int i = 0; i < n; ++i) {
        typename BasicGaussianSet<T>::Primitive p;
        const double z = 2.0 + 2.0 * u(rng);
        const double px = w * (0.1 + 0.8 * u(rng)), py = h * (0.1 + 0.8 * u(rng));
        p.position = Vec3<T>(T((px - w / 2.0) * z / f), T((py - h / 2.0) * z / f), T(z));
        // Footprints of roughly 1.5 to 4 pixels.
        for (int k = 0; k < 3; ++k) p.raw_scale[k] = T(std::log((1.5 + 2.5 * u(rng)) * z / f));
        p.raw_rotation = Vec4<T>(T(u(rng) + 0.2), T(u(rng) - 0.5), T(u(rng) - 0.5), T(u(rng) - 0.5));
        p.raw_opacity = T(logit(0.2 + 0.6 * u(rng)));
        p.raw_authenticity = T(logit(theta_lo + (theta_hi - theta_lo) * u(rng)));
        p.sh.assign(static_cast<std::size_t>(gs.sh_width()), T(0));
        for (int c = 0; c < 3; ++c) p.sh[c] = T((u(rng) - 0.5) * 1.2);
        for (std::size_t k = 3; k < p.sh.size(); ++k) p.sh[k] = T((u(rng) - 0.5) * 0.2);
        gs.push_back(p);
    }
    return gs;
}

/// Front-to-back alpha compositing written directly from the definitions:
/// covariance R S S^T R^T, EWA Jacobian, footprint, SH color, sort by depth.
/// `use_theta = false` gives the plain opacity compositor.
template <typename T>
Image<double> oracle_render(const BasicGaussianSet<T>& gs, const CameraPose& pose, const CameraIntrinsics& intr,
                            const Eigen::Vector3d& background, bool use_theta = true,
                            Image<double>* theta_map = nullptr) {
    struct Splat {
        double depth;
        std::size_t id;
        Eigen::Vector2d center;
        Eigen::Matrix2d conic;
        Eigen::Vector3d color;
        double opacity;
        double theta;
    };
    const Eigen::Matrix3d w2c = pose.camera_from_world();
    std::vector<Splat> splats;
    for (std::size_t i = 0; i < gs.size(); ++i) {
        const Eigen::Vector3d pw = gs.position(i).template cast<double>();
        const Eigen::Vector3d pc = w2c * (pw - pose.translation);
        if (pc.z() <= kNearPlane) continue;
        const Eigen::Vector4d q = gs.raw_rotation(i).template cast<double>().normalized();
        const double qw = q[0], qx = q[1], qy = q[2], qz = q[3];
        Eigen::Matrix3d r;
        r << 1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - qw * qz), 2 * (qx * qz + qw * qy),
            2 * (qx * qy + qw * qz), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - qw * qx),
            2 * (qx * qz - qw * qy), 2 * (qy * qz + qw * qx), 1 - 2 * (qx * qx + qy * qy);
        const Eigen::Vector3d s = gs.raw_scale(i).template cast<double>().array().exp();
        const Eigen::Matrix3d m = r * s.asDiagonal();
        const Eigen::Matrix3d sigma = m * m.transpose();
        Eigen::Matrix<double, 2, 3> j;
        j << intr.focal_x / pc.z(), 0, -intr.focal_x * pc.x() / (pc.z() * pc.z()), 0, intr.focal_y / pc.z(),
            -intr.focal_y * pc.y() / (pc.z() * pc.z());
        Eigen::Matrix2d cov = j * w2c * sigma * w2c.transpose() * j.transpose();
        cov(0, 0) += 0.3;
        cov(1, 1) += 0.3;
        Splat sp;
        sp.depth = pc.z();
        sp.id = i;
        sp.center = {intr.focal_x * pc.x() / pc.z() + intr.principal_x, intr.focal_y * pc.y() / pc.z() + intr.principal_y};
        sp.conic = cov.inverse();
        const Eigen::Vector3d dir = (pw - pose.translation).normalized();
        std::vector<double> coeffs(gs.sh(i).begin(), gs.sh(i).end());
        sp.color = eval_sh<double>(coeffs, dir, gs.sh_degree());
        sp.opacity = 1.0 / (1.0 + std::exp(-double(gs.params().raw_opacities[i])));
        sp.theta = use_theta ? 1.0 / (1.0 + std::exp(-double(gs.params().raw_authenticity[i]))) : 1.0;
        splats.push_back(sp);
    }
    std::stable_sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) {
        return a.depth < b.depth || (a.depth == b.depth && a.id < b.id);
    });
    Image<double> img(intr.width, intr.height, 3);
    if (theta_map) *theta_map = Image<double>(intr.width, intr.height, 1);
    for (int y = 0; y < intr.height; ++y)
        for (int x = 0; x < intr.width; ++x) {
            const Eigen::Vector2d p(x + 0.5, y + 0.5);
            double t = 1.0, th = 0.0;
            Eigen::Vector3d c = Eigen::Vector3d::Zero();
            for (const auto& sp : splats) {
                if (t < 1e-4) break;
                const Eigen::Vector2d d = p - sp.center;
                const double qd = d.dot(sp.conic * d);
                const double g = footprint_weight(qd);
                const double a = std::min(0.99, sp.theta * sp.opacity * g);
                if (a <= 0.0) continue;
                c += a * t * sp.color;
                th += a * t * sp.theta;
                t *= 1.0 - a;
            }
            c += t * background;
            for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = c[ch];
            if (theta_map) theta_map->at(x, y) = th;
        }
    return img;
}

struct GradCheck {
    std::size_t checked = 0;   // entries with |grad| above the floor
    std::size_t failed = 0;    // of those, relative error at or above the limit
    double max_rel_error = 0.0;
    std::string worst;
};

/// Compares render_backward + total_loss gradients for every raw parameter
/// against central differences of the full render-to-loss pipeline.
inline GradCheck check_gradients(const BasicGaussianSet<double>& gs, const CameraPose& pose,
                                 const CameraIntrinsics& intr, const Image<double>& target,
                                 const Image<double>& weights, const LossConfig& cfg, double eps = 1e-4,
                                 double floor = 1e-6, double limit = 1e-3) {
    RenderSettings rs;
    rs.background = Eigen::Vector3d(0.1, 0.2, 0.3);
    auto loss_of = [&](const BasicGaussianSet<double>& g) {
        return total_loss(render(g, pose, intr, rs).color, target, weights, cfg).total;
    };
    const auto out = render(gs, pose, intr, rs);
    const auto lr = total_loss(out.color, target, weights, cfg);
    const auto grads = render_backward(gs, pose, intr, out, lr.grad);

    GradCheck res;
    const char* names[] = {"position", "raw_scale", "raw_rotation", "raw_opacity", "sh", "raw_authenticity"};
    int which = 0;
    auto probe = gs;
    probe.params().for_each_array(probe.sh_width(), [&](std::vector<double>& arr, int) {
        const std::vector<double>* analytic = nullptr;
        int k = 0;
        grads.params.for_each_array(gs.sh_width(), [&](const std::vector<double>& a, int) {
            if (k++ == which) analytic = &a;
        });
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const double orig = arr[i];
            arr[i] = orig + eps;
            const double up = loss_of(probe);
            arr[i] = orig - eps;
            const double down = loss_of(probe);
            arr[i] = orig;
            const double fd = (up - down) / (2.0 * eps);
            const double an = (*analytic)[i];
            const double mag = std::max(std::abs(fd), std::abs(an));
            if (mag <= floor) continue;
            ++res.checked;
            const double rel = std::abs(fd - an) / mag;
            if (rel >= limit) ++res.failed;
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst = std::string(names[which]) + "[" + std::to_string(i) + "] analytic " +
                            std::to_string(an) + " numeric " + std::to_string(fd);
            }
        }
        ++which;
    });
    return res;
}

/// Random target and weight images for gradient checks.
inline std::pair<Image<double>, Image<double>> random_target(std::mt19937_64& rng, int w, int h) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image<double> target(w, h, 3), weights(w, h, 1);
    for (auto& v : target.data) v = u(rng);
    for (auto& v : weights.data) v = u(rng) < 0.3 ? 0.5 : 1.0;
    return {target, weights};
}

template <typename A, typename B>
double max_abs_diff(const Image<A>& a, const Image<B>& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.data.size(); ++k)
        m = std::max(m, std::abs(double(a.data[k]) - double(b.data[k])));
    return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("gags_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Small synthetic scene that trains in seconds.
inline SceneSpec tiny_scene(int frames = 3) {
    SceneSpec s = builtin_room();
    s.name = "tiny";
    s.width = 48;
    s.height = 36;
    s.focal = 42.0;
    s.frames = frames;
    s.supersample = 1;
    s.occluders.front().first_frame = 0;
    s.occluders.front().last_frame = -1;
    // Short path near the view centre so every frame has occluded pixels.
    s.occluders.front().waypoints = {Eigen::Vector3d(0.8, 0.8, 2.3), Eigen::Vector3d(-0.8, 0.8, 2.3)};
    return s;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace gags::testing
