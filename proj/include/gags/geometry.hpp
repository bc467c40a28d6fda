// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gags/common.hpp"

#include <Eigen/Geometry>

#include <array>
#include <span>

namespace gags {

/// Pinhole intrinsics. Pixel (col, row) samples the continuous image plane at
/// (col + 0.5, row + 0.5), so a principal point of (W/2, H/2) is the exact
/// image center.
struct CameraIntrinsics {
    double focal_x = 1.0;
    double focal_y = 1.0;
    double principal_x = 0.0;
    double principal_y = 0.0;
    int width = 1;
    int height = 1;

    void validate() const {
        if (!(focal_x > 0.0) || !(focal_y > 0.0)) throw InputError("focal lengths must be positive");
        if (width < 1 || height < 1) throw InputError("image size must be at least 1x1");
        if (principal_x < 0.0 || principal_x > width || principal_y < 0.0 || principal_y > height)
            throw InputError("principal point outside image bounds");
    }

    bool operator==(const CameraIntrinsics&) const = default;
};

/// Rotation matrix of a unit quaternion (w, x, y, z).
template <typename T>
Mat3<T> rotation_from_quaternion(const Vec4<T>& q) {
    const T w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3<T> r;
    r << T(1) - T(2) * (y * y + z * z), T(2) * (x * y - w * z), T(2) * (x * z + w * y),
         T(2) * (x * y + w * z), T(1) - T(2) * (x * x + z * z), T(2) * (y * z - w * x),
         T(2) * (x * z - w * y), T(2) * (y * z + w * x), T(1) - T(2) * (x * x + y * y);
    return r;
}

/// Partial derivatives of rotation_from_quaternion with respect to (w, x, y, z).
template <typename T>
std::array<Mat3<T>, 4> rotation_quaternion_jacobian(const Vec4<T>& q) {
    const T w = q[0], x = q[1], y = q[2], z = q[3];
    std::array<Mat3<T>, 4> d;
    d[0] << T(0), -2 * z, 2 * y,
            2 * z, T(0), -2 * x,
            -2 * y, 2 * x, T(0);
    d[1] << T(0), 2 * y, 2 * z,
            2 * y, -4 * x, -2 * w,
            2 * z, 2 * w, -4 * x;
    d[2] << -4 * y, 2 * x, 2 * w,
            2 * x, T(0), 2 * z,
            -2 * w, 2 * z, -4 * y;
    d[3] << -4 * z, -2 * w, 2 * x,
            2 * w, -4 * z, 2 * y,
            2 * x, 2 * y, T(0);
    return d;
}

template <typename T>
Vec4<T> quaternion_from_rotation(const Mat3<T>& r) {
    // Shepperd's method, branch on the largest diagonal term.
    Vec4<T> q;
    const T tr = r.trace();
    if (tr > T(0)) {
        const T s = std::sqrt(tr + T(1)) * T(2);
        q << T(0.25) * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s, (r(1, 0) - r(0, 1)) / s;
    } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
        const T s = std::sqrt(T(1) + r(0, 0) - r(1, 1) - r(2, 2)) * T(2);
        q << (r(2, 1) - r(1, 2)) / s, T(0.25) * s, (r(0, 1) + r(1, 0)) / s, (r(0, 2) + r(2, 0)) / s;
    } else if (r(1, 1) > r(2, 2)) {
        const T s = std::sqrt(T(1) + r(1, 1) - r(0, 0) - r(2, 2)) * T(2);
        q << (r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, T(0.25) * s, (r(1, 2) + r(2, 1)) / s;
    } else {
        const T s = std::sqrt(T(1) + r(2, 2) - r(0, 0) - r(1, 1)) * T(2);
        q << (r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s, (r(1, 2) + r(2, 1)) / s, T(0.25) * s;
    }
    if (q[0] < T(0)) q = -q;
    return q.normalized();
}

/// World-from-camera rigid transform: X_world = R * X_cam + translation.
/// The translation is therefore the camera center in world coordinates.
struct CameraPose {
    Eigen::Vector4d rotation{1.0, 0.0, 0.0, 0.0};
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    CameraPose() = default;
    CameraPose(const Eigen::Vector4d& q, const Eigen::Vector3d& t) : rotation(q), translation(t) {
        normalize();
    }

    void normalize() {
        const double n = rotation.norm();
        if (!(n > 0.0) || !std::isfinite(n)) throw InputError("camera rotation quaternion has zero norm");
        rotation /= n;
    }

    Eigen::Matrix3d world_from_camera() const { return rotation_from_quaternion<double>(rotation); }
    Eigen::Matrix3d camera_from_world() const { return world_from_camera().transpose(); }

    /// Camera looking from `eye` at `target`; camera axes are x right, y down, z forward.
    static CameraPose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                              const Eigen::Vector3d& up = Eigen::Vector3d::UnitY()) {
        const Eigen::Vector3d fwd = (target - eye).normalized();
        Eigen::Vector3d down = -up + up.dot(fwd) * fwd;
        down.normalize();
        const Eigen::Vector3d right = down.cross(fwd);
        Eigen::Matrix3d r;
        r.col(0) = right;
        r.col(1) = down;
        r.col(2) = fwd;
        return CameraPose(quaternion_from_rotation<double>(r), eye);
    }
};

struct ProjectedPoint {
    Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
    double depth = 0.0;
    /// False when the point is at or behind the camera plane; pixel is then meaningless.
    bool in_front = false;
};

/// Lifts a pixel with known camera-frame depth into world space.
template <typename T>
Vec3<T> back_project(const Vec2<T>& pixel, T depth, const CameraIntrinsics& intr, const CameraPose& pose) {
    if (!(depth > T(0)) || !std::isfinite(static_cast<double>(depth)))
        throw InputError("back_project: depth must be positive and finite");
    if (pixel.x() < T(0) || pixel.y() < T(0) || pixel.x() > T(intr.width) || pixel.y() > T(intr.height))
        throw InputError("back_project: pixel outside image bounds");
    const Vec3<T> cam((pixel.x() - T(intr.principal_x)) * depth / T(intr.focal_x),
                      (pixel.y() - T(intr.principal_y)) * depth / T(intr.focal_y), depth);
    return pose.world_from_camera().cast<T>() * cam + pose.translation.cast<T>();
}

template <typename T>
Vec3<T> world_to_camera(const Vec3<T>& point, const CameraPose& pose) {
    return pose.camera_from_world().cast<T>() * (point - pose.translation.cast<T>());
}

inline ProjectedPoint project_point(const Eigen::Vector3d& point, const CameraIntrinsics& intr,
                                    const CameraPose& pose) {
    const Eigen::Vector3d cam = world_to_camera<double>(point, pose);
    ProjectedPoint out;
    out.depth = cam.z();
    out.in_front = cam.z() > 0.0;
    if (out.in_front) {
        out.pixel = {intr.focal_x * cam.x() / cam.z() + intr.principal_x,
                     intr.focal_y * cam.y() / cam.z() + intr.principal_y};
    }
    return out;
}

/// Added to both diagonal entries of every screen-space covariance (pixels^2).
inline constexpr double kLowPassDilation = 0.3;

/// Jacobian of the pinhole projection evaluated at a camera-frame point.
template <typename T>
Eigen::Matrix<T, 2, 3> projection_jacobian(const Vec3<T>& cam, const CameraIntrinsics& intr) {
    const T fx = T(intr.focal_x), fy = T(intr.focal_y);
    const T iz = T(1) / cam.z();
    Eigen::Matrix<T, 2, 3> j;
    j << fx * iz, T(0), -fx * cam.x() * iz * iz,
         T(0), fy * iz, -fy * cam.y() * iz * iz;
    return j;
}

/// EWA footprint: J W Sigma W^T J^T plus the low-pass dilation.
/// `camera_point` is the Gaussian center in camera coordinates (z > 0).
/// `cam_from_world` is the rotation part of the view transform.
template <typename T>
Mat2<T> project_covariance(const Mat3<T>& world_cov, const Mat3<T>& cam_from_world, const CameraIntrinsics& intr,
                           const Vec3<T>& camera_point) {
    if (!(camera_point.z() > T(0))) throw InputError("project_covariance: camera_z must be positive");
    const Eigen::Matrix<T, 2, 3> t = projection_jacobian<T>(camera_point, intr) * cam_from_world;
    Mat2<T> cov = t * world_cov * t.transpose();
    cov(0, 1) = cov(1, 0) = T(0.5) * (cov(0, 1) + cov(1, 0));
    cov(0, 0) += T(kLowPassDilation);
    cov(1, 1) += T(kLowPassDilation);
    return cov;
}

template <typename T>
Mat2<T> project_covariance(const Mat3<T>& world_cov, const CameraPose& pose, const CameraIntrinsics& intr,
                           const Vec3<T>& camera_point) {
    return project_covariance<T>(world_cov, pose.camera_from_world().cast<T>().eval(), intr, camera_point);
}

// ---------------------------------------------------------------------------
// Real spherical harmonics, degree <= 3, 0.5-offset color convention.

inline constexpr int kMaxShDegree = 3;

constexpr int sh_basis_count(int degree) { return (degree + 1) * (degree + 1); }

namespace sh_const {
inline constexpr double c0 = 0.28209479177387814;
inline constexpr double c1 = 0.4886025119029199;
inline constexpr std::array<double, 5> c2{1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                          -1.0925484305920792, 0.5462742152960396};
inline constexpr std::array<double, 7> c3{-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                          0.3731763325901154, -0.4570457994644658, 1.445305721320277,
                                          -0.5900435899266435};
}  // namespace sh_const

/// Fills `basis` with the first sh_basis_count(degree) basis values at `dir`.
template <typename T>
void sh_basis(const Vec3<T>& dir, int degree, std::span<T> basis) {
    using namespace sh_const;
    const T x = dir.x(), y = dir.y(), z = dir.z();
    basis[0] = T(c0);
    if (degree < 1) return;
    basis[1] = T(-c1) * y;
    basis[2] = T(c1) * z;
    basis[3] = T(-c1) * x;
    if (degree < 2) return;
    const T xx = x * x, yy = y * y, zz = z * z;
    basis[4] = T(c2[0]) * x * y;
    basis[5] = T(c2[1]) * y * z;
    basis[6] = T(c2[2]) * (T(2) * zz - xx - yy);
    basis[7] = T(c2[3]) * x * z;
    basis[8] = T(c2[4]) * (xx - yy);
    if (degree < 3) return;
    basis[9] = T(c3[0]) * y * (T(3) * xx - yy);
    basis[10] = T(c3[1]) * x * y * z;
    basis[11] = T(c3[2]) * y * (T(4) * zz - xx - yy);
    basis[12] = T(c3[3]) * z * (T(2) * zz - T(3) * xx - T(3) * yy);
    basis[13] = T(c3[4]) * x * (T(4) * zz - xx - yy);
    basis[14] = T(c3[5]) * z * (xx - yy);
    basis[15] = T(c3[6]) * x * (xx - T(3) * yy);
}

/// Gradient of each basis function with respect to the (unnormalized) direction components.
template <typename T>
void sh_basis_gradient(const Vec3<T>& dir, int degree, std::span<Vec3<T>> grad) {
    using namespace sh_const;
    const T x = dir.x(), y = dir.y(), z = dir.z();
    grad[0].setZero();
    if (degree < 1) return;
    grad[1] = Vec3<T>(T(0), T(-c1), T(0));
    grad[2] = Vec3<T>(T(0), T(0), T(c1));
    grad[3] = Vec3<T>(T(-c1), T(0), T(0));
    if (degree < 2) return;
    const T xx = x * x, yy = y * y, zz = z * z;
    grad[4] = T(c2[0]) * Vec3<T>(y, x, T(0));
    grad[5] = T(c2[1]) * Vec3<T>(T(0), z, y);
    grad[6] = T(c2[2]) * Vec3<T>(T(-2) * x, T(-2) * y, T(4) * z);
    grad[7] = T(c2[3]) * Vec3<T>(z, T(0), x);
    grad[8] = T(c2[4]) * Vec3<T>(T(2) * x, T(-2) * y, T(0));
    if (degree < 3) return;
    grad[9] = T(c3[0]) * Vec3<T>(T(6) * x * y, T(3) * xx - T(3) * yy, T(0));
    grad[10] = T(c3[1]) * Vec3<T>(y * z, x * z, x * y);
    grad[11] = T(c3[2]) * Vec3<T>(T(-2) * x * y, T(4) * zz - xx - T(3) * yy, T(8) * y * z);
    grad[12] = T(c3[3]) * Vec3<T>(T(-6) * x * z, T(-6) * y * z, T(6) * zz - T(3) * xx - T(3) * yy);
    grad[13] = T(c3[4]) * Vec3<T>(T(4) * zz - T(3) * xx - yy, T(-2) * x * y, T(8) * x * z);
    grad[14] = T(c3[5]) * Vec3<T>(T(2) * x * z, T(-2) * y * z, xx - yy);
    grad[15] = T(c3[6]) * Vec3<T>(T(3) * xx - T(3) * yy, T(-6) * x * y, T(0));
}

/// Raw (unclamped) color: sum_k coeff_k * Y_k(dir) + 0.5. `coeffs` is basis-major,
/// three channels per basis function.
template <typename T>
Vec3<T> eval_sh_unclamped(std::span<const T> coeffs, const Vec3<T>& dir, int degree) {
    std::array<T, 16> basis{};
    sh_basis<T>(dir, degree, basis);
    Vec3<T> rgb = Vec3<T>::Constant(T(0.5));
    const int count = sh_basis_count(degree);
    for (int k = 0; k < count; ++k) {
        rgb[0] += coeffs[3 * k + 0] * basis[k];
        rgb[1] += coeffs[3 * k + 1] * basis[k];
        rgb[2] += coeffs[3 * k + 2] * basis[k];
    }
    return rgb;
}

template <typename T>
Vec3<T> eval_sh(std::span<const T> coeffs, const Vec3<T>& dir, int degree) {
    if (degree < 0 || degree > kMaxShDegree) throw InputError("eval_sh: degree out of range");
    if (coeffs.size() < static_cast<std::size_t>(3 * sh_basis_count(degree)))
        throw InputError("eval_sh: degree exceeds stored coefficients");
    return eval_sh_unclamped<T>(coeffs, dir, degree).cwiseMax(T(0)).cwiseMin(T(1));
}

}  // namespace gags
