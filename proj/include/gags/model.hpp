// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gags/common.hpp"
#include "gags/geometry.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>

namespace gags {

/// Per-primitive parameter arrays, flat and row-major. The same layout is used
/// for the scene parameters, their gradients and the optimizer moments.
template <typename T>
struct ParamArrays {
    std::vector<T> positions;         // N x 3
    std::vector<T> raw_scales;        // N x 3, log domain
    std::vector<T> raw_rotations;     // N x 4, unnormalized (w, x, y, z)
    std::vector<T> raw_opacities;     // N, logit domain
    std::vector<T> sh_coeffs;         // N x (deg+1)^2 x 3
    std::vector<T> raw_authenticity;  // N, logit domain

    static constexpr int kArrayCount = 6;

    /// Visits the arrays in checkpoint order with their per-primitive widths.
    template <typename Fn>
    void for_each_array(int sh_width, Fn&& fn) {
        fn(positions, 3);
        fn(raw_scales, 3);
        fn(raw_rotations, 4);
        fn(raw_opacities, 1);
        fn(sh_coeffs, sh_width);
        fn(raw_authenticity, 1);
    }
    template <typename Fn>
    void for_each_array(int sh_width, Fn&& fn) const {
        fn(positions, 3);
        fn(raw_scales, 3);
        fn(raw_rotations, 4);
        fn(raw_opacities, 1);
        fn(sh_coeffs, sh_width);
        fn(raw_authenticity, 1);
    }

    void resize(std::size_t n, int sh_width) {
        for_each_array(sh_width, [n](std::vector<T>& a, int width) { a.assign(n * width, T(0)); });
    }

    bool operator==(const ParamArrays&) const = default;
};

template <typename T>
class BasicGaussianSet {
public:
    BasicGaussianSet() = default;
    explicit BasicGaussianSet(int sh_degree) : sh_degree_(sh_degree) {
        if (sh_degree < 0 || sh_degree > kMaxShDegree) throw InputError("SH degree must be in [0, 3]");
    }

    std::size_t size() const { return params_.raw_opacities.size(); }
    bool empty() const { return size() == 0; }
    int sh_degree() const { return sh_degree_; }
    int sh_width() const { return 3 * sh_basis_count(sh_degree_); }

    ParamArrays<T>& params() { return params_; }
    const ParamArrays<T>& params() const { return params_; }

    struct Primitive {
        Vec3<T> position = Vec3<T>::Zero();
        Vec3<T> raw_scale = Vec3<T>::Zero();
        Vec4<T> raw_rotation{T(1), T(0), T(0), T(0)};
        T raw_opacity = T(0);
        std::vector<T> sh;  // sh_width() entries; missing entries are zero
        T raw_authenticity = T(0);
    };

    /// Appends one primitive. A zero-norm rotation is rejected.
    void push_back(const Primitive& p) {
        const T norm = p.raw_rotation.norm();
        if (!(norm > T(0)) || !std::isfinite(static_cast<double>(norm)))
            throw InputError("raw rotation quaternion has zero norm");
        auto& a = params_;
        a.positions.insert(a.positions.end(), p.position.data(), p.position.data() + 3);
        a.raw_scales.insert(a.raw_scales.end(), p.raw_scale.data(), p.raw_scale.data() + 3);
        a.raw_rotations.insert(a.raw_rotations.end(), p.raw_rotation.data(), p.raw_rotation.data() + 4);
        a.raw_opacities.push_back(p.raw_opacity);
        const std::size_t width = static_cast<std::size_t>(sh_width());
        for (std::size_t k = 0; k < width; ++k) a.sh_coeffs.push_back(k < p.sh.size() ? p.sh[k] : T(0));
        a.raw_authenticity.push_back(p.raw_authenticity);
    }

    Vec3<T> position(std::size_t i) const { return Eigen::Map<const Vec3<T>>(&params_.positions[3 * i]); }
    Vec3<T> raw_scale(std::size_t i) const { return Eigen::Map<const Vec3<T>>(&params_.raw_scales[3 * i]); }
    Vec4<T> raw_rotation(std::size_t i) const {
        return Eigen::Map<const Vec4<T>>(&params_.raw_rotations[4 * i]);
    }
    std::span<const T> sh(std::size_t i) const {
        const std::size_t w = static_cast<std::size_t>(sh_width());
        return {params_.sh_coeffs.data() + i * w, w};
    }

    Vec3<T> scale(std::size_t i) const { return raw_scale(i).array().exp(); }
    Vec4<T> rotation(std::size_t i) const { return raw_rotation(i).normalized(); }
    T opacity(std::size_t i) const { return sigmoid(params_.raw_opacities[i]); }
    T authenticity(std::size_t i) const { return sigmoid(params_.raw_authenticity[i]); }

    /// Checks array congruence and that every rotation is normalizable.
    void validate() const {
        const std::size_t n = size();
        bool ok = params_.positions.size() == 3 * n && params_.raw_scales.size() == 3 * n &&
                  params_.raw_rotations.size() == 4 * n && params_.raw_authenticity.size() == n &&
                  params_.sh_coeffs.size() == n * static_cast<std::size_t>(sh_width());
        if (!ok) throw InputError("Gaussian parameter arrays are not congruent");
        for (std::size_t i = 0; i < n; ++i)
            if (!(raw_rotation(i).norm() > T(0))) throw InputError("raw rotation quaternion has zero norm");
    }

    /// Keeps primitives whose flag is set, preserving order.
    void keep_if(const std::vector<char>& keep) { compact(params_, keep, sh_width()); }

    template <typename U>
    BasicGaussianSet<U> cast() const {
        BasicGaussianSet<U> out(sh_degree_);
        auto& dst = out.params();
        auto copy = [](const std::vector<T>& s, std::vector<U>& d) { d.assign(s.begin(), s.end()); };
        copy(params_.positions, dst.positions);
        copy(params_.raw_scales, dst.raw_scales);
        copy(params_.raw_rotations, dst.raw_rotations);
        copy(params_.raw_opacities, dst.raw_opacities);
        copy(params_.sh_coeffs, dst.sh_coeffs);
        copy(params_.raw_authenticity, dst.raw_authenticity);
        return out;
    }

    bool operator==(const BasicGaussianSet&) const = default;

    template <typename U>
    static void compact(ParamArrays<U>& arrays, const std::vector<char>& keep, int sh_width) {
        arrays.for_each_array(sh_width, [&keep](std::vector<U>& a, int width) {
            std::size_t out = 0;
            for (std::size_t i = 0; i < keep.size(); ++i) {
                if (!keep[i]) continue;
                if (out != i)
                    std::copy_n(a.begin() + i * width, width, a.begin() + out * width);
                ++out;
            }
            a.resize(out * width);
        });
    }

private:
    int sh_degree_ = 0;
    ParamArrays<T> params_;
};

using GaussianSet = BasicGaussianSet<float>;

/// Activated render-time view of a set.
template <typename T>
struct ActivatedGaussians {
    std::vector<T> scales;          // N x 3
    std::vector<T> rotations;       // N x 4, unit norm
    std::vector<T> opacities;       // N
    std::vector<T> authenticities;  // N
};

template <typename T>
ActivatedGaussians<T> activate(const BasicGaussianSet<T>& gs) {
    gs.validate();
    const std::size_t n = gs.size();
    ActivatedGaussians<T> out;
    out.scales.resize(3 * n);
    out.rotations.resize(4 * n);
    out.opacities.resize(n);
    out.authenticities.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3<T> s = gs.scale(i);
        const Vec4<T> q = gs.rotation(i);
        std::copy_n(s.data(), 3, &out.scales[3 * i]);
        std::copy_n(q.data(), 4, &out.rotations[4 * i]);
        out.opacities[i] = gs.opacity(i);
        out.authenticities[i] = gs.authenticity(i);
    }
    return out;
}

/// Sigma = R diag(s^2) R^T.
template <typename T>
Mat3<T> world_covariance(const Vec3<T>& scale, const Vec4<T>& rotation) {
    const Mat3<T> m = rotation_from_quaternion<T>(rotation) * scale.asDiagonal();
    return m * m.transpose();
}

// ---------------------------------------------------------------------------
// Checkpoint: "GAGS", u32 version, u32 N, u32 sh_degree, then the raw arrays
// in ParamArrays order as little-endian f32.

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'G', 'A', 'G', 'S'};

enum class CheckpointErrorKind { Io, BadMagic, VersionMismatch, BadDegree, Truncated, CountMismatch, Corrupt };

class CheckpointError : public Error {
public:
    CheckpointError(CheckpointErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
    CheckpointErrorKind kind() const noexcept { return kind_; }

private:
    CheckpointErrorKind kind_;
};

namespace detail {

inline void put_u32(std::string& buf, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

inline void put_f32(std::string& buf, float v) { put_u32(buf, std::bit_cast<std::uint32_t>(v)); }

inline float get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

}  // namespace detail

inline std::string encode_checkpoint(const GaussianSet& gs) {
    gs.validate();
    std::string buf(kCheckpointMagic, 4);
    detail::put_u32(buf, kCheckpointVersion);
    detail::put_u32(buf, static_cast<std::uint32_t>(gs.size()));
    detail::put_u32(buf, static_cast<std::uint32_t>(gs.sh_degree()));
    gs.params().for_each_array(gs.sh_width(), [&buf](const std::vector<float>& a, int) {
        for (float v : a) detail::put_f32(buf, v);
    });
    return buf;
}

inline GaussianSet decode_checkpoint(std::span<const unsigned char> bytes) {
    constexpr std::size_t header = 16;
    if (bytes.size() < header) throw CheckpointError(CheckpointErrorKind::Truncated, "checkpoint header truncated");
    if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
        throw CheckpointError(CheckpointErrorKind::BadMagic, "not a GAGS checkpoint");
    const std::uint32_t version = detail::get_u32(bytes.data() + 4);
    if (version != kCheckpointVersion)
        throw CheckpointError(CheckpointErrorKind::VersionMismatch,
                              "checkpoint version " + std::to_string(version) + " unsupported");
    const std::uint32_t n = detail::get_u32(bytes.data() + 8);
    const std::uint32_t degree = detail::get_u32(bytes.data() + 12);
    if (degree > static_cast<std::uint32_t>(kMaxShDegree))
        throw CheckpointError(CheckpointErrorKind::BadDegree, "checkpoint SH degree " + std::to_string(degree));
    GaussianSet gs(static_cast<int>(degree));
    const std::size_t per = 3 + 3 + 4 + 1 + static_cast<std::size_t>(gs.sh_width()) + 1;
    const std::size_t expected = header + std::size_t(n) * per * 4;
    if (bytes.size() < expected)
        throw CheckpointError(CheckpointErrorKind::Truncated, "checkpoint truncated: " +
                              std::to_string(bytes.size()) + " of " + std::to_string(expected) + " bytes");
    if (bytes.size() > expected)
        throw CheckpointError(CheckpointErrorKind::CountMismatch,
                              "checkpoint holds more data than its primitive count declares");
    const unsigned char* p = bytes.data() + header;
    gs.params().for_each_array(gs.sh_width(), [&](std::vector<float>& a, int width) {
        a.resize(std::size_t(n) * width);
        for (float& v : a) {
            v = detail::get_f32(p);
            p += 4;
        }
    });
    for (std::size_t i = 0; i < gs.size(); ++i)
        if (!(gs.raw_rotation(i).norm() > 0.0f))
            throw CheckpointError(CheckpointErrorKind::Corrupt, "checkpoint holds a zero-norm rotation");
    return gs;
}

inline void save_checkpoint(const GaussianSet& gs, const std::filesystem::path& path) {
    const std::string buf = encode_checkpoint(gs);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointErrorKind::Io, "cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw CheckpointError(CheckpointErrorKind::Io, "write failed: " + path.string());
}

inline GaussianSet load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointErrorKind::Io, "cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace gags
