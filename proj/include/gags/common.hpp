// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <iostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gags {

template <typename T>
using Vec2 = Eigen::Matrix<T, 2, 1>;
template <typename T>
using Vec3 = Eigen::Matrix<T, 3, 1>;
/// Quaternions are stored scalar-first: (w, x, y, z).
template <typename T>
using Vec4 = Eigen::Matrix<T, 4, 1>;
template <typename T>
using Mat2 = Eigen::Matrix<T, 2, 2>;
template <typename T>
using Mat3 = Eigen::Matrix<T, 3, 3>;

// ---------------------------------------------------------------------------
// Errors. Each family maps onto one CLI exit code.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition violation on a numeric input (non-positive depth, bad shape).
class InputError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : Error(join(problems)), problems_(std::move(problems)) {}
    explicit ConfigError(const std::string& problem) : ConfigError(std::vector<std::string>{problem}) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& items) {
        std::string out;
        for (const auto& s : items) {
            if (!out.empty()) out += "; ";
            out += s;
        }
        return out;
    }
    std::vector<std::string> problems_;
};

enum class IngestErrorKind { MissingFile, BadFormat, DimensionMismatch, NonFiniteDepth, MissingPose };

class IngestError : public Error {
public:
    IngestError(IngestErrorKind kind, std::string file, const std::string& what)
        : Error(file + ": " + what), kind_(kind), file_(std::move(file)) {}
    IngestErrorKind kind() const noexcept { return kind_; }
    const std::string& file() const noexcept { return file_; }

private:
    IngestErrorKind kind_;
    std::string file_;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------

/// Interleaved H x W x C raster. Pixel (x, y) is column x, row y.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, int c, T fill = T{}) : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    T& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    const T& at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
    bool empty() const { return data.empty(); }
    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
    bool same_extent(int w, int h) const { return width == w && height == h; }

    template <typename U>
    Image<U> cast() const {
        Image<U> out(width, height, channels);
        std::transform(data.begin(), data.end(), out.data.begin(),
                       [](T v) { return static_cast<U>(v); });
        return out;
    }
};

using ImageF = Image<float>;
/// Binary masks hold 0 or 1.
using Mask = Image<std::uint8_t>;

template <typename T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
T logit(T p) {
    return std::log(p / (T(1) - p));
}

// ---------------------------------------------------------------------------

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers using static
/// contiguous chunks. Callers that reduce results must do so by index.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn, &err = errors[w]] {
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                err = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------

enum class LogLevel { Quiet = 0, Warn = 1, Info = 2 };

inline LogLevel& log_level() {
    static LogLevel level = LogLevel::Warn;
    return level;
}

inline void log_warning(const std::string& msg) {
    if (log_level() >= LogLevel::Warn) std::clog << "warning: " << msg << '\n';
}

inline void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::clog << msg << '\n';
}

}  // namespace gags
