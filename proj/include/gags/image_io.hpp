// Copyright 2026 The GAGS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gags/common.hpp"
#include "gags/model.hpp"

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

namespace gags {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::uint8_t to_byte(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace detail

/// Reads an 8-bit PNG as raw bytes. Palette and 16-bit inputs are expanded /
/// stripped; alpha is dropped. Result has 1 (gray) or 3 (RGB) channels.
inline Image<std::uint8_t> read_png_bytes(const std::filesystem::path& path) {
    const std::string name = path.string();
    detail::FilePtr fp(std::fopen(name.c_str(), "rb"));
    if (!fp) throw IngestError(IngestErrorKind::MissingFile, name, "cannot open");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw IngestError(IngestErrorKind::BadFormat, name, "not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IngestError(IngestErrorKind::BadFormat, name, "libpng initialization failed");
    }
    Image<std::uint8_t> img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IngestError(IngestErrorKind::BadFormat, name, "corrupt PNG data");
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const png_byte color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int channels = png_get_channels(png, info);
    img = Image<std::uint8_t>(static_cast<int>(png_get_image_width(png, info)),
                              static_cast<int>(png_get_image_height(png, info)), channels);
    rows.resize(img.height);
    for (int y = 0; y < img.height; ++y) rows[y] = img.data.data() + img.index(0, y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void write_png_bytes(const Image<std::uint8_t>& img, const std::filesystem::path& path) {
    if (img.channels != 1 && img.channels != 3) throw InputError("write_png: 1 or 3 channels required");
    const std::string name = path.string();
    detail::FilePtr fp(std::fopen(name.c_str(), "wb"));
    if (!fp) throw Error("cannot open " + name + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng initialization failed");
    }
    std::vector<png_bytep> rows(img.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("PNG encode failed: " + name);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8,
                 img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    // Fixed compression settings and no timestamps keep output byte-stable.
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.data.data() + img.index(0, y));
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline ImageF read_png(const std::filesystem::path& path) {
    const auto bytes = read_png_bytes(path);
    ImageF out(bytes.width, bytes.height, bytes.channels);
    for (std::size_t i = 0; i < bytes.data.size(); ++i) out.data[i] = bytes.data[i] / 255.0f;
    return out;
}

inline void write_png(const ImageF& img, const std::filesystem::path& path) {
    Image<std::uint8_t> bytes(img.width, img.height, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) bytes.data[i] = detail::to_byte(img.data[i]);
    write_png_bytes(bytes, path);
}

/// Quantizes a [0,1] image to 8 bits and back, matching a PNG round trip.
inline ImageF quantize8(const ImageF& img) {
    ImageF out = img;
    for (float& v : out.data) v = detail::to_byte(v) / 255.0f;
    return out;
}

/// Masks are stored as 8-bit gray; values >= 128 become 1.
inline Mask read_mask(const std::filesystem::path& path) {
    const auto bytes = read_png_bytes(path);
    if (bytes.channels != 1)
        throw IngestError(IngestErrorKind::BadFormat, path.string(), "mask must be single-channel");
    Mask m(bytes.width, bytes.height, 1);
    for (std::size_t i = 0; i < bytes.data.size(); ++i) m.data[i] = bytes.data[i] >= 128 ? 1 : 0;
    return m;
}

inline void write_mask(const Mask& m, const std::filesystem::path& path) {
    Image<std::uint8_t> bytes(m.width, m.height, 1);
    for (std::size_t i = 0; i < m.data.size(); ++i) bytes.data[i] = m.data[i] ? 255 : 0;
    write_png_bytes(bytes, path);
}

/// Scalar map file: u32 width, u32 height, then row-major little-endian f32.
inline void write_f32_map(const ImageF& map, const std::filesystem::path& path) {
    if (map.channels != 1) throw InputError("write_f32_map: single-channel map required");
    std::string buf;
    buf.reserve(8 + 4 * map.data.size());
    detail::put_u32(buf, static_cast<std::uint32_t>(map.width));
    detail::put_u32(buf, static_cast<std::uint32_t>(map.height));
    for (float v : map.data) detail::put_f32(buf, v);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline ImageF read_f32_map(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError(IngestErrorKind::MissingFile, path.string(), "cannot open");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 8) throw IngestError(IngestErrorKind::BadFormat, path.string(), "header truncated");
    const std::uint32_t w = detail::get_u32(bytes.data());
    const std::uint32_t h = detail::get_u32(bytes.data() + 4);
    if (w == 0 || h == 0 || bytes.size() != 8 + std::size_t(w) * h * 4)
        throw IngestError(IngestErrorKind::BadFormat, path.string(), "size does not match declared dimensions");
    ImageF map(static_cast<int>(w), static_cast<int>(h), 1);
    for (std::size_t i = 0; i < map.data.size(); ++i) map.data[i] = detail::get_f32(bytes.data() + 8 + 4 * i);
    return map;
}

}  // namespace gags
