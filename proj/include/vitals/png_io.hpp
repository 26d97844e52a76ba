#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <png.h>

#include "vitals/error.hpp"

namespace vitals {

// 8-bit RGB frame I/O through libpng's simplified API. Anything the decoder
// can convert to RGB8 loads; the dataset itself is always written as RGB8.

struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels; // row-major H*W*3
};

inline RgbImage read_png_rgb8(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        std::string msg = image.message;
        png_image_free(&image);
        raise(ErrorKind::Format, "PNG read failed for " + path.string() + ": " + msg);
    }
    image.format = PNG_FORMAT_RGB;
    RgbImage out;
    out.height = static_cast<int>(image.height);
    out.width = static_cast<int>(image.width);
    out.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        raise(ErrorKind::Format, "PNG decode failed for " + path.string() + ": " + msg);
    }
    return out;
}

inline void write_png_rgb8(const std::filesystem::path& path, int height, int width,
                           const std::uint8_t* pixels) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, pixels, 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        raise(ErrorKind::Io, "PNG write failed for " + path.string() + ": " + msg);
    }
}

} // namespace vitals
