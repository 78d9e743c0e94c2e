// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/image_io.hpp"

#include "splatcap/error.hpp"
#include "splatcap/ply.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <vector>

namespace splatcap {

namespace {

bool is_png(std::string_view bytes) {
    return bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0;
}

bool is_jpeg(std::string_view bytes) {
    return bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
           static_cast<unsigned char>(bytes[1]) == 0xD8 && static_cast<unsigned char>(bytes[2]) == 0xFF;
}

ImageBuffer from_rgb8(const std::vector<unsigned char>& rgb, int width, int height) {
    ImageBuffer image(width, height);
    auto& data = image.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = rgb[i] / 255.0;
    }
    return image;
}

ImageBuffer decode_png(std::string_view bytes) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw ParseError(std::string("invalid PNG: ") + img.message, 0);
    }
    img.format = PNG_FORMAT_RGB;
    if (img.width == 0 || img.height == 0 || img.width > (1u << 15) || img.height > (1u << 15)) {
        png_image_free(&img);
        throw ParseError("PNG dimensions out of range", 16);
    }
    std::vector<unsigned char> rgb(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, rgb.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw ParseError("invalid PNG: " + msg, 0);
    }
    return from_rgb8(rgb, static_cast<int>(img.width), static_cast<int>(img.height));
}

struct JpegError {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegError*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

/// Corrupt-data warnings are fatal: a damaged frame must not train silently.
void jpeg_emit_message(j_common_ptr cinfo, int level) {
    if (level < 0) jpeg_error_exit(cinfo);
}

ImageBuffer decode_jpeg(std::string_view bytes) {
    jpeg_decompress_struct cinfo{};
    JpegError err{};
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit;
    err.mgr.emit_message = jpeg_emit_message;
    std::vector<unsigned char> rgb;
    int width = 0;
    int height = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw ParseError(std::string("invalid JPEG: ") + err.message, 0);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(bytes.data()),
                 static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    width = static_cast<int>(cinfo.output_width);
    height = static_cast<int>(cinfo.output_height);
    rgb.resize(static_cast<std::size_t>(width) * height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return from_rgb8(rgb, width, height);
}

} // namespace

ImageBuffer decode_image(std::string_view bytes) {
    if (is_png(bytes)) return decode_png(bytes);
    if (is_jpeg(bytes)) return decode_jpeg(bytes);
    throw ParseError("unrecognized image format (expected PNG or JPEG)", 0);
}

ImageBuffer load_image(const std::filesystem::path& path) {
    try {
        return decode_image(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.offset());
    }
}

std::uint8_t quantize_channel(double value) {
    const double v = std::clamp(std::isnan(value) ? 0.0 : value, 0.0, 1.0) * 255.0;
    return static_cast<std::uint8_t>(std::lround(v));
}

std::string encode_png(const ImageBuffer& image) {
    if (image.width() < 1 || image.height() < 1) {
        throw InvalidParameter("cannot encode an empty image");
    }
    std::vector<unsigned char> rgb(image.data().size());
    std::transform(image.data().begin(), image.data().end(), rgb.begin(), quantize_channel);
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width());
    img.height = static_cast<png_uint_32>(image.height());
    img.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(img, size, 0, rgb.data(), 0, nullptr)) {
        throw Error(std::string("PNG encoding failed: ") + img.message);
    }
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, rgb.data(), 0, nullptr)) {
        throw Error(std::string("PNG encoding failed: ") + img.message);
    }
    out.resize(size);
    return out;
}

void save_png(const std::filesystem::path& path, const ImageBuffer& image) {
    write_file(path, encode_png(image));
}

ImageBuffer downscale(const ImageBuffer& image, int factor) {
    if (factor < 1) throw InvalidParameter("downscale factor must be >= 1");
    if (factor == 1) return image;
    const int w = image.width() / factor;
    const int h = image.height() / factor;
    if (w < 1 || h < 1) throw InvalidParameter("downscale factor larger than the image");
    ImageBuffer out(w, h);
    const double norm = 1.0 / (factor * factor);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            Vec3 acc = Vec3::Zero();
            for (int dy = 0; dy < factor; ++dy) {
                for (int dx = 0; dx < factor; ++dx) {
                    acc += image.pixel(x * factor + dx, y * factor + dy);
                }
            }
            out.set_pixel(x, y, acc * norm);
        }
    }
    return out;
}

} // namespace splatcap
