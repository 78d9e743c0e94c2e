// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/image.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace splatcap {

/// Decodes PNG or JPEG (detected by signature) into [0, 1] RGB without any
/// gamma conversion. Throws ParseError on undecodable input.
ImageBuffer decode_image(std::string_view bytes);
ImageBuffer load_image(const std::filesystem::path& path);

/// 8-bit quantization: round(clamp(v, 0, 1) * 255), halves away from zero.
std::uint8_t quantize_channel(double value);

/// 8-bit RGB PNG. Identical input produces identical bytes.
std::string encode_png(const ImageBuffer& image);
void save_png(const std::filesystem::path& path, const ImageBuffer& image);

/// Box-filter downscale by an integer factor; trailing rows/columns that do
/// not fill a whole block are dropped.
ImageBuffer downscale(const ImageBuffer& image, int factor);

} // namespace splatcap
