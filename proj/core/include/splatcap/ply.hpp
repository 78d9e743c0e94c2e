// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/gaussian.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace splatcap {

/// Number of float32 properties per splat in the interchange layout:
/// x y z nx ny nz f_dc_0..2 f_rest_0..44 opacity scale_0..2 rot_0..3.
inline constexpr int kSplatPlyPropertyCount = 62;

/// Parses a splat PLY (binary little-endian or ASCII). Properties are matched
/// by name, so extra vertex properties and alternative scalar types are
/// tolerated. The active SH degree is restored from the
/// `comment active_sh_degree N` header line, defaulting to 3.
///
/// Throws ParseError (malformed header, with byte offset), SchemaError
/// (missing property) or TruncatedError (short body).
SplatCloud read_splat_ply(std::string_view bytes);

/// Binary little-endian, fixed property order, deterministic.
std::string write_splat_ply(const SplatCloud& cloud);

/// Same schema in `format ascii 1.0`; floats use the shortest round-trip form.
std::string write_splat_ply_ascii(const SplatCloud& cloud);

/// Whole-file helpers. Throw IoError / NotFound.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

SplatCloud load_splat_ply(const std::filesystem::path& path);
void save_splat_ply(const std::filesystem::path& path, const SplatCloud& cloud);

} // namespace splatcap
