// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace splatcap {

struct ArchiveEntry {
    std::string path; // normalized relative path, never absolute, never containing ".."
    std::string data;
};

bool is_gzip(std::string_view bytes);
bool is_tar(std::string_view bytes);

/// Inflates a gzip stream. Output is capped at `max_output` bytes.
std::string gunzip(std::string_view bytes, std::size_t max_output = std::size_t{1} << 32);

/// Regular-file entries of a ustar/GNU tar archive, optionally gzip-compressed.
/// Directory entries are dropped; unsafe paths raise ParseError.
std::vector<ArchiveEntry> read_tar(std::string_view bytes);

/// Minimal ustar writer (regular files only).
std::string write_tar(const std::vector<ArchiveEntry>& entries);

} // namespace splatcap
