// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/service/payload.hpp"

#include "splatcap/archive.hpp"
#include "splatcap/ply.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <optional>

namespace splatcap::service {

namespace {

constexpr std::size_t kMaxUnpackedBytes = std::size_t{4} << 30;

constexpr std::array<std::string_view, 6> kSparseNames{"cameras.txt", "cameras.bin", "images.txt",
                                                       "images.bin",  "points3D.txt", "points3D.bin"};

bool starts_with_at(std::string_view bytes, std::size_t offset, std::string_view magic) {
    return bytes.size() >= offset + magic.size() && bytes.substr(offset, magic.size()) == magic;
}

std::string hex_prefix(std::string_view bytes) {
    std::string out;
    for (std::size_t i = 0; i < std::min<std::size_t>(bytes.size(), 8); ++i) {
        char buf[4];
        std::snprintf(buf, sizeof buf, i ? " %02x" : "%02x", static_cast<unsigned char>(bytes[i]));
        out += buf;
    }
    return out;
}

std::string base_name(const std::string& path) {
    const auto slash = path.rfind('/');
    return slash == std::string::npos ? path : path.substr(slash + 1);
}

std::string dir_name(const std::string& path) {
    const auto slash = path.rfind('/');
    return slash == std::string::npos ? std::string() : path.substr(0, slash);
}

bool is_sparse_name(const std::string& name) {
    return std::find(kSparseNames.begin(), kSparseNames.end(), name) != kSparseNames.end();
}

/// Frame path relative to the frames directory.
std::string frame_path(const std::string& path) {
    const std::string marker = "images/";
    const auto pos = path.rfind(marker);
    if (pos != std::string::npos && (pos == 0 || path[pos - 1] == '/')) {
        return path.substr(pos + marker.size());
    }
    return base_name(path);
}

struct ArchiveContents {
    std::vector<ArchiveEntry> entries;
    std::size_t frames = 0;
    std::optional<std::string> sparse_dir; // directory of the first COLMAP file
};

ArchiveContents inspect_archive(std::string_view bytes) {
    std::string inflated;
    if (is_gzip(bytes)) {
        try {
            inflated = gunzip(bytes, kMaxUnpackedBytes);
        } catch (const Error& e) {
            throw PayloadError(std::string("gzip payload could not be decompressed: ") + e.what());
        }
        if (!is_tar(inflated)) throw PayloadError("gzip payload does not contain a tar archive");
        bytes = inflated;
    }
    ArchiveContents out;
    try {
        out.entries = read_tar(bytes);
    } catch (const Error& e) {
        throw PayloadError(std::string("tar payload is malformed: ") + e.what());
    }
    std::vector<std::string> sparse_dirs;
    for (const auto& e : out.entries) {
        if (is_frame_file(e.path)) ++out.frames;
        if (is_sparse_name(base_name(e.path))) sparse_dirs.push_back(dir_name(e.path));
    }
    if (!sparse_dirs.empty()) out.sparse_dir = *std::min_element(sparse_dirs.begin(), sparse_dirs.end());
    if (out.frames == 0) throw PayloadError("archive contains no PNG or JPEG frames");
    return out;
}

} // namespace

bool is_frame_file(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::size_t count_frames(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) return 0;
    std::size_t n = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && is_frame_file(e.path())) ++n;
    }
    return n;
}

ClassifiedPayload classify_payload(std::string_view bytes) {
    if (bytes.empty()) throw PayloadError("empty payload");
    if (starts_with_at(bytes, 4, "ftyp")) {
        if (starts_with_at(bytes, 8, "qt  ")) return {PayloadKind::Video, "capture.mov", "quicktime video"};
        return {PayloadKind::Video, "capture.mp4", "mp4 video"};
    }
    if (starts_with_at(bytes, 0, "\x1a\x45\xdf\xa3")) {
        return {PayloadKind::Video, "capture.mkv", "matroska/webm video"};
    }
    if (starts_with_at(bytes, 0, "RIFF") && starts_with_at(bytes, 8, "AVI ")) {
        return {PayloadKind::Video, "capture.avi", "avi video"};
    }
    if (starts_with_at(bytes, 0, "PK\x03\x04") || starts_with_at(bytes, 0, "PK\x05\x06")) {
        throw PayloadError("detected zip archive; upload frames as tar or tar.gz instead");
    }
    if (is_gzip(bytes) || is_tar(bytes)) {
        const bool gz = is_gzip(bytes);
        const auto contents = inspect_archive(bytes);
        const std::string name = gz ? "capture.tar.gz" : "capture.tar";
        const std::string what = std::to_string(contents.frames) + " frames";
        if (contents.sparse_dir) {
            return {PayloadKind::FramesWithSparse, name, "frame archive with sparse model, " + what};
        }
        return {PayloadKind::Frames, name, "frame archive, " + what};
    }
    throw PayloadError("unrecognized payload (leading bytes " + hex_prefix(bytes) +
                       "); expected a video or a tar archive of frames");
}

UnpackedCapture unpack_capture(std::string_view bytes, const std::filesystem::path& frames_dir,
                               const std::filesystem::path& sparse_dir) {
    const auto contents = inspect_archive(bytes);
    UnpackedCapture out;
    std::filesystem::create_directories(frames_dir);
    for (const auto& e : contents.entries) {
        if (is_frame_file(e.path)) {
            const auto target = frames_dir / frame_path(e.path);
            std::filesystem::create_directories(target.parent_path());
            write_file(target, e.data);
            ++out.frames;
        } else if (contents.sparse_dir && is_sparse_name(base_name(e.path)) &&
                   dir_name(e.path) == *contents.sparse_dir) {
            std::filesystem::create_directories(sparse_dir);
            write_file(sparse_dir / base_name(e.path), e.data);
            ++out.sparse_files;
        }
    }
    return out;
}

} // namespace splatcap::service
