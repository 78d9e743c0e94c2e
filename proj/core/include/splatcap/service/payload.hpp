// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/error.hpp"
#include "splatcap/service/job.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace splatcap::service {

/// Upload is not something the pipeline can process (reported as 422).
class PayloadError : public Error {
public:
    using Error::Error;
};

struct ClassifiedPayload {
    PayloadKind kind;
    std::string file_name; // storage name, e.g. "capture.mp4"
    std::string detected;  // human-readable type, e.g. "mp4 video"
};

/// Sniffs the payload by content. Videos are recognized by container magic
/// (ISO-BMFF, Matroska/WebM, AVI); archives must be tar, optionally gzipped,
/// and contain at least one PNG or JPEG frame. An archive that also holds
/// COLMAP files (cameras, images, points3D) is FramesWithSparse.
ClassifiedPayload classify_payload(std::string_view bytes);

struct UnpackedCapture {
    std::size_t frames = 0;
    std::size_t sparse_files = 0;
};

/// Writes the frames of an archive payload to `frames_dir` (paths below an
/// `images/` component keep their relative layout, others use the base name)
/// and the COLMAP files of the first sparse model to `sparse_dir`.
UnpackedCapture unpack_capture(std::string_view bytes, const std::filesystem::path& frames_dir,
                               const std::filesystem::path& sparse_dir);

/// True for .png/.jpg/.jpeg, case-insensitive.
bool is_frame_file(const std::filesystem::path& path);

/// Number of frame files directly inside `dir` or below it.
std::size_t count_frames(const std::filesystem::path& dir);

} // namespace splatcap::service
