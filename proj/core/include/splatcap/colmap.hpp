// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/camera.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace splatcap {

/// COLMAP camera model ids as stored in cameras.bin.
enum class CameraModel : int {
    SimplePinhole = 0,
    Pinhole = 1,
    SimpleRadial = 2,
    Radial = 3,
};

const char* camera_model_name(CameraModel model);
int camera_model_param_count(CameraModel model);

struct SparseCamera {
    CameraModel model = CameraModel::Pinhole;
    CameraIntrinsics intrinsics;
    std::vector<double> distortion; // stored, never applied

    bool operator==(const SparseCamera&) const = default;
};

struct SparseImage {
    std::uint32_t id = 0;
    std::string name;
    std::uint32_t camera_id = 0;
    Vec4 qvec{1.0, 0.0, 0.0, 0.0}; // world-to-camera (w, x, y, z), unit length
    Vec3 tvec = Vec3::Zero();

    bool operator==(const SparseImage&) const = default;
};

struct SparsePoint {
    std::uint64_t id = 0;
    Vec3 xyz = Vec3::Zero();
    std::array<std::uint8_t, 3> rgb{};
    double error = 0.0;

    bool operator==(const SparsePoint&) const = default;
};

struct SparseModel {
    std::map<std::uint32_t, SparseCamera> cameras;
    std::vector<SparseImage> images; // file order
    std::vector<SparsePoint> points;
    std::vector<std::string> warnings;

    bool operator==(const SparseModel&) const = default;

    Camera camera_for(const SparseImage& image) const;
};

/// In-memory sparse model files keyed by basename ("cameras.txt", ...).
using SparseFiles = std::map<std::string, std::string>;

/// Parses from in-memory files. Binary files take precedence over text when
/// both are present. Throws NotFound naming a missing file, ParseError,
/// UnsupportedModel and ReferenceError.
SparseModel parse_colmap_sparse(const SparseFiles& files);

/// Reads a sparse directory (also looks inside a `0/` subdirectory, COLMAP's
/// default layout) or a .tar / .tar.gz archive containing one.
SparseModel read_colmap_sparse(const std::filesystem::path& path);

SparseFiles write_colmap_text(const SparseModel& model);
SparseFiles write_colmap_binary(const SparseModel& model);
void save_colmap_sparse(const std::filesystem::path& directory, const SparseFiles& files);

} // namespace splatcap
