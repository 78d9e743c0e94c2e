// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/gaussian.hpp"

namespace splatcap {

struct CameraIntrinsics {
    int width = 1;
    int height = 1;
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;

    bool operator==(const CameraIntrinsics&) const = default;
};

/// Pinhole camera. `rotation`/`translation` map world points into the camera
/// frame (x right, y down, z forward): p_cam = rotation * p_world + translation.
struct Camera {
    CameraIntrinsics intrinsics;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double near_plane = 0.01;

    Vec3 center() const { return -rotation.transpose() * translation; }
    int width() const { return intrinsics.width; }
    int height() const { return intrinsics.height; }
};

/// Throws InvalidParameter when intrinsics or pose violate their invariants.
void validate(const Camera& camera);

/// Camera at `eye` looking at `target`; `down` is the world direction that
/// should map to image +y.
Camera look_at(const CameraIntrinsics& intrinsics, const Vec3& eye, const Vec3& target,
               const Vec3& down = Vec3(0.0, 1.0, 0.0));

/// Camera from a (w, x, y, z) world-to-camera quaternion and translation.
Camera camera_from_pose(const CameraIntrinsics& intrinsics, const Vec4& qvec, const Vec3& tvec);

} // namespace splatcap
