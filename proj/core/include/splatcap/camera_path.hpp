// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/camera.hpp"
#include "splatcap/gaussian.hpp"

#include <vector>

namespace splatcap {

/// Pinhole intrinsics with square pixels and the principal point at the
/// image center (pixel centers sit at integer coordinates).
CameraIntrinsics pinhole_intrinsics(int width, int height, double horizontal_fov_deg);

/// Circular orbit around `center`. World "up" is −y, so `height` > 0 places
/// the cameras above the center, looking slightly down.
struct OrbitPath {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
    double height = 0.0;
    int frames = 1;

    /// Throws InvalidParameter unless frames ≥ 1 and radius > 0.
    void validate() const;
};

/// Frame k sits at angle 2πk/frames, starting on the −z side of the center.
std::vector<Camera> orbit_cameras(const OrbitPath& path, const CameraIntrinsics& intrinsics);

/// Orbit framing a cloud: centered on its bounding box, radius 2.5× the box
/// half-diagonal (1 for empty or single-point clouds), height 0.3× radius.
OrbitPath default_orbit(const SplatCloud& cloud, int frames);

} // namespace splatcap
