// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/camera_path.hpp"

#include "splatcap/error.hpp"

#include <cmath>
#include <numbers>

namespace splatcap {

CameraIntrinsics pinhole_intrinsics(int width, int height, double horizontal_fov_deg) {
    if (width < 1 || height < 1) throw InvalidParameter("image size must be at least 1x1");
    if (!(horizontal_fov_deg > 0.0 && horizontal_fov_deg < 180.0)) {
        throw InvalidParameter("field of view must be in (0, 180) degrees");
    }
    const double f = 0.5 * width / std::tan(0.5 * horizontal_fov_deg * std::numbers::pi / 180.0);
    return {width, height, f, f, 0.5 * (width - 1), 0.5 * (height - 1)};
}

void OrbitPath::validate() const {
    if (frames < 1) throw InvalidParameter("orbit needs at least one frame");
    if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidParameter("orbit radius must be positive");
    if (!center.allFinite() || !std::isfinite(height)) throw InvalidParameter("orbit must be finite");
}

std::vector<Camera> orbit_cameras(const OrbitPath& path, const CameraIntrinsics& intrinsics) {
    path.validate();
    std::vector<Camera> cameras;
    cameras.reserve(path.frames);
    for (int k = 0; k < path.frames; ++k) {
        const double theta = 2.0 * std::numbers::pi * k / path.frames;
        const Vec3 eye = path.center + Vec3(path.radius * std::sin(theta), -path.height,
                                            -path.radius * std::cos(theta));
        cameras.push_back(look_at(intrinsics, eye, path.center));
    }
    return cameras;
}

OrbitPath default_orbit(const SplatCloud& cloud, int frames) {
    OrbitPath path;
    path.frames = frames;
    if (!cloud.empty()) {
        Vec3 lo = cloud.splats.front().position, hi = lo;
        for (const auto& s : cloud.splats) {
            lo = lo.cwiseMin(s.position);
            hi = hi.cwiseMax(s.position);
        }
        path.center = 0.5 * (lo + hi);
        const double half = 0.5 * (hi - lo).norm();
        if (half > 0.0 && std::isfinite(half)) path.radius = 2.5 * half;
    }
    path.height = 0.3 * path.radius;
    return path;
}

} // namespace splatcap
