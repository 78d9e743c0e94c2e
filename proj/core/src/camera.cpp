// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/camera.hpp"

#include "splatcap/error.hpp"

#include <Eigen/Geometry>

#include <cmath>

namespace splatcap {

void validate(const Camera& camera) {
    const auto& k = camera.intrinsics;
    if (k.width < 1 || k.height < 1) {
        throw InvalidParameter("camera image size must be at least 1x1");
    }
    if (!(k.fx > 0.0) || !(k.fy > 0.0)) {
        throw InvalidParameter("camera focal lengths must be positive");
    }
    if (!(camera.near_plane > 0.0)) {
        throw InvalidParameter("near plane must be positive");
    }
    const Mat3 should_be_identity = camera.rotation * camera.rotation.transpose();
    if (!should_be_identity.isApprox(Mat3::Identity(), 1e-6) || !camera.translation.allFinite()) {
        throw InvalidParameter("camera rotation is not orthonormal");
    }
}

Camera look_at(const CameraIntrinsics& intrinsics, const Vec3& eye, const Vec3& target,
               const Vec3& down) {
    const Vec3 forward = (target - eye).normalized();
    Vec3 right = down.cross(forward);
    if (right.norm() < 1e-9) {
        // Looking straight along `down`; pick any perpendicular axis.
        right = Vec3::UnitX().cross(forward);
        if (right.norm() < 1e-9) {
            right = Vec3::UnitZ().cross(forward);
        }
    }
    right.normalize();
    const Vec3 cam_down = forward.cross(right);

    Camera cam;
    cam.intrinsics = intrinsics;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = cam_down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -cam.rotation * eye;
    return cam;
}

Camera camera_from_pose(const CameraIntrinsics& intrinsics, const Vec4& qvec, const Vec3& tvec) {
    Camera cam;
    cam.intrinsics = intrinsics;
    cam.rotation = quaternion_to_rotation(qvec);
    cam.translation = tvec;
    return cam;
}

} // namespace splatcap
