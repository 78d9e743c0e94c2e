// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/synthetic.hpp"

#include "splatcap/camera_path.hpp"
#include "splatcap/error.hpp"
#include "splatcap/image_io.hpp"
#include "splatcap/ply.hpp"
#include "splatcap/rasterizer.hpp"
#include "splatcap/rng.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace splatcap {

namespace {

std::string view_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "view_%03d.png", i);
    return buf;
}

} // namespace

SyntheticScene make_synthetic_scene(const SyntheticSpec& spec) {
    if (spec.splats < 1 || spec.views < 1) throw InvalidParameter("synthetic scene needs splats and views");
    Rng rng(spec.seed);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };

    SyntheticScene scene;
    scene.truth.active_sh_degree = 0;
    for (int i = 0; i < spec.splats; ++i) {
        Splat s;
        for (int a = 0; a < 3; ++a) s.position[a] = uniform(-0.6, 0.6);
        for (int a = 0; a < 3; ++a) s.log_scale[a] = std::log(uniform(0.06, 0.2));
        Vec4 q;
        for (int a = 0; a < 4; ++a) q[a] = rng.normal();
        s.rotation = q.normalized();
        s.opacity_logit = opacity_logit(uniform(0.6, 0.95));
        for (int c = 0; c < 3; ++c) s.sh(c, 0) = (uniform(0.1, 0.9) - 0.5) / kShC0;
        scene.truth.splats.push_back(s);
    }

    const auto intr = pinhole_intrinsics(spec.width, spec.height, spec.fov_deg);
    const auto orbit = orbit_cameras({Vec3::Zero(), spec.orbit_radius, spec.orbit_height, spec.views}, intr);
    SparseCamera cam;
    cam.model = CameraModel::Pinhole;
    cam.intrinsics = intr;
    scene.sparse.cameras[1] = cam;

    Vec3 centroid = Vec3::Zero();
    for (const auto& c : orbit) centroid += c.center();
    centroid /= static_cast<double>(orbit.size());
    for (const auto& c : orbit) scene.extent = std::max(scene.extent, (c.center() - centroid).norm());
    if (!(scene.extent > 1e-9)) scene.extent = 1.0;

    for (int v = 0; v < spec.views; ++v) {
        const Eigen::Quaterniond q(orbit[v].rotation);
        SparseImage img;
        img.id = static_cast<std::uint32_t>(v + 1);
        img.name = view_name(v);
        img.camera_id = 1;
        img.qvec = Vec4(q.w(), q.x(), q.y(), q.z());
        if (img.qvec[0] < 0.0) img.qvec = -img.qvec;
        img.qvec.normalize();
        img.tvec = orbit[v].translation;
        scene.sparse.images.push_back(img);
        const Camera camera = scene.sparse.camera_for(img);
        const auto rendered = render(scene.truth, camera, Vec3::Zero()).image;
        scene.images.push_back(decode_image(encode_png(rendered)));
    }

    for (int i = 0; i < spec.splats; ++i) {
        const auto& s = scene.truth.splats[i];
        SparsePoint p;
        p.id = static_cast<std::uint64_t>(i + 1);
        p.xyz = s.position;
        for (int c = 0; c < 3; ++c) {
            p.rgb[c] = quantize_channel(s.sh(c, 0) * kShC0 + 0.5);
        }
        scene.sparse.points.push_back(p);
    }

    scene.perturbed = scene.truth;
    const double sigma = spec.position_noise * scene.extent;
    for (auto& s : scene.perturbed.splats) {
        for (int a = 0; a < 3; ++a) s.position[a] += sigma * rng.normal();
    }
    return scene;
}

void write_synthetic_dataset(const std::filesystem::path& root, const SyntheticScene& scene) {
    std::filesystem::create_directories(root / "images");
    for (std::size_t v = 0; v < scene.images.size(); ++v) {
        save_png(root / "images" / scene.sparse.images[v].name, scene.images[v]);
    }
    save_colmap_sparse(root / "sparse", write_colmap_binary(scene.sparse));
    save_splat_ply(root / "truth.ply", scene.truth);
    save_splat_ply(root / "init.ply", scene.perturbed);
}

} // namespace splatcap
