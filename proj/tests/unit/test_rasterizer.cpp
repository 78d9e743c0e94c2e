// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "test_support.hpp"

#include <splatcap/error.hpp>
#include <splatcap/rasterizer.hpp>

#include <gtest/gtest.h>

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace splatcap;

namespace {

Camera axis_camera(int w = 640, int h = 480) {
    Camera cam;
    cam.intrinsics = {w, h, 500.0, 500.0, 320.0, 240.0};
    return cam;
}

Splat isotropic(const Vec3& position, double scale, double logit = 0.0) {
    Splat s;
    s.position = position;
    s.log_scale = Vec3::Constant(std::log(scale));
    s.opacity_logit = logit;
    return s;
}

double white_dc() { return 0.5 / kShC0; }

} // namespace

TEST(Projection, OnAxisPoint) {
    const auto p = project_splat(isotropic(Vec3(0, 0, 5), 0.1), axis_camera(), 0);
    ASSERT_TRUE(p);
    EXPECT_EQ(p->mean2d, Vec2(320, 240));
    EXPECT_EQ(p->depth, 5.0);
    EXPECT_EQ(p->alpha, 0.5);
    EXPECT_EQ(p->rgb, Vec3::Constant(0.5));
}

TEST(Projection, OnAxisCovarianceClosedForm) {
    for (double s : {0.01, 0.1, 0.5}) {
        for (double z : {1.0, 5.0, 20.0}) {
            const auto p = project_splat(isotropic(Vec3(0, 0, z), s), axis_camera(), 0);
            ASSERT_TRUE(p);
            const double v = (500.0 * s / z) * (500.0 * s / z) + kCovarianceBlur;
            EXPECT_NEAR(p->cov2d(0, 0), v, 1e-6 * std::max(1.0, v));
            EXPECT_NEAR(p->cov2d(1, 1), v, 1e-6 * std::max(1.0, v));
            EXPECT_NEAR(p->cov2d(0, 1), 0.0, 1e-9);
            EXPECT_EQ(p->radius, static_cast<int>(std::ceil(3.0 * std::sqrt(p->cov2d(0, 0)))));
            EXPECT_LT((p->conic * p->cov2d - Mat2::Identity()).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(Projection, OffAxisMatchesJacobianOracle) {
    Rng rng(41);
    for (int i = 0; i < 100; ++i) {
        const auto splat = testkit::random_splat(rng);
        const auto cam = testkit::random_camera(rng, 64, 48);
        const auto p = project_splat(splat, cam, 0);
        if (!p) continue;
        const Vec3 t = cam.rotation * splat.position + cam.translation;
        const auto& k = cam.intrinsics;
        EXPECT_LT((p->mean2d - Vec2(k.fx * t.x() / t.z() + k.cx, k.fy * t.y() / t.z() + k.cy)).norm(), 1e-9);
        Eigen::Matrix<double, 2, 3> j;
        j << k.fx / t.z(), 0, -k.fx * t.x() / (t.z() * t.z()), 0, k.fy / t.z(), -k.fy * t.y() / (t.z() * t.z());
        const Mat3 w = cam.rotation;
        const Mat2 want = j * w * covariance3d(splat.log_scale, splat.rotation) * w.transpose() * j.transpose() +
                          kCovarianceBlur * Mat2::Identity();
        EXPECT_LT((p->cov2d - want).cwiseAbs().maxCoeff(), 1e-9 * want.cwiseAbs().maxCoeff());
        EXPECT_GT(p->cov2d.determinant(), 0.0);
        EXPECT_GE(p->radius, 1);
        EXPECT_GT(p->depth, cam.near_plane);
    }
}

TEST(Projection, BehindOrNearCameraIsCulled) {
    EXPECT_FALSE(project_splat(isotropic(Vec3(0, 0, -1), 0.1), axis_camera(), 0));
    EXPECT_FALSE(project_splat(isotropic(Vec3(0, 0, 0.005), 0.1), axis_camera(), 0));
}

TEST(Projection, OffscreenIsCulled) {
    // 3σ extent ≈ 3·500·0.01/5 = 3 px, far outside a 640×480 image.
    EXPECT_FALSE(project_splat(isotropic(Vec3(50, 0, 5), 0.01), axis_camera(), 0));
}

TEST(Render, EmptyCloudGivesBackground) {
    const auto out = render(SplatCloud{}, axis_camera(64, 48), Vec3::Zero());
    EXPECT_EQ(out.image, ImageBuffer(64, 48));
    const Vec3 bg(0.2, 0.4, 0.6);
    EXPECT_EQ(render(SplatCloud{}, axis_camera(64, 48), bg).image, ImageBuffer(64, 48, bg));
}

TEST(Render, SaturatedSplatIsClampedAtPointNineNine) {
    SplatCloud cloud;
    auto s = isotropic(Vec3(0, 0, 5), 1.0, 20.0);
    s.sh.col(0).setConstant(white_dc());
    cloud.splats.push_back(s);
    for (const Vec3 bg : {Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(0.3, 0.6, 0.9)}) {
        const auto img = render(cloud, axis_camera(), bg).image;
        const Vec3 center = img.pixel(320, 240);
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(center[c], 0.99 + 0.01 * bg[c], 0.02);
        // The clamp is exact at the center: g = 0.99 regardless of alpha.
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(center[c], 0.99 + 0.01 * bg[c], 1e-12);
    }
}

TEST(Render, ZeroSizedImageIsInvalid) {
    EXPECT_THROW(render(SplatCloud{}, axis_camera(0, 10), Vec3::Zero()), InvalidParameter);
    EXPECT_THROW(render_reference(SplatCloud{}, axis_camera(10, 0), Vec3::Zero()), InvalidParameter);
}

TEST(Render, MatchesReferenceOnRandomScenes) {
    Rng rng(42);
    for (int i = 0; i < 30; ++i) {
        const auto cloud = testkit::random_cloud(rng, 1 + rng.index(64), static_cast<int>(rng.index(4)));
        const auto cam = testkit::random_camera(rng, 64, 64);
        const Vec3 bg(rng.uniform(), rng.uniform(), rng.uniform());
        EXPECT_LE(testkit::max_abs_diff(render(cloud, cam, bg).image, render_reference(cloud, cam, bg)), 1e-5);
    }
}

TEST(Render, SingleSplatMatchesReference) {
    SplatCloud cloud;
    cloud.splats.push_back(isotropic(Vec3(0.3, -0.2, 4), 0.2, 1.5));
    EXPECT_LE(testkit::max_abs_diff(render(cloud, axis_camera(), Vec3(0.1, 0.1, 0.1)).image,
                                    render_reference(cloud, axis_camera(), Vec3(0.1, 0.1, 0.1))),
              1e-5);
}

TEST(Render, SplatOrderDoesNotMatterAtDistinctDepths) {
    Rng rng(43);
    for (int i = 0; i < 10; ++i) {
        auto cloud = testkit::random_cloud(rng, 20, 1);
        const auto cam = testkit::random_camera(rng, 48, 48);
        const auto first = render(cloud, cam, Vec3::Zero()).image;
        const auto ref_first = render_reference(cloud, cam, Vec3::Zero());
        std::reverse(cloud.splats.begin(), cloud.splats.end());
        for (std::size_t k = cloud.size(); k > 1; --k) std::swap(cloud.splats[k - 1], cloud.splats[rng.index(k)]);
        EXPECT_EQ(render(cloud, cam, Vec3::Zero()).image, first);
        EXPECT_EQ(render_reference(cloud, cam, Vec3::Zero()), ref_first);
    }
}

TEST(Render, TileSizeDoesNotChangeTheImage) {
    Rng rng(44);
    for (int i = 0; i < 10; ++i) {
        const auto cloud = testkit::random_cloud(rng, 40, 2);
        const auto cam = testkit::random_camera(rng, 70, 50);
        const auto base = render(cloud, cam, Vec3::Zero(), {16, 1}).image;
        for (int tile : {8, 32, 1, 7}) {
            EXPECT_LE(testkit::max_abs_diff(render(cloud, cam, Vec3::Zero(), {tile, 1}).image, base), 1e-5);
        }
    }
}

TEST(Render, DeterministicForAnyWorkerCount) {
    Rng rng(45);
    const auto cloud = testkit::random_cloud(rng, 200, 3);
    const auto cam = testkit::random_camera(rng, 96, 80);
    const auto a = render(cloud, cam, Vec3::Zero(), {16, 1});
    for (int workers : {1, 2, 4, 0}) {
        const auto b = render(cloud, cam, Vec3::Zero(), {16, workers});
        EXPECT_EQ(a.image, b.image);
        EXPECT_EQ(a.stats.visible, b.stats.visible);
        EXPECT_EQ(a.stats.max_radius, b.stats.max_radius);
    }
}

TEST(Render, TransparentCloudGivesExactBackground) {
    Rng rng(46);
    for (int i = 0; i < 10; ++i) {
        auto cloud = testkit::random_cloud(rng, 50, 3);
        for (auto& s : cloud.splats) s.opacity_logit = -40.0;
        const auto cam = testkit::random_camera(rng, 40, 40);
        const Vec3 bg(rng.uniform(), rng.uniform(), rng.uniform());
        EXPECT_EQ(render(cloud, cam, bg).image, ImageBuffer(40, 40, bg));
    }
}

TEST(Render, PixelsStayInRange) {
    Rng rng(47);
    for (int i = 0; i < 20; ++i) {
        auto cloud = testkit::random_cloud(rng, 60, 0);
        for (auto& s : cloud.splats) {
            for (int c = 0; c < 3; ++c) s.sh(c, 0) = (rng.uniform() - 0.5) / kShC0; // rgb in [0, 1]
            s.opacity_logit = 6.0 * rng.normal();
        }
        const auto cam = testkit::random_camera(rng, 48, 48);
        const auto img = render(cloud, cam, Vec3(rng.uniform(), rng.uniform(), rng.uniform())).image;
        for (double v : img.data()) {
            EXPECT_TRUE(std::isfinite(v));
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0 + 1e-6);
        }
    }
}

TEST(Render, StatsRecordVisibilityAndRadius) {
    SplatCloud cloud;
    cloud.splats.push_back(isotropic(Vec3(0, 0, 5), 0.1));
    cloud.splats.push_back(isotropic(Vec3(0, 0, -5), 0.1)); // behind
    const auto out = render(cloud, axis_camera(), Vec3::Zero());
    ASSERT_EQ(out.stats.size(), 2u);
    EXPECT_EQ(out.stats.visible[0], 1);
    EXPECT_EQ(out.stats.visible[1], 0);
    EXPECT_EQ(out.stats.max_radius[0], project_splat(cloud.splats[0], axis_camera(), 0)->radius);
    EXPECT_EQ(out.stats.max_radius[1], 0.0);
}

TEST(Render, NearerSplatOccludes) {
    SplatCloud cloud;
    auto red = isotropic(Vec3(0, 0, 4), 0.5, 20.0);
    red.sh(0, 0) = white_dc();
    red.sh(1, 0) = red.sh(2, 0) = -0.5 / kShC0;
    auto blue = isotropic(Vec3(0, 0, 8), 0.5, 20.0);
    blue.sh(2, 0) = white_dc();
    blue.sh(0, 0) = blue.sh(1, 0) = -0.5 / kShC0;
    cloud.splats = {blue, red};
    const Vec3 center = render(cloud, axis_camera(), Vec3::Zero()).image.pixel(320, 240);
    EXPECT_GT(center[0], 0.98);
    EXPECT_LT(center[2], 0.02);
}

TEST(DepthSort, Examples) {
    const std::vector<double> a{3, 1, 2};
    EXPECT_EQ(depth_sort(a), (std::vector<std::uint32_t>{1, 2, 0}));
    const std::vector<double> b{2, 5, 2, 2, 1};
    EXPECT_EQ(depth_sort(b), (std::vector<std::uint32_t>{4, 0, 2, 3, 1}));
    EXPECT_TRUE(depth_sort(std::vector<double>{}).empty());
}

TEST(DepthSort, RandomPermutationProperty) {
    Rng rng(48);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> d(1 + rng.index(300));
        for (auto& v : d) v = std::floor(10.0 * rng.uniform()); // many ties
        const auto order = depth_sort(d);
        std::vector<std::uint32_t> inverse(order.size());
        for (std::uint32_t k = 0; k < order.size(); ++k) inverse[order[k]] = k;
        for (std::uint32_t k = 0; k < order.size(); ++k) EXPECT_EQ(inverse[order[k]], k);
        for (std::size_t k = 1; k < order.size(); ++k) {
            EXPECT_LE(d[order[k - 1]], d[order[k]]);
            if (d[order[k - 1]] == d[order[k]]) EXPECT_LT(order[k - 1], order[k]);
        }
    }
}

TEST(RenderStats, AccumulateTakesMaxRadius) {
    RenderStats a(2), b(2);
    a.max_radius = {3, 5};
    b.max_radius = {4, 1};
    b.visible = {1, 0};
    b.grad_norm_sum = {0.5, 0};
    b.grad_count = {1, 0};
    a.accumulate(b);
    EXPECT_EQ(a.max_radius, (std::vector<double>{4, 5}));
    EXPECT_EQ(a.grad_count, (std::vector<std::uint32_t>{1, 0}));
    EXPECT_THROW(a.accumulate(RenderStats(3)), InvalidParameter);
}
