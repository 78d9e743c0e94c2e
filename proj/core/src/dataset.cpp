// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatcap/dataset.hpp"

#include "splatcap/error.hpp"
#include "splatcap/image_io.hpp"
#include "splatcap/parallel.hpp"

namespace splatcap {

CameraIntrinsics downscale_intrinsics(const CameraIntrinsics& k, int factor) {
    if (factor < 1) throw InvalidParameter("downscale factor must be >= 1");
    if (factor == 1) return k;
    const double f = factor;
    CameraIntrinsics out;
    out.width = k.width / factor;
    out.height = k.height / factor;
    out.fx = k.fx / f;
    out.fy = k.fy / f;
    out.cx = (k.cx + 0.5) / f - 0.5;
    out.cy = (k.cy + 0.5) / f - 0.5;
    return out;
}

TrainingDataset assemble_dataset(const SparseModel& sparse, const std::filesystem::path& image_dir,
                                 int downscale_factor) {
    if (downscale_factor < 1) throw InvalidParameter("downscale factor must be >= 1");
    for (const auto& img : sparse.images) {
        std::error_code ec;
        if (!std::filesystem::is_regular_file(image_dir / img.name, ec)) {
            throw NotFound("image '" + img.name + "' not found in " + image_dir.string());
        }
    }

    TrainingDataset dataset;
    dataset.views.resize(sparse.images.size());
    parallel_for(sparse.images.size(), std::min(resolve_workers(0), 8),
                 [&](int, std::size_t i) {
        const auto& img = sparse.images[i];
        const Camera full = sparse.camera_for(img);
        ImageBuffer pixels = load_image(image_dir / img.name);
        if (pixels.width() != full.intrinsics.width || pixels.height() != full.intrinsics.height) {
            throw DimensionMismatch("image '" + img.name + "' is " + std::to_string(pixels.width()) +
                                    "x" + std::to_string(pixels.height()) +
                                    " but its camera expects " +
                                    std::to_string(full.intrinsics.width) + "x" +
                                    std::to_string(full.intrinsics.height));
        }
        auto& view = dataset.views[i];
        view.name = img.name;
        view.camera = full;
        view.camera.intrinsics = downscale_intrinsics(full.intrinsics, downscale_factor);
        view.image = downscale(pixels, downscale_factor);
    });
    dataset.seed_points = sparse.points;
    return dataset;
}

TrainingDataset load_dataset_directory(const std::filesystem::path& root, int downscale_factor) {
    std::error_code ec;
    if (!std::filesystem::is_directory(root, ec)) {
        throw NotFound("dataset directory not found: " + root.string());
    }
    const auto sparse_dir = std::filesystem::is_directory(root / "sparse", ec) ? root / "sparse" : root;
    const auto image_dir = std::filesystem::is_directory(root / "images", ec) ? root / "images" : root;
    return assemble_dataset(read_colmap_sparse(sparse_dir), image_dir, downscale_factor);
}

} // namespace splatcap
