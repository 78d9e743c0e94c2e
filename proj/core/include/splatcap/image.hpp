// Copyright Contributors to the splatcap project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatcap/gaussian.hpp"

#include <vector>

namespace splatcap {

/// Interleaved RGB raster, row-major, nominal range [0, 1].
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, const Vec3& fill = Vec3::Zero())
        : mWidth(width), mHeight(height),
          mData(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
        for (std::size_t i = 0; i < mData.size(); i += 3) {
            mData[i] = fill[0];
            mData[i + 1] = fill[1];
            mData[i + 2] = fill[2];
        }
    }

    int width() const noexcept { return mWidth; }
    int height() const noexcept { return mHeight; }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(mWidth) * static_cast<std::size_t>(mHeight);
    }

    double& at(int x, int y, int c) { return mData[index(x, y) + c]; }
    double at(int x, int y, int c) const { return mData[index(x, y) + c]; }

    Vec3 pixel(int x, int y) const {
        const std::size_t i = index(x, y);
        return {mData[i], mData[i + 1], mData[i + 2]};
    }
    void set_pixel(int x, int y, const Vec3& rgb) {
        const std::size_t i = index(x, y);
        mData[i] = rgb[0];
        mData[i + 1] = rgb[1];
        mData[i + 2] = rgb[2];
    }

    std::vector<double>& data() noexcept { return mData; }
    const std::vector<double>& data() const noexcept { return mData; }

    bool same_size(const ImageBuffer& other) const noexcept {
        return mWidth == other.mWidth && mHeight == other.mHeight;
    }

    bool operator==(const ImageBuffer&) const = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(mWidth) +
                static_cast<std::size_t>(x)) *
               3;
    }

    int mWidth = 0;
    int mHeight = 0;
    std::vector<double> mData;
};

} // namespace splatcap
