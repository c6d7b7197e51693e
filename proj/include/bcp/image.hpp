#pragma once

#include <Eigen/Core>

#include <string>

namespace bcp {

struct PixelIndex {
    int row = 0;
    int col = 0;
};

// Planar raster of unit-interval intensities. Channels are stored as
// contiguous row-major planes (all of channel 0, then channel 1, ...),
// so per-channel sweeps stream through memory. Immutable once built.
class RasterImage {
public:
    RasterImage() = default;
    // Takes ownership of a planar data block; validates dimensions and range.
    RasterImage(int width, int height, int channels, Eigen::ArrayXd data);

    static RasterImage constant(int width, int height, int channels, double value);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    Eigen::Index pixel_count() const { return static_cast<Eigen::Index>(width_) * height_; }

    // Linear pixel index, row-major. All modules share this convention.
    Eigen::Index linear(int row, int col) const {
        return static_cast<Eigen::Index>(row) * width_ + col;
    }

    double operator()(int row, int col, int channel) const {
        return data_[channel * pixel_count() + linear(row, col)];
    }

    Eigen::Map<const Eigen::ArrayXd> plane(int channel) const {
        return {data_.data() + channel * pixel_count(), pixel_count()};
    }

    const Eigen::ArrayXd& data() const { return data_; }

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    Eigen::ArrayXd data_;
};

// Reads an 8/16-bit PNG, binary PGM (P5) or PPM (P6); samples are divided
// by the file's maximum value so everything lands in [0,1].
RasterImage load_image(const std::string& path);

// Writes an 8-bit PNG (grayscale or RGB); samples clamped to [0,1] and
// quantized as round(x * 255), half away from zero.
void save_image(const RasterImage& img, const std::string& path);

// Value component of HSV: per-pixel max over the three channels.
RasterImage rgb_to_hsv_v(const RasterImage& img);

// Nearest-neighbor resampling with center-aligned mapping.
RasterImage resize_nearest(const RasterImage& img, int new_width, int new_height);

} // namespace bcp
