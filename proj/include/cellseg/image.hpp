#pragma once

#include <cstddef>
#include <vector>

namespace cellseg {

// H x W x C raster with interleaved channels, row-major. The one pixel container
// used everywhere: RGB images hold intensities in [0,255], probability maps hold
// values in [0,1], binary masks hold exactly {0,1}.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int height, int width, int channels, float fill = 0.0f);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }

    float& at(int r, int c, int ch = 0) {
        return data_[(static_cast<std::size_t>(r) * width_ + c) * channels_ + ch];
    }
    const float& at(int r, int c, int ch = 0) const {
        return data_[(static_cast<std::size_t>(r) * width_ + c) * channels_ + ch];
    }
    bool in_bounds(int r, int c) const { return r >= 0 && r < height_ && c >= 0 && c < width_; }

    std::vector<float>& data() { return data_; }
    const std::vector<float>& data() const { return data_; }

    bool same_shape(const ImageBuffer& other) const {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

bool operator==(const ImageBuffer& a, const ImageBuffer& b);

// True iff every pixel is exactly 0 or 1. Throws DataError when the buffer is
// not single-channel.
bool validate_binary_mask(const ImageBuffer& mask);

// Number of nonzero pixels in a single-channel mask.
long count_nonzero(const ImageBuffer& mask);

// Pixelwise OR of two binary masks of identical shape.
ImageBuffer mask_or(const ImageBuffer& a, const ImageBuffer& b);

// Pixelwise a AND NOT b.
ImageBuffer mask_minus(const ImageBuffer& a, const ImageBuffer& b);

long mask_intersection(const ImageBuffer& a, const ImageBuffer& b);
long mask_union(const ImageBuffer& a, const ImageBuffer& b);

}  // namespace cellseg
