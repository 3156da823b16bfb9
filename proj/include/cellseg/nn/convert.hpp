#pragma once

#include "cellseg/image.hpp"
#include "cellseg/nn/tensor.hpp"

namespace cellseg::nn {

// HWC image -> CHW tensor, each value multiplied by `scale` (1/255 turns 8-bit
// intensities into [0,1] network inputs).
inline Tensor image_to_chw(const ImageBuffer& img, double scale = 1.0) {
    Tensor t({img.channels(), img.height(), img.width()});
    long i = 0;
    for (int c = 0; c < img.channels(); ++c) {
        for (int r = 0; r < img.height(); ++r) {
            for (int col = 0; col < img.width(); ++col) {
                t.data[i++] = static_cast<double>(img.at(r, col, c)) * scale;
            }
        }
    }
    return t;
}

// Single-channel mask -> (H,W) class-label tensor (0/1).
inline Tensor mask_to_labels(const ImageBuffer& mask) {
    Tensor t({mask.height(), mask.width()});
    long i = 0;
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            t.data[i++] = mask.at(r, c) != 0.0f ? 1.0 : 0.0;
        }
    }
    return t;
}

// One channel plane of a (C,H,W) or (N,C,H,W) tensor -> 1-channel image.
inline ImageBuffer plane_to_image(const Tensor& t, int channel, int h, int w) {
    ImageBuffer out(h, w, 1);
    const double* src = t.ptr() + static_cast<std::size_t>(channel) * h * w;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            out.at(r, c) = static_cast<float>(src[static_cast<std::size_t>(r) * w + c]);
        }
    }
    return out;
}

}  // namespace cellseg::nn
