#include "cellseg/image.hpp"

#include <string>

#include "cellseg/errors.hpp"

namespace cellseg {

ImageBuffer::ImageBuffer(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
    if (height < 1 || width < 1 || channels < 1) {
        throw DataError("ImageBuffer dimensions must be positive, got " + std::to_string(height) +
                        "x" + std::to_string(width) + "x" + std::to_string(channels));
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

bool operator==(const ImageBuffer& a, const ImageBuffer& b) {
    return a.same_shape(b) && a.data() == b.data();
}

bool validate_binary_mask(const ImageBuffer& mask) {
    if (mask.channels() != 1) {
        throw DataError("binary mask must have 1 channel, got " +
                        std::to_string(mask.channels()));
    }
    for (float v : mask.data()) {
        if (v != 0.0f && v != 1.0f) return false;
    }
    return true;
}

long count_nonzero(const ImageBuffer& mask) {
    long n = 0;
    for (float v : mask.data()) {
        if (v != 0.0f) ++n;
    }
    return n;
}

static void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DataError(std::string(op) + ": mask shape mismatch " + std::to_string(a.height()) +
                        "x" + std::to_string(a.width()) + " vs " + std::to_string(b.height()) +
                        "x" + std::to_string(b.width()));
    }
}

ImageBuffer mask_or(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_shape(a, b, "mask_or");
    ImageBuffer out(a.height(), a.width(), a.channels());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.data()[i] = (a.data()[i] != 0.0f || b.data()[i] != 0.0f) ? 1.0f : 0.0f;
    }
    return out;
}

ImageBuffer mask_minus(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_shape(a, b, "mask_minus");
    ImageBuffer out(a.height(), a.width(), a.channels());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.data()[i] = (a.data()[i] != 0.0f && b.data()[i] == 0.0f) ? 1.0f : 0.0f;
    }
    return out;
}

long mask_intersection(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_shape(a, b, "mask_intersection");
    long n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.data()[i] != 0.0f && b.data()[i] != 0.0f) ++n;
    }
    return n;
}

long mask_union(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_shape(a, b, "mask_union");
    long n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.data()[i] != 0.0f || b.data()[i] != 0.0f) ++n;
    }
    return n;
}

}  // namespace cellseg
