#pragma once

#include <vector>

#include "cellseg/image.hpp"

namespace cellseg {

// Half-open pixel box [r0,r1) x [c0,c1), origin at the image top-left.
struct PixelBox {
    int r0 = 0, c0 = 0, r1 = 0, c1 = 0;

    int height() const { return r1 - r0; }
    int width() const { return c1 - c0; }
    long area() const { return static_cast<long>(height()) * width(); }
    double center_row() const { return 0.5 * (r0 + r1); }
    double center_col() const { return 0.5 * (c0 + c1); }
    bool contains(double r, double c) const { return r >= r0 && r < r1 && c >= c0 && c < c1; }

    friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

// One nucleus instance: a full-image binary mask plus geometry derived from it.
// Immutable after construction; build through from_mask so the derived fields
// always agree with the mask.
struct CellInstance {
    int id = 0;
    ImageBuffer mask;  // 1 channel, full image size, {0,1}
    PixelBox bbox;     // tight box of the mask
    double centroid_row = 0.0;
    double centroid_col = 0.0;
    long area = 0;

    // Computes bbox / centroid / area from the mask. Throws DataError when the
    // mask is not binary or has no foreground pixel.
    static CellInstance from_mask(int id, ImageBuffer mask);
};

// Square crop region in full-image coordinates. May extend beyond the image;
// the out-of-bounds part is zero-padded at extraction time, never clipped here.
struct CropWindow {
    double center_row = 0.0;
    double center_col = 0.0;
    int side = 0;        // even, >= 2
    double scale = 1.0;  // linear factor the window was built with
    PixelBox origin_bbox;

    // Top-left corner of the covered region [row0, row0+side) x [col0, col0+side).
    int row0() const;
    int col0() const;
};

// Ordered crop scales with their per-scale area-ratio capacities.
struct ScaleConfig {
    std::vector<double> scales;               // strictly ascending linear factors
    std::vector<double> capacity_thresholds;  // one per scale
    int network_input_side = 256;

    // Throws UsageError when the invariants do not hold.
    void validate() const;
};

// Final per-instance result: nucleus and cytoplasm fused into one mask, with
// the scale that produced the cytoplasm recorded as provenance.
struct InstancePrediction {
    int instance_id = 0;
    ImageBuffer fused_mask;      // OR of nucleus_mask and cytoplasm_mask
    ImageBuffer nucleus_mask;
    ImageBuffer cytoplasm_mask;  // disjoint from nucleus_mask
    double selected_scale = 1.0;
};

}  // namespace cellseg
