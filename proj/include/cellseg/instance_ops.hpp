#pragma once

#include <vector>

#include "cellseg/types.hpp"

namespace cellseg {

// Thresholds a 1-channel probability map at `threshold` (p >= threshold is
// foreground), labels connected components under 8-connectivity, drops
// components smaller than min_area, and returns the rest sorted by descending
// area (ties broken by first pixel in row-major order) with ids 0..n-1.
std::vector<CellInstance> extract_nucleus_instances(const ImageBuffer& prob_map,
                                                    double threshold = 0.5, long min_area = 30);

// Square window centered on the instance bbox center with
// side = round_to_even(scale * margin_factor * max(bbox_h, bbox_w)), clamped to
// >= 2. Never clipped to the image; padding happens at extraction.
CropWindow compute_crop_window(const CellInstance& instance, double scale,
                               double margin_factor = 1.0);

// Builds the 4-channel network patch for one window: channels 0-2 are the crop
// of the histogram-equalized RGB image resized bilinearly to out_side, channel 3
// is the nucleus mask crop resized with nearest-neighbor. Pixels the window
// covers outside the image are zero in every channel.
ImageBuffer extract_crop(const ImageBuffer& image, const ImageBuffer& nucleus_mask,
                         const CropWindow& window, int out_side);

// Per-channel cumulative-distribution remap over 256 levels:
//   out = round(255 * (cdf(v) - cdf_min) / (N - cdf_min)).
// A constant channel is returned unchanged. Input values are treated as
// intensities in [0,255] (rounded to the nearest level).
ImageBuffer equalize_histogram(const ImageBuffer& image);

// Inverse of the crop geometry for predicted masks: resizes crop_mask with
// nearest-neighbor to window.side, places it at the window location, discards
// out-of-bounds pixels and returns a full-size binary mask.
ImageBuffer paste_to_canvas(const ImageBuffer& crop_mask, const CropWindow& window, int image_h,
                            int image_w);

// Crop of a full-size binary mask under the same window geometry as
// extract_crop, resized with nearest-neighbor. Used for the patch's nucleus
// channel and for building training targets.
ImageBuffer crop_mask_patch(const ImageBuffer& mask, const CropWindow& window, int out_side);

// Separate-channel resize helpers. Both use the half-pixel-center convention,
// so out size == in size is an exact identity.
ImageBuffer resize_bilinear(const ImageBuffer& src, int out_h, int out_w);
ImageBuffer resize_nearest(const ImageBuffer& src, int out_h, int out_w);

}  // namespace cellseg
