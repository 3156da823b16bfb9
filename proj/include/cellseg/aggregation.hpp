#pragma once

#include <vector>

#include "cellseg/types.hpp"

namespace cellseg {

// One per-scale stage-2 output: the cytoplasm prediction pasted back to full
// image coordinates.
struct ScaleMask {
    double scale = 1.0;
    ImageBuffer mask;
};

struct ScaleSelection {
    int index = 0;
    ImageBuffer mask;
};

// Walks the scales ascending and accepts the first whose cytoplasm/nucleus
// area ratio stays within that scale's capacity threshold; when every scale
// rejects, the largest wins. The entries must line up with config.scales.
ScaleSelection select_scale(const std::vector<ScaleMask>& per_scale_masks, long nucleus_area,
                            const ScaleConfig& config);

// OR of nucleus and selected cytoplasm into the final per-instance mask. The
// stored cytoplasm mask is canonicalized to selected_mask minus the nucleus so
// the three masks always satisfy the InstancePrediction invariants.
InstancePrediction fuse_instance(const CellInstance& nucleus, const ImageBuffer& selected_mask,
                                 double selected_scale);

// threshold_i = max(0.1, fill_fraction * (margin_factor * scale_i)^2 - 1): the
// area ratio a crop of that scale can hold before the prediction is likely
// truncated by the crop edge.
std::vector<double> derive_capacity_thresholds(const std::vector<double>& scales,
                                               double fill_fraction = 0.85,
                                               double margin_factor = 1.0);

}  // namespace cellseg
