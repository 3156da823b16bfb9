#include "cellseg/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cellseg/errors.hpp"

namespace cellseg {

ScaleSelection select_scale(const std::vector<ScaleMask>& per_scale_masks, long nucleus_area,
                            const ScaleConfig& config) {
    config.validate();
    if (per_scale_masks.empty()) throw DataError("select_scale: no per-scale masks");
    if (per_scale_masks.size() != config.scales.size()) {
        throw DataError("select_scale: got " + std::to_string(per_scale_masks.size()) +
                        " masks for " + std::to_string(config.scales.size()) +
                        " configured scales");
    }
    for (std::size_t i = 0; i < per_scale_masks.size(); ++i) {
        if (std::abs(per_scale_masks[i].scale - config.scales[i]) > 1e-9) {
            throw DataError("select_scale: mask scale " +
                            std::to_string(per_scale_masks[i].scale) + " at position " +
                            std::to_string(i) + " does not match configured scale " +
                            std::to_string(config.scales[i]));
        }
    }
    if (nucleus_area <= 0) throw DataError("select_scale: nucleus area must be positive");

    const int n = static_cast<int>(per_scale_masks.size());
    for (int i = 0; i < n; ++i) {
        double ratio = static_cast<double>(count_nonzero(per_scale_masks[static_cast<std::size_t>(i)].mask)) /
                       static_cast<double>(nucleus_area);
        if (ratio <= config.capacity_thresholds[static_cast<std::size_t>(i)]) {
            return {i, per_scale_masks[static_cast<std::size_t>(i)].mask};
        }
    }
    return {n - 1, per_scale_masks[static_cast<std::size_t>(n - 1)].mask};
}

InstancePrediction fuse_instance(const CellInstance& nucleus, const ImageBuffer& selected_mask,
                                 double selected_scale) {
    if (!nucleus.mask.same_shape(selected_mask)) {
        throw DataError("fuse_instance: cytoplasm mask size differs from nucleus mask");
    }
    if (!validate_binary_mask(selected_mask)) {
        throw DataError("fuse_instance: cytoplasm mask is not binary");
    }
    InstancePrediction pred;
    pred.instance_id = nucleus.id;
    pred.nucleus_mask = nucleus.mask;
    pred.cytoplasm_mask = mask_minus(selected_mask, nucleus.mask);
    pred.fused_mask = mask_or(nucleus.mask, selected_mask);
    pred.selected_scale = selected_scale;
    return pred;
}

std::vector<double> derive_capacity_thresholds(const std::vector<double>& scales,
                                               double fill_fraction, double margin_factor) {
    if (fill_fraction <= 0.0 || fill_fraction > 1.0) {
        throw UsageError("derive_capacity_thresholds: fill_fraction must be in (0,1]");
    }
    if (margin_factor <= 0.0) {
        throw UsageError("derive_capacity_thresholds: margin_factor must be positive");
    }
    for (std::size_t i = 1; i < scales.size(); ++i) {
        if (scales[i] <= scales[i - 1]) {
            throw UsageError("derive_capacity_thresholds: scales must be ascending");
        }
    }
    std::vector<double> out;
    out.reserve(scales.size());
    for (double s : scales) {
        double linear = margin_factor * s;
        out.push_back(std::max(0.1, fill_fraction * linear * linear - 1.0));
    }
    return out;
}

}  // namespace cellseg
