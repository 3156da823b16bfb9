#include "cellseg/types.hpp"

#include <cmath>
#include <string>

#include "cellseg/errors.hpp"

namespace cellseg {

CellInstance CellInstance::from_mask(int id, ImageBuffer mask) {
    if (!validate_binary_mask(mask)) {
        throw DataError("CellInstance mask contains values outside {0,1}");
    }
    CellInstance inst;
    inst.id = id;
    long area = 0;
    double sum_r = 0.0, sum_c = 0.0;
    int r0 = mask.height(), c0 = mask.width(), r1 = -1, c1 = -1;
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            if (mask.at(r, c) == 0.0f) continue;
            ++area;
            sum_r += r;
            sum_c += c;
            r0 = std::min(r0, r);
            c0 = std::min(c0, c);
            r1 = std::max(r1, r + 1);
            c1 = std::max(c1, c + 1);
        }
    }
    if (area == 0) {
        throw DataError("CellInstance mask has no foreground pixels (id " + std::to_string(id) +
                        ")");
    }
    inst.area = area;
    inst.bbox = {r0, c0, r1, c1};
    inst.centroid_row = sum_r / static_cast<double>(area);
    inst.centroid_col = sum_c / static_cast<double>(area);
    inst.mask = std::move(mask);
    return inst;
}

int CropWindow::row0() const { return static_cast<int>(std::lround(center_row - side / 2.0)); }
int CropWindow::col0() const { return static_cast<int>(std::lround(center_col - side / 2.0)); }

void ScaleConfig::validate() const {
    if (scales.empty()) throw UsageError("ScaleConfig: scale list is empty");
    if (scales.size() != capacity_thresholds.size()) {
        throw UsageError("ScaleConfig: " + std::to_string(scales.size()) + " scales but " +
                         std::to_string(capacity_thresholds.size()) + " capacity thresholds");
    }
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (scales[i] <= 0.0) throw UsageError("ScaleConfig: scales must be positive");
        if (i > 0 && scales[i] <= scales[i - 1]) {
            throw UsageError("ScaleConfig: scales must be strictly ascending");
        }
    }
    if (network_input_side < 8) throw UsageError("ScaleConfig: network_input_side too small");
}

}  // namespace cellseg
