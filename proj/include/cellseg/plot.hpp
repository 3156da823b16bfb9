#pragma once

#include <filesystem>
#include <vector>

#include "cellseg/scale_analysis.hpp"

namespace cellseg {

// Bar chart of the area-ratio histogram. Vertical markers: detected peaks in
// green, derived scales in red at the area ratio each scale covers
// (scale^2 - 1, the crop budget minus the nucleus). Written as a PNG.
void plot_ratio_histogram(const RatioHistogram& hist, const std::vector<double>& peaks,
                          const std::vector<double>& scales, const std::filesystem::path& path);

}  // namespace cellseg
