#pragma once

#include <vector>

#include "cellseg/dataset.hpp"

namespace cellseg {

// Equal-width histogram over [0, max ratio]; bin i covers
// [i*bin_width, (i+1)*bin_width).
struct RatioHistogram {
    double bin_width = 0.0;
    std::vector<long> counts;

    double bin_center(int i) const { return (i + 0.5) * bin_width; }
    long total() const;
};

// One sample per gt instance: area(cytoplasm) / area(nucleus). Throws when an
// instance has zero nucleus area, naming it.
std::vector<double> collect_area_ratios(const std::vector<DatasetRecord>& records);

RatioHistogram histogram_from_ratios(const std::vector<double>& ratios, double bin_width);

RatioHistogram compute_ratio_histogram(const std::vector<DatasetRecord>& records,
                                       double bin_width);

// Moving-average smooth, then local maxima whose prominence (height above the
// higher of the two flanking valleys) reaches min_prominence * max smoothed
// count. Returns bin-center ratios, ascending.
std::vector<double> detect_peaks(const RatioHistogram& hist, int smoothing_window = 3,
                                 double min_prominence = 0.10);

// Linear crop factors from area-ratio peaks: scale_i = sqrt(headroom * (peak_i + 1)).
// The +1 folds the nucleus' own area into the crop budget; results closer than
// 0.05 to the previous one are dropped.
std::vector<double> derive_scales(const std::vector<double>& peaks, double headroom = 1.2);

}  // namespace cellseg
