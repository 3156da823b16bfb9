#include "cellseg/scale_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cellseg/errors.hpp"

namespace cellseg {

long RatioHistogram::total() const {
    return std::accumulate(counts.begin(), counts.end(), 0L);
}

std::vector<double> collect_area_ratios(const std::vector<DatasetRecord>& records) {
    std::vector<double> ratios;
    for (const DatasetRecord& rec : records) {
        for (std::size_t k = 0; k < rec.gt_instances.size(); ++k) {
            long nucleus = count_nonzero(rec.gt_instances[k].nucleus_mask);
            if (nucleus <= 0) {
                throw DataError("collect_area_ratios: zero nucleus area in sample " +
                                rec.sample_id + " instance " + std::to_string(k));
            }
            long cyto = count_nonzero(rec.gt_instances[k].cytoplasm_mask);
            ratios.push_back(static_cast<double>(cyto) / static_cast<double>(nucleus));
        }
    }
    return ratios;
}

RatioHistogram histogram_from_ratios(const std::vector<double>& ratios, double bin_width) {
    if (bin_width <= 0.0) throw UsageError("histogram_from_ratios: bin_width must be positive");
    RatioHistogram hist;
    hist.bin_width = bin_width;
    if (ratios.empty()) return hist;
    double max_ratio = *std::max_element(ratios.begin(), ratios.end());
    hist.counts.assign(static_cast<std::size_t>(std::floor(max_ratio / bin_width)) + 1, 0L);
    for (double r : ratios) {
        ++hist.counts[static_cast<std::size_t>(std::floor(r / bin_width))];
    }
    return hist;
}

RatioHistogram compute_ratio_histogram(const std::vector<DatasetRecord>& records,
                                       double bin_width) {
    return histogram_from_ratios(collect_area_ratios(records), bin_width);
}

std::vector<double> detect_peaks(const RatioHistogram& hist, int smoothing_window,
                                 double min_prominence) {
    if (smoothing_window < 1) throw UsageError("detect_peaks: smoothing_window must be >= 1");
    if (min_prominence < 0.0) throw UsageError("detect_peaks: min_prominence must be >= 0");
    const int n = static_cast<int>(hist.counts.size());
    if (n == 0) return {};

    const int half = smoothing_window / 2;
    std::vector<double> s(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        int cnt = 0;
        for (int j = std::max(0, i - half); j <= std::min(n - 1, i + half); ++j) {
            acc += static_cast<double>(hist.counts[static_cast<std::size_t>(j)]);
            ++cnt;
        }
        s[static_cast<std::size_t>(i)] = acc / cnt;
    }
    const double peak_floor = min_prominence * *std::max_element(s.begin(), s.end());

    std::vector<double> peaks;
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && s[static_cast<std::size_t>(j + 1)] == s[static_cast<std::size_t>(i)]) ++j;
        const double h = s[static_cast<std::size_t>(i)];
        const bool left_ok = i == 0 || s[static_cast<std::size_t>(i - 1)] < h;
        const bool right_ok = j == n - 1 || s[static_cast<std::size_t>(j + 1)] < h;
        if (h > 0.0 && left_ok && right_ok) {
            // Walk outward to the flanking valleys, stopping at a strictly
            // higher bin. An absent side (peak at the histogram boundary) is
            // ignored; a run spanning everything has zero prominence.
            const double absent = std::numeric_limits<double>::infinity();
            double left_min = absent, right_min = absent;
            for (int k = i - 1; k >= 0 && s[static_cast<std::size_t>(k)] <= h; --k) {
                left_min = std::min(left_min, s[static_cast<std::size_t>(k)]);
            }
            for (int k = j + 1; k < n && s[static_cast<std::size_t>(k)] <= h; ++k) {
                right_min = std::min(right_min, s[static_cast<std::size_t>(k)]);
            }
            double prominence;
            if (left_min == absent && right_min == absent) {
                prominence = 0.0;
            } else if (left_min == absent) {
                prominence = h - right_min;
            } else if (right_min == absent) {
                prominence = h - left_min;
            } else {
                prominence = h - std::max(left_min, right_min);
            }
            if (prominence >= peak_floor && prominence > 0.0) {
                peaks.push_back(hist.bin_center((i + j) / 2));
            }
        }
        i = j + 1;
    }
    return peaks;
}

std::vector<double> derive_scales(const std::vector<double>& peaks, double headroom) {
    if (headroom < 1.0) throw UsageError("derive_scales: headroom must be >= 1");
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        if (peaks[i] < 0.0) throw UsageError("derive_scales: peaks must be non-negative");
        if (i > 0 && peaks[i] < peaks[i - 1]) {
            throw UsageError("derive_scales: peaks must be ascending");
        }
    }
    std::vector<double> scales;
    for (double p : peaks) {
        double s = std::sqrt(headroom * (p + 1.0));
        if (scales.empty() || s - scales.back() > 0.05) scales.push_back(s);
    }
    return scales;
}

}  // namespace cellseg
