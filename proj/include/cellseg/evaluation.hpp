#pragma once

#include <string>
#include <vector>

#include "cellseg/dataset.hpp"

namespace cellseg {

// |a AND b| / |a OR b| for binary masks of identical shape. Two empty masks
// have no defined overlap and raise an error; one empty mask scores 0.
double instance_iou(const ImageBuffer& a, const ImageBuffer& b);

// best_match: every gt instance scores its best IoU over all predictions in
// the image (false positives unpenalized). greedy_one_to_one: gt/pred pairs
// are matched greedily by descending IoU, one use each, unmatched gt scores 0.
enum class MatchVariant { best_match, greedy_one_to_one };

std::string variant_name(MatchVariant v);

struct GtImage {
    std::string sample_id;
    std::vector<ImageBuffer> fused_masks;
};

// Per-instance OR(nucleus, cytoplasm), mirroring prediction fusion.
std::vector<GtImage> gt_fused_from_records(const std::vector<DatasetRecord>& records);

struct ImageScore {
    std::string sample_id;
    int n_gt = 0;
    double mean_score = 0.0;
};

struct EvalResult {
    double mean_iou = 0.0;  // mean over every gt instance across the dataset
    long total_gt = 0;
    MatchVariant variant = MatchVariant::best_match;
    std::vector<ImageScore> per_image;
};

// Images are aligned by sample_id; predictions for a sample absent from gt are
// an error, gt images without predictions score 0 per instance.
EvalResult mean_iou_score(const std::vector<GtImage>& gt,
                          const std::vector<PredictedImage>& pred,
                          MatchVariant variant = MatchVariant::best_match);

// Plain-text report: overall score, metric variant, per-image table.
std::string format_report(const EvalResult& result);

}  // namespace cellseg
