#include "cellseg/evaluation.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <tuple>

#include "cellseg/errors.hpp"

namespace cellseg {

double instance_iou(const ImageBuffer& a, const ImageBuffer& b) {
    if (!a.same_shape(b)) throw DataError("instance_iou: mask shapes differ");
    if (!validate_binary_mask(a) || !validate_binary_mask(b)) {
        throw DataError("instance_iou: masks must be binary");
    }
    long uni = mask_union(a, b);
    if (uni == 0) throw DataError("instance_iou: both masks are empty");
    return static_cast<double>(mask_intersection(a, b)) / static_cast<double>(uni);
}

std::string variant_name(MatchVariant v) {
    return v == MatchVariant::best_match ? "best-match" : "greedy-one-to-one";
}

std::vector<GtImage> gt_fused_from_records(const std::vector<DatasetRecord>& records) {
    std::vector<GtImage> out;
    out.reserve(records.size());
    for (const DatasetRecord& rec : records) {
        GtImage img;
        img.sample_id = rec.sample_id;
        for (const GtInstance& gt : rec.gt_instances) {
            img.fused_masks.push_back(mask_or(gt.nucleus_mask, gt.cytoplasm_mask));
        }
        out.push_back(std::move(img));
    }
    return out;
}

namespace {

// Scores one image's gt instances against its predictions.
std::vector<double> score_image(const std::vector<ImageBuffer>& gt,
                                const std::vector<InstancePrediction>& preds,
                                MatchVariant variant) {
    std::vector<double> scores(gt.size(), 0.0);
    if (gt.empty() || preds.empty()) return scores;

    std::vector<std::vector<double>> iou(gt.size(), std::vector<double>(preds.size(), 0.0));
    for (std::size_t g = 0; g < gt.size(); ++g) {
        for (std::size_t p = 0; p < preds.size(); ++p) {
            iou[g][p] = instance_iou(gt[g], preds[p].fused_mask);
        }
    }

    if (variant == MatchVariant::best_match) {
        for (std::size_t g = 0; g < gt.size(); ++g) {
            scores[g] = *std::max_element(iou[g].begin(), iou[g].end());
        }
        return scores;
    }

    // Greedy one-to-one: highest IoU first, ties by gt then pred index.
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t g = 0; g < gt.size(); ++g) {
        for (std::size_t p = 0; p < preds.size(); ++p) {
            pairs.emplace_back(iou[g][p], g, p);
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
        return std::get<2>(a) < std::get<2>(b);
    });
    std::vector<bool> gt_used(gt.size(), false), pred_used(preds.size(), false);
    for (const auto& [value, g, p] : pairs) {
        if (gt_used[g] || pred_used[p]) continue;
        gt_used[g] = true;
        pred_used[p] = true;
        scores[g] = value;
    }
    return scores;
}

}  // namespace

EvalResult mean_iou_score(const std::vector<GtImage>& gt,
                          const std::vector<PredictedImage>& pred, MatchVariant variant) {
    std::map<std::string, const std::vector<InstancePrediction>*> pred_by_id;
    for (const PredictedImage& p : pred) {
        if (!pred_by_id.emplace(p.sample_id, &p.instances).second) {
            throw DataError("mean_iou_score: duplicate prediction sample " + p.sample_id);
        }
    }
    std::map<std::string, bool> gt_ids;
    for (const GtImage& g : gt) {
        if (!gt_ids.emplace(g.sample_id, true).second) {
            throw DataError("mean_iou_score: duplicate gt sample " + g.sample_id);
        }
    }
    for (const auto& [id, unused] : pred_by_id) {
        if (gt_ids.find(id) == gt_ids.end()) {
            throw DataError("mean_iou_score: predictions for unknown sample " + id);
        }
    }

    EvalResult result;
    result.variant = variant;
    double total = 0.0;
    static const std::vector<InstancePrediction> no_preds;
    for (const GtImage& g : gt) {
        auto it = pred_by_id.find(g.sample_id);
        const std::vector<InstancePrediction>& preds =
            it == pred_by_id.end() ? no_preds : *it->second;
        std::vector<double> scores = score_image(g.fused_masks, preds, variant);

        ImageScore img;
        img.sample_id = g.sample_id;
        img.n_gt = static_cast<int>(scores.size());
        double img_total = 0.0;
        for (double s : scores) img_total += s;
        img.mean_score = scores.empty() ? 0.0 : img_total / static_cast<double>(scores.size());
        result.per_image.push_back(std::move(img));

        total += img_total;
        result.total_gt += static_cast<long>(scores.size());
    }
    result.mean_iou = result.total_gt == 0 ? 0.0 : total / static_cast<double>(result.total_gt);
    return result;
}

std::string format_report(const EvalResult& result) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(4);
    out << "mean IoU: " << result.mean_iou << "\n";
    out << "metric variant: " << variant_name(result.variant) << "\n";
    out << "gt instances: " << result.total_gt << " across " << result.per_image.size()
        << " images\n";
    out << "\nper-image scores:\n";
    for (const ImageScore& img : result.per_image) {
        out << "  " << img.sample_id << "  n_gt=" << img.n_gt << "  mean_iou="
            << img.mean_score << "\n";
    }
    return out.str();
}

}  // namespace cellseg
