#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cellseg/types.hpp"

namespace cellseg {

enum class MaskClass { nucleus, cytoplasm };

// Raw mask pixel value -> semantic class. Value 0 is always background and
// must not appear in the map.
using LabelMap = std::map<int, MaskClass>;

// One annotated instance: disjoint nucleus / cytoplasm masks at full image size.
struct GtInstance {
    ImageBuffer nucleus_mask;
    ImageBuffer cytoplasm_mask;
};

struct DatasetRecord {
    std::string sample_id;
    ImageBuffer image;  // RGB
    std::vector<GtInstance> gt_instances;
};

struct LoadStats {
    int dropped_empty_nucleus = 0;
};

// Loads `root/images/<id>.png` plus `root/masks/<id>_<k>.png` (k = instance
// index; the id may itself contain underscores, the split happens at the last
// one). Raw mask values are translated through label_map; instances whose
// nucleus comes out empty are dropped and counted in stats.
std::vector<DatasetRecord> load_dataset(const std::filesystem::path& root,
                                        const LabelMap& label_map, LoadStats* stats = nullptr);

// Writes a record set in the same layout load_dataset reads (used by the
// synthetic generator CLI). Mask files encode nucleus/cytoplasm with the given
// codes.
struct MaskCodes {
    int nucleus_value = 1;
    int cytoplasm_value = 2;
};
void save_dataset(const std::vector<DatasetRecord>& records, const std::filesystem::path& root,
                  MaskCodes codes = {});

// Predictions for one input image.
struct PredictedImage {
    std::string sample_id;
    std::vector<InstancePrediction> instances;
};

// Persists predictions under `out/masks/<id>_<k>.png` (0 background, nucleus
// and cytoplasm regions with the given codes) plus a JSON sidecar
// `out/masks/<id>_<k>.json` recording instance_id, selected_scale and the
// fused-mask bbox. Round-trips through load_predictions for predictions whose
// cytoplasm mask is disjoint from the nucleus mask (fuse_instance guarantees
// that).
void save_predictions(const std::vector<PredictedImage>& predictions,
                      const std::filesystem::path& out_dir, MaskCodes codes = {});

std::vector<PredictedImage> load_predictions(const std::filesystem::path& dir,
                                             MaskCodes codes = {});

}  // namespace cellseg
