#include "cellseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cellseg/errors.hpp"
#include "cellseg/png_io.hpp"

namespace fs = std::filesystem;

namespace cellseg {

namespace {

// "<id>_<k>" -> {"<id>", k}; the id may contain underscores itself.
std::pair<std::string, int> split_instance_stem(const std::string& stem, const fs::path& file) {
    std::size_t pos = stem.rfind('_');
    if (pos == std::string::npos || pos + 1 >= stem.size()) {
        throw DataError("mask file name lacks an _<index> suffix: " + file.string());
    }
    const std::string tail = stem.substr(pos + 1);
    for (char ch : tail) {
        if (ch < '0' || ch > '9') {
            throw DataError("mask file name lacks a numeric _<index> suffix: " + file.string());
        }
    }
    return {stem.substr(0, pos), std::stoi(tail)};
}

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::vector<DatasetRecord> load_dataset(const fs::path& root, const LabelMap& label_map,
                                        LoadStats* stats) {
    const fs::path images_dir = root / "images";
    const fs::path masks_dir = root / "masks";
    if (!fs::is_directory(images_dir)) {
        throw DataError("load_dataset: missing directory " + images_dir.string());
    }
    if (!fs::is_directory(masks_dir)) {
        throw DataError("load_dataset: missing directory " + masks_dir.string());
    }

    std::map<std::string, std::map<int, fs::path>> mask_files;
    for (const fs::path& p : sorted_pngs(masks_dir)) {
        auto [id, k] = split_instance_stem(p.stem().string(), p);
        mask_files[id][k] = p;
    }

    std::vector<DatasetRecord> records;
    for (const fs::path& img_path : sorted_pngs(images_dir)) {
        DatasetRecord rec;
        rec.sample_id = img_path.stem().string();
        rec.image = read_png(img_path);

        auto it = mask_files.find(rec.sample_id);
        if (it != mask_files.end()) {
            for (const auto& [k, mask_path] : it->second) {
                ImageBuffer raw = read_png(mask_path);
                if (raw.channels() != 1) {
                    throw DataError("load_dataset: mask must be single-channel: " +
                                    mask_path.string());
                }
                if (raw.height() != rec.image.height() || raw.width() != rec.image.width()) {
                    throw DataError("load_dataset: mask size differs from image: " +
                                    mask_path.string());
                }
                GtInstance gt{ImageBuffer(raw.height(), raw.width(), 1),
                              ImageBuffer(raw.height(), raw.width(), 1)};
                for (int r = 0; r < raw.height(); ++r) {
                    for (int c = 0; c < raw.width(); ++c) {
                        int v = static_cast<int>(std::lround(raw.at(r, c)));
                        if (v == 0) continue;
                        auto cls = label_map.find(v);
                        if (cls == label_map.end()) {
                            throw DataError("load_dataset: unmapped mask value " +
                                            std::to_string(v) + " in " + mask_path.string());
                        }
                        (cls->second == MaskClass::nucleus ? gt.nucleus_mask
                                                           : gt.cytoplasm_mask)
                            .at(r, c) = 1.0f;
                    }
                }
                if (count_nonzero(gt.nucleus_mask) == 0) {
                    if (stats != nullptr) ++stats->dropped_empty_nucleus;
                    continue;
                }
                rec.gt_instances.push_back(std::move(gt));
            }
        }
        records.push_back(std::move(rec));
    }
    return records;
}

void save_dataset(const std::vector<DatasetRecord>& records, const fs::path& root,
                  MaskCodes codes) {
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");
    for (const DatasetRecord& rec : records) {
        write_png(root / "images" / (rec.sample_id + ".png"), rec.image);
        for (std::size_t k = 0; k < rec.gt_instances.size(); ++k) {
            const GtInstance& gt = rec.gt_instances[k];
            ImageBuffer mask(rec.image.height(), rec.image.width(), 1);
            for (int r = 0; r < mask.height(); ++r) {
                for (int c = 0; c < mask.width(); ++c) {
                    if (gt.nucleus_mask.at(r, c) != 0.0f) {
                        mask.at(r, c) = static_cast<float>(codes.nucleus_value);
                    } else if (gt.cytoplasm_mask.at(r, c) != 0.0f) {
                        mask.at(r, c) = static_cast<float>(codes.cytoplasm_value);
                    }
                }
            }
            write_png(root / "masks" / (rec.sample_id + "_" + std::to_string(k) + ".png"),
                      mask);
        }
    }
}

void save_predictions(const std::vector<PredictedImage>& predictions, const fs::path& out_dir,
                      MaskCodes codes) {
    fs::create_directories(out_dir / "masks");
    for (const PredictedImage& img : predictions) {
        for (std::size_t k = 0; k < img.instances.size(); ++k) {
            const InstancePrediction& pred = img.instances[k];
            ImageBuffer mask(pred.fused_mask.height(), pred.fused_mask.width(), 1);
            for (int r = 0; r < mask.height(); ++r) {
                for (int c = 0; c < mask.width(); ++c) {
                    if (pred.nucleus_mask.at(r, c) != 0.0f) {
                        mask.at(r, c) = static_cast<float>(codes.nucleus_value);
                    } else if (pred.cytoplasm_mask.at(r, c) != 0.0f) {
                        mask.at(r, c) = static_cast<float>(codes.cytoplasm_value);
                    }
                }
            }
            const std::string stem = img.sample_id + "_" + std::to_string(k);
            write_png(out_dir / "masks" / (stem + ".png"), mask);

            CellInstance fused = CellInstance::from_mask(pred.instance_id, pred.fused_mask);
            nlohmann::json meta = {
                {"instance_id", pred.instance_id},
                {"selected_scale", pred.selected_scale},
                {"bbox",
                 {{"r0", fused.bbox.r0},
                  {"c0", fused.bbox.c0},
                  {"r1", fused.bbox.r1},
                  {"c1", fused.bbox.c1}}}};
            std::ofstream out(out_dir / "masks" / (stem + ".json"));
            if (!out) {
                throw DataError("save_predictions: cannot write " +
                                (out_dir / "masks" / (stem + ".json")).string());
            }
            out << meta.dump(2) << "\n";
        }
    }
}

std::vector<PredictedImage> load_predictions(const fs::path& dir, MaskCodes codes) {
    const fs::path masks_dir = dir / "masks";
    if (!fs::is_directory(masks_dir)) {
        throw DataError("load_predictions: missing directory " + masks_dir.string());
    }

    std::map<std::string, std::map<int, fs::path>> by_sample;
    for (const fs::path& p : sorted_pngs(masks_dir)) {
        auto [id, k] = split_instance_stem(p.stem().string(), p);
        by_sample[id][k] = p;
    }

    std::vector<PredictedImage> out;
    for (const auto& [sample_id, files] : by_sample) {
        PredictedImage img;
        img.sample_id = sample_id;
        for (const auto& [k, mask_path] : files) {
            ImageBuffer raw = read_png(mask_path);
            if (raw.channels() != 1) {
                throw DataError("load_predictions: mask must be single-channel: " +
                                mask_path.string());
            }
            InstancePrediction pred;
            pred.nucleus_mask = ImageBuffer(raw.height(), raw.width(), 1);
            pred.cytoplasm_mask = ImageBuffer(raw.height(), raw.width(), 1);
            for (int r = 0; r < raw.height(); ++r) {
                for (int c = 0; c < raw.width(); ++c) {
                    int v = static_cast<int>(std::lround(raw.at(r, c)));
                    if (v == 0) continue;
                    if (v == codes.nucleus_value) {
                        pred.nucleus_mask.at(r, c) = 1.0f;
                    } else if (v == codes.cytoplasm_value) {
                        pred.cytoplasm_mask.at(r, c) = 1.0f;
                    } else {
                        throw DataError("load_predictions: unmapped mask value " +
                                        std::to_string(v) + " in " + mask_path.string());
                    }
                }
            }
            pred.fused_mask = mask_or(pred.nucleus_mask, pred.cytoplasm_mask);

            fs::path meta_path = mask_path;
            meta_path.replace_extension(".json");
            std::ifstream in(meta_path);
            if (!in) {
                throw DataError("load_predictions: missing sidecar " + meta_path.string());
            }
            nlohmann::json meta = nlohmann::json::parse(in, nullptr, true);
            pred.instance_id = meta.at("instance_id").get<int>();
            pred.selected_scale = meta.at("selected_scale").get<double>();
            img.instances.push_back(std::move(pred));
        }
        out.push_back(std::move(img));
    }
    return out;
}

}  // namespace cellseg
