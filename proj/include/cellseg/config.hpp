#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "cellseg/cytoplasm_net.hpp"
#include "cellseg/nucleus_net.hpp"
#include "cellseg/synthetic.hpp"

namespace cellseg {

struct SyntheticDataConfig {
    int n_train = 40;
    int n_test = 10;
    int image_side = 96;
    int min_cells = 3;
    int max_cells = 5;
    RatioMixture mixture;  // defaults planted in default_config()
    double overlap_probability = 0.15;
    std::uint64_t seed = 1;
};

struct AnalysisConfig {
    double bin_width = 0.25;
    int smoothing_window = 3;
    double min_prominence = 0.10;
    double headroom = 1.2;
};

// Everything the CLI needs, loaded from one JSON file. Dotted-key overrides
// are applied to the JSON document before it is decoded.
struct PipelineConfig {
    std::string data_root = "data/train";
    std::string eval_data_root = "data/test";
    std::string out_dir = "out";
    LabelMap label_map = {{1, MaskClass::nucleus}, {2, MaskClass::cytoplasm}};

    UNetConfig nucleus_net;
    AttentionDeeplabConfig cytoplasm_net;

    std::vector<double> scales = {1.0, 1.6, 2.2, 3.0};
    std::vector<double> capacity_thresholds;  // empty -> derived via fill_fraction
    int network_input_side = 256;
    double fill_fraction = 0.85;
    double margin_factor = 1.0;
    double nucleus_threshold = 0.5;
    long min_instance_area = 30;

    nn::TrainSpec train_nucleus;    // lr 1e-4
    nn::TrainSpec train_cytoplasm;  // lr 1e-5

    SyntheticDataConfig synthetic;
    AnalysisConfig analysis;
    std::string eval_variant = "best-match";

    // Scales plus resolved thresholds (derived when none are given) and the
    // network input side, validated.
    ScaleConfig effective_scale_config() const;

    std::filesystem::path checkpoint_dir() const;
    std::filesystem::path nucleus_checkpoint() const;
    std::filesystem::path cytoplasm_checkpoint(double scale) const;
};

// "2.6", not "2.600000"; used in checkpoint file names and logs.
std::string format_scale(double scale);

PipelineConfig default_config();

nlohmann::json config_to_json(const PipelineConfig& config);

// Throws UsageError naming any unknown key, so typos fail loudly.
PipelineConfig config_from_json(const nlohmann::json& j);

// Parse errors are rethrown as UsageError with "<source_name>:<line>".
nlohmann::json parse_config_text(const std::string& text, const std::string& source_name);

PipelineConfig load_config(const std::filesystem::path& path);

// "section.key=value" assignment into the JSON document; the value is parsed
// as JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

// FNV-1a over the canonical dump; stable across runs.
std::string config_hash(const nlohmann::json& j);

}  // namespace cellseg
