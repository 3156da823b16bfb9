#include "cellseg/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cellseg/aggregation.hpp"
#include "cellseg/errors.hpp"

namespace cellseg {

namespace {

void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                const std::string& context) {
    if (!j.is_object()) throw UsageError("config: " + context + " must be an object");
    for (const auto& [key, unused] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw UsageError("config: unknown key \"" + key + "\" in " + context);
        }
    }
}

nlohmann::json train_spec_to_json(const nn::TrainSpec& s) {
    return {{"epochs", s.epochs},
            {"learning_rate", s.learning_rate},
            {"batch_size", s.batch_size},
            {"seed", s.rng_seed}};
}

nn::TrainSpec train_spec_from_json(const nlohmann::json& j, const nn::TrainSpec& defaults,
                                   const std::string& context) {
    check_keys(j, {"epochs", "learning_rate", "batch_size", "seed"}, context);
    nn::TrainSpec s = defaults;
    s.epochs = j.value("epochs", s.epochs);
    s.learning_rate = j.value("learning_rate", s.learning_rate);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.rng_seed = j.value("seed", s.rng_seed);
    return s;
}

nlohmann::json mixture_to_json(const RatioMixture& m) {
    return {{"means", m.means}, {"stddevs", m.stddevs}, {"weights", m.weights}};
}

RatioMixture mixture_from_json(const nlohmann::json& j, const RatioMixture& defaults) {
    check_keys(j, {"means", "stddevs", "weights"}, "synthetic.mixture");
    RatioMixture m = defaults;
    m.means = j.value("means", m.means);
    m.stddevs = j.value("stddevs", m.stddevs);
    m.weights = j.value("weights", m.weights);
    return m;
}

}  // namespace

ScaleConfig PipelineConfig::effective_scale_config() const {
    ScaleConfig sc;
    sc.scales = scales;
    sc.capacity_thresholds = capacity_thresholds.empty()
                                 ? derive_capacity_thresholds(scales, fill_fraction,
                                                              margin_factor)
                                 : capacity_thresholds;
    sc.network_input_side = network_input_side;
    sc.validate();
    return sc;
}

std::filesystem::path PipelineConfig::checkpoint_dir() const {
    return std::filesystem::path(out_dir) / "checkpoints";
}

std::filesystem::path PipelineConfig::nucleus_checkpoint() const {
    return checkpoint_dir() / "nucleus.ckpt";
}

std::filesystem::path PipelineConfig::cytoplasm_checkpoint(double scale) const {
    return checkpoint_dir() / ("cytoplasm_" + format_scale(scale) + ".ckpt");
}

std::string format_scale(double scale) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", scale);
    return buf;
}

PipelineConfig default_config() {
    PipelineConfig c;
    c.train_nucleus.learning_rate = 1e-4;
    c.train_cytoplasm.learning_rate = 1e-5;
    c.synthetic.mixture.means = {1.5, 2.5, 3.5, 4.8};
    c.synthetic.mixture.stddevs = {0.12, 0.12, 0.12, 0.12};
    c.synthetic.mixture.weights = {0.25, 0.25, 0.25, 0.25};
    return c;
}

nlohmann::json config_to_json(const PipelineConfig& config) {
    nlohmann::json label_map = nlohmann::json::object();
    for (const auto& [value, cls] : config.label_map) {
        label_map[std::to_string(value)] =
            cls == MaskClass::nucleus ? "nucleus" : "cytoplasm";
    }
    return {{"data_root", config.data_root},
            {"eval_data_root", config.eval_data_root},
            {"out_dir", config.out_dir},
            {"label_map", label_map},
            {"nucleus_net", config.nucleus_net.to_json()},
            {"cytoplasm_net", config.cytoplasm_net.to_json()},
            {"scales", config.scales},
            {"capacity_thresholds", config.capacity_thresholds},
            {"network_input_side", config.network_input_side},
            {"fill_fraction", config.fill_fraction},
            {"margin_factor", config.margin_factor},
            {"nucleus_threshold", config.nucleus_threshold},
            {"min_instance_area", config.min_instance_area},
            {"train_nucleus", train_spec_to_json(config.train_nucleus)},
            {"train_cytoplasm", train_spec_to_json(config.train_cytoplasm)},
            {"synthetic",
             {{"n_train", config.synthetic.n_train},
              {"n_test", config.synthetic.n_test},
              {"image_side", config.synthetic.image_side},
              {"min_cells", config.synthetic.min_cells},
              {"max_cells", config.synthetic.max_cells},
              {"mixture", mixture_to_json(config.synthetic.mixture)},
              {"overlap_probability", config.synthetic.overlap_probability},
              {"seed", config.synthetic.seed}}},
            {"analysis",
             {{"bin_width", config.analysis.bin_width},
              {"smoothing_window", config.analysis.smoothing_window},
              {"min_prominence", config.analysis.min_prominence},
              {"headroom", config.analysis.headroom}}},
            {"eval_variant", config.eval_variant}};
}

PipelineConfig config_from_json(const nlohmann::json& j) {
    check_keys(j,
               {"data_root", "eval_data_root", "out_dir", "label_map", "nucleus_net",
                "cytoplasm_net", "scales", "capacity_thresholds", "network_input_side",
                "fill_fraction", "margin_factor", "nucleus_threshold", "min_instance_area",
                "train_nucleus", "train_cytoplasm", "synthetic", "analysis", "eval_variant"},
               "top level");
    PipelineConfig c = default_config();
    c.data_root = j.value("data_root", c.data_root);
    c.eval_data_root = j.value("eval_data_root", c.eval_data_root);
    c.out_dir = j.value("out_dir", c.out_dir);

    if (j.contains("label_map")) {
        if (!j.at("label_map").is_object()) {
            throw UsageError("config: label_map must be an object");
        }
        c.label_map.clear();
        for (const auto& [key, value] : j.at("label_map").items()) {
            int raw;
            try {
                raw = std::stoi(key);
            } catch (const std::exception&) {
                throw UsageError("config: label_map key \"" + key + "\" is not an integer");
            }
            if (raw == 0) throw UsageError("config: label_map must not map value 0");
            const std::string cls = value.get<std::string>();
            if (cls == "nucleus") {
                c.label_map[raw] = MaskClass::nucleus;
            } else if (cls == "cytoplasm") {
                c.label_map[raw] = MaskClass::cytoplasm;
            } else {
                throw UsageError("config: label_map value \"" + cls +
                                 "\" is neither nucleus nor cytoplasm");
            }
        }
    }

    if (j.contains("nucleus_net")) {
        check_keys(j.at("nucleus_net"), {"depth", "base_channels", "in_channels", "out_classes"},
                   "nucleus_net");
        c.nucleus_net = UNetConfig::from_json(j.at("nucleus_net"));
    }
    if (j.contains("cytoplasm_net")) {
        check_keys(j.at("cytoplasm_net"),
                   {"in_channels", "out_classes", "encoder_channels", "aspp_rates",
                    "aspp_channels", "attention_reduction", "fusion_extent",
                    "fusion_spatial_kernel", "lowlevel_channels", "decoder_channels"},
                   "cytoplasm_net");
        c.cytoplasm_net = AttentionDeeplabConfig::from_json(j.at("cytoplasm_net"));
    }

    c.scales = j.value("scales", c.scales);
    c.capacity_thresholds = j.value("capacity_thresholds", c.capacity_thresholds);
    c.network_input_side = j.value("network_input_side", c.network_input_side);
    c.fill_fraction = j.value("fill_fraction", c.fill_fraction);
    c.margin_factor = j.value("margin_factor", c.margin_factor);
    c.nucleus_threshold = j.value("nucleus_threshold", c.nucleus_threshold);
    c.min_instance_area = j.value("min_instance_area", c.min_instance_area);

    if (j.contains("train_nucleus")) {
        c.train_nucleus = train_spec_from_json(j.at("train_nucleus"), c.train_nucleus,
                                               "train_nucleus");
    }
    if (j.contains("train_cytoplasm")) {
        c.train_cytoplasm = train_spec_from_json(j.at("train_cytoplasm"), c.train_cytoplasm,
                                                 "train_cytoplasm");
    }

    if (j.contains("synthetic")) {
        const nlohmann::json& s = j.at("synthetic");
        check_keys(s,
                   {"n_train", "n_test", "image_side", "min_cells", "max_cells", "mixture",
                    "overlap_probability", "seed"},
                   "synthetic");
        c.synthetic.n_train = s.value("n_train", c.synthetic.n_train);
        c.synthetic.n_test = s.value("n_test", c.synthetic.n_test);
        c.synthetic.image_side = s.value("image_side", c.synthetic.image_side);
        c.synthetic.min_cells = s.value("min_cells", c.synthetic.min_cells);
        c.synthetic.max_cells = s.value("max_cells", c.synthetic.max_cells);
        if (s.contains("mixture")) {
            c.synthetic.mixture = mixture_from_json(s.at("mixture"), c.synthetic.mixture);
        }
        c.synthetic.overlap_probability =
            s.value("overlap_probability", c.synthetic.overlap_probability);
        c.synthetic.seed = s.value("seed", c.synthetic.seed);
    }

    if (j.contains("analysis")) {
        const nlohmann::json& a = j.at("analysis");
        check_keys(a, {"bin_width", "smoothing_window", "min_prominence", "headroom"},
                   "analysis");
        c.analysis.bin_width = a.value("bin_width", c.analysis.bin_width);
        c.analysis.smoothing_window = a.value("smoothing_window", c.analysis.smoothing_window);
        c.analysis.min_prominence = a.value("min_prominence", c.analysis.min_prominence);
        c.analysis.headroom = a.value("headroom", c.analysis.headroom);
    }

    c.eval_variant = j.value("eval_variant", c.eval_variant);
    if (c.eval_variant != "best-match" && c.eval_variant != "greedy-one-to-one") {
        throw UsageError("config: eval_variant must be best-match or greedy-one-to-one");
    }
    return c;
}

nlohmann::json parse_config_text(const std::string& text, const std::string& source_name) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t byte = std::min(e.byte, text.size());
        long line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n');
        throw UsageError("config parse error at " + source_name + ":" + std::to_string(line) +
                         ": " + e.what());
    }
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return config_from_json(parse_config_text(buf.str(), path.string()));
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
    std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw UsageError("override must look like key.subkey=value, got \"" + assignment +
                         "\"");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);

    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
        value = raw;  // unquoted strings are taken literally
    }

    nlohmann::json* cursor = &j;
    std::size_t start = 0;
    while (true) {
        std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) throw UsageError("override has an empty key segment: " + path);
        if (dot == std::string::npos) {
            (*cursor)[key] = value;
            return;
        }
        cursor = &(*cursor)[key];
        start = dot + 1;
    }
}

std::string config_hash(const nlohmann::json& j) {
    const std::string text = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace cellseg
