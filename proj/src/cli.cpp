#include "cellseg/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "cellseg/aggregation.hpp"
#include "cellseg/config.hpp"
#include "cellseg/errors.hpp"
#include "cellseg/evaluation.hpp"
#include "cellseg/instance_ops.hpp"
#include "cellseg/nn/checkpoint.hpp"
#include "cellseg/plot.hpp"
#include "cellseg/scale_analysis.hpp"

namespace fs = std::filesystem;

namespace cellseg::cli {

namespace {

PipelineConfig resolve_config(const std::string& config_path,
                              const std::vector<std::string>& overrides) {
    nlohmann::json doc = nlohmann::json::object();
    std::string source = config_path;
    if (source.empty()) {
        if (const char* env = std::getenv("CELLSEG_CONFIG"); env != nullptr && *env != '\0') {
            source = env;
        }
    }
    if (!source.empty()) {
        std::ifstream in(source);
        if (!in) throw UsageError("cannot open config file " + source);
        std::ostringstream buf;
        buf << in.rdbuf();
        doc = parse_config_text(buf.str(), source);
    }
    for (const std::string& o : overrides) apply_override(doc, o);
    return config_from_json(doc);
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Reproducibility record: the full resolved config, its hash, every seed, and
// the hash of each checkpoint the command touched.
void write_manifest(const PipelineConfig& cfg, const std::string& command,
                    const std::vector<fs::path>& checkpoints) {
    nlohmann::json resolved = config_to_json(cfg);
    nlohmann::json m;
    m["command"] = command;
    m["config_hash"] = config_hash(resolved);
    m["config"] = resolved;
    m["seeds"] = {{"train_nucleus", cfg.train_nucleus.rng_seed},
                  {"train_cytoplasm", cfg.train_cytoplasm.rng_seed},
                  {"synthetic", cfg.synthetic.seed}};
    nlohmann::json ckpts = nlohmann::json::object();
    for (const fs::path& p : checkpoints) ckpts[p.string()] = hash_hex(nn::file_hash(p));
    m["checkpoints"] = ckpts;

    fs::create_directories(cfg.out_dir);
    fs::path path = fs::path(cfg.out_dir) / ("manifest_" + command + ".json");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest " + path.string());
    out << m.dump(2) << "\n";
}

void write_loss_log(const fs::path& path, const std::vector<double>& history) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write loss log " + path.string());
    out.setf(std::ios::scientific);
    out.precision(10);
    for (std::size_t i = 0; i < history.size(); ++i) {
        out << i + 1 << " " << history[i] << "\n";
    }
}

std::string zero_pad(int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

int cmd_gen_synthetic(const PipelineConfig& cfg) {
    const SyntheticDataConfig& sy = cfg.synthetic;
    if (sy.min_cells > sy.max_cells || sy.min_cells < 0) {
        throw UsageError("synthetic: need 0 <= min_cells <= max_cells");
    }
    Rng meta(sy.seed ^ 0x9e3779b97f4a7c15ULL);  // cell-count draws, split from scene seeds

    auto make_split = [&](int n, std::uint64_t seed_base) {
        std::vector<DatasetRecord> records;
        records.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            SyntheticSceneSpec spec;
            spec.image_side = sy.image_side;
            spec.n_cells = meta.uniform_int(sy.min_cells, sy.max_cells);
            spec.ratio_distribution = sy.mixture;
            spec.overlap_probability = sy.overlap_probability;
            spec.rng_seed = seed_base + static_cast<std::uint64_t>(i);
            records.push_back(generate_synthetic_scene(spec, "scene_" + zero_pad(i, 4)));
        }
        return records;
    };

    std::vector<DatasetRecord> train = make_split(sy.n_train, sy.seed);
    std::vector<DatasetRecord> test = make_split(sy.n_test, sy.seed + 1000003ULL);
    save_dataset(train, cfg.data_root);
    save_dataset(test, cfg.eval_data_root);
    std::cout << "wrote " << train.size() << " train scenes to " << cfg.data_root << " and "
              << test.size() << " test scenes to " << cfg.eval_data_root << "\n";
    write_manifest(cfg, "gen-synthetic", {});
    return 0;
}

int cmd_train_nucleus(const PipelineConfig& cfg) {
    LoadStats stats;
    std::vector<DatasetRecord> records = load_dataset(cfg.data_root, cfg.label_map, &stats);
    if (stats.dropped_empty_nucleus > 0) {
        std::cerr << "warning: dropped " << stats.dropped_empty_nucleus
                  << " instances with empty nucleus\n";
    }
    nn::TrainSpec spec = cfg.train_nucleus;
    spec.checkpoint_path = cfg.nucleus_checkpoint().string();

    NucleusTraining result = train_nucleus(records, spec, cfg.nucleus_net);

    fs::create_directories(cfg.checkpoint_dir());
    nn::save_checkpoint(cfg.nucleus_checkpoint(), "nucleus", cfg.nucleus_net.to_json(),
                        result.model.named_params());
    write_loss_log(fs::path(cfg.out_dir) / "loss_nucleus.txt", result.loss_history);
    std::cout << "trained nucleus model: " << result.loss_history.size() << " epochs, loss "
              << result.loss_history.front() << " -> " << result.loss_history.back() << "\n"
              << "checkpoint: " << cfg.nucleus_checkpoint().string() << "\n";
    write_manifest(cfg, "train-nucleus", {cfg.nucleus_checkpoint()});
    return 0;
}

int cmd_train_cytoplasm(const PipelineConfig& cfg, double scale) {
    LoadStats stats;
    std::vector<DatasetRecord> records = load_dataset(cfg.data_root, cfg.label_map, &stats);
    nn::TrainSpec spec = cfg.train_cytoplasm;
    const fs::path ckpt = cfg.cytoplasm_checkpoint(scale);
    spec.checkpoint_path = ckpt.string();

    CytoplasmTraining result = train_cytoplasm_scale(records, scale, spec, cfg.cytoplasm_net,
                                                     cfg.network_input_side, cfg.margin_factor);

    fs::create_directories(cfg.checkpoint_dir());
    nn::save_checkpoint(ckpt, "cytoplasm", cfg.cytoplasm_net.to_json(),
                        result.model.named_params(), scale);
    write_loss_log(fs::path(cfg.out_dir) / ("loss_cytoplasm_" + format_scale(scale) + ".txt"),
                   result.loss_history);
    std::cout << "trained cytoplasm model at scale " << format_scale(scale) << ": "
              << result.n_patches << " patches, loss " << result.loss_history.front() << " -> "
              << result.loss_history.back() << "\n"
              << "checkpoint: " << ckpt.string() << "\n";
    write_manifest(cfg, "train-cytoplasm", {ckpt});
    return 0;
}

int cmd_analyze_scales(const PipelineConfig& cfg, const std::string& split) {
    const std::string root = split == "test" ? cfg.eval_data_root : cfg.data_root;
    std::vector<DatasetRecord> records = load_dataset(root, cfg.label_map);
    RatioHistogram hist = compute_ratio_histogram(records, cfg.analysis.bin_width);
    std::vector<double> peaks =
        detect_peaks(hist, cfg.analysis.smoothing_window, cfg.analysis.min_prominence);
    std::vector<double> scales = derive_scales(peaks, cfg.analysis.headroom);

    fs::create_directories(cfg.out_dir);
    plot_ratio_histogram(hist, peaks, scales, fs::path(cfg.out_dir) / "ratio_histogram.png");

    std::ostringstream table;
    table << "split: " << split << " (" << root << ")\n";
    table << "instances: " << hist.total() << ", bin width " << cfg.analysis.bin_width << "\n";
    table << "peaks (area ratio):";
    for (double p : peaks) table << " " << p;
    table << "\nderived scales (headroom " << cfg.analysis.headroom << "):";
    for (double s : scales) table << " " << format_scale(s);
    nlohmann::json fragment = {{"scales", scales}};
    table << "\nconfig fragment: " << fragment.dump() << "\n";

    std::ofstream out(fs::path(cfg.out_dir) / "scale_analysis.txt");
    if (!out) throw DataError("cannot write scale_analysis.txt");
    out << table.str();
    std::cout << table.str();
    write_manifest(cfg, "analyze-scales", {});
    return 0;
}

int cmd_infer(const PipelineConfig& cfg, const std::string& data_override, int workers) {
    const std::string root = data_override.empty() ? cfg.eval_data_root : data_override;
    std::vector<DatasetRecord> records = load_dataset(root, cfg.label_map);
    ScaleConfig sc = cfg.effective_scale_config();

    Rng init_rng(0);  // placeholder weights, immediately overwritten by the checkpoint
    UNet nucleus_model(cfg.nucleus_net, init_rng);
    if (!fs::exists(cfg.nucleus_checkpoint())) {
        throw DataError("missing nucleus checkpoint: " + cfg.nucleus_checkpoint().string());
    }
    nn::load_checkpoint_into(cfg.nucleus_checkpoint(), "nucleus", cfg.nucleus_net.to_json(),
                             nucleus_model.named_params());

    std::vector<AttentionDeeplab> cyto_models;
    std::vector<fs::path> ckpts = {cfg.nucleus_checkpoint()};
    for (double scale : sc.scales) {
        const fs::path path = cfg.cytoplasm_checkpoint(scale);
        if (!fs::exists(path)) {
            throw DataError("missing checkpoint for configured scale " + format_scale(scale) +
                            ": " + path.string());
        }
        AttentionDeeplab model(cfg.cytoplasm_net, init_rng);
        std::optional<double> tag = nn::load_checkpoint_into(
            path, "cytoplasm", cfg.cytoplasm_net.to_json(), model.named_params());
        if (!tag.has_value() || std::abs(*tag - scale) > 1e-9) {
            throw DataError("checkpoint " + path.string() + " carries scale tag " +
                            (tag.has_value() ? format_scale(*tag) : "<none>") +
                            " but the config expects " + format_scale(scale));
        }
        cyto_models.push_back(std::move(model));
        ckpts.push_back(path);
    }

    std::vector<PredictedImage> outputs(records.size());
    auto process_one = [&](std::size_t idx) {
        const DatasetRecord& rec = records[idx];
        ImageBuffer prob = predict_nucleus(nucleus_model, rec.image);
        std::vector<CellInstance> instances =
            extract_nucleus_instances(prob, cfg.nucleus_threshold, cfg.min_instance_area);
        PredictedImage out;
        out.sample_id = rec.sample_id;
        for (const CellInstance& inst : instances) {
            std::vector<ScaleMask> per_scale;
            for (std::size_t k = 0; k < sc.scales.size(); ++k) {
                CropWindow window = compute_crop_window(inst, sc.scales[k], cfg.margin_factor);
                ImageBuffer crop =
                    extract_crop(rec.image, inst.mask, window, sc.network_input_side);
                ImageBuffer crop_mask = predict_cytoplasm_mask(cyto_models[k], crop);
                per_scale.push_back({sc.scales[k],
                                     paste_to_canvas(crop_mask, window, rec.image.height(),
                                                     rec.image.width())});
            }
            ScaleSelection sel = select_scale(per_scale, inst.area, sc);
            out.instances.push_back(
                fuse_instance(inst, sel.mask, sc.scales[static_cast<std::size_t>(sel.index)]));
        }
        outputs[idx] = std::move(out);
    };

    if (workers <= 1 || records.size() <= 1) {
        for (std::size_t i = 0; i < records.size(); ++i) process_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto worker = [&] {
            for (std::size_t i = next.fetch_add(1); i < records.size(); i = next.fetch_add(1)) {
                try {
                    process_one(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        const int n_threads = std::min<int>(workers, static_cast<int>(records.size()));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    const fs::path pred_dir = fs::path(cfg.out_dir) / "predictions";
    save_predictions(outputs, pred_dir);
    std::size_t n_instances = 0;
    for (const PredictedImage& p : outputs) n_instances += p.instances.size();
    std::cout << "wrote " << n_instances << " instance predictions for " << outputs.size()
              << " images to " << pred_dir.string() << "\n";
    write_manifest(cfg, "infer", ckpts);
    return 0;
}

int cmd_evaluate(const PipelineConfig& cfg, const std::string& data_override,
                 const std::string& pred_override) {
    const std::string root = data_override.empty() ? cfg.eval_data_root : data_override;
    std::vector<GtImage> gt = gt_fused_from_records(load_dataset(root, cfg.label_map));
    const fs::path pred_dir =
        pred_override.empty() ? fs::path(cfg.out_dir) / "predictions" : fs::path(pred_override);
    std::vector<PredictedImage> preds = load_predictions(pred_dir);

    MatchVariant variant = cfg.eval_variant == "greedy-one-to-one"
                               ? MatchVariant::greedy_one_to_one
                               : MatchVariant::best_match;
    EvalResult result = mean_iou_score(gt, preds, variant);
    std::string report = format_report(result);

    fs::create_directories(cfg.out_dir);
    std::ofstream out(fs::path(cfg.out_dir) / "report.txt");
    if (!out) throw DataError("cannot write report.txt");
    out << report;
    std::cout << report;
    write_manifest(cfg, "evaluate", {});
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"two-stage multi-scale cell instance segmentation"};
    app.require_subcommand(1);
    app.fallthrough();  // lets --config/--set appear after the subcommand name

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path,
                   "JSON config file; $CELLSEG_CONFIG is used when the flag is absent");
    app.add_option("--set", overrides,
                   "dotted-key config override, e.g. --set train_nucleus.epochs=30");

    CLI::App* gen = app.add_subcommand("gen-synthetic", "write synthetic train/test datasets");
    CLI::App* tn = app.add_subcommand("train-nucleus", "train the stage-1 nucleus model");
    CLI::App* tc =
        app.add_subcommand("train-cytoplasm", "train the stage-2 cytoplasm model for one scale");
    double tc_scale = 0.0;
    tc->add_option("--scale", tc_scale, "crop scale this model covers")->required();
    CLI::App* an =
        app.add_subcommand("analyze-scales", "area-ratio histogram, peaks, derived scales");
    std::string an_split = "train";
    an->add_option("--split", an_split, "which dataset to analyze")
        ->check(CLI::IsMember({"train", "test"}));
    CLI::App* inf = app.add_subcommand("infer", "run the full pipeline over a dataset");
    int workers = 1;
    inf->add_option("--workers", workers, "concurrent images")->check(CLI::Range(1, 64));
    std::string inf_data;
    inf->add_option("--data", inf_data, "input dataset root (default eval_data_root)");
    CLI::App* ev = app.add_subcommand("evaluate", "score predictions against ground truth");
    std::string ev_data, ev_pred;
    ev->add_option("--data", ev_data, "ground-truth dataset root (default eval_data_root)");
    ev->add_option("--pred", ev_pred, "predictions directory (default <out_dir>/predictions)");

    std::vector<const char*> argv;
    argv.push_back("cellseg");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::usage);
    }

    try {
        PipelineConfig cfg = resolve_config(config_path, overrides);
        if (gen->parsed()) return cmd_gen_synthetic(cfg);
        if (tn->parsed()) return cmd_train_nucleus(cfg);
        if (tc->parsed()) return cmd_train_cytoplasm(cfg, tc_scale);
        if (an->parsed()) return cmd_analyze_scales(cfg, an_split);
        if (inf->parsed()) return cmd_infer(cfg, inf_data, workers);
        if (ev->parsed()) return cmd_evaluate(cfg, ev_data, ev_pred);
        throw UsageError("no command given");
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::data);
    }
}

}  // namespace cellseg::cli
