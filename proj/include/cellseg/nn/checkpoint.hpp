#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cellseg/nn/layers.hpp"

namespace cellseg::nn {

// Self-describing checkpoint container: a JSON header (kind, architecture
// config, optional scale tag, tensor index) followed by raw little-endian
// float64 parameter data.
void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const nlohmann::json& config, const std::vector<NamedParam>& params,
                     std::optional<double> scale_tag = std::nullopt);

struct CheckpointData {
    std::string kind;
    nlohmann::json config;
    std::optional<double> scale_tag;
    std::map<std::string, Tensor> tensors;
};

CheckpointData read_checkpoint(const std::filesystem::path& path);

// Loads a checkpoint into live parameters. The stored kind and config must
// equal the expected ones; every parameter must be present with a matching
// shape. Returns the scale tag, when present.
std::optional<double> load_checkpoint_into(const std::filesystem::path& path,
                                           const std::string& expected_kind,
                                           const nlohmann::json& expected_config,
                                           const std::vector<NamedParam>& params);

// FNV-1a over the file bytes, for run manifests.
std::uint64_t file_hash(const std::filesystem::path& path);

}  // namespace cellseg::nn
