#include "cellseg/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "cellseg/errors.hpp"

namespace cellseg::nn {

namespace {

constexpr char kMagic[8] = {'C', 'S', 'E', 'G', 'C', 'K', 'P', '1'};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const nlohmann::json& config, const std::vector<NamedParam>& params,
                     std::optional<double> scale_tag) {
    nlohmann::json header;
    header["kind"] = kind;
    header["config"] = config;
    if (scale_tag) header["scale"] = *scale_tag;
    nlohmann::json index = nlohmann::json::array();
    for (const NamedParam& p : params) {
        index.push_back({{"name", p.name}, {"shape", p.var->value.shape}});
    }
    header["tensors"] = index;
    std::string header_bytes = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot create checkpoint file: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    std::uint64_t hlen = header_bytes.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    for (const NamedParam& p : params) {
        out.write(reinterpret_cast<const char*>(p.var->value.ptr()),
                  static_cast<std::streamsize>(p.var->value.numel() * sizeof(double)));
    }
    if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint file: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("not a checkpoint file: " + path.string());
    }
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string header_bytes(hlen, '\0');
    in.read(header_bytes.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw DataError("truncated checkpoint header: " + path.string());

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_bytes);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt checkpoint header in " + path.string() + ": " + e.what());
    }

    CheckpointData ckpt;
    ckpt.kind = header.at("kind").get<std::string>();
    ckpt.config = header.at("config");
    if (header.contains("scale")) ckpt.scale_tag = header["scale"].get<double>();
    for (const auto& entry : header.at("tensors")) {
        std::string name = entry.at("name").get<std::string>();
        Tensor t(entry.at("shape").get<std::vector<int>>());
        in.read(reinterpret_cast<char*>(t.ptr()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
        if (!in) throw DataError("truncated checkpoint tensor '" + name + "': " + path.string());
        ckpt.tensors.emplace(std::move(name), std::move(t));
    }
    return ckpt;
}

std::optional<double> load_checkpoint_into(const std::filesystem::path& path,
                                           const std::string& expected_kind,
                                           const nlohmann::json& expected_config,
                                           const std::vector<NamedParam>& params) {
    CheckpointData ckpt = read_checkpoint(path);
    if (ckpt.kind != expected_kind) {
        throw DataError("checkpoint " + path.string() + " holds a '" + ckpt.kind +
                        "' model, expected '" + expected_kind + "'");
    }
    if (ckpt.config != expected_config) {
        throw DataError("checkpoint " + path.string() +
                        " was trained with a different architecture config");
    }
    for (const NamedParam& p : params) {
        auto it = ckpt.tensors.find(p.name);
        if (it == ckpt.tensors.end()) {
            throw DataError("checkpoint " + path.string() + " is missing tensor '" + p.name + "'");
        }
        if (it->second.shape != p.var->value.shape) {
            throw DataError("checkpoint tensor '" + p.name + "' has mismatched shape in " +
                            path.string());
        }
        p.var->value = std::move(it->second);
    }
    return ckpt.scale_tag;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for hashing: " + path.string());
    std::uint64_t h = 1469598103934665603ull;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    return h;
}

}  // namespace cellseg::nn
