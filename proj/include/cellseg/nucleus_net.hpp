#pragma once

#include <json.hpp>

#include "cellseg/dataset.hpp"
#include "cellseg/nn/train.hpp"

namespace cellseg {

struct UNetConfig {
    int depth = 4;
    int base_channels = 16;
    int in_channels = 3;
    int out_classes = 2;

    void validate() const;
    nlohmann::json to_json() const;
    static UNetConfig from_json(const nlohmann::json& j);
};

// Encoder-decoder with skip connections at every level. Input spatial dims
// must be divisible by 2^depth.
class UNet {
public:
    UNet(const UNetConfig& config, Rng& rng);
    UNet(UNet&&) = default;
    UNet& operator=(UNet&&) = default;
    UNet(const UNet&) = delete;
    UNet& operator=(const UNet&) = delete;

    // (B,in_channels,H,W) -> (B,out_classes,H,W)
    nn::Var forward(const nn::Var& x) const;

    std::vector<nn::NamedParam> named_params() const;
    std::vector<nn::Var> params() const;
    const UNetConfig& config() const { return config_; }

private:
    struct ConvBlock {
        nn::Conv2dLayer c1, c2;
        nn::Var operator()(const nn::Var& x) const;
    };

    UNetConfig config_;
    std::vector<ConvBlock> encoder_;
    ConvBlock bottleneck_;
    std::vector<nn::Conv2dLayer> up_;  // 3x3 conv after nearest upsample, halves channels
    std::vector<ConvBlock> decoder_;
    nn::Conv2dLayer head_;
};

// Single-image forward (no gradients): (out_classes, H, W) logits.
nn::Tensor nucleus_forward(const UNet& model, const ImageBuffer& image);

// Full-image nucleus probability map. The image is reflection-padded up to the
// next multiple of 2^depth internally and the output cropped back, so any size
// works.
ImageBuffer predict_nucleus(const UNet& model, const ImageBuffer& image);

struct NucleusTraining {
    UNet model;
    std::vector<double> loss_history;
};

// Stage-1 training: the target per image is the union of its instance nucleus
// masks. Records without instances are skipped; an all-background dataset is an
// error.
NucleusTraining train_nucleus(const std::vector<DatasetRecord>& records,
                              const nn::TrainSpec& spec, const UNetConfig& config);

}  // namespace cellseg
