#pragma once

#include <json.hpp>

#include "cellseg/dataset.hpp"
#include "cellseg/nn/train.hpp"

namespace cellseg {

struct AttentionDeeplabConfig {
    int in_channels = 4;  // equalized RGB + nucleus mask
    int out_classes = 2;
    std::vector<int> encoder_channels = {16, 24, 32, 48};  // stem + three stride-2 stages
    std::vector<int> aspp_rates = {1, 6, 12, 18};
    int aspp_channels = 32;
    int attention_reduction = 4;
    int fusion_extent = 0;  // scale positions the fusion kernel spans; 0 = all branches
    int fusion_spatial_kernel = 3;
    int lowlevel_channels = 16;
    int decoder_channels = 32;

    void validate() const;
    nlohmann::json to_json() const;
    static AttentionDeeplabConfig from_json(const nlohmann::json& j);
};

namespace detail {

// Two 3x3 convs with an identity (or projected) shortcut.
struct ResBlock {
    nn::Conv2dLayer c1, c2, proj;
    bool use_proj = false;

    ResBlock() = default;
    ResBlock(int in_ch, int out_ch, int stride, Rng& rng);

    nn::Var operator()(const nn::Var& x) const;
    void collect(const std::string& prefix, std::vector<nn::NamedParam>& out) const;
};

// Learned kernel over the scale axis formed by stacking the branch maps. The
// kernel spans `extent` consecutive branches; when extent == branch count this
// is a plain concat + conv, otherwise the same weights slide over the scale
// windows and the positions are averaged.
struct CrossScaleFusion {
    nn::Conv2dLayer conv;  // weight (out_channels, extent * branch_channels, k, k)
    int extent = 0;

    CrossScaleFusion() = default;
    CrossScaleFusion(int n_branches, int branch_channels, int out_channels, int extent,
                     int spatial_kernel, Rng& rng);

    nn::Var operator()(const std::vector<nn::Var>& branches) const;
    void collect(const std::string& prefix, std::vector<nn::NamedParam>& out) const;
};

}  // namespace detail

// Deeplabv3+-style crop segmenter: residual encoder at output stride 8, an
// atrous pyramid whose branches pass through a per-channel attention gate and a
// cross-scale fusion kernel, then a low-level-skip decoder back to input size.
// Input spatial dims must be divisible by 8.
class AttentionDeeplab {
public:
    AttentionDeeplab(const AttentionDeeplabConfig& config, Rng& rng);
    AttentionDeeplab(AttentionDeeplab&&) = default;
    AttentionDeeplab& operator=(AttentionDeeplab&&) = default;
    AttentionDeeplab(const AttentionDeeplab&) = delete;
    AttentionDeeplab& operator=(const AttentionDeeplab&) = delete;

    // (B,in_channels,H,W) -> (B,out_classes,H,W)
    nn::Var forward(const nn::Var& x) const;

    // Pyramid stages, exposed so each contract can be probed in isolation.
    std::vector<nn::Var> aspp_forward(const nn::Var& features) const;
    nn::Var channel_attention(const nn::Var& branch, int branch_index) const;
    nn::Var cross_scale_fusion(const std::vector<nn::Var>& branches) const;

    std::vector<nn::NamedParam> named_params() const;
    std::vector<nn::Var> params() const;
    const AttentionDeeplabConfig& config() const { return config_; }
    detail::CrossScaleFusion& fusion() { return fusion_; }

private:
    // Returns {low-level features (stride 4), encoder output (stride 8)}.
    std::pair<nn::Var, nn::Var> encode(const nn::Var& x) const;
    nn::Var decode(const nn::Var& fused, const nn::Var& lowlevel) const;

    AttentionDeeplabConfig config_;
    nn::Conv2dLayer stem_;
    detail::ResBlock stage1_, stage2_, stage3_;
    std::vector<nn::Conv2dLayer> aspp_;
    std::vector<nn::ChannelAttention> attention_;
    detail::CrossScaleFusion fusion_;
    nn::Conv2dLayer lowlevel_proj_, dec1_, dec2_, head_;
};

// Single-crop forward (no gradients): (out_classes, S, S) logits. The crop is
// the 4-channel extract_crop output; RGB channels are rescaled to [0,1]
// internally, the mask channel is taken as-is.
nn::Tensor cytoplasm_forward(const AttentionDeeplab& model, const ImageBuffer& crop);

// Binary cytoplasm mask for one crop: softmax class-1 probability >= 0.5.
ImageBuffer predict_cytoplasm_mask(const AttentionDeeplab& model, const ImageBuffer& crop);

struct CytoplasmTraining {
    AttentionDeeplab model;
    std::vector<double> loss_history;
    int n_patches = 0;
};

// Stage-2 training for one scale. Patches are cut around every gt nucleus with
// compute_crop_window(scale) and resized to input_side; the target is the gt
// cytoplasm mask under the same window. Instances whose cytoplasm vanishes
// after cropping are skipped; if nothing survives that is an error.
CytoplasmTraining train_cytoplasm_scale(const std::vector<DatasetRecord>& records, double scale,
                                        const nn::TrainSpec& spec,
                                        const AttentionDeeplabConfig& config, int input_side,
                                        double margin_factor = 1.0);

}  // namespace cellseg
