#include "cellseg/cytoplasm_net.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "cellseg/errors.hpp"
#include "cellseg/instance_ops.hpp"
#include "cellseg/nn/convert.hpp"

namespace cellseg {

using nn::Var;

void AttentionDeeplabConfig::validate() const {
    if (in_channels < 1) throw UsageError("AttentionDeeplabConfig: in_channels must be >= 1");
    if (out_classes < 2) throw UsageError("AttentionDeeplabConfig: out_classes must be >= 2");
    if (encoder_channels.size() != 4) {
        throw UsageError("AttentionDeeplabConfig: encoder_channels needs 4 entries "
                         "(stem + three stride-2 stages)");
    }
    for (int c : encoder_channels) {
        if (c < 1) throw UsageError("AttentionDeeplabConfig: encoder channels must be >= 1");
    }
    if (aspp_rates.size() < 2) {
        throw UsageError("AttentionDeeplabConfig: need at least 2 aspp_rates");
    }
    for (std::size_t i = 0; i < aspp_rates.size(); ++i) {
        if (aspp_rates[i] < 1) throw UsageError("AttentionDeeplabConfig: rates must be >= 1");
        if (i > 0 && aspp_rates[i] <= aspp_rates[i - 1]) {
            throw UsageError("AttentionDeeplabConfig: rates must be strictly ascending");
        }
    }
    if (aspp_channels < 1) throw UsageError("AttentionDeeplabConfig: aspp_channels must be >= 1");
    if (attention_reduction < 1) {
        throw UsageError("AttentionDeeplabConfig: attention_reduction must be >= 1");
    }
    if (fusion_extent < 0 || fusion_extent > static_cast<int>(aspp_rates.size())) {
        throw UsageError("AttentionDeeplabConfig: fusion_extent must be in [0, #rates]");
    }
    if (fusion_spatial_kernel < 1 || fusion_spatial_kernel % 2 == 0) {
        throw UsageError("AttentionDeeplabConfig: fusion_spatial_kernel must be odd");
    }
    if (lowlevel_channels < 1 || decoder_channels < 1) {
        throw UsageError("AttentionDeeplabConfig: decoder channels must be >= 1");
    }
}

nlohmann::json AttentionDeeplabConfig::to_json() const {
    return {{"in_channels", in_channels},
            {"out_classes", out_classes},
            {"encoder_channels", encoder_channels},
            {"aspp_rates", aspp_rates},
            {"aspp_channels", aspp_channels},
            {"attention_reduction", attention_reduction},
            {"fusion_extent", fusion_extent},
            {"fusion_spatial_kernel", fusion_spatial_kernel},
            {"lowlevel_channels", lowlevel_channels},
            {"decoder_channels", decoder_channels}};
}

AttentionDeeplabConfig AttentionDeeplabConfig::from_json(const nlohmann::json& j) {
    AttentionDeeplabConfig c;
    c.in_channels = j.value("in_channels", c.in_channels);
    c.out_classes = j.value("out_classes", c.out_classes);
    c.encoder_channels = j.value("encoder_channels", c.encoder_channels);
    c.aspp_rates = j.value("aspp_rates", c.aspp_rates);
    c.aspp_channels = j.value("aspp_channels", c.aspp_channels);
    c.attention_reduction = j.value("attention_reduction", c.attention_reduction);
    c.fusion_extent = j.value("fusion_extent", c.fusion_extent);
    c.fusion_spatial_kernel = j.value("fusion_spatial_kernel", c.fusion_spatial_kernel);
    c.lowlevel_channels = j.value("lowlevel_channels", c.lowlevel_channels);
    c.decoder_channels = j.value("decoder_channels", c.decoder_channels);
    return c;
}

namespace detail {

ResBlock::ResBlock(int in_ch, int out_ch, int stride, Rng& rng)
    : c1(in_ch, out_ch, 3, stride, 1, 1, rng),
      c2(out_ch, out_ch, 3, 1, 1, 1, rng),
      use_proj(stride != 1 || in_ch != out_ch) {
    if (use_proj) proj = nn::Conv2dLayer(in_ch, out_ch, 1, stride, 0, 1, rng);
}

Var ResBlock::operator()(const Var& x) const {
    Var h = c2(nn::relu(c1(x)));
    Var shortcut = use_proj ? proj(x) : x;
    return nn::relu(nn::add(h, shortcut));
}

void ResBlock::collect(const std::string& prefix, std::vector<nn::NamedParam>& out) const {
    c1.collect(prefix + ".c1", out);
    c2.collect(prefix + ".c2", out);
    if (use_proj) proj.collect(prefix + ".proj", out);
}

CrossScaleFusion::CrossScaleFusion(int n_branches, int branch_channels, int out_channels,
                                   int extent_, int spatial_kernel, Rng& rng)
    : conv(extent_ * branch_channels, out_channels, spatial_kernel, 1, spatial_kernel / 2, 1,
           rng),
      extent(extent_) {
    if (extent_ < 1 || extent_ > n_branches) {
        throw UsageError("CrossScaleFusion: extent must be in [1, n_branches]");
    }
}

Var CrossScaleFusion::operator()(const std::vector<Var>& branches) const {
    if (branches.empty()) throw DataError("cross_scale_fusion: no branch maps");
    const nn::Tensor& first = branches.front()->value;
    for (const Var& b : branches) {
        if (b->value.shape != first.shape) {
            throw DataError("cross_scale_fusion: branch shapes differ");
        }
    }
    const int n = static_cast<int>(branches.size());
    if (extent > n) {
        throw DataError("cross_scale_fusion: kernel spans " + std::to_string(extent) +
                        " branches but only " + std::to_string(n) + " given");
    }
    const int positions = n - extent + 1;
    Var acc;
    for (int p = 0; p < positions; ++p) {
        std::vector<Var> window(branches.begin() + p, branches.begin() + p + extent);
        Var y = conv(nn::concat_channels(window));
        acc = p == 0 ? y : nn::add(acc, y);
    }
    return positions == 1 ? acc : nn::mul_scalar(acc, 1.0 / positions);
}

void CrossScaleFusion::collect(const std::string& prefix,
                               std::vector<nn::NamedParam>& out) const {
    conv.collect(prefix, out);
}

}  // namespace detail

AttentionDeeplab::AttentionDeeplab(const AttentionDeeplabConfig& config, Rng& rng)
    : config_(config) {
    config_.validate();
    const std::vector<int>& ec = config_.encoder_channels;
    stem_ = nn::Conv2dLayer(config_.in_channels, ec[0], 3, 1, 1, 1, rng);
    stage1_ = detail::ResBlock(ec[0], ec[1], 2, rng);
    stage2_ = detail::ResBlock(ec[1], ec[2], 2, rng);
    stage3_ = detail::ResBlock(ec[2], ec[3], 2, rng);

    const int n_rates = static_cast<int>(config_.aspp_rates.size());
    for (int rate : config_.aspp_rates) {
        aspp_.push_back(nn::Conv2dLayer(ec[3], config_.aspp_channels, 3, 1, rate, rate, rng));
        attention_.push_back(nn::ChannelAttention(config_.aspp_channels,
                                                  config_.attention_reduction, rng));
    }
    const int extent = config_.fusion_extent == 0 ? n_rates : config_.fusion_extent;
    fusion_ = detail::CrossScaleFusion(n_rates, config_.aspp_channels, config_.aspp_channels,
                                       extent, config_.fusion_spatial_kernel, rng);

    lowlevel_proj_ = nn::Conv2dLayer(ec[2], config_.lowlevel_channels, 1, 1, 0, 1, rng);
    dec1_ = nn::Conv2dLayer(config_.aspp_channels + config_.lowlevel_channels,
                            config_.decoder_channels, 3, 1, 1, 1, rng);
    dec2_ = nn::Conv2dLayer(config_.decoder_channels, config_.decoder_channels, 3, 1, 1, 1, rng);
    head_ = nn::Conv2dLayer(config_.decoder_channels, config_.out_classes, 1, 1, 0, 1, rng);
}

std::pair<Var, Var> AttentionDeeplab::encode(const Var& x) const {
    Var s = nn::relu(stem_(x));
    Var half = stage1_(s);
    Var low = stage2_(half);   // stride 4, the decoder's skip input
    Var high = stage3_(low);   // stride 8
    return {low, high};
}

std::vector<Var> AttentionDeeplab::aspp_forward(const Var& features) const {
    std::vector<Var> branches;
    branches.reserve(aspp_.size());
    for (const nn::Conv2dLayer& conv : aspp_) branches.push_back(nn::relu(conv(features)));
    return branches;
}

Var AttentionDeeplab::channel_attention(const Var& branch, int branch_index) const {
    if (branch_index < 0 || branch_index >= static_cast<int>(attention_.size())) {
        throw UsageError("channel_attention: branch index out of range");
    }
    return attention_[static_cast<std::size_t>(branch_index)](branch);
}

Var AttentionDeeplab::cross_scale_fusion(const std::vector<Var>& branches) const {
    return fusion_(branches);
}

Var AttentionDeeplab::decode(const Var& fused, const Var& lowlevel) const {
    Var x = nn::upsample_nearest(fused, 2);
    Var skip = nn::relu(lowlevel_proj_(lowlevel));
    Var d = nn::relu(dec1_(nn::concat_channels({x, skip})));
    d = nn::relu(dec2_(d));
    return head_(nn::upsample_nearest(d, 4));
}

Var AttentionDeeplab::forward(const Var& x) const {
    const nn::Tensor& v = x->value;
    if (v.ndim() != 4 || v.dim(1) != config_.in_channels) {
        throw DataError("AttentionDeeplab: expected (B," + std::to_string(config_.in_channels) +
                        ",H,W) input");
    }
    if (v.dim(2) % 8 != 0) {
        throw DataError("AttentionDeeplab: input height " + std::to_string(v.dim(2)) +
                        " not divisible by 8");
    }
    if (v.dim(3) % 8 != 0) {
        throw DataError("AttentionDeeplab: input width " + std::to_string(v.dim(3)) +
                        " not divisible by 8");
    }
    auto [low, high] = encode(x);
    std::vector<Var> branches = aspp_forward(high);
    for (std::size_t i = 0; i < branches.size(); ++i) {
        branches[i] = attention_[i](branches[i]);
    }
    Var fused = nn::relu(fusion_(branches));
    return decode(fused, low);
}

std::vector<nn::NamedParam> AttentionDeeplab::named_params() const {
    std::vector<nn::NamedParam> out;
    stem_.collect("stem", out);
    stage1_.collect("stage1", out);
    stage2_.collect("stage2", out);
    stage3_.collect("stage3", out);
    for (std::size_t i = 0; i < aspp_.size(); ++i) {
        aspp_[i].collect("aspp" + std::to_string(i), out);
        attention_[i].collect("attn" + std::to_string(i), out);
    }
    fusion_.collect("fusion", out);
    lowlevel_proj_.collect("lowlevel_proj", out);
    dec1_.collect("dec1", out);
    dec2_.collect("dec2", out);
    head_.collect("head", out);
    return out;
}

std::vector<Var> AttentionDeeplab::params() const {
    std::vector<Var> out;
    for (const nn::NamedParam& p : named_params()) out.push_back(p.var);
    return out;
}

namespace {

// All channels but the last hold [0,255] intensities; the final channel is the
// binary nucleus plane and passes through unscaled.
nn::Tensor patch_to_chw(const ImageBuffer& crop) {
    nn::Tensor t = nn::image_to_chw(crop, 1.0);
    const long plane = static_cast<long>(crop.height()) * crop.width();
    const long image_part = static_cast<long>(crop.channels() - 1) * plane;
    for (long i = 0; i < image_part; ++i) t.data[static_cast<std::size_t>(i)] /= 255.0;
    return t;
}

}  // namespace

nn::Tensor cytoplasm_forward(const AttentionDeeplab& model, const ImageBuffer& crop) {
    if (crop.channels() != model.config().in_channels) {
        throw DataError("cytoplasm_forward: crop has " + std::to_string(crop.channels()) +
                        " channels, model expects " +
                        std::to_string(model.config().in_channels));
    }
    nn::NoGradGuard no_grad;
    nn::Tensor in = patch_to_chw(crop);
    in.shape = {1, crop.channels(), crop.height(), crop.width()};
    nn::Tensor out = model.forward(nn::make_input(std::move(in)))->value;
    out.shape = {out.dim(1), out.dim(2), out.dim(3)};
    return out;
}

ImageBuffer predict_cytoplasm_mask(const AttentionDeeplab& model, const ImageBuffer& crop) {
    nn::Tensor probs = nn::softmax_channels(cytoplasm_forward(model, crop));
    const int h = crop.height(), w = crop.width();
    ImageBuffer out(h, w, 1);
    const double* fg = probs.ptr() + static_cast<std::size_t>(h) * w;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            out.at(r, c) = fg[static_cast<std::size_t>(r) * w + c] >= 0.5 ? 1.0f : 0.0f;
        }
    }
    return out;
}

CytoplasmTraining train_cytoplasm_scale(const std::vector<DatasetRecord>& records, double scale,
                                        const nn::TrainSpec& spec,
                                        const AttentionDeeplabConfig& config, int input_side,
                                        double margin_factor) {
    spec.validate();
    config.validate();
    if (scale <= 0.0) throw UsageError("train_cytoplasm_scale: scale must be positive");
    if (input_side < 8 || input_side % 8 != 0) {
        throw UsageError("train_cytoplasm_scale: input_side must be a positive multiple of 8");
    }

    std::vector<nn::TrainSample> samples;
    for (const DatasetRecord& rec : records) {
        for (std::size_t k = 0; k < rec.gt_instances.size(); ++k) {
            const GtInstance& gt = rec.gt_instances[k];
            CellInstance inst = CellInstance::from_mask(static_cast<int>(k), gt.nucleus_mask);
            CropWindow window = compute_crop_window(inst, scale, margin_factor);
            ImageBuffer target = crop_mask_patch(gt.cytoplasm_mask, window, input_side);
            if (count_nonzero(target) == 0) continue;  // cytoplasm fell outside the window
            ImageBuffer patch = extract_crop(rec.image, inst.mask, window, input_side);
            nn::TrainSample s;
            s.input = patch_to_chw(patch);
            s.target = nn::mask_to_labels(target);
            samples.push_back(std::move(s));
        }
    }
    if (samples.empty()) {
        throw DataError("train_cytoplasm_scale: no usable patches at scale " +
                        std::to_string(scale));
    }

    Rng rng(spec.rng_seed);
    AttentionDeeplab model(config, rng);
    std::vector<double> history = nn::run_training(
        samples, spec, model.params(), [&model](const Var& batch) { return model.forward(batch); },
        rng);
    return {std::move(model), std::move(history), static_cast<int>(samples.size())};
}

}  // namespace cellseg
