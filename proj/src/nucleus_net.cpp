#include "cellseg/nucleus_net.hpp"

#include <cmath>
#include <string>

#include "cellseg/errors.hpp"
#include "cellseg/nn/convert.hpp"

namespace cellseg {

using nn::Var;

void UNetConfig::validate() const {
    if (depth < 1 || depth > 8) throw UsageError("UNetConfig: depth must be in [1,8]");
    if (base_channels < 1) throw UsageError("UNetConfig: base_channels must be >= 1");
    if (in_channels < 1 || out_classes < 2) {
        throw UsageError("UNetConfig: need >= 1 input channel and >= 2 classes");
    }
}

nlohmann::json UNetConfig::to_json() const {
    return {{"depth", depth},
            {"base_channels", base_channels},
            {"in_channels", in_channels},
            {"out_classes", out_classes}};
}

UNetConfig UNetConfig::from_json(const nlohmann::json& j) {
    UNetConfig c;
    c.depth = j.value("depth", c.depth);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.in_channels = j.value("in_channels", c.in_channels);
    c.out_classes = j.value("out_classes", c.out_classes);
    return c;
}

Var UNet::ConvBlock::operator()(const Var& x) const { return nn::relu(c2(nn::relu(c1(x)))); }

UNet::UNet(const UNetConfig& config, Rng& rng) : config_(config) {
    config_.validate();
    int ch_in = config_.in_channels;
    for (int level = 0; level < config_.depth; ++level) {
        int ch = config_.base_channels << level;
        encoder_.push_back({nn::Conv2dLayer(ch_in, ch, 3, 1, 1, 1, rng),
                            nn::Conv2dLayer(ch, ch, 3, 1, 1, 1, rng)});
        ch_in = ch;
    }
    int bottleneck_ch = config_.base_channels << config_.depth;
    bottleneck_ = {nn::Conv2dLayer(ch_in, bottleneck_ch, 3, 1, 1, 1, rng),
                   nn::Conv2dLayer(bottleneck_ch, bottleneck_ch, 3, 1, 1, 1, rng)};
    for (int level = config_.depth - 1; level >= 0; --level) {
        int ch = config_.base_channels << level;
        up_.push_back(nn::Conv2dLayer(ch * 2, ch, 3, 1, 1, 1, rng));
        decoder_.push_back({nn::Conv2dLayer(ch * 2, ch, 3, 1, 1, 1, rng),
                            nn::Conv2dLayer(ch, ch, 3, 1, 1, 1, rng)});
    }
    head_ = nn::Conv2dLayer(config_.base_channels, config_.out_classes, 1, 1, 0, 1, rng);
}

Var UNet::forward(const Var& x) const {
    const nn::Tensor& v = x->value;
    if (v.ndim() != 4 || v.dim(1) != config_.in_channels) {
        throw DataError("UNet: expected (B," + std::to_string(config_.in_channels) +
                        ",H,W) input");
    }
    const int divisor = 1 << config_.depth;
    if (v.dim(2) % divisor != 0) {
        throw DataError("UNet: input height " + std::to_string(v.dim(2)) +
                        " not divisible by " + std::to_string(divisor));
    }
    if (v.dim(3) % divisor != 0) {
        throw DataError("UNet: input width " + std::to_string(v.dim(3)) + " not divisible by " +
                        std::to_string(divisor));
    }

    std::vector<Var> skips;
    Var cur = x;
    for (int level = 0; level < config_.depth; ++level) {
        cur = encoder_[static_cast<std::size_t>(level)](cur);
        skips.push_back(cur);
        cur = nn::maxpool2(cur);
    }
    cur = bottleneck_(cur);
    for (int i = 0; i < config_.depth; ++i) {
        cur = nn::relu(up_[static_cast<std::size_t>(i)](nn::upsample_nearest(cur, 2)));
        cur = nn::concat_channels({skips[static_cast<std::size_t>(config_.depth - 1 - i)], cur});
        cur = decoder_[static_cast<std::size_t>(i)](cur);
    }
    return head_(cur);
}

std::vector<nn::NamedParam> UNet::named_params() const {
    std::vector<nn::NamedParam> out;
    for (std::size_t i = 0; i < encoder_.size(); ++i) {
        encoder_[i].c1.collect("enc" + std::to_string(i) + ".c1", out);
        encoder_[i].c2.collect("enc" + std::to_string(i) + ".c2", out);
    }
    bottleneck_.c1.collect("bottleneck.c1", out);
    bottleneck_.c2.collect("bottleneck.c2", out);
    for (std::size_t i = 0; i < up_.size(); ++i) {
        up_[i].collect("up" + std::to_string(i), out);
        decoder_[i].c1.collect("dec" + std::to_string(i) + ".c1", out);
        decoder_[i].c2.collect("dec" + std::to_string(i) + ".c2", out);
    }
    head_.collect("head", out);
    return out;
}

std::vector<Var> UNet::params() const {
    std::vector<Var> out;
    for (const nn::NamedParam& p : named_params()) out.push_back(p.var);
    return out;
}

nn::Tensor nucleus_forward(const UNet& model, const ImageBuffer& image) {
    nn::NoGradGuard no_grad;
    nn::Tensor in = nn::image_to_chw(image, 1.0 / 255.0);
    in.shape = {1, image.channels(), image.height(), image.width()};
    nn::Tensor out = model.forward(nn::make_input(std::move(in)))->value;
    out.shape = {out.dim(1), out.dim(2), out.dim(3)};
    return out;
}

namespace {

// Mirror an index into [0, n-1] without repeating the edge sample.
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    int period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

}  // namespace

ImageBuffer predict_nucleus(const UNet& model, const ImageBuffer& image) {
    const int divisor = 1 << model.config().depth;
    const int ph = (image.height() + divisor - 1) / divisor * divisor;
    const int pw = (image.width() + divisor - 1) / divisor * divisor;

    ImageBuffer padded(ph, pw, image.channels());
    for (int r = 0; r < ph; ++r) {
        int sr = reflect_index(r, image.height());
        for (int c = 0; c < pw; ++c) {
            int sc = reflect_index(c, image.width());
            for (int ch = 0; ch < image.channels(); ++ch) {
                padded.at(r, c, ch) = image.at(sr, sc, ch);
            }
        }
    }

    nn::Tensor logits = nucleus_forward(model, padded);
    nn::Tensor probs = nn::softmax_channels(logits);
    ImageBuffer full = nn::plane_to_image(probs, 1, ph, pw);

    ImageBuffer out(image.height(), image.width(), 1);
    for (int r = 0; r < image.height(); ++r) {
        for (int c = 0; c < image.width(); ++c) out.at(r, c) = full.at(r, c);
    }
    return out;
}

NucleusTraining train_nucleus(const std::vector<DatasetRecord>& records,
                              const nn::TrainSpec& spec, const UNetConfig& config) {
    spec.validate();
    config.validate();

    std::vector<nn::TrainSample> samples;
    for (const DatasetRecord& rec : records) {
        if (rec.gt_instances.empty()) continue;
        ImageBuffer target(rec.image.height(), rec.image.width(), 1);
        for (const GtInstance& inst : rec.gt_instances) {
            target = mask_or(target, inst.nucleus_mask);
        }
        nn::TrainSample s;
        s.input = nn::image_to_chw(rec.image, 1.0 / 255.0);
        s.target = nn::mask_to_labels(target);
        samples.push_back(std::move(s));
    }
    if (samples.empty()) {
        throw DataError("train_nucleus: no records with nucleus instances");
    }

    Rng rng(spec.rng_seed);
    UNet model(config, rng);
    std::vector<double> history = nn::run_training(
        samples, spec, model.params(), [&model](const Var& batch) { return model.forward(batch); },
        rng);
    return {std::move(model), std::move(history)};
}

}  // namespace cellseg
