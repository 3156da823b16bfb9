#include "cellseg/instance_ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "cellseg/errors.hpp"

namespace cellseg {

namespace {

int round_to_even(double x) {
    return 2 * static_cast<int>(std::lround(x / 2.0));
}

}  // namespace

std::vector<CellInstance> extract_nucleus_instances(const ImageBuffer& prob_map, double threshold,
                                                    long min_area) {
    if (prob_map.channels() != 1) {
        throw DataError("extract_nucleus_instances: probability map must have 1 channel, got " +
                        std::to_string(prob_map.channels()));
    }
    const int h = prob_map.height(), w = prob_map.width();
    std::vector<int> label(static_cast<std::size_t>(h) * w, -1);
    auto fg = [&](int r, int c) { return prob_map.at(r, c) >= static_cast<float>(threshold); };

    struct Component {
        long area = 0;
        long first_pixel = 0;  // row-major index of discovery, for deterministic ties
        std::vector<int> pixels;
    };
    std::vector<Component> comps;
    std::vector<int> stack;

    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            int idx = r * w + c;
            if (label[idx] != -1 || !fg(r, c)) continue;
            int comp_id = static_cast<int>(comps.size());
            Component comp;
            comp.first_pixel = idx;
            label[idx] = comp_id;
            stack.assign(1, idx);
            while (!stack.empty()) {
                int cur = stack.back();
                stack.pop_back();
                comp.pixels.push_back(cur);
                int cr = cur / w, cc = cur % w;
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        if (dr == 0 && dc == 0) continue;
                        int nr = cr + dr, nc = cc + dc;
                        if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
                        int nidx = nr * w + nc;
                        if (label[nidx] == -1 && fg(nr, nc)) {
                            label[nidx] = comp_id;
                            stack.push_back(nidx);
                        }
                    }
                }
            }
            comp.area = static_cast<long>(comp.pixels.size());
            comps.push_back(std::move(comp));
        }
    }

    std::vector<int> order;
    for (int i = 0; i < static_cast<int>(comps.size()); ++i) {
        if (comps[i].area >= min_area) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (comps[a].area != comps[b].area) return comps[a].area > comps[b].area;
        return comps[a].first_pixel < comps[b].first_pixel;
    });

    std::vector<CellInstance> result;
    result.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        ImageBuffer mask(h, w, 1);
        for (int px : comps[order[i]].pixels) mask.data()[px] = 1.0f;
        result.push_back(CellInstance::from_mask(static_cast<int>(i), std::move(mask)));
    }
    return result;
}

CropWindow compute_crop_window(const CellInstance& instance, double scale, double margin_factor) {
    if (scale <= 0.0) throw DataError("compute_crop_window: scale must be positive");
    CropWindow win;
    win.origin_bbox = instance.bbox;
    win.scale = scale;
    win.center_row = instance.bbox.center_row();
    win.center_col = instance.bbox.center_col();
    int max_dim = std::max(instance.bbox.height(), instance.bbox.width());
    win.side = std::max(2, round_to_even(scale * margin_factor * max_dim));
    return win;
}

ImageBuffer equalize_histogram(const ImageBuffer& image) {
    if (image.channels() != 1 && image.channels() != 3) {
        throw DataError("equalize_histogram supports 1 or 3 channels, got " +
                        std::to_string(image.channels()));
    }
    ImageBuffer out = image;
    const long n = static_cast<long>(image.height()) * image.width();
    for (int ch = 0; ch < image.channels(); ++ch) {
        std::array<long, 256> hist{};
        for (int r = 0; r < image.height(); ++r) {
            for (int c = 0; c < image.width(); ++c) {
                int v = static_cast<int>(std::lround(image.at(r, c, ch)));
                v = std::clamp(v, 0, 255);
                ++hist[v];
            }
        }
        std::array<long, 256> cdf{};
        long running = 0;
        long cdf_min = 0;
        bool seen = false;
        for (int v = 0; v < 256; ++v) {
            running += hist[v];
            cdf[v] = running;
            if (!seen && hist[v] > 0) {
                cdf_min = running;
                seen = true;
            }
        }
        if (n == cdf_min) continue;  // constant channel: remap undefined, keep as-is

        std::array<float, 256> remap{};
        for (int v = 0; v < 256; ++v) {
            remap[v] = static_cast<float>(
                std::lround(255.0 * static_cast<double>(cdf[v] - cdf_min) /
                            static_cast<double>(n - cdf_min)));
        }
        for (int r = 0; r < image.height(); ++r) {
            for (int c = 0; c < image.width(); ++c) {
                int v = std::clamp(static_cast<int>(std::lround(image.at(r, c, ch))), 0, 255);
                out.at(r, c, ch) = remap[v];
            }
        }
    }
    return out;
}

ImageBuffer resize_bilinear(const ImageBuffer& src, int out_h, int out_w) {
    ImageBuffer out(out_h, out_w, src.channels());
    const double sr = static_cast<double>(src.height()) / out_h;
    const double sc = static_cast<double>(src.width()) / out_w;
    for (int r = 0; r < out_h; ++r) {
        double fr = (r + 0.5) * sr - 0.5;
        int r0 = static_cast<int>(std::floor(fr));
        double wr = fr - r0;
        int ra = std::clamp(r0, 0, src.height() - 1);
        int rb = std::clamp(r0 + 1, 0, src.height() - 1);
        for (int c = 0; c < out_w; ++c) {
            double fc = (c + 0.5) * sc - 0.5;
            int c0 = static_cast<int>(std::floor(fc));
            double wc = fc - c0;
            int ca = std::clamp(c0, 0, src.width() - 1);
            int cb = std::clamp(c0 + 1, 0, src.width() - 1);
            for (int ch = 0; ch < src.channels(); ++ch) {
                double top = src.at(ra, ca, ch) * (1.0 - wc) + src.at(ra, cb, ch) * wc;
                double bot = src.at(rb, ca, ch) * (1.0 - wc) + src.at(rb, cb, ch) * wc;
                out.at(r, c, ch) = static_cast<float>(top * (1.0 - wr) + bot * wr);
            }
        }
    }
    return out;
}

ImageBuffer resize_nearest(const ImageBuffer& src, int out_h, int out_w) {
    ImageBuffer out(out_h, out_w, src.channels());
    const double sr = static_cast<double>(src.height()) / out_h;
    const double sc = static_cast<double>(src.width()) / out_w;
    for (int r = 0; r < out_h; ++r) {
        int sr_i = std::min(static_cast<int>((r + 0.5) * sr), src.height() - 1);
        for (int c = 0; c < out_w; ++c) {
            int sc_i = std::min(static_cast<int>((c + 0.5) * sc), src.width() - 1);
            for (int ch = 0; ch < src.channels(); ++ch) {
                out.at(r, c, ch) = src.at(sr_i, sc_i, ch);
            }
        }
    }
    return out;
}

namespace {

// Copies the window region out of `src`, zero-padding where the window leaves
// the image.
ImageBuffer crop_padded(const ImageBuffer& src, const CropWindow& window) {
    ImageBuffer out(window.side, window.side, src.channels());
    const int r0 = window.row0(), c0 = window.col0();
    for (int r = 0; r < window.side; ++r) {
        int sr = r0 + r;
        if (sr < 0 || sr >= src.height()) continue;
        for (int c = 0; c < window.side; ++c) {
            int sc = c0 + c;
            if (sc < 0 || sc >= src.width()) continue;
            for (int ch = 0; ch < src.channels(); ++ch) {
                out.at(r, c, ch) = src.at(sr, sc, ch);
            }
        }
    }
    return out;
}

}  // namespace

ImageBuffer crop_mask_patch(const ImageBuffer& mask, const CropWindow& window, int out_side) {
    if (window.side < 2) throw DataError("crop_mask_patch: degenerate window (side < 2)");
    return resize_nearest(crop_padded(mask, window), out_side, out_side);
}

ImageBuffer extract_crop(const ImageBuffer& image, const ImageBuffer& nucleus_mask,
                         const CropWindow& window, int out_side) {
    if (image.channels() != 3) {
        throw DataError("extract_crop: image must be RGB, got " +
                        std::to_string(image.channels()) + " channels");
    }
    if (nucleus_mask.channels() != 1 || nucleus_mask.height() != image.height() ||
        nucleus_mask.width() != image.width()) {
        throw DataError("extract_crop: nucleus mask must be 1-channel and match the image size");
    }
    if (window.side < 2) throw DataError("extract_crop: degenerate window (side < 2)");

    ImageBuffer rgb = resize_bilinear(crop_padded(equalize_histogram(image), window), out_side,
                                      out_side);
    ImageBuffer msk = crop_mask_patch(nucleus_mask, window, out_side);

    ImageBuffer out(out_side, out_side, 4);
    for (int r = 0; r < out_side; ++r) {
        for (int c = 0; c < out_side; ++c) {
            for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = rgb.at(r, c, ch);
            out.at(r, c, 3) = msk.at(r, c);
        }
    }
    return out;
}

ImageBuffer paste_to_canvas(const ImageBuffer& crop_mask, const CropWindow& window, int image_h,
                            int image_w) {
    if (crop_mask.channels() != 1 || crop_mask.height() != crop_mask.width()) {
        throw DataError("paste_to_canvas: crop mask must be square and 1-channel");
    }
    ImageBuffer sized = resize_nearest(crop_mask, window.side, window.side);
    ImageBuffer canvas(image_h, image_w, 1);
    const int r0 = window.row0(), c0 = window.col0();
    for (int r = 0; r < window.side; ++r) {
        int dr = r0 + r;
        if (dr < 0 || dr >= image_h) continue;
        for (int c = 0; c < window.side; ++c) {
            int dc = c0 + c;
            if (dc < 0 || dc >= image_w) continue;
            canvas.at(dr, dc) = sized.at(r, c) != 0.0f ? 1.0f : 0.0f;
        }
    }
    return canvas;
}

}  // namespace cellseg
