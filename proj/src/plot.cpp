#include "cellseg/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "cellseg/png_io.hpp"

namespace cellseg {

namespace {

constexpr int kWidth = 720, kHeight = 420;
constexpr int kLeft = 46, kRight = 16, kTop = 16, kBottom = 38;

struct Color {
    float r, g, b;
};
constexpr Color kBar{86.0f, 188.0f, 125.0f};
constexpr Color kAxis{60.0f, 60.0f, 60.0f};
constexpr Color kPeak{30.0f, 120.0f, 40.0f};
constexpr Color kScale{205.0f, 40.0f, 40.0f};
constexpr Color kText{40.0f, 40.0f, 40.0f};

void put(ImageBuffer& img, int r, int c, Color col) {
    if (!img.in_bounds(r, c)) return;
    img.at(r, c, 0) = col.r;
    img.at(r, c, 1) = col.g;
    img.at(r, c, 2) = col.b;
}

void vline(ImageBuffer& img, int c, int r0, int r1, Color col) {
    for (int r = r0; r <= r1; ++r) put(img, r, c, col);
}

void hline(ImageBuffer& img, int r, int c0, int c1, Color col) {
    for (int c = c0; c <= c1; ++c) put(img, r, c, col);
}

// 3x5 digit glyphs, rows top to bottom, 3 bits per row.
constexpr std::uint16_t kGlyphs[10] = {
    0b111101101101111,  // 0
    0b010110010010111,  // 1
    0b111001111100111,  // 2
    0b111001111001111,  // 3
    0b101101111001001,  // 4
    0b111100111001111,  // 5
    0b111100111101111,  // 6
    0b111001010010010,  // 7
    0b111101111101111,  // 8
    0b111101111001111,  // 9
};

void draw_digit(ImageBuffer& img, int r, int c, int digit, Color col) {
    std::uint16_t bits = kGlyphs[digit];
    for (int row = 0; row < 5; ++row) {
        for (int colb = 0; colb < 3; ++colb) {
            int shift = (4 - row) * 3 + (2 - colb);
            if ((bits >> shift) & 1u) put(img, r + row, c + colb, col);
        }
    }
}

void draw_number(ImageBuffer& img, int r, int c, long value, Color col) {
    std::string text = std::to_string(value);
    for (char ch : text) {
        draw_digit(img, r, c, ch - '0', col);
        c += 4;
    }
}

}  // namespace

void plot_ratio_histogram(const RatioHistogram& hist, const std::vector<double>& peaks,
                          const std::vector<double>& scales,
                          const std::filesystem::path& path) {
    ImageBuffer img(kHeight, kWidth, 3, 255.0f);
    const int plot_w = kWidth - kLeft - kRight;
    const int plot_h = kHeight - kTop - kBottom;
    const int base_r = kTop + plot_h;

    const int n = static_cast<int>(hist.counts.size());
    const double x_max = std::max(1e-9, n * hist.bin_width);
    long y_max = 1;
    for (long c : hist.counts) y_max = std::max(y_max, c);

    auto to_col = [&](double x) {
        return kLeft + static_cast<int>(std::lround(x / x_max * plot_w));
    };

    for (int i = 0; i < n; ++i) {
        int c0 = to_col(i * hist.bin_width);
        int c1 = to_col((i + 1) * hist.bin_width) - 1;
        int h = static_cast<int>(std::lround(static_cast<double>(hist.counts[static_cast<std::size_t>(i)]) /
                                             static_cast<double>(y_max) * plot_h));
        for (int c = c0; c <= std::max(c0, c1); ++c) {
            vline(img, c, base_r - h, base_r - 1, kBar);
        }
    }

    for (double p : peaks) {
        if (p < 0.0 || p > x_max) continue;
        vline(img, to_col(p), kTop, base_r, kPeak);
    }
    for (double s : scales) {
        double covered = s * s - 1.0;
        if (covered < 0.0 || covered > x_max) continue;
        int c = to_col(covered);
        vline(img, c, kTop, base_r, kScale);
        vline(img, c + 1, kTop, base_r, kScale);
    }

    hline(img, base_r, kLeft, kLeft + plot_w, kAxis);
    vline(img, kLeft, kTop, base_r, kAxis);

    long tick_step = std::max(1L, static_cast<long>(std::lround(x_max / 10.0)));
    for (long t = 0; t <= static_cast<long>(x_max); t += tick_step) {
        int c = to_col(static_cast<double>(t));
        vline(img, c, base_r, base_r + 4, kAxis);
        draw_number(img, base_r + 8, c - 1, t, kText);
    }
    vline(img, kLeft - 4, kTop, kTop, kAxis);
    hline(img, kTop, kLeft - 4, kLeft, kAxis);
    draw_number(img, kTop - 2, 4, y_max, kText);
    hline(img, base_r, kLeft - 4, kLeft, kAxis);
    draw_number(img, base_r - 6, 4, 0, kText);

    write_png(path, img);
}

}  // namespace cellseg
