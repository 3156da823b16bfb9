#include "cellseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "cellseg/errors.hpp"

namespace cellseg {

void RatioMixture::validate() const {
    if (means.empty()) throw UsageError("RatioMixture: no components");
    if (stddevs.size() != means.size() || weights.size() != means.size()) {
        throw UsageError("RatioMixture: means/stddevs/weights lengths differ");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) {
        if (means[i] <= 1.0) throw UsageError("RatioMixture: means must be > 1.0");
        if (stddevs[i] < 0.0) throw UsageError("RatioMixture: stddevs must be >= 0");
        if (weights[i] < 0.0) throw UsageError("RatioMixture: weights must be >= 0");
        total += weights[i];
    }
    if (std::abs(total - 1.0) > 1e-6) throw UsageError("RatioMixture: weights must sum to 1");
}

double RatioMixture::sample(Rng& rng) const {
    double u = rng.uniform();
    std::size_t pick = means.size() - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) {
            pick = i;
            break;
        }
    }
    return means[pick] + stddevs[pick] * rng.normal();
}

void SyntheticSceneSpec::validate() const {
    if (image_side < 16) throw UsageError("SyntheticSceneSpec: image_side must be >= 16");
    if (n_cells < 0) throw UsageError("SyntheticSceneSpec: n_cells must be >= 0");
    if (overlap_probability < 0.0 || overlap_probability > 1.0) {
        throw UsageError("SyntheticSceneSpec: overlap_probability must be in [0,1]");
    }
    if (n_cells > 0) ratio_distribution.validate();
}

namespace {

struct CellShape {
    double center_r = 0.0, center_c = 0.0;
    double axis_a = 0.0, axis_b = 0.0;  // nucleus semi-axes
    double theta = 0.0;                 // nucleus rotation
    double cyto_theta = 0.0;            // cytoplasm field rotation
    double stretch_a = 1.0, stretch_b = 1.0;
    double harm_amp[3] = {0.0, 0.0, 0.0};  // harmonics k = 2, 3, 5
    double harm_phase[3] = {0.0, 0.0, 0.0};
};

// Elliptical norm of (r,c) relative to the nucleus: <= 1 inside.
double nucleus_norm(const CellShape& s, double r, double c) {
    double dr = r - s.center_r, dc = c - s.center_c;
    double u = dr * std::cos(s.theta) + dc * std::sin(s.theta);
    double v = -dr * std::sin(s.theta) + dc * std::cos(s.theta);
    double nu = u / s.axis_a, nv = v / s.axis_b;
    return std::sqrt(nu * nu + nv * nv);
}

// Anisotropic distance for the cytoplasm field, shrunk by the angular harmonic
// modulation so the blob grows irregular lobes instead of staying elliptical.
double cyto_score(const CellShape& s, double r, double c) {
    double dr = r - s.center_r, dc = c - s.center_c;
    double u = dr * std::cos(s.cyto_theta) + dc * std::sin(s.cyto_theta);
    double v = -dr * std::sin(s.cyto_theta) + dc * std::cos(s.cyto_theta);
    double nu = u / (s.axis_a * s.stretch_a), nv = v / (s.axis_b * s.stretch_b);
    double d = std::sqrt(nu * nu + nv * nv);
    double phi = std::atan2(v, u);
    static const double ks[3] = {2.0, 3.0, 5.0};
    double mod = 1.0;
    for (int i = 0; i < 3; ++i) mod += s.harm_amp[i] * std::cos(ks[i] * phi + s.harm_phase[i]);
    return d / std::max(0.3, mod);
}

// Chebyshev-disc dilation; small radii only.
ImageBuffer dilate(const ImageBuffer& mask, int radius) {
    ImageBuffer out(mask.height(), mask.width(), 1);
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            if (mask.at(r, c) == 0.0f) continue;
            for (int dr = -radius; dr <= radius; ++dr) {
                for (int dc = -radius; dc <= radius; ++dc) {
                    int rr = r + dr, cc = c + dc;
                    if (mask.in_bounds(rr, cc)) out.at(rr, cc) = 1.0f;
                }
            }
        }
    }
    return out;
}

struct PlacedCell {
    ImageBuffer nucleus;  // {0,1}
    ImageBuffer cyto;     // {0,1}, disjoint from nucleus
    CellShape shape;
};

ImageBuffer textured_background(int side, Rng& rng) {
    ImageBuffer img(side, side, 3);
    const double base[3] = {234.0, 216.0, 226.0};  // pale pink smear
    double freq_r[3], freq_c[3], phase[3], amp[3];
    for (int ch = 0; ch < 3; ++ch) {
        freq_r[ch] = rng.uniform(0.02, 0.08);
        freq_c[ch] = rng.uniform(0.02, 0.08);
        phase[ch] = rng.uniform(0.0, 6.283);
        amp[ch] = rng.uniform(3.0, 7.0);
    }
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                double v = base[ch] + amp[ch] * std::sin(freq_r[ch] * r + freq_c[ch] * c +
                                                         phase[ch]) +
                           rng.uniform(-5.0, 5.0);
                img.at(r, c, ch) = static_cast<float>(std::clamp(v, 0.0, 255.0));
            }
        }
    }
    return img;
}

}  // namespace

DatasetRecord generate_synthetic_scene(const SyntheticSceneSpec& spec,
                                       const std::string& sample_id) {
    spec.validate();
    Rng rng(spec.rng_seed);
    const int side = spec.image_side;

    ImageBuffer image = textured_background(side, rng);
    DatasetRecord record;
    record.sample_id = sample_id;

    std::vector<PlacedCell> cells;
    ImageBuffer nuclei_gap(side, side, 1);    // existing nuclei dilated by 2
    ImageBuffer region_union(side, side, 1);  // all placed nucleus+cyto pixels

    const int attempts_per_cell = 220;
    for (int cell = 0; cell < spec.n_cells; ++cell) {
        double ratio = std::max(0.1, spec.ratio_distribution.sample(rng));
        bool allow_overlap = rng.uniform() < spec.overlap_probability;

        bool placed = false;
        CellShape shape;
        for (int attempt = 0; attempt < attempts_per_cell && !placed; ++attempt) {
            if (attempt % 25 == 0) {  // fresh geometry every few failed placements
                shape.axis_a = rng.uniform(3.4, 5.2);
                shape.axis_b = rng.uniform(3.4, 5.2);
                shape.theta = rng.uniform(0.0, 3.1416);
                shape.cyto_theta = shape.theta + rng.uniform(-0.4, 0.4);
                shape.stretch_a = rng.uniform(1.0, 1.6);
                shape.stretch_b = rng.uniform(1.0, 1.6);
                for (int k = 0; k < 3; ++k) {
                    shape.harm_amp[k] = rng.uniform(0.0, 0.18);
                    shape.harm_phase[k] = rng.uniform(0.0, 6.283);
                }
            }
            double nominal = shape.axis_a * shape.axis_b;
            int reach = static_cast<int>(
                std::ceil(std::sqrt((1.0 + ratio) * nominal / 3.1416) * 2.6 + 5.0));
            int lo = 1 + reach, hi = side - 2 - reach;
            if (lo > hi) continue;  // cell cannot fit at all; retry may shrink axes
            shape.center_r = static_cast<double>(rng.uniform_int(lo, hi));
            shape.center_c = static_cast<double>(rng.uniform_int(lo, hi));

            // Rasterize the nucleus and check it is big enough and clear of
            // the already placed ones.
            ImageBuffer nucleus(side, side, 1);
            long n_area = 0;
            bool clear = true;
            for (int r = static_cast<int>(shape.center_r) - reach;
                 r <= static_cast<int>(shape.center_r) + reach && clear; ++r) {
                for (int c = static_cast<int>(shape.center_c) - reach;
                     c <= static_cast<int>(shape.center_c) + reach; ++c) {
                    if (nucleus_norm(shape, r, c) > 1.0) continue;
                    if (nuclei_gap.at(r, c) != 0.0f ||
                        (!allow_overlap && region_union.at(r, c) != 0.0f)) {
                        clear = false;
                        break;
                    }
                    nucleus.at(r, c) = 1.0f;
                    ++n_area;
                }
            }
            if (!clear || n_area < 36) continue;

            // Candidate ring pixels sorted by field score; take exactly
            // round(ratio * nucleus area) of them for the cytoplasm.
            long target = std::lround(ratio * static_cast<double>(n_area));
            std::vector<std::pair<double, int>> candidates;
            for (int r = static_cast<int>(shape.center_r) - reach;
                 r <= static_cast<int>(shape.center_r) + reach; ++r) {
                for (int c = static_cast<int>(shape.center_c) - reach;
                     c <= static_cast<int>(shape.center_c) + reach; ++c) {
                    if (nucleus.at(r, c) != 0.0f) continue;
                    candidates.emplace_back(cyto_score(shape, r, c), r * side + c);
                }
            }
            if (static_cast<long>(candidates.size()) < target) continue;
            std::nth_element(candidates.begin(), candidates.begin() + target,
                             candidates.end());
            candidates.resize(static_cast<std::size_t>(target));

            ImageBuffer cyto(side, side, 1);
            bool conflict = false;
            for (const auto& [score, idx] : candidates) {
                int r = idx / side, c = idx % side;
                if (nuclei_gap.at(r, c) != 0.0f ||
                    (!allow_overlap && region_union.at(r, c) != 0.0f)) {
                    conflict = true;
                    break;
                }
                cyto.at(r, c) = 1.0f;
            }
            if (conflict) continue;

            PlacedCell pc{std::move(nucleus), std::move(cyto), shape};
            nuclei_gap = mask_or(nuclei_gap, dilate(pc.nucleus, 2));
            region_union = mask_or(region_union, mask_or(pc.nucleus, pc.cyto));
            cells.push_back(std::move(pc));
            placed = true;
        }
        if (!placed) {
            throw DataError("generate_synthetic_scene: could not place cell " +
                            std::to_string(cell + 1) + " of " + std::to_string(spec.n_cells) +
                            " in a " + std::to_string(side) + "x" + std::to_string(side) +
                            " image");
        }
    }

    // Later cells occlude earlier cytoplasm: walk from the top of the stack and
    // keep only pixels nothing above has claimed.
    ImageBuffer claimed(side, side, 1);
    std::vector<ImageBuffer> visible_cyto(cells.size());
    for (int i = static_cast<int>(cells.size()) - 1; i >= 0; --i) {
        visible_cyto[static_cast<std::size_t>(i)] =
            mask_minus(cells[static_cast<std::size_t>(i)].cyto, claimed);
        claimed = mask_or(claimed, mask_or(cells[static_cast<std::size_t>(i)].nucleus,
                                           cells[static_cast<std::size_t>(i)].cyto));
    }

    // Paint bottom-up so the render agrees with the occlusion order.
    for (std::size_t i = 0; i < cells.size(); ++i) {
        double cyto_base[3] = {rng.uniform(195.0, 218.0), rng.uniform(158.0, 180.0),
                               rng.uniform(205.0, 228.0)};
        double nuc_base[3] = {rng.uniform(88.0, 108.0), rng.uniform(48.0, 66.0),
                              rng.uniform(122.0, 142.0)};
        for (int r = 0; r < side; ++r) {
            for (int c = 0; c < side; ++c) {
                bool is_cyto = cells[i].cyto.at(r, c) != 0.0f;
                bool is_nuc = !is_cyto && cells[i].nucleus.at(r, c) != 0.0f;
                if (!is_cyto && !is_nuc) continue;
                const double* base_col = is_cyto ? cyto_base : nuc_base;
                for (int ch = 0; ch < 3; ++ch) {
                    double v = base_col[ch] + rng.uniform(-7.0, 7.0);
                    image.at(r, c, ch) = static_cast<float>(std::clamp(v, 0.0, 255.0));
                }
            }
        }
    }

    for (std::size_t i = 0; i < cells.size(); ++i) {
        GtInstance gt{std::move(cells[i].nucleus), std::move(visible_cyto[i])};
        record.gt_instances.push_back(std::move(gt));
    }
    record.image = std::move(image);
    return record;
}

}  // namespace cellseg
