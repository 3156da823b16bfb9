#pragma once

#include <cstdint>
#include <vector>

#include "cellseg/dataset.hpp"
#include "cellseg/rng.hpp"

namespace cellseg {

// Gaussian mixture over the cytoplasm/nucleus area ratio of generated cells.
struct RatioMixture {
    std::vector<double> means;    // all > 1.0
    std::vector<double> stddevs;
    std::vector<double> weights;  // sum to 1

    void validate() const;
    double sample(Rng& rng) const;
};

struct SyntheticSceneSpec {
    int image_side = 96;
    int n_cells = 4;
    RatioMixture ratio_distribution;
    double overlap_probability = 0.15;  // chance a cell may overlap earlier cytoplasm
    std::uint64_t rng_seed = 0;

    void validate() const;
};

// Renders one stained-smear-like scene: textured background, elliptical nuclei
// in a distinct dark hue, irregular cytoplasm blobs whose area ratio to the
// nucleus is drawn from the mixture. Ground truth masks are returned per cell;
// where cells overlap, later cells occlude earlier cytoplasm and all masks
// describe the visible pixels. Deterministic for a fixed rng_seed. Throws
// DataError when n_cells do not fit after bounded retries.
DatasetRecord generate_synthetic_scene(const SyntheticSceneSpec& spec,
                                       const std::string& sample_id = "synthetic");

}  // namespace cellseg
