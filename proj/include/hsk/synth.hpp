#pragma once

#include <cstdint>

#include "hsk/types.hpp"

namespace hsk {

// Synthetic scene for self-contained end-to-end runs: nested axis-aligned
// rectangles, one class each, with distinct mean spectra (orthonormal cosine
// patterns) plus i.i.d. Gaussian noise. Fully labeled, deterministic per
// seed.
struct SynthScene {
    HyperCube cube;
    LabelRaster labels;
};

SynthScene synth_scene(std::size_t rows, std::size_t cols, std::size_t bands,
                       std::size_t classes, double noise_std, std::uint64_t seed);

} // namespace hsk
