#include "hsk/synth.hpp"

#include <cmath>
#include <vector>

#include "hsk/error.hpp"
#include "hsk/rng.hpp"

namespace hsk {

SynthScene synth_scene(std::size_t rows, std::size_t cols, std::size_t bands,
                       std::size_t classes, double noise_std, std::uint64_t seed) {
    if (classes < 2) throw Error("synthetic scene needs at least 2 classes");
    if (rows < 4 || cols < 4) throw Error("synthetic scene needs at least 4x4 pixels");
    if (bands < 1) throw Error("synthetic scene needs at least 1 band");
    if (noise_std < 0.0) throw Error("noise_std must be non-negative");

    // Unit-norm cosine patterns; any two class means are sqrt(2) apart.
    std::vector<std::vector<double>> means(classes, std::vector<double>(bands));
    constexpr double pi = 3.14159265358979323846;
    for (std::size_t c = 0; c < classes; ++c) {
        double norm = 0.0;
        for (std::size_t b = 0; b < bands; ++b) {
            const double v = std::cos(pi * static_cast<double>(c) *
                                      (static_cast<double>(b) + 0.5) /
                                      static_cast<double>(bands));
            means[c][b] = v;
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (std::size_t b = 0; b < bands; ++b) means[c][b] /= norm;
    }

    // Nested rectangles shrinking toward the center; a pixel takes the class
    // of the innermost rectangle containing it.
    const std::size_t half = std::min(rows, cols) / 2;
    SynthScene scene;
    scene.labels.rows = rows;
    scene.labels.cols = cols;
    scene.labels.labels.resize(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            std::size_t cls = 1;
            for (std::size_t k = 2; k <= classes; ++k) {
                const std::size_t margin = half * (k - 1) / classes;
                if (r >= margin && r < rows - margin && c >= margin && c < cols - margin)
                    cls = k;
            }
            scene.labels.labels[r * cols + c] = static_cast<std::uint16_t>(cls);
        }

    Rng rng(seed);
    scene.cube.rows = rows;
    scene.cube.cols = cols;
    scene.cube.bands = bands;
    scene.cube.values.resize(rows * cols * bands);
    for (std::size_t pix = 0; pix < rows * cols; ++pix) {
        const auto& mu = means[scene.labels.labels[pix] - 1];
        for (std::size_t b = 0; b < bands; ++b) {
            const double noisy = mu[b] + noise_std * rng.next_gaussian();
            // Round through f32 so in-memory values match the file exactly.
            scene.cube.values[pix * bands + b] = static_cast<double>(static_cast<float>(noisy));
        }
    }
    return scene;
}

} // namespace hsk
