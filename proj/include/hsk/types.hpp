#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hsk {

// Hyperspectral data cube. Values are stored row-major, band-interleaved by
// pixel: the D bands of pixel (r, c) live at [(r * cols + c) * bands ...].
// Files hold 32-bit floats; in memory everything is widened to double so that
// long products of kernel factors keep full precision.
struct HyperCube {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t bands = 0;
    std::vector<double> values;

    std::size_t pixel_count() const { return rows * cols; }

    std::span<const double> pixel(std::size_t r, std::size_t c) const {
        return {values.data() + (r * cols + c) * bands, bands};
    }

    // Throws Error if dimensions/payload disagree or any value is non-finite.
    void validate() const;
};

// Per-pixel class IDs; 0 means unlabeled/background.
struct LabelRaster {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint16_t> labels;

    std::uint16_t at(std::size_t r, std::size_t c) const { return labels[r * cols + c]; }

    void validate() const;
};

// Ordered fine-to-coarse feature vectors for one sample: index 0 is the pixel
// level (or finest segmentation), the last index the coarsest retained level.
struct FeatureSequence {
    std::size_t dim = 0;
    std::vector<double> values; // length() x dim, row-major

    std::size_t length() const { return dim == 0 ? 0 : values.size() / dim; }

    std::span<const double> vector_at(std::size_t p) const {
        return {values.data() + p * dim, dim};
    }
};

// A set of sequences with sample identifiers and (optional) class labels.
// Label 0 marks an unlabeled sample.
struct SequenceSet {
    std::size_t dim = 0;
    std::vector<FeatureSequence> sequences;
    std::vector<std::string> ids;
    std::vector<std::uint16_t> labels;

    std::size_t size() const { return sequences.size(); }

    void validate() const;
};

// Kernel matrix over samples. Square self-grams have row_ids == col_ids;
// rectangular matrices (rows = test, cols = train) keep separate id lists.
struct GramMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> entries; // rows x cols, row-major
    std::vector<std::string> row_ids;
    std::vector<std::string> col_ids;

    double at(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }
    double& at(std::size_t i, std::size_t j) { return entries[i * cols + j]; }

    bool self() const { return rows == cols && row_ids == col_ids; }

    void validate() const;
};

} // namespace hsk
