#pragma once

#include <cstdint>
#include <filesystem>
#include <unordered_map>
#include <vector>

#include "hsk/io.hpp"
#include "hsk/types.hpp"

namespace hsk {

// Forest of nested image regions across scale levels. Level 0 is the finest
// partition (each pixel its own region when built by segment()); every
// coarser level groups whole regions of the level below. Region ids are the
// smallest member pixel index, which survives merging unchanged.
struct Hierarchy {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::vector<std::uint32_t>> levels;   // per level: rows*cols region ids
    std::vector<std::size_t> region_counts;           // per level
    std::vector<double> alphas;                       // thresholds that built levels 1..L-1
    // For each level l < L-1: region id at l -> region id at l+1.
    std::vector<std::unordered_map<std::uint32_t, std::uint32_t>> parent_links;

    std::size_t level_count() const { return levels.size(); }

    // Checks nesting, non-increasing region counts, strictly increasing
    // alphas and parent-link consistency. Throws Error with pixel coordinates
    // on the first nesting violation.
    void validate() const;
};

struct RegionStats {
    std::size_t pixel_count = 0;
    std::vector<double> mean_spectrum;
};

// Per-level mean spectra, computed on the raw cube.
using LevelStats = std::vector<std::unordered_map<std::uint32_t, RegionStats>>;
LevelStats compute_region_stats(const Hierarchy& hierarchy, const HyperCube& cube);

// Builds a hierarchy by best-merge region growing: starting from the pixel
// partition, repeatedly merge the 4-adjacent region pair with the smallest
// dissimilarity until it exceeds the current threshold, then snapshot a
// level and move to the next threshold. Dissimilarity between regions A, B is
// |A||B|/(|A|+|B|) * ||mean_A - mean_B||^2, evaluated on per-band standardized
// spectra so the threshold ladder is independent of the data scale. Ties are
// broken toward the smallest (min id, max id) pair and the merged region
// keeps the smaller id, which makes the whole process deterministic.
Hierarchy segment(const HyperCube& cube, const std::vector<double>& alphas);

// Builds a hierarchy from externally computed label maps, finest first.
// Nesting is verified, not assumed. When no thresholds are known, synthetic
// strictly increasing alphas 1, 2, ... are assigned.
Hierarchy import_hierarchy(const std::vector<LevelMap>& maps,
                           std::vector<double> alphas = {});
Hierarchy import_hierarchy(const std::vector<std::filesystem::path>& map_paths);

// Number of levels kept for sequence extraction: whole-image levels at the
// top carry no information and are dropped automatically (the finest level is
// always kept), then top_levels_discarded more are removed.
std::size_t retained_level_count(const Hierarchy& hierarchy,
                                 std::size_t top_levels_discarded);

// Ancestor feature sequence of one pixel: the mean spectrum of its region at
// each retained level, finest first.
FeatureSequence extract_sequence(const Hierarchy& hierarchy, const HyperCube& cube,
                                 std::size_t row, std::size_t col,
                                 std::size_t top_levels_discarded = 0);

// Sequences for every labeled pixel (label > 0), in row-major order, with
// sample ids "r<row>c<col>". Region stats are computed once and shared.
SequenceSet extract_labeled_sequences(const Hierarchy& hierarchy, const HyperCube& cube,
                                      const LabelRaster& labels,
                                      std::size_t top_levels_discarded = 0);

// Per-dimension affine transform fitted on training vectors: zero mean, unit
// variance. Dimensions with std below 1e-12 are centered only.
struct FeatureScaler {
    std::vector<double> mean;
    std::vector<double> scale; // 1.0 for degenerate dimensions

    void apply(FeatureSequence& sequence) const;
    void apply(SequenceSet& set) const;
};

// Fits on all vectors of all sequences (at least 2 vectors total required).
FeatureScaler fit_feature_scaler(const SequenceSet& set);

// In-place standardization; returns the fitted transform for reuse on test
// data.
FeatureScaler standardize_features(SequenceSet& set);

// One HSH1 label map per level plus a text manifest with the thresholds.
void save_hierarchy(const Hierarchy& hierarchy, const std::filesystem::path& dir);
Hierarchy load_hierarchy(const std::filesystem::path& dir);

} // namespace hsk
