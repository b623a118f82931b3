#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hsk/hierarchy.hpp"
#include "hsk/kernel.hpp"
#include "hsk/types.hpp"

namespace hsk {

// Per-class sampling plan: n samples per class for training, the rest for
// testing. Classes smaller than 2n contribute half of their samples when the
// half rule is on.
struct SplitSpec {
    std::size_t n_per_class = 10;
    std::uint64_t seed = 0;
    bool half_class_rule = true;
};

struct Split {
    std::vector<std::size_t> train; // ascending indices into the sample list
    std::vector<std::size_t> test;
};

// Splits a list of per-sample class labels (0 = excluded). Deterministic for
// a fixed seed; every class needs at least 2 samples.
Split split_indices(const std::vector<std::uint16_t>& labels, const SplitSpec& spec);

// Raster flavor: indices refer to the row-major enumeration of labeled
// pixels, the same order extract_labeled_sequences uses.
Split sample_split(const LabelRaster& labels, const SplitSpec& spec);

// Hyperparameter grid for cross-validation.
struct CvGrid {
    std::vector<double> gammas;
    std::vector<double> Cs;
    std::vector<Weighting> weightings; // tie order: earlier entries win
};

struct CvChoice {
    double gamma = 0.0;
    double C = 0.0;
    Weighting weighting;
    double mean_accuracy = 0.0;
};

// Stratified k-fold selection of (gamma, C, weighting) by mean validation
// accuracy. Ties go to the smaller gamma, then smaller C, then the earlier
// weighting. Classes with fewer samples than folds are spread over the first
// folds with a warning.
CvChoice cross_validate(const SequenceSet& train_set, const CvGrid& grid,
                        std::size_t folds = 5, std::uint64_t seed = 0,
                        double tol = 1e-3, unsigned threads = 0);

struct Metrics {
    double oa = 0.0;
    double aa = 0.0;
    double kappa = 0.0;
    std::vector<int> classes;
    std::vector<std::size_t> confusion;      // classes x classes, row = truth
    std::vector<double> per_class_accuracy;  // NaN for classes with no samples

    std::size_t confusion_at(std::size_t truth, std::size_t pred) const {
        return confusion[truth * classes.size() + pred];
    }
};

// Confusion matrix and derived scores. When classes is empty the union of
// labels seen in truth and predicted is used.
Metrics compute_metrics(const std::vector<int>& predicted, const std::vector<int>& truth,
                        std::vector<int> classes = {});

enum class Method { PixelOnly, Stacked, SpectrumConstant, SpectrumQ, SpectrumLambda };

const char* method_name(Method method);
Method parse_method(const std::string& name);

// Parameter ranges the per-method CV grids are drawn from. Empty qs means
// every length 1..p_max.
struct ExperimentGrid {
    std::vector<double> gammas;
    std::vector<double> Cs;
    std::vector<double> lambdas;
    std::vector<std::size_t> qs;

    static ExperimentGrid defaults();
};

struct RepetitionResult {
    Metrics metrics;
    CvChoice choice;
};

struct Summary {
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation
};

struct ExperimentResult {
    Method method = Method::PixelOnly;
    std::vector<RepetitionResult> repetitions;
    Summary oa, aa, kappa;
};

// Full protocol on a labeled sequence set: for each repetition, split with
// seed base+r, standardize on the training part, cross-validate, train,
// predict, score. Splits depend only on (labels, n, seed), so every method
// sees identical train/test sets for a given repetition.
ExperimentResult run_experiment(const SequenceSet& labeled, const SplitSpec& split_spec,
                                std::size_t repetitions, const ExperimentGrid& grid,
                                Method method, std::size_t folds = 5, double tol = 1e-3,
                                unsigned threads = 0);

// Convenience flavor that extracts the labeled sequences first.
ExperimentResult run_experiment(const HyperCube& cube, const Hierarchy& hierarchy,
                                const LabelRaster& labels, const SplitSpec& split_spec,
                                std::size_t repetitions, const ExperimentGrid& grid,
                                Method method, std::size_t folds = 5, double tol = 1e-3,
                                unsigned threads = 0);

// Subset of a sequence set by sample indices.
SequenceSet subset(const SequenceSet& set, const std::vector<std::size_t>& indices);

} // namespace hsk
