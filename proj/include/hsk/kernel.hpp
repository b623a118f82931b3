#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hsk/types.hpp"

namespace hsk {

// Per-length weights for the sequence kernel: a single length q, all lengths
// equally, or exponential decay lambda^p.
struct Weighting {
    enum class Kind { QSpectrum, Constant, Decay };

    Kind kind = Kind::Constant;
    std::size_t q = 1;    // QSpectrum only
    double lambda = 0.5;  // Decay only

    static Weighting q_spectrum(std::size_t q) { return {Kind::QSpectrum, q, 0.0}; }
    static Weighting constant() { return {Kind::Constant, 0, 0.0}; }
    static Weighting decay(double lambda) { return {Kind::Decay, 0, lambda}; }

    void validate() const;
    std::string to_string() const;           // "q=3" | "const" | "decay=0.5"
    static Weighting parse(const std::string& text);
};

struct KernelConfig {
    double gamma = 1.0;
    Weighting weighting;
    bool normalize = true;

    void validate() const;
};

// Gaussian kernel between two feature vectors: exp(-gamma * ||x - y||^2).
double atomic_kernel(std::span<const double> x, std::span<const double> y, double gamma);

// All p-length sequence kernel values for one pair, p = 1..min(len, len').
// Entry p-1 is the sum over all pairs of contiguous length-p subsequences of
// the product of their per-position atomic kernels. Computed by the two-plane
// recurrence reusing one grid of atomic values, so exactly len * len' atomic
// evaluations happen per call (counted into *atomic_evals when given).
// Products switch to log-space accumulation when sequences are long or the
// atomic values underflow.
std::vector<double> spectrum_all_p(const FeatureSequence& a, const FeatureSequence& b,
                                   double gamma, std::size_t* atomic_evals = nullptr);

// Combines per-p kernel values with a weighting scheme. A QSpectrum q beyond
// the array length contributes 0.
double weighted_kernel(std::span<const double> per_p, const Weighting& weighting);

// Cosine-style normalization K(a,b) / sqrt(K(a,a) K(b,b)). Exposed so the
// pairwise and matrix paths share identical arithmetic.
double normalize_value(double k_ab, double k_aa, double k_bb);

// Full sequence kernel under a config: weighted over all lengths, normalized
// unless config.normalize is false. Symmetric under argument swap, bit-exact.
double sequence_kernel(const FeatureSequence& a, const FeatureSequence& b,
                       const KernelConfig& config);

// Gaussian kernel on the concatenation of all vectors of each sequence.
// Requires equal lengths; equals the unnormalized q = p_max spectrum value.
double stacked_gaussian_kernel(const FeatureSequence& a, const FeatureSequence& b,
                               double gamma);

// Cached per-pair all-p arrays over one sample set, for sweeping weighting
// schemes without recomputing the dynamic program (one array per unordered
// pair, upper triangle including the diagonal).
struct SelfPerPTable {
    std::size_t n = 0;
    std::vector<std::vector<double>> per_p; // index i*n - i*(i-1)/2 + (j-i), i <= j

    const std::vector<double>& pair(std::size_t i, std::size_t j) const;
};

SelfPerPTable build_self_per_p(const SequenceSet& set, double gamma, unsigned threads = 0);

// Normalized (or raw) Gram matrix from a cached table.
GramMatrix gram_from_table(const SelfPerPTable& table, const SequenceSet& set,
                           const Weighting& weighting, bool normalize);

// Pairwise kernel matrices. gram() dispatches on set identity: the self form
// computes each unordered pair once and mirrors it, giving exact symmetry.
GramMatrix gram_self(const SequenceSet& set, const KernelConfig& config,
                     unsigned threads = 0);
GramMatrix gram_cross(const SequenceSet& row_set, const SequenceSet& col_set,
                      const KernelConfig& config, unsigned threads = 0);
GramMatrix gram(const SequenceSet& a, const SequenceSet& b, const KernelConfig& config,
                unsigned threads = 0);

} // namespace hsk
