#include "hsk/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "hsk/error.hpp"
#include "hsk/parallel.hpp"

namespace hsk {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Exponent below which exp() underflows past 1e-300.
constexpr double kLogTiny = -690.0;

double squared_distance(std::span<const double> x, std::span<const double> y) {
    double sum = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double diff = x[d] - y[d];
        sum += diff * diff;
    }
    return sum;
}

// Strict ordering on (length, values) used to pick a canonical argument order,
// so that kernel(a, b) and kernel(b, a) run the identical accumulation and
// return bit-identical values.
bool sequence_less(const FeatureSequence& a, const FeatureSequence& b) {
    if (a.values.size() != b.values.size()) return a.values.size() < b.values.size();
    for (std::size_t i = 0; i < a.values.size(); ++i)
        if (a.values[i] != b.values[i]) return a.values[i] < b.values[i];
    return false;
}

double combine(double k_ab, double k_aa, double k_bb, bool normalize) {
    if (!normalize) return k_ab;
    if (k_aa <= 0.0 || k_bb <= 0.0) {
        // A zero cross value with zero self values happens when the weighting
        // selects no length at all (q beyond both sequences); the kernel is
        // identically zero and normalization is a no-op.
        if (k_ab == 0.0) return 0.0;
        throw Error("self-kernel underflowed to zero; gamma is too large for this data");
    }
    return normalize_value(k_ab, k_aa, k_bb);
}

} // namespace

void Weighting::validate() const {
    switch (kind) {
        case Kind::QSpectrum:
            if (q < 1) throw Error("q-spectrum weighting requires q >= 1");
            break;
        case Kind::Constant:
            break;
        case Kind::Decay:
            if (!(lambda > 0.0 && lambda < 1.0))
                throw Error("decay weighting requires lambda in (0, 1)");
            break;
    }
}

std::string Weighting::to_string() const {
    switch (kind) {
        case Kind::QSpectrum:
            return "q=" + std::to_string(q);
        case Kind::Constant:
            return "const";
        case Kind::Decay: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "decay=%.12g", lambda);
            return buf;
        }
    }
    return {};
}

Weighting Weighting::parse(const std::string& text) {
    if (text == "const" || text == "constant") return constant();
    if (text.rfind("q=", 0) == 0) {
        std::size_t pos = 0;
        const long q = std::stol(text.substr(2), &pos);
        if (pos != text.size() - 2 || q < 1)
            throw Error("invalid weighting '" + text + "': q must be a positive integer");
        return q_spectrum(static_cast<std::size_t>(q));
    }
    if (text.rfind("decay=", 0) == 0) {
        std::size_t pos = 0;
        const double lambda = std::stod(text.substr(6), &pos);
        if (pos != text.size() - 6 || !(lambda > 0.0 && lambda < 1.0))
            throw Error("invalid weighting '" + text + "': lambda must be in (0, 1)");
        return decay(lambda);
    }
    throw Error("invalid weighting '" + text + "': expected q=<k>, const or decay=<lambda>");
}

void KernelConfig::validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error("gamma must be positive and finite");
    weighting.validate();
}

double atomic_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
    if (x.size() != y.size())
        throw Error("atomic kernel dimension mismatch: " + std::to_string(x.size()) +
                    " vs " + std::to_string(y.size()));
    return std::exp(-gamma * squared_distance(x, y));
}

std::vector<double> spectrum_all_p(const FeatureSequence& a, const FeatureSequence& b,
                                   double gamma, std::size_t* atomic_evals) {
    if (a.dim != b.dim)
        throw Error("sequence dimension mismatch: " + std::to_string(a.dim) + " vs " +
                    std::to_string(b.dim));
    if (a.length() == 0 || b.length() == 0) throw Error("empty sequence");

    const FeatureSequence* pa = &a;
    const FeatureSequence* pb = &b;
    if (sequence_less(*pb, *pa)) std::swap(pa, pb);
    const std::size_t la = pa->length();
    const std::size_t lb = pb->length();
    const std::size_t pmin = std::min(la, lb);

    // One atomic evaluation per (i, j) pair, reused across every p.
    std::vector<double> expo(la * lb);
    double min_expo = 0.0;
    for (std::size_t i = 0; i < la; ++i) {
        const auto xi = pa->vector_at(i);
        for (std::size_t j = 0; j < lb; ++j) {
            const double e = -gamma * squared_distance(xi, pb->vector_at(j));
            expo[i * lb + j] = e;
            min_expo = std::min(min_expo, e);
        }
    }
    if (atomic_evals) *atomic_evals += la * lb;

    std::vector<double> per_p(pmin, 0.0);
    const std::size_t w = lb + 1;
    std::vector<double> prev((la + 1) * w);
    std::vector<double> cur((la + 1) * w, 0.0);

    if (std::max(la, lb) <= 32 && min_expo >= kLogTiny) {
        // Direct products.
        std::vector<double> atom(la * lb);
        for (std::size_t k = 0; k < expo.size(); ++k) atom[k] = std::exp(expo[k]);
        std::fill(prev.begin(), prev.end(), 1.0);
        for (std::size_t p = 1; p <= pmin; ++p) {
            double sum = 0.0;
            for (std::size_t i = 1; i <= la; ++i) {
                for (std::size_t j = 1; j <= lb; ++j) {
                    const double v = (i >= p && j >= p)
                                         ? atom[(i - 1) * lb + (j - 1)] * prev[(i - 1) * w + (j - 1)]
                                         : 0.0;
                    cur[i * w + j] = v;
                    sum += v;
                }
            }
            per_p[p - 1] = sum;
            std::swap(prev, cur);
        }
    } else {
        // Log-space accumulation guards against products of many small
        // factors underflowing before the per-p sums are formed.
        std::fill(prev.begin(), prev.end(), 0.0);
        for (std::size_t p = 1; p <= pmin; ++p) {
            double peak = kNegInf;
            for (std::size_t i = 1; i <= la; ++i) {
                for (std::size_t j = 1; j <= lb; ++j) {
                    const double v = (i >= p && j >= p)
                                         ? expo[(i - 1) * lb + (j - 1)] + prev[(i - 1) * w + (j - 1)]
                                         : kNegInf;
                    cur[i * w + j] = v;
                    peak = std::max(peak, v);
                }
            }
            if (peak == kNegInf) {
                per_p[p - 1] = 0.0;
            } else {
                double scaled = 0.0;
                for (std::size_t i = p; i <= la; ++i)
                    for (std::size_t j = p; j <= lb; ++j) scaled += std::exp(cur[i * w + j] - peak);
                per_p[p - 1] = std::exp(peak + std::log(scaled));
            }
            std::swap(prev, cur);
        }
    }
    return per_p;
}

double weighted_kernel(std::span<const double> per_p, const Weighting& weighting) {
    if (per_p.empty()) throw Error("weighted kernel requires a non-empty per-p array");
    switch (weighting.kind) {
        case Weighting::Kind::QSpectrum:
            return weighting.q <= per_p.size() ? per_p[weighting.q - 1] : 0.0;
        case Weighting::Kind::Constant: {
            double sum = 0.0;
            for (double v : per_p) sum += v;
            return sum;
        }
        case Weighting::Kind::Decay: {
            double sum = 0.0;
            double w = 1.0;
            for (double v : per_p) {
                w *= weighting.lambda;
                sum += w * v;
            }
            return sum;
        }
    }
    return 0.0;
}

double normalize_value(double k_ab, double k_aa, double k_bb) {
    return k_ab / std::sqrt(k_aa * k_bb);
}

double sequence_kernel(const FeatureSequence& a, const FeatureSequence& b,
                       const KernelConfig& config) {
    config.validate();
    const double k_ab = weighted_kernel(spectrum_all_p(a, b, config.gamma), config.weighting);
    if (!config.normalize) return k_ab;
    const double k_aa = weighted_kernel(spectrum_all_p(a, a, config.gamma), config.weighting);
    const double k_bb = weighted_kernel(spectrum_all_p(b, b, config.gamma), config.weighting);
    return combine(k_ab, k_aa, k_bb, true);
}

double stacked_gaussian_kernel(const FeatureSequence& a, const FeatureSequence& b,
                               double gamma) {
    if (a.dim != b.dim) throw Error("sequence dimension mismatch");
    if (a.length() != b.length())
        throw Error("stacked kernel requires equal sequence lengths, got " +
                    std::to_string(a.length()) + " and " + std::to_string(b.length()));
    double total = 0.0;
    for (std::size_t p = 0; p < a.length(); ++p)
        total += squared_distance(a.vector_at(p), b.vector_at(p));
    return std::exp(-gamma * total);
}

const std::vector<double>& SelfPerPTable::pair(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return per_p[i * n - i * (i - 1) / 2 + (j - i)];
}

SelfPerPTable build_self_per_p(const SequenceSet& set, double gamma, unsigned threads) {
    if (set.size() == 0) throw Error("empty sequence set");
    const std::size_t n = set.size();
    SelfPerPTable table;
    table.n = n;
    table.per_p.resize(n * (n + 1) / 2);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(table.per_p.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) pairs.emplace_back(i, j);
    parallel_for(pairs.size(), threads, [&](std::size_t k) {
        const auto [i, j] = pairs[k];
        table.per_p[k] = spectrum_all_p(set.sequences[i], set.sequences[j], gamma);
    });
    return table;
}

GramMatrix gram_from_table(const SelfPerPTable& table, const SequenceSet& set,
                           const Weighting& weighting, bool normalize) {
    const std::size_t n = table.n;
    std::vector<double> self_values(n);
    for (std::size_t i = 0; i < n; ++i)
        self_values[i] = weighted_kernel(table.pair(i, i), weighting);
    GramMatrix g;
    g.rows = g.cols = n;
    g.row_ids = g.col_ids = set.ids;
    g.entries.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double k_ab = weighted_kernel(table.pair(i, j), weighting);
            const double v = combine(k_ab, self_values[i], self_values[j], normalize);
            g.at(i, j) = v;
            g.at(j, i) = v;
        }
    }
    return g;
}

GramMatrix gram_self(const SequenceSet& set, const KernelConfig& config, unsigned threads) {
    config.validate();
    set.validate();
    if (set.size() == 0) throw Error("empty sequence set");
    const std::size_t n = set.size();

    std::vector<double> self_values(n);
    parallel_for(n, threads, [&](std::size_t i) {
        self_values[i] =
            weighted_kernel(spectrum_all_p(set.sequences[i], set.sequences[i], config.gamma),
                            config.weighting);
    });

    GramMatrix g;
    g.rows = g.cols = n;
    g.row_ids = g.col_ids = set.ids;
    g.entries.resize(n * n);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(n * (n + 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) pairs.emplace_back(i, j);
    parallel_for(pairs.size(), threads, [&](std::size_t k) {
        const auto [i, j] = pairs[k];
        try {
            const double k_ab = weighted_kernel(
                spectrum_all_p(set.sequences[i], set.sequences[j], config.gamma),
                config.weighting);
            const double v = combine(k_ab, self_values[i], self_values[j], config.normalize);
            g.at(i, j) = v;
            g.at(j, i) = v;
        } catch (const Error& e) {
            throw Error("gram entry (" + std::to_string(i) + ", " + std::to_string(j) +
                        "): " + e.what());
        }
    });
    return g;
}

GramMatrix gram_cross(const SequenceSet& row_set, const SequenceSet& col_set,
                      const KernelConfig& config, unsigned threads) {
    config.validate();
    row_set.validate();
    col_set.validate();
    if (row_set.size() == 0 || col_set.size() == 0) throw Error("empty sequence set");
    if (row_set.dim != col_set.dim)
        throw Error("sequence sets have different feature dimensions");

    std::vector<double> row_self(row_set.size()), col_self(col_set.size());
    parallel_for(row_set.size(), threads, [&](std::size_t i) {
        row_self[i] = weighted_kernel(
            spectrum_all_p(row_set.sequences[i], row_set.sequences[i], config.gamma),
            config.weighting);
    });
    parallel_for(col_set.size(), threads, [&](std::size_t j) {
        col_self[j] = weighted_kernel(
            spectrum_all_p(col_set.sequences[j], col_set.sequences[j], config.gamma),
            config.weighting);
    });

    GramMatrix g;
    g.rows = row_set.size();
    g.cols = col_set.size();
    g.row_ids = row_set.ids;
    g.col_ids = col_set.ids;
    g.entries.resize(g.rows * g.cols);
    parallel_for(g.rows, threads, [&](std::size_t i) {
        for (std::size_t j = 0; j < g.cols; ++j) {
            try {
                const double k_ab = weighted_kernel(
                    spectrum_all_p(row_set.sequences[i], col_set.sequences[j], config.gamma),
                    config.weighting);
                g.at(i, j) = combine(k_ab, row_self[i], col_self[j], config.normalize);
            } catch (const Error& e) {
                throw Error("gram entry (" + std::to_string(i) + ", " + std::to_string(j) +
                            "): " + e.what());
            }
        }
    });
    return g;
}

GramMatrix gram(const SequenceSet& a, const SequenceSet& b, const KernelConfig& config,
                unsigned threads) {
    if (&a == &b) return gram_self(a, config, threads);
    return gram_cross(a, b, config, threads);
}

} // namespace hsk
