#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hsk::oracle {

std::vector<std::pair<std::size_t, std::size_t>> enumerate_subsequences(std::size_t length) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t p = 1; p <= length; ++p)
        for (std::size_t start = 0; start + p <= length; ++start) out.emplace_back(start, p);
    return out;
}

namespace {

double gauss(const FeatureSequence& a, std::size_t i, const FeatureSequence& b,
             std::size_t j, double gamma) {
    double d2 = 0.0;
    for (std::size_t d = 0; d < a.dim; ++d) {
        const double diff = a.values[i * a.dim + d] - b.values[j * b.dim + d];
        d2 += diff * diff;
    }
    return std::exp(-gamma * d2);
}

} // namespace

std::vector<double> brute_force_spectrum(const FeatureSequence& a, const FeatureSequence& b,
                                         double gamma) {
    const std::size_t pmin = std::min(a.length(), b.length());
    std::vector<double> per_p(pmin, 0.0);
    const auto subs_a = enumerate_subsequences(a.length());
    const auto subs_b = enumerate_subsequences(b.length());
    for (const auto& [ta, pa] : subs_a)
        for (const auto& [tb, pb] : subs_b) {
            if (pa != pb) continue; // only equal lengths match
            double product = 1.0;
            for (std::size_t i = 0; i < pa; ++i) product *= gauss(a, ta + i, b, tb + i, gamma);
            per_p[pa - 1] += product;
        }
    return per_p;
}

std::vector<double> symmetric_eigenvalues(std::vector<double> m, std::size_t n) {
    if (m.size() != n * n) throw std::invalid_argument("matrix size mismatch");
    const auto at = [&](std::size_t i, std::size_t j) -> double& { return m[i * n + j]; };
    for (std::size_t sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(at(p, q)) < 1e-300) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = at(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

namespace {

// Projection of v onto { 0 <= x <= C, y'x = 0 } by bisection on the
// multiplier of the equality constraint.
std::vector<double> project(const std::vector<double>& v, const std::vector<int>& y,
                            double C) {
    const auto constraint = [&](double nu) {
        double sum = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double x = std::clamp(v[i] - nu * y[i], 0.0, C);
            sum += y[i] * x;
        }
        return sum;
    };
    double bound = C + 1.0;
    for (double vi : v) bound = std::max(bound, std::abs(vi) + C + 1.0);
    double lo = -bound, hi = bound;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (constraint(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    const double nu = 0.5 * (lo + hi);
    std::vector<double> x(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) x[i] = std::clamp(v[i] - nu * y[i], 0.0, C);
    return x;
}

} // namespace

double dual_objective_oracle(const GramMatrix& gram, const std::vector<int>& y, double C,
                             std::size_t iterations) {
    const std::size_t n = gram.rows;
    const auto q = [&](std::size_t i, std::size_t j) {
        return y[i] * y[j] * gram.at(i, j);
    };
    // Lipschitz bound on the gradient: trace dominates the top eigenvalue of
    // a PSD matrix.
    double lipschitz = 0.0;
    for (std::size_t i = 0; i < n; ++i) lipschitz += std::abs(q(i, i));
    const double step = 1.0 / std::max(lipschitz, 1e-9);

    std::vector<double> alpha(n, 0.0);
    std::vector<double> v(n);
    for (std::size_t it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double g = -1.0;
            for (std::size_t j = 0; j < n; ++j) g += q(i, j) * alpha[j];
            v[i] = alpha[i] - step * g;
        }
        alpha = project(v, y, C);
    }
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        obj += alpha[i];
        for (std::size_t j = 0; j < n; ++j) obj -= 0.5 * alpha[i] * alpha[j] * q(i, j);
    }
    return obj;
}

FeatureSequence random_sequence(Rng& rng, std::size_t length, std::size_t dim,
                                double spread) {
    FeatureSequence s;
    s.dim = dim;
    s.values.resize(length * dim);
    for (double& v : s.values) v = spread * (2.0 * rng.next_double() - 1.0);
    return s;
}

SequenceSet random_sequence_set(Rng& rng, std::size_t count, std::size_t length,
                                std::size_t dim, double spread) {
    SequenceSet set;
    set.dim = dim;
    for (std::size_t i = 0; i < count; ++i) {
        set.sequences.push_back(random_sequence(rng, length, dim, spread));
        set.ids.push_back("s" + std::to_string(i));
        set.labels.push_back(static_cast<std::uint16_t>(1 + i % 3));
    }
    return set;
}

} // namespace hsk::oracle
