#include <doctest.h>

#include <cmath>

#include <cstdlib>

#include "hsk/error.hpp"
#include "hsk/kernel.hpp"
#include "hsk/parallel.hpp"
#include "hsk/rng.hpp"
#include "oracles.hpp"

using namespace hsk;

namespace {

FeatureSequence seq1d(std::initializer_list<double> values) {
    FeatureSequence s;
    s.dim = 1;
    s.values = values;
    return s;
}

bool close_rel(double a, double b, double tol = 1e-12) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

} // namespace

TEST_CASE("atomic kernel basics") {
    const std::vector<double> x{1.0, 0.0}, y{0.0, 0.0};
    CHECK(atomic_kernel(x, x, 3.7) == 1.0);
    CHECK(atomic_kernel(x, y, 0.5) == doctest::Approx(0.60653065971263342).epsilon(1e-14));
    CHECK(atomic_kernel(x, y, 0.5) == atomic_kernel(y, x, 0.5));
    const std::vector<double> z{1.0};
    CHECK_THROWS_AS((void)atomic_kernel(x, z, 1.0), Error);
}

TEST_CASE("per-length kernel values match the hand-enumerated example") {
    const auto a = seq1d({0.0, 1.0});
    const auto b = seq1d({0.0, 2.0});
    const auto per_p = spectrum_all_p(a, b, 1.0);
    REQUIRE(per_p.size() == 2);
    CHECK(per_p[0] == doctest::Approx(1.7540745212316189).epsilon(1e-14));
    CHECK(per_p[1] == doctest::Approx(0.36787944117144233).epsilon(1e-14));

    // Self kernels of the same example, used by the normalization case below.
    const auto aa = spectrum_all_p(a, a, 1.0);
    const auto bb = spectrum_all_p(b, b, 1.0);
    CHECK(aa[0] + aa[1] == doctest::Approx(3.7357588823428847).epsilon(1e-14));
    CHECK(bb[0] + bb[1] == doctest::Approx(3.0366312777774684).epsilon(1e-14));
}

TEST_CASE("length-1 identical sequences give [1]") {
    const auto a = seq1d({0.25});
    const auto per_p = spectrum_all_p(a, a, 2.0);
    REQUIRE(per_p.size() == 1);
    CHECK(per_p[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("per-p array length is the shorter sequence length, all positive") {
    Rng rng(11);
    const auto a = oracle::random_sequence(rng, 6, 3);
    const auto b = oracle::random_sequence(rng, 4, 3);
    const auto per_p = spectrum_all_p(a, b, 1.0);
    REQUIRE(per_p.size() == 4);
    for (double v : per_p) CHECK(v > 0.0);
}

TEST_CASE("dynamic program equals brute-force enumeration") {
    Rng rng(2024);
    for (int trial = 0; trial < 250; ++trial) {
        const std::size_t la = 1 + rng.next_below(8);
        const std::size_t lb = 1 + rng.next_below(8);
        const std::size_t dim = 1 + rng.next_below(5);
        const double gamma = std::vector<double>{0.1, 1.0, 10.0}[rng.next_below(3)];
        const auto a = oracle::random_sequence(rng, la, dim);
        const auto b = oracle::random_sequence(rng, lb, dim);
        const auto dp = spectrum_all_p(a, b, gamma);
        const auto bf = oracle::brute_force_spectrum(a, b, gamma);
        REQUIRE(dp.size() == bf.size());
        for (std::size_t p = 0; p < dp.size(); ++p)
            CHECK(std::abs(dp[p] - bf[p]) <= 1e-12 * std::max(1.0, std::abs(bf[p])));
    }
}

TEST_CASE("log-space path agrees with the direct path") {
    Rng rng(7);
    // Length above the direct-path cutoff.
    const auto a = oracle::random_sequence(rng, 40, 2);
    const auto b = oracle::random_sequence(rng, 40, 2);
    const auto long_path = spectrum_all_p(a, b, 1.0);
    const auto bf = oracle::brute_force_spectrum(a, b, 1.0);
    for (std::size_t p = 0; p < 10; ++p) // underflow-free prefix
        CHECK(close_rel(long_path[p], bf[p]));

    // Huge gamma forces the guard on short sequences; values stay finite and
    // self-normalization still works.
    const auto c = seq1d({0.0, 5.0, 1.0});
    const auto d = seq1d({100.0, -40.0, 7.0});
    const auto tiny = spectrum_all_p(c, d, 50.0);
    for (double v : tiny) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
    }
    const KernelConfig config{50.0, Weighting::constant(), true};
    CHECK(sequence_kernel(c, c, config) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("atomic evaluation count is exactly len * len'") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t la = 1 + rng.next_below(9);
        const std::size_t lb = 1 + rng.next_below(9);
        const auto a = oracle::random_sequence(rng, la, 2);
        const auto b = oracle::random_sequence(rng, lb, 2);
        std::size_t evals = 0;
        (void)spectrum_all_p(a, b, 1.0, &evals);
        CHECK(evals == la * lb);
    }
}

TEST_CASE("weighting schemes") {
    const std::vector<double> per_p{1.7540745212316189, 0.36787944117144233};
    CHECK(weighted_kernel(per_p, Weighting::constant()) ==
          doctest::Approx(2.1219539624030612).epsilon(1e-14));
    CHECK(weighted_kernel(per_p, Weighting::q_spectrum(2)) ==
          doctest::Approx(0.36787944117144233).epsilon(1e-14));
    CHECK(weighted_kernel(per_p, Weighting::q_spectrum(5)) == 0.0);
    CHECK(weighted_kernel(per_p, Weighting::decay(0.5)) ==
          doctest::Approx(0.96900712090867003).epsilon(1e-14));

    CHECK_THROWS_AS((void)Weighting::parse("bogus"), Error);
    CHECK(Weighting::parse("q=3").q == 3);
    CHECK(Weighting::parse("const").kind == Weighting::Kind::Constant);
    CHECK(Weighting::parse("decay=0.25").lambda == doctest::Approx(0.25));
    CHECK_THROWS_AS((void)Weighting::parse("decay=1.5"), Error);
}

TEST_CASE("decay weighting is monotone in each entry and continuous in lambda") {
    const std::vector<double> base{0.8, 0.5, 0.3};
    const Weighting w = Weighting::decay(0.6);
    const double v0 = weighted_kernel(base, w);
    for (std::size_t i = 0; i < base.size(); ++i) {
        auto bumped = base;
        bumped[i] += 0.01;
        CHECK(weighted_kernel(bumped, w) > v0);
    }
    const double v_eps = weighted_kernel(base, Weighting::decay(0.6 + 1e-9));
    CHECK(std::abs(v_eps - v0) < 1e-7);
}

TEST_CASE("normalized kernel of the hand example") {
    const auto a = seq1d({0.0, 1.0});
    const auto b = seq1d({0.0, 2.0});
    const KernelConfig config{1.0, Weighting::constant(), true};
    const double k = sequence_kernel(a, b, config);
    CHECK(k == doctest::Approx(0.63001444618328528).epsilon(1e-13));

    // Same value through the independent enumeration.
    const double o_ab = weighted_kernel(oracle::brute_force_spectrum(a, b, 1.0), config.weighting);
    const double o_aa = weighted_kernel(oracle::brute_force_spectrum(a, a, 1.0), config.weighting);
    const double o_bb = weighted_kernel(oracle::brute_force_spectrum(b, b, 1.0), config.weighting);
    CHECK(close_rel(k, o_ab / std::sqrt(o_aa * o_bb)));

    CHECK(sequence_kernel(a, a, config) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sequence_kernel(a, b, config) == sequence_kernel(b, a, config)); // bit-exact

    const KernelConfig raw{1.0, Weighting::constant(), false};
    CHECK(sequence_kernel(a, b, raw) == doctest::Approx(2.1219539624030612).epsilon(1e-13));
}

TEST_CASE("very large gamma keeps normalized values in (0, 1]") {
    const auto a = seq1d({0.0, 1.0});
    const auto b = seq1d({0.0, 2.0});
    const KernelConfig config{400.0, Weighting::constant(), true};
    const double k = sequence_kernel(a, b, config);
    CHECK(k >= 0.0);
    CHECK(k <= 1.0 + 1e-12);
}

TEST_CASE("stacked gaussian equals the p_max spectrum entry") {
    const auto a = seq1d({0.0, 1.0});
    const auto b = seq1d({0.0, 2.0});
    CHECK(stacked_gaussian_kernel(a, b, 1.0) ==
          doctest::Approx(0.36787944117144233).epsilon(1e-14));
    CHECK(stacked_gaussian_kernel(a, a, 1.0) == 1.0);

    Rng rng(99);
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t len = 1 + rng.next_below(8);
        const std::size_t dim = 1 + rng.next_below(4);
        const auto x = oracle::random_sequence(rng, len, dim);
        const auto y = oracle::random_sequence(rng, len, dim);
        const double stacked = stacked_gaussian_kernel(x, y, 1.0);
        const auto per_p = spectrum_all_p(x, y, 1.0);
        CHECK(close_rel(stacked, per_p.back()));
    }

    const auto c = seq1d({0.0});
    CHECK_THROWS_AS((void)stacked_gaussian_kernel(a, c, 1.0), Error);
}

TEST_CASE("weighting out of range yields an all-zero normalized gram") {
    Rng rng(3);
    const auto set = oracle::random_sequence_set(rng, 4, 3, 2);
    const KernelConfig config{1.0, Weighting::q_spectrum(9), true};
    const GramMatrix g = gram_self(set, config);
    for (double v : g.entries) CHECK(v == 0.0);
}

TEST_CASE("self gram is symmetric with unit diagonal and PSD up to round-off") {
    Rng rng(17);
    const auto set = oracle::random_sequence_set(rng, 50, 5, 3);
    for (const Weighting& w :
         {Weighting::q_spectrum(3), Weighting::constant(), Weighting::decay(0.5)}) {
        const KernelConfig config{0.7, w, true};
        const GramMatrix g = gram_self(set, config);
        for (std::size_t i = 0; i < g.rows; ++i) {
            CHECK(std::abs(g.at(i, i) - 1.0) <= 1e-12);
            for (std::size_t j = 0; j < g.cols; ++j) {
                CHECK(g.at(i, j) == g.at(j, i)); // exact
                CHECK(g.at(i, j) >= 0.0);
                CHECK(g.at(i, j) <= 1.0 + 1e-12);
            }
        }
        const auto eig = oracle::symmetric_eigenvalues(g.entries, g.rows);
        CHECK(eig.front() >= -1e-8 * static_cast<double>(g.rows));
    }
}

TEST_CASE("1x1 self gram is [1]") {
    Rng rng(4);
    const auto set = oracle::random_sequence_set(rng, 1, 4, 2);
    const GramMatrix g = gram_self(set, KernelConfig{1.0, Weighting::constant(), true});
    REQUIRE(g.entries.size() == 1);
    CHECK(g.entries[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("thread resolution: explicit request, then HSK_THREADS, then hardware") {
    ::setenv("HSK_THREADS", "3", 1);
    CHECK(resolve_threads(0) == 3);
    CHECK(resolve_threads(7) == 7);
    ::unsetenv("HSK_THREADS");
    CHECK(resolve_threads(0) >= 1);
}

TEST_CASE("gram entries are identical across thread counts") {
    Rng rng(23);
    const auto set = oracle::random_sequence_set(rng, 12, 4, 3);
    const KernelConfig config{1.3, Weighting::constant(), true};
    const GramMatrix serial = gram_self(set, config, 1);
    const GramMatrix parallel = gram_self(set, config, 4);
    CHECK(serial.entries == parallel.entries); // bit-exact

    const auto rows = oracle::random_sequence_set(rng, 7, 4, 3);
    const GramMatrix r1 = gram_cross(rows, set, config, 1);
    const GramMatrix r4 = gram_cross(rows, set, config, 4);
    CHECK(r1.entries == r4.entries);
    CHECK(r1.rows == 7);
    CHECK(r1.cols == 12);
}

TEST_CASE("per-p table reproduces the direct gram") {
    Rng rng(31);
    const auto set = oracle::random_sequence_set(rng, 9, 5, 2);
    const double gamma = 0.8;
    const SelfPerPTable table = build_self_per_p(set, gamma);
    for (const Weighting& w : {Weighting::constant(), Weighting::q_spectrum(2)}) {
        const GramMatrix from_table = gram_from_table(table, set, w, true);
        const GramMatrix direct = gram_self(set, KernelConfig{gamma, w, true});
        CHECK(from_table.entries == direct.entries); // identical arithmetic
    }
}

TEST_CASE("normalized stacked-vector gram equals the q=p_max spectrum gram") {
    Rng rng(41);
    const auto set = oracle::random_sequence_set(rng, 10, 6, 3);
    const std::size_t p_max = 6;
    const GramMatrix spec_gram =
        gram_self(set, KernelConfig{0.9, Weighting::q_spectrum(p_max), true});
    std::vector<double> self(set.size());
    for (std::size_t i = 0; i < set.size(); ++i)
        self[i] = stacked_gaussian_kernel(set.sequences[i], set.sequences[i], 0.9);
    for (std::size_t i = 0; i < set.size(); ++i)
        for (std::size_t j = 0; j < set.size(); ++j) {
            const double raw = stacked_gaussian_kernel(set.sequences[i], set.sequences[j], 0.9);
            const double normalized = raw / std::sqrt(self[i] * self[j]);
            CHECK(close_rel(spec_gram.at(i, j), normalized, 1e-12));
        }
}

TEST_CASE("kernel errors") {
    const auto a = seq1d({0.0, 1.0});
    FeatureSequence wrong;
    wrong.dim = 2;
    wrong.values = {0.0, 1.0};
    CHECK_THROWS_AS((void)spectrum_all_p(a, wrong, 1.0), Error);
    FeatureSequence empty;
    empty.dim = 1;
    CHECK_THROWS_AS((void)spectrum_all_p(a, empty, 1.0), Error);
    const KernelConfig bad_gamma{-1.0, Weighting::constant(), true};
    CHECK_THROWS_AS(bad_gamma.validate(), Error);
}
