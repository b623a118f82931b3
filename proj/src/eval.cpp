#include "hsk/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <set>

#include "hsk/error.hpp"
#include "hsk/rng.hpp"
#include "hsk/svm.hpp"

namespace hsk {

namespace {

// Distinct stream offsets so split and fold shuffles never share a sequence.
constexpr std::uint64_t kFoldSeedSalt = 0x5f0c5e6db3a1c64dULL;

std::vector<int> sorted_classes(const std::vector<std::uint16_t>& labels) {
    std::set<int> s;
    for (std::uint16_t l : labels)
        if (l != 0) s.insert(l);
    return {s.begin(), s.end()};
}

GramMatrix square_subgram(const GramMatrix& gram, const std::vector<std::size_t>& idx) {
    GramMatrix sub;
    sub.rows = sub.cols = idx.size();
    sub.entries.resize(idx.size() * idx.size());
    sub.row_ids.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        sub.row_ids[i] = gram.row_ids[idx[i]];
        for (std::size_t j = 0; j < idx.size(); ++j)
            sub.at(i, j) = gram.at(idx[i], idx[j]);
    }
    sub.col_ids = sub.row_ids;
    return sub;
}

GramMatrix rect_subgram(const GramMatrix& gram, const std::vector<std::size_t>& row_idx,
                        const std::vector<std::size_t>& col_idx) {
    GramMatrix sub;
    sub.rows = row_idx.size();
    sub.cols = col_idx.size();
    sub.entries.resize(sub.rows * sub.cols);
    sub.row_ids.resize(sub.rows);
    sub.col_ids.resize(sub.cols);
    for (std::size_t j = 0; j < col_idx.size(); ++j) sub.col_ids[j] = gram.row_ids[col_idx[j]];
    for (std::size_t i = 0; i < row_idx.size(); ++i) {
        sub.row_ids[i] = gram.row_ids[row_idx[i]];
        for (std::size_t j = 0; j < col_idx.size(); ++j)
            sub.at(i, j) = gram.at(row_idx[i], col_idx[j]);
    }
    return sub;
}

} // namespace

Split split_indices(const std::vector<std::uint16_t>& labels, const SplitSpec& spec) {
    if (spec.n_per_class < 1) throw Error("n_per_class must be >= 1");
    const std::vector<int> classes = sorted_classes(labels);
    if (classes.empty()) throw Error("no labeled samples to split");

    Rng rng(spec.seed);
    Split split;
    for (const int cls : classes) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) members.push_back(i);
        if (members.size() < 2)
            throw Error("class " + std::to_string(cls) + " has fewer than 2 samples");
        std::size_t n_train = spec.n_per_class;
        if (spec.half_class_rule && members.size() < 2 * spec.n_per_class)
            n_train = members.size() / 2;
        n_train = std::min(n_train, members.size());
        rng.shuffle(members);
        split.train.insert(split.train.end(), members.begin(), members.begin() + n_train);
        split.test.insert(split.test.end(), members.begin() + n_train, members.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

Split sample_split(const LabelRaster& labels, const SplitSpec& spec) {
    labels.validate();
    std::vector<std::uint16_t> flat;
    for (std::uint16_t l : labels.labels)
        if (l != 0) flat.push_back(l);
    return split_indices(flat, spec);
}

SequenceSet subset(const SequenceSet& set, const std::vector<std::size_t>& indices) {
    SequenceSet out;
    out.dim = set.dim;
    out.sequences.reserve(indices.size());
    out.ids.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        out.sequences.push_back(set.sequences[i]);
        out.ids.push_back(set.ids[i]);
        out.labels.push_back(set.labels[i]);
    }
    return out;
}

namespace {

// Stratified fold assignment; classes smaller than the fold count occupy the
// first folds only.
std::vector<std::size_t> assign_folds(const std::vector<std::uint16_t>& labels,
                                      std::size_t folds, std::uint64_t seed) {
    std::vector<std::size_t> fold_of(labels.size(), 0);
    Rng rng(seed);
    for (const int cls : sorted_classes(labels)) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) members.push_back(i);
        if (members.size() < folds)
            std::cerr << "warning: class " << cls << " has only " << members.size()
                      << " samples for " << folds << "-fold cross-validation\n";
        rng.shuffle(members);
        for (std::size_t k = 0; k < members.size(); ++k) fold_of[members[k]] = k % folds;
    }
    return fold_of;
}

} // namespace

CvChoice cross_validate(const SequenceSet& train_set, const CvGrid& grid, std::size_t folds,
                        std::uint64_t seed, double tol, unsigned threads) {
    if (grid.gammas.empty() || grid.Cs.empty() || grid.weightings.empty())
        throw Error("cross-validation grid must not be empty");
    if (folds < 2) throw Error("cross-validation requires at least 2 folds");
    for (const auto& w : grid.weightings) w.validate();

    const std::vector<std::size_t> fold_of = assign_folds(train_set.labels, folds, seed);

    std::vector<double> gammas = grid.gammas;
    std::vector<double> Cs = grid.Cs;
    std::sort(gammas.begin(), gammas.end());
    std::sort(Cs.begin(), Cs.end());

    bool have_best = false;
    CvChoice best;
    std::size_t best_w_rank = 0;
    for (const double gamma : gammas) {
        const SelfPerPTable table = build_self_per_p(train_set, gamma, threads);
        for (std::size_t w_rank = 0; w_rank < grid.weightings.size(); ++w_rank) {
            const Weighting& weighting = grid.weightings[w_rank];
            const GramMatrix full = gram_from_table(table, train_set, weighting, true);
            for (const double C : Cs) {
                double accuracy_sum = 0.0;
                std::size_t scored_folds = 0;
                for (std::size_t f = 0; f < folds; ++f) {
                    std::vector<std::size_t> tr, va;
                    for (std::size_t i = 0; i < fold_of.size(); ++i)
                        (fold_of[i] == f ? va : tr).push_back(i);
                    if (va.empty()) continue;
                    std::set<int> tr_classes;
                    for (std::size_t i : tr) tr_classes.insert(train_set.labels[i]);
                    if (tr_classes.size() < 2) continue;

                    std::vector<int> tr_labels, va_labels;
                    for (std::size_t i : tr) tr_labels.push_back(train_set.labels[i]);
                    for (std::size_t i : va) va_labels.push_back(train_set.labels[i]);
                    const SvmModel model =
                        train_one_vs_one(square_subgram(full, tr), tr_labels, C, tol);
                    const std::vector<int> pred = predict(model, rect_subgram(full, va, tr));
                    std::size_t correct = 0;
                    for (std::size_t i = 0; i < va.size(); ++i)
                        if (pred[i] == va_labels[i]) ++correct;
                    accuracy_sum += static_cast<double>(correct) / static_cast<double>(va.size());
                    ++scored_folds;
                }
                if (scored_folds == 0) continue;
                const double mean_accuracy = accuracy_sum / static_cast<double>(scored_folds);
                // Preference order: accuracy, then smaller gamma, then
                // smaller C, then the earlier weighting.
                const bool better =
                    !have_best || mean_accuracy > best.mean_accuracy ||
                    (mean_accuracy == best.mean_accuracy &&
                     (gamma < best.gamma ||
                      (gamma == best.gamma &&
                       (C < best.C || (C == best.C && w_rank < best_w_rank)))));
                if (better) {
                    have_best = true;
                    best = {gamma, C, weighting, mean_accuracy};
                    best_w_rank = w_rank;
                }
            }
        }
    }
    if (!have_best) throw Error("cross-validation could not score any fold");
    return best;
}

Metrics compute_metrics(const std::vector<int>& predicted, const std::vector<int>& truth,
                        std::vector<int> classes) {
    if (predicted.size() != truth.size()) throw Error("prediction/truth length mismatch");
    if (predicted.empty()) throw Error("cannot compute metrics on empty input");
    if (classes.empty()) {
        std::set<int> s(truth.begin(), truth.end());
        s.insert(predicted.begin(), predicted.end());
        classes.assign(s.begin(), s.end());
    }
    std::map<int, std::size_t> index;
    for (std::size_t i = 0; i < classes.size(); ++i) index[classes[i]] = i;

    Metrics m;
    m.classes = classes;
    const std::size_t k = classes.size();
    m.confusion.assign(k * k, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto t = index.find(truth[i]);
        const auto p = index.find(predicted[i]);
        if (t == index.end() || p == index.end())
            throw Error("label outside the class universe: " +
                        std::to_string(t == index.end() ? truth[i] : predicted[i]));
        m.confusion[t->second * k + p->second] += 1;
    }

    const double total = static_cast<double>(truth.size());
    double diag = 0.0;
    double chance = 0.0;
    double recall_sum = 0.0;
    std::size_t scored_classes = 0;
    m.per_class_accuracy.assign(k, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < k; ++c) {
        diag += static_cast<double>(m.confusion[c * k + c]);
        std::size_t row_sum = 0, col_sum = 0;
        for (std::size_t j = 0; j < k; ++j) {
            row_sum += m.confusion[c * k + j];
            col_sum += m.confusion[j * k + c];
        }
        chance += static_cast<double>(row_sum) * static_cast<double>(col_sum) / (total * total);
        if (row_sum > 0) {
            m.per_class_accuracy[c] =
                static_cast<double>(m.confusion[c * k + c]) / static_cast<double>(row_sum);
            recall_sum += m.per_class_accuracy[c];
            ++scored_classes;
        }
    }
    m.oa = diag / total;
    m.aa = scored_classes > 0 ? recall_sum / static_cast<double>(scored_classes) : 0.0;
    if (std::abs(1.0 - chance) < 1e-15)
        m.kappa = m.oa >= 1.0 ? 1.0 : 0.0;
    else
        m.kappa = (m.oa - chance) / (1.0 - chance);
    return m;
}

const char* method_name(Method method) {
    switch (method) {
        case Method::PixelOnly: return "pixel-only";
        case Method::Stacked: return "stacked";
        case Method::SpectrumConstant: return "spectrum-c";
        case Method::SpectrumQ: return "spectrum-q";
        case Method::SpectrumLambda: return "spectrum-lambda";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    if (name == "pixel-only" || name == "pixel") return Method::PixelOnly;
    if (name == "stacked") return Method::Stacked;
    if (name == "spectrum-c" || name == "spectrum-const") return Method::SpectrumConstant;
    if (name == "spectrum-q") return Method::SpectrumQ;
    if (name == "spectrum-lambda" || name == "spectrum-l") return Method::SpectrumLambda;
    throw Error("unknown method '" + name + "'");
}

ExperimentGrid ExperimentGrid::defaults() {
    ExperimentGrid g;
    for (int e = -6; e <= 4; ++e) g.gammas.push_back(std::ldexp(1.0, e));
    for (int e = -2; e <= 10; ++e) g.Cs.push_back(std::ldexp(1.0, e));
    for (int i = 1; i <= 9; ++i) g.lambdas.push_back(0.1 * i);
    return g;
}

namespace {

SequenceSet truncate_to_pixel(const SequenceSet& set) {
    SequenceSet out;
    out.dim = set.dim;
    out.ids = set.ids;
    out.labels = set.labels;
    out.sequences.reserve(set.size());
    for (const auto& s : set.sequences) {
        FeatureSequence t;
        t.dim = s.dim;
        t.values.assign(s.values.begin(), s.values.begin() + static_cast<std::ptrdiff_t>(s.dim));
        out.sequences.push_back(std::move(t));
    }
    return out;
}

std::vector<Weighting> method_weightings(Method method, const ExperimentGrid& grid,
                                         std::size_t p_max) {
    std::vector<Weighting> w;
    switch (method) {
        case Method::PixelOnly:
        case Method::SpectrumConstant:
            w.push_back(Weighting::constant());
            break;
        case Method::Stacked:
            w.push_back(Weighting::q_spectrum(p_max));
            break;
        case Method::SpectrumQ:
            if (grid.qs.empty())
                for (std::size_t q = 1; q <= p_max; ++q) w.push_back(Weighting::q_spectrum(q));
            else
                for (std::size_t q : grid.qs) w.push_back(Weighting::q_spectrum(q));
            break;
        case Method::SpectrumLambda:
            for (double l : grid.lambdas) w.push_back(Weighting::decay(l));
            break;
    }
    if (w.empty()) throw Error("method has an empty weighting grid");
    return w;
}

Summary summarize(const std::vector<double>& values) {
    Summary s;
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

} // namespace

ExperimentResult run_experiment(const SequenceSet& labeled, const SplitSpec& split_spec,
                                std::size_t repetitions, const ExperimentGrid& grid,
                                Method method, std::size_t folds, double tol,
                                unsigned threads) {
    if (repetitions < 1) throw Error("repetitions must be >= 1");
    labeled.validate();

    SequenceSet truncated;
    const SequenceSet* working = &labeled;
    if (method == Method::PixelOnly) {
        truncated = truncate_to_pixel(labeled);
        working = &truncated;
    }
    std::size_t p_max = working->sequences.front().length();
    for (const auto& s : working->sequences) p_max = std::min(p_max, s.length());

    const std::vector<Weighting> weightings = method_weightings(method, grid, p_max);
    const std::vector<int> class_universe = sorted_classes(working->labels);

    ExperimentResult result;
    result.method = method;
    std::vector<double> oas, aas, kappas;
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
        const std::uint64_t rep_seed = split_spec.seed + rep;
        SplitSpec rep_spec = split_spec;
        rep_spec.seed = rep_seed;
        const Split split = split_indices(working->labels, rep_spec);

        SequenceSet train = subset(*working, split.train);
        SequenceSet test = subset(*working, split.test);
        const FeatureScaler scaler = fit_feature_scaler(train);
        scaler.apply(train);
        scaler.apply(test);

        const CvGrid cv_grid{grid.gammas, grid.Cs, weightings};
        const CvChoice choice =
            cross_validate(train, cv_grid, folds, rep_seed ^ kFoldSeedSalt, tol, threads);

        const KernelConfig config{choice.gamma, choice.weighting, true};
        const GramMatrix train_gram = gram_self(train, config, threads);
        std::vector<int> train_labels(train.labels.begin(), train.labels.end());
        const SvmModel model = train_one_vs_one(train_gram, train_labels, choice.C, tol);

        const GramMatrix test_gram = gram_cross(test, train, config, threads);
        const std::vector<int> predicted = predict(model, test_gram);
        std::vector<int> truth(test.labels.begin(), test.labels.end());

        RepetitionResult rr;
        rr.metrics = compute_metrics(predicted, truth, class_universe);
        rr.choice = choice;
        oas.push_back(rr.metrics.oa);
        aas.push_back(rr.metrics.aa);
        kappas.push_back(rr.metrics.kappa);
        result.repetitions.push_back(std::move(rr));
    }
    result.oa = summarize(oas);
    result.aa = summarize(aas);
    result.kappa = summarize(kappas);
    return result;
}

ExperimentResult run_experiment(const HyperCube& cube, const Hierarchy& hierarchy,
                                const LabelRaster& labels, const SplitSpec& split_spec,
                                std::size_t repetitions, const ExperimentGrid& grid,
                                Method method, std::size_t folds, double tol,
                                unsigned threads) {
    const SequenceSet labeled = extract_labeled_sequences(hierarchy, cube, labels);
    return run_experiment(labeled, split_spec, repetitions, grid, method, folds, tol, threads);
}

} // namespace hsk
