#include "hsk/svm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "hsk/error.hpp"
#include "hsk/io.hpp"

namespace hsk {

namespace {

constexpr double kTau = 1e-12; // curvature floor for near-singular pairs

struct SmoState {
    const GramMatrix& k;
    const std::vector<int>& y;
    double C;
    std::vector<double> alpha;
    std::vector<double> grad; // gradient of the minimized objective

    bool in_up(std::size_t t) const {
        return (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0.0);
    }
    bool in_low(std::size_t t) const {
        return (y[t] < 0 && alpha[t] < C) || (y[t] > 0 && alpha[t] > 0.0);
    }
    double q(std::size_t i, std::size_t j) const {
        return y[i] * y[j] * k.at(i, j);
    }
    // 1/2 a'Qa - e'a, in O(n) from the maintained gradient.
    double objective() const {
        double ag = 0.0, asum = 0.0;
        for (std::size_t t = 0; t < alpha.size(); ++t) {
            ag += alpha[t] * grad[t];
            asum += alpha[t];
        }
        return 0.5 * (ag - asum);
    }
};

} // namespace

BinarySvm train_binary(const GramMatrix& gram, const std::vector<int>& y, double C,
                       double tol) {
    if (gram.rows != gram.cols) throw Error("training requires a square gram matrix");
    const std::size_t n = gram.rows;
    if (y.size() != n) throw Error("label count does not match gram size");
    if (!(C > 0.0) || !std::isfinite(C)) throw Error("C must be positive and finite");
    if (!(tol > 0.0)) throw Error("tol must be positive");
    bool has_pos = false, has_neg = false;
    for (int v : y) {
        if (v == 1) has_pos = true;
        else if (v == -1) has_neg = true;
        else throw Error("binary labels must be +1 or -1");
    }
    if (!has_pos || !has_neg) throw Error("single-class input: both labels must be present");
    for (double v : gram.entries)
        if (!std::isfinite(v)) throw Error("non-finite gram entry");

    SmoState s{gram, y, C, std::vector<double>(n, 0.0), std::vector<double>(n, -1.0)};

    const std::size_t max_iter = std::max<std::size_t>(100000, 100 * n);
    double prev_objective = s.objective();
    std::size_t iter = 0;
    for (; iter < max_iter; ++iter) {
        // Max-violating pair.
        double up_best = -std::numeric_limits<double>::infinity();
        double low_best = std::numeric_limits<double>::infinity();
        std::size_t i = n, j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -y[t] * s.grad[t];
            if (s.in_up(t) && v > up_best) {
                up_best = v;
                i = t;
            }
            if (s.in_low(t) && v < low_best) {
                low_best = v;
                j = t;
            }
        }
        if (i == n || j == n || up_best - low_best <= tol) break;

        const double old_ai = s.alpha[i];
        const double old_aj = s.alpha[j];
        double& ai = s.alpha[i];
        double& aj = s.alpha[j];

        if (y[i] != y[j]) {
            double quad = gram.at(i, i) + gram.at(j, j) + 2.0 * s.q(i, j);
            if (quad <= 0.0) quad = kTau;
            const double delta = (-s.grad[i] - s.grad[j]) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) {
                    aj = 0.0;
                    ai = diff;
                }
            } else {
                if (ai < 0.0) {
                    ai = 0.0;
                    aj = -diff;
                }
            }
            if (diff > 0.0) {
                if (ai > C) {
                    ai = C;
                    aj = C - diff;
                }
            } else {
                if (aj > C) {
                    aj = C;
                    ai = C + diff;
                }
            }
        } else {
            double quad = gram.at(i, i) + gram.at(j, j) - 2.0 * s.q(i, j);
            if (quad <= 0.0) quad = kTau;
            const double delta = (s.grad[i] - s.grad[j]) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > C) {
                if (ai > C) {
                    ai = C;
                    aj = sum - C;
                }
            } else {
                if (aj < 0.0) {
                    aj = 0.0;
                    ai = sum;
                }
            }
            if (sum > C) {
                if (aj > C) {
                    aj = C;
                    ai = sum - C;
                }
            } else {
                if (ai < 0.0) {
                    ai = 0.0;
                    aj = sum;
                }
            }
        }

        const double dai = ai - old_ai;
        const double daj = aj - old_aj;
        if (dai == 0.0 && daj == 0.0) break; // numerically stuck
        for (std::size_t t = 0; t < n; ++t)
            s.grad[t] += s.q(t, i) * dai + s.q(t, j) * daj;

        const double objective = s.objective();
        if (objective > prev_objective + 1e-9 * (1.0 + std::abs(prev_objective)))
            throw Error("SMO objective increased; the kernel matrix is badly conditioned");
        prev_objective = objective;
    }
    if (iter == max_iter)
        std::cerr << "warning: SMO hit the iteration limit before reaching tol\n";

    // Bias from free support vectors; fall back to the violation midpoint.
    double free_sum = 0.0;
    std::size_t free_count = 0;
    double up_best = -std::numeric_limits<double>::infinity();
    double low_best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
        const double v = -y[t] * s.grad[t];
        if (s.alpha[t] > 0.0 && s.alpha[t] < C) {
            free_sum += v;
            ++free_count;
        }
        if (s.in_up(t)) up_best = std::max(up_best, v);
        if (s.in_low(t)) low_best = std::min(low_best, v);
    }

    BinarySvm svm;
    svm.C = C;
    svm.bias = free_count > 0 ? free_sum / static_cast<double>(free_count)
                              : 0.5 * (up_best + low_best);
    for (std::size_t t = 0; t < n; ++t)
        if (s.alpha[t] > 0.0) {
            svm.support.push_back(t);
            svm.alpha_signed.push_back(s.alpha[t] * y[t]);
        }
    return svm;
}

double kkt_residual(const BinarySvm& svm, const GramMatrix& gram,
                    const std::vector<int>& y) {
    const std::size_t n = gram.rows;
    std::vector<double> alpha(n, 0.0);
    for (std::size_t s = 0; s < svm.support.size(); ++s)
        alpha[svm.support[s]] = svm.alpha_signed[s] * y[svm.support[s]];
    double worst = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        double f = svm.bias;
        for (std::size_t s = 0; s < svm.support.size(); ++s)
            f += svm.alpha_signed[s] * gram.at(t, svm.support[s]);
        const double margin = y[t] * f;
        double violation = 0.0;
        if (alpha[t] <= 0.0)
            violation = std::max(0.0, 1.0 - margin);
        else if (alpha[t] >= svm.C)
            violation = std::max(0.0, margin - 1.0);
        else
            violation = std::abs(margin - 1.0);
        worst = std::max(worst, violation);
    }
    return worst;
}

double dual_objective(const BinarySvm& svm, const GramMatrix& gram,
                      const std::vector<int>& y) {
    (void)y;
    double sum_alpha = 0.0;
    for (double a : svm.alpha_signed) sum_alpha += std::abs(a);
    double quad = 0.0;
    for (std::size_t a = 0; a < svm.support.size(); ++a)
        for (std::size_t b = 0; b < svm.support.size(); ++b)
            quad += svm.alpha_signed[a] * svm.alpha_signed[b] *
                    gram.at(svm.support[a], svm.support[b]);
    return sum_alpha - 0.5 * quad;
}

SvmModel train_one_vs_one(const GramMatrix& gram, const std::vector<int>& labels,
                          double C, double tol) {
    if (gram.rows != gram.cols) throw Error("training requires a square gram matrix");
    if (labels.size() != gram.rows) throw Error("label count does not match gram size");
    std::set<int> class_set(labels.begin(), labels.end());
    if (class_set.size() < 2) throw Error("training requires at least 2 classes");

    SvmModel model;
    model.classes.assign(class_set.begin(), class_set.end());
    model.sample_ids = gram.row_ids;
    model.C = C;
    model.tol = tol;

    for (std::size_t a = 0; a < model.classes.size(); ++a)
        for (std::size_t b = a + 1; b < model.classes.size(); ++b) {
            const int pos = model.classes[a], neg = model.classes[b];
            std::vector<std::size_t> subset;
            std::vector<int> y;
            for (std::size_t t = 0; t < labels.size(); ++t)
                if (labels[t] == pos || labels[t] == neg) {
                    subset.push_back(t);
                    y.push_back(labels[t] == pos ? 1 : -1);
                }
            GramMatrix sub;
            sub.rows = sub.cols = subset.size();
            sub.entries.resize(subset.size() * subset.size());
            sub.row_ids.resize(subset.size());
            for (std::size_t i = 0; i < subset.size(); ++i) {
                sub.row_ids[i] = gram.row_ids[subset[i]];
                for (std::size_t j = 0; j < subset.size(); ++j)
                    sub.at(i, j) = gram.at(subset[i], subset[j]);
            }
            sub.col_ids = sub.row_ids;

            const BinarySvm bin = train_binary(sub, y, C, tol);
            SvmModel::Machine machine;
            machine.pos_class = pos;
            machine.neg_class = neg;
            machine.bias = bin.bias;
            machine.alpha_signed = bin.alpha_signed;
            for (std::size_t s : bin.support) machine.support.push_back(subset[s]);
            model.machines.push_back(std::move(machine));
        }
    return model;
}

double decision_value(const SvmModel::Machine& machine, const GramMatrix& test_by_train,
                      std::size_t row) {
    double f = machine.bias;
    for (std::size_t s = 0; s < machine.support.size(); ++s)
        f += machine.alpha_signed[s] * test_by_train.at(row, machine.support[s]);
    return f;
}

std::vector<int> predict(const SvmModel& model, const GramMatrix& test_by_train) {
    if (test_by_train.cols != model.sample_ids.size() ||
        test_by_train.col_ids != model.sample_ids)
        throw Error("gram columns are misaligned with the model's training samples");
    std::vector<int> out(test_by_train.rows);
    for (std::size_t r = 0; r < test_by_train.rows; ++r) {
        std::map<int, int> votes;
        for (int c : model.classes) votes[c] = 0;
        for (const auto& machine : model.machines) {
            const double f = decision_value(machine, test_by_train, r);
            votes[f > 0.0 ? machine.pos_class : machine.neg_class] += 1;
        }
        int best_class = model.classes.front();
        int best_votes = -1;
        for (int c : model.classes)
            if (votes[c] > best_votes) { // strict: ties stay with the smaller id
                best_votes = votes[c];
                best_class = c;
            }
        out[r] = best_class;
    }
    return out;
}

void save_model(const SvmModel& model, const std::filesystem::path& path) {
    const auto fmt = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    atomic_write(path, [&](std::ostream& os) {
        os << "HSKM 1\n";
        os << "C " << fmt(model.C) << "\n";
        os << "tol " << fmt(model.tol) << "\n";
        os << "classes " << model.classes.size();
        for (int c : model.classes) os << " " << c;
        os << "\n";
        os << "samples " << model.sample_ids.size() << "\n";
        for (const auto& id : model.sample_ids) os << id << "\n";
        for (const auto& m : model.machines) {
            os << "machine " << m.pos_class << " " << m.neg_class << " bias " << fmt(m.bias)
               << " support " << m.support.size() << "\n";
            for (std::size_t s = 0; s < m.support.size(); ++s)
                os << model.sample_ids[m.support[s]] << " " << fmt(m.alpha_signed[s]) << "\n";
        }
    });
}

SvmModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file '" + path.string() + "'");
    const std::string ctx = "'" + path.string() + "': ";
    std::string line;
    if (!std::getline(in, line) || line != "HSKM 1")
        throw IoError(ctx + "malformed header, expected 'HSKM 1'");

    SvmModel model;
    std::string key;
    in >> key;
    if (key != "C") throw IoError(ctx + "expected 'C'");
    in >> model.C;
    in >> key;
    if (key != "tol") throw IoError(ctx + "expected 'tol'");
    in >> model.tol;
    std::size_t n_classes = 0;
    in >> key >> n_classes;
    if (key != "classes" || n_classes < 2) throw IoError(ctx + "malformed class list");
    model.classes.resize(n_classes);
    for (auto& c : model.classes) in >> c;
    std::size_t n_samples = 0;
    in >> key >> n_samples;
    if (key != "samples") throw IoError(ctx + "expected 'samples'");
    std::getline(in, line);
    std::unordered_map<std::string, std::size_t> index;
    model.sample_ids.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        if (!std::getline(in, line) || line.empty())
            throw IoError(ctx + "truncated sample id list");
        index[line] = i;
        model.sample_ids.push_back(line);
    }
    while (in >> key) {
        if (key != "machine") throw IoError(ctx + "expected 'machine'");
        SvmModel::Machine m;
        std::size_t n_support = 0;
        in >> m.pos_class >> m.neg_class >> key;
        if (key != "bias") throw IoError(ctx + "expected 'bias'");
        in >> m.bias >> key >> n_support;
        if (key != "support") throw IoError(ctx + "expected 'support'");
        std::getline(in, line);
        for (std::size_t s = 0; s < n_support; ++s) {
            if (!std::getline(in, line)) throw IoError(ctx + "truncated support list");
            const auto space = line.rfind(' ');
            if (space == std::string::npos) throw IoError(ctx + "malformed support entry");
            const std::string id = line.substr(0, space);
            const auto it = index.find(id);
            if (it == index.end()) throw IoError(ctx + "unknown support sample '" + id + "'");
            m.support.push_back(it->second);
            m.alpha_signed.push_back(std::stod(line.substr(space + 1)));
        }
        model.machines.push_back(std::move(m));
    }
    if (!in.eof() && in.fail()) throw IoError(ctx + "malformed model file");
    return model;
}

} // namespace hsk
