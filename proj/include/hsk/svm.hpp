#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hsk/types.hpp"

namespace hsk {

// Soft-margin binary SVM over a precomputed kernel: dual variables times
// label for the support samples, plus the bias of the decision function
// f(x) = sum_k alpha_signed[k] * K(x, support[k]) + bias.
struct BinarySvm {
    std::vector<std::size_t> support;    // indices into the training samples
    std::vector<double> alpha_signed;    // alpha_i * y_i, |value| in (0, C]
    double bias = 0.0;
    double C = 1.0;
};

// Trains on a 2-class kernel submatrix with labels +1/-1. Sequential minimal
// optimization with max-violating-pair selection, stopping when the largest
// KKT violation drops to tol. Deterministic: ties in the working-set scan go
// to the smallest index.
BinarySvm train_binary(const GramMatrix& gram, const std::vector<int>& y, double C,
                       double tol = 1e-3);

// Largest KKT violation of a trained machine; at most tol after training.
double kkt_residual(const BinarySvm& svm, const GramMatrix& gram,
                    const std::vector<int>& y);

// Dual objective value sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij.
double dual_objective(const BinarySvm& svm, const GramMatrix& gram,
                      const std::vector<int>& y);

// One-against-one multiclass model over a training Gram matrix.
struct SvmModel {
    struct Machine {
        int pos_class = 0;                  // mapped to label +1
        int neg_class = 0;                  // mapped to label -1
        std::vector<std::size_t> support;   // indices into sample_ids
        std::vector<double> alpha_signed;
        double bias = 0.0;
    };

    std::vector<int> classes;               // ascending
    std::vector<std::string> sample_ids;    // training order, = gram ids
    double C = 1.0;
    double tol = 1e-3;
    std::vector<Machine> machines;          // one per unordered class pair
};

// Trains C(C-1)/2 binary machines, one per class pair, each on the Gram
// submatrix of that pair's samples. Labels must contain >= 2 classes.
SvmModel train_one_vs_one(const GramMatrix& gram, const std::vector<int>& labels,
                          double C, double tol = 1e-3);

// Majority vote over the binary machines; ties go to the smallest class id.
// The rectangular test-by-train matrix columns must line up with the model's
// training samples (checked by id).
std::vector<int> predict(const SvmModel& model, const GramMatrix& test_by_train);

// Decision value of one machine for one row of a test-by-train matrix.
double decision_value(const SvmModel::Machine& machine, const GramMatrix& test_by_train,
                      std::size_t row);

// Versioned text format, numbers printed with full round-trip precision.
void save_model(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_model(const std::filesystem::path& path);

} // namespace hsk
