#pragma once

#include <span>
#include <vector>

#include "fpe/matrix.hpp"

namespace fpe {

/// G = W1^T W1 (d x d), symmetric positive semidefinite.
Matrix gram_matrix(const Matrix& w1);

/// Capacity of input feature i: (c_i . c_i)^2 / sum_j (c_i . c_j)^2 over the
/// columns c of W. Zero columns get capacity 0. Each value lies in [0, 1].
std::vector<double> feature_capacity(const Matrix& w);

/// Sum of the per-feature capacities; bounded by min(h, d).
double total_capacity(const Matrix& w);

/// Mean over feature capacities of each clause's k columns.
std::vector<double> clause_capacity(const std::vector<double>& per_feature, std::size_t k);

/// Mean cosine similarity over unordered pairs of distinct neuron rows.
/// Zero rows contribute similarity 0; fewer than two rows gives 0.
double mean_pairwise_cosine(const Matrix& w1);

/// (fpe - dense) / dense.
double relative_improvement(double fpe_acc, double dense_acc);

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p_two_sided = 1.0;
};

/// Welch two-sample t statistic with Welch-Satterthwaite degrees of freedom
/// and a two-sided p-value from the t distribution.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct MetricsReport {
    double total_capacity = 0.0;
    std::vector<double> per_feature_capacity;
    std::vector<double> clause_capacity;  // empty unless a clause size is known
    double mean_cosine = 0.0;
    Matrix gram;
    double accuracy_per_parameter = 0.0;
};

}  // namespace fpe
