#pragma once

#include <cstdint>
#include <string>

namespace fpe {

/// Exact probability as a reduced big-integer fraction plus its nearest
/// double. No floating-point intermediates enter the fraction.
struct ExactProb {
    std::string numerator;
    std::string denominator;
    double value = 0.0;
};

/// p = C(m-k, d-k) / C(m, d): one sparse neuron of degree d covers a fixed
/// k-literal clause. Zero when d < k.
ExactProb coverage_prob_exact(std::size_t m, std::size_t k, std::size_t d);

/// Paper approximation p ~ (d/m)^k = (1/alpha)^k.
double coverage_prob_approx(std::size_t alpha, std::size_t k);

/// 1 - C * (1-p)^(alpha*r), clamped to [0, 1].
double coverage_lower_bound(double p, std::size_t alpha, std::size_t r,
                            std::size_t num_clauses);

/// alpha^(k-1) * ln(C / epsilon): neurons needed for coverage within epsilon.
double min_neurons_for_coverage(std::size_t alpha, std::size_t k, std::size_t num_clauses,
                                double epsilon);

/// p' = C(m-2k, d-2k) / C(m, d): one neuron covers two disjoint clauses.
/// Zero when d < 2k. Requires 2k <= m.
ExactProb pair_collision_prob_exact(std::size_t m, std::size_t k, std::size_t d);

/// Exact collision ratio E_FPE / E_dense = alpha * p'.
double interference_ratio(std::size_t alpha, double p_prime);

/// Paper approximation of the same ratio, alpha^-(2k-1).
double approx_interference_ratio(std::size_t alpha, std::size_t k);

struct CollisionExpectation {
    double dense = 0.0;  // r * C(C,2)
    double fpe = 0.0;    // alpha * r * C(C,2) * p'
};
CollisionExpectation expected_collisions(std::size_t r, std::size_t num_clauses,
                                         std::size_t alpha, double p_prime);

struct TheoryParams {
    std::size_t num_literals = 0;  // m
    std::size_t clause_size = 0;   // k
    std::size_t num_clauses = 0;   // C (clauses occupy disjoint k-blocks)
    std::size_t dense_neurons = 0; // r
    std::size_t alpha = 1;
    std::size_t degree = 0;        // d; 0 means m / alpha (requires alpha | m)
    double epsilon = 0.01;

    std::size_t effective_degree() const;
    void validate() const;
};

struct MonteCarloResult {
    std::size_t trials = 0;
    double coverage_all_rate = 0.0;  // fraction of trials covering every clause
    double coverage_all_se = 0.0;
    double mean_collisions = 0.0;    // mean (neuron, clause-pair) collision count
    double collisions_se = 0.0;
    double clause_miss_rate = 0.0;   // mean per-clause miss fraction
    double clause_miss_se = 0.0;
};

/// Sample alpha*r supports of size d (without replacement within a neuron,
/// independent across neurons) per trial and measure coverage and collisions.
MonteCarloResult monte_carlo(const TheoryParams& params, std::size_t trials,
                             std::uint64_t seed);

}  // namespace fpe
