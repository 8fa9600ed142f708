#include "fpe/theory_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include <gmpxx.h>

#include "fpe/rng.hpp"

namespace fpe {

namespace {

mpz_class binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    mpz_class result;
    mpz_bin_uiui(result.get_mpz_t(), static_cast<unsigned long>(n),
                 static_cast<unsigned long>(k));
    return result;
}

ExactProb make_prob(const mpz_class& num, const mpz_class& den) {
    mpq_class q(num, den);
    q.canonicalize();
    ExactProb p;
    p.numerator = q.get_num().get_str();
    p.denominator = q.get_den().get_str();
    p.value = q.get_d();
    return p;
}

}  // namespace

ExactProb coverage_prob_exact(std::size_t m, std::size_t k, std::size_t d) {
    if (k > m || d > m)
        throw std::invalid_argument("coverage_prob_exact: need k <= m and d <= m");
    if (d < k) return {"0", "1", 0.0};
    return make_prob(binomial(m - k, d - k), binomial(m, d));
}

double coverage_prob_approx(std::size_t alpha, std::size_t k) {
    return std::pow(1.0 / static_cast<double>(alpha), static_cast<double>(k));
}

double coverage_lower_bound(double p, std::size_t alpha, std::size_t r,
                            std::size_t num_clauses) {
    if (p < 0.0 || p > 1.0)
        throw std::invalid_argument("coverage_lower_bound: p must lie in [0, 1]");
    const double miss = static_cast<double>(num_clauses) *
                        std::pow(1.0 - p, static_cast<double>(alpha * r));
    return std::clamp(1.0 - miss, 0.0, 1.0);
}

double min_neurons_for_coverage(std::size_t alpha, std::size_t k, std::size_t num_clauses,
                                double epsilon) {
    if (epsilon <= 0.0 || epsilon >= 1.0)
        throw std::invalid_argument("min_neurons_for_coverage: epsilon must lie in (0, 1)");
    if (num_clauses == 0)
        throw std::invalid_argument("min_neurons_for_coverage: need at least one clause");
    return std::pow(static_cast<double>(alpha), static_cast<double>(k - 1)) *
           std::log(static_cast<double>(num_clauses) / epsilon);
}

ExactProb pair_collision_prob_exact(std::size_t m, std::size_t k, std::size_t d) {
    if (2 * k > m)
        throw std::invalid_argument("pair_collision_prob_exact: disjoint clauses need 2k <= m");
    if (d > m) throw std::invalid_argument("pair_collision_prob_exact: need d <= m");
    if (d < 2 * k) return {"0", "1", 0.0};
    return make_prob(binomial(m - 2 * k, d - 2 * k), binomial(m, d));
}

double interference_ratio(std::size_t alpha, double p_prime) {
    return static_cast<double>(alpha) * p_prime;
}

double approx_interference_ratio(std::size_t alpha, std::size_t k) {
    return std::pow(static_cast<double>(alpha), -static_cast<double>(2 * k - 1));
}

CollisionExpectation expected_collisions(std::size_t r, std::size_t num_clauses,
                                         std::size_t alpha, double p_prime) {
    const double pairs = static_cast<double>(num_clauses) *
                         static_cast<double>(num_clauses - 1) / 2.0;
    CollisionExpectation e;
    e.dense = static_cast<double>(r) * pairs;
    e.fpe = static_cast<double>(alpha) * static_cast<double>(r) * pairs * p_prime;
    return e;
}

std::size_t TheoryParams::effective_degree() const {
    if (degree != 0) return degree;
    if (alpha == 0 || num_literals % alpha != 0)
        throw std::invalid_argument("TheoryParams: alpha must divide m when d is derived");
    return num_literals / alpha;
}

void TheoryParams::validate() const {
    if (num_literals == 0 || clause_size == 0)
        throw std::invalid_argument("TheoryParams: m and k must be positive");
    if (num_clauses * clause_size > num_literals)
        throw std::invalid_argument("TheoryParams: clauses must fit in m disjoint blocks");
    const std::size_t d = effective_degree();
    if (d == 0 || d > num_literals)
        throw std::invalid_argument("TheoryParams: degree must lie in [1, m]");
}

MonteCarloResult monte_carlo(const TheoryParams& params, std::size_t trials,
                             std::uint64_t seed) {
    params.validate();
    if (trials == 0) throw std::invalid_argument("monte_carlo: trials must be >= 1");
    const std::size_t m = params.num_literals;
    const std::size_t k = params.clause_size;
    const std::size_t c = params.num_clauses;
    const std::size_t d = params.effective_degree();
    const std::size_t neurons = params.alpha * params.dense_neurons;

    auto rng = make_rng(seed);
    std::vector<std::size_t> pool(m);
    std::vector<std::size_t> clause_hits(c);
    std::vector<char> support(m);

    double sum_cov = 0.0, sum_cov_sq = 0.0;
    double sum_col = 0.0, sum_col_sq = 0.0;
    double sum_miss = 0.0, sum_miss_sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        std::fill(clause_hits.begin(), clause_hits.end(), 0);
        std::size_t collisions = 0;
        for (std::size_t neuron = 0; neuron < neurons; ++neuron) {
            // Degree-d support, uniform without replacement within a neuron.
            std::iota(pool.begin(), pool.end(), 0);
            std::fill(support.begin(), support.end(), 0);
            for (std::size_t i = 0; i < d; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, m - 1);
                std::swap(pool[i], pool[pick(rng)]);
                support[pool[i]] = 1;
            }
            std::size_t covered = 0;
            for (std::size_t j = 0; j < c; ++j) {
                bool full = true;
                for (std::size_t i = j * k; i < (j + 1) * k; ++i) {
                    if (!support[i]) {
                        full = false;
                        break;
                    }
                }
                if (full) {
                    ++clause_hits[j];
                    ++covered;
                }
            }
            collisions += covered * (covered - 1) / 2;  // clause pairs in one neuron
        }
        std::size_t missed = 0;
        for (std::size_t j = 0; j < c; ++j) missed += (clause_hits[j] == 0);
        const double cov = (missed == 0) ? 1.0 : 0.0;
        const double col = static_cast<double>(collisions);
        const double miss = static_cast<double>(missed) / static_cast<double>(c);
        sum_cov += cov;
        sum_cov_sq += cov * cov;
        sum_col += col;
        sum_col_sq += col * col;
        sum_miss += miss;
        sum_miss_sq += miss * miss;
    }

    const double n = static_cast<double>(trials);
    auto stderr_of_mean = [n](double sum, double sum_sq) {
        if (n < 2) return 0.0;
        const double mean = sum / n;
        const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
        return std::sqrt(var / n);
    };
    MonteCarloResult r;
    r.trials = trials;
    r.coverage_all_rate = sum_cov / n;
    r.coverage_all_se = stderr_of_mean(sum_cov, sum_cov_sq);
    r.mean_collisions = sum_col / n;
    r.collisions_se = stderr_of_mean(sum_col, sum_col_sq);
    r.clause_miss_rate = sum_miss / n;
    r.clause_miss_se = stderr_of_mean(sum_miss, sum_miss_sq);
    return r;
}

}  // namespace fpe
