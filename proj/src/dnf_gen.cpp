#include "fpe/dnf_gen.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

#include "fpe/rng.hpp"

namespace fpe {

namespace {
constexpr int kMaxRejections = 10000;  // per negative sample
}

void DnfSpec::validate() const {
    if (clause_size == 0 || num_literals == 0)
        throw std::invalid_argument("DnfSpec: m and k must be positive");
    if (num_literals % clause_size != 0)
        throw std::invalid_argument("DnfSpec: k must divide m");
}

bool evaluate_dnf(std::span<const double> row, const DnfSpec& spec) {
    spec.validate();
    if (row.size() != spec.num_literals)
        throw std::invalid_argument("evaluate_dnf: row length != m");
    for (std::size_t j = 0; j < spec.num_clauses(); ++j) {
        bool satisfied = true;
        for (std::size_t i = j * spec.clause_size; i < (j + 1) * spec.clause_size; ++i) {
            if (row[i] == 0.0) {
                satisfied = false;
                break;
            }
        }
        if (satisfied) return true;
    }
    return false;
}

namespace {

// s distinct indices sampled uniformly from pool (partial Fisher-Yates).
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool,
                                                    std::size_t s, std::mt19937_64& rng) {
    for (std::size_t i = 0; i < s; ++i) {
        std::uniform_int_distribution<std::size_t> dist(i, pool.size() - 1);
        std::swap(pool[i], pool[dist(rng)]);
    }
    pool.resize(s);
    return pool;
}

void set_bits(Matrix& x, std::size_t row, const std::vector<std::size_t>& indices) {
    for (std::size_t idx : indices) x(row, idx) = 1.0;
}

}  // namespace

BooleanDataset generate(std::size_t n, const DnfSpec& spec, std::uint64_t seed) {
    spec.validate();
    if (n % 2 != 0) throw std::invalid_argument("generate: n must be even");
    const std::size_t m = spec.num_literals;
    const std::size_t k = spec.clause_size;
    const std::size_t min_ones = spec.min_ones();
    const std::size_t max_ones = spec.max_ones();
    if (k > max_ones)
        throw std::invalid_argument("generate: k exceeds maxOnes; positives infeasible");
    if (max_ones > m) throw std::invalid_argument("generate: maxOnes exceeds m");

    BooleanDataset ds;
    ds.spec = spec;
    ds.seed = seed;
    ds.x = Matrix(n, m);
    ds.y.assign(n, 0);

    auto rng = make_rng(seed);
    std::uniform_int_distribution<std::size_t> clause_dist(0, spec.num_clauses() - 1);
    std::uniform_int_distribution<std::size_t> ones_dist(min_ones, max_ones);

    const std::size_t n_pos = n / 2;
    for (std::size_t i = 0; i < n_pos; ++i) {
        const std::size_t c = clause_dist(rng);
        // The saturated clause already contributes k bits, so the draw is
        // clamped from below to k.
        const std::size_t s = std::max(ones_dist(rng), k);
        std::vector<std::size_t> outside;
        outside.reserve(m - k);
        for (std::size_t idx = 0; idx < m; ++idx)
            if (idx < c * k || idx >= (c + 1) * k) outside.push_back(idx);
        std::vector<std::size_t> extra = sample_without_replacement(std::move(outside), s - k, rng);
        for (std::size_t idx = c * k; idx < (c + 1) * k; ++idx) ds.x(i, idx) = 1.0;
        set_bits(ds.x, i, extra);
        ds.y[i] = 1;
        if (!evaluate_dnf(std::span<const double>(&ds.x.data[i * m], m), spec))
            throw std::logic_error("generate: positive sample fails verification");
    }

    // Negatives: first half flip-based, second half rejection-sampled, so the
    // two construction counts differ by at most one.
    const std::size_t n_neg = n - n_pos;
    const std::size_t n_flip = (n_neg + 1) / 2;
    std::vector<std::size_t> all_indices(m);
    std::iota(all_indices.begin(), all_indices.end(), 0);

    for (std::size_t j = 0; j < n_neg; ++j) {
        const std::size_t row = n_pos + j;
        const bool flip_based = j < n_flip;
        bool have_carryover = false;  // reuse s across rejected attempts
        std::size_t s = 0;
        int attempts = 0;
        while (true) {
            if (++attempts > kMaxRejections)
                throw std::runtime_error("generate: rejection cap reached for negatives");
            if (!have_carryover) {
                s = ones_dist(rng);
                have_carryover = true;
            }
            std::fill_n(&ds.x.data[row * m], m, 0.0);
            if (flip_based) {
                // Saturate a clause, pad like a positive, then clear one
                // literal of that clause.
                const std::size_t c = clause_dist(rng);
                const std::size_t target = std::max(s, k);
                std::vector<std::size_t> outside;
                outside.reserve(m - k);
                for (std::size_t idx = 0; idx < m; ++idx)
                    if (idx < c * k || idx >= (c + 1) * k) outside.push_back(idx);
                std::vector<std::size_t> extra =
                    sample_without_replacement(std::move(outside), target - k, rng);
                for (std::size_t idx = c * k; idx < (c + 1) * k; ++idx) ds.x(row, idx) = 1.0;
                set_bits(ds.x, row, extra);
                std::uniform_int_distribution<std::size_t> in_clause(0, k - 1);
                ds.x(row, c * k + in_clause(rng)) = 0.0;
            } else {
                std::vector<std::size_t> chosen =
                    sample_without_replacement(all_indices, s, rng);
                set_bits(ds.x, row, chosen);
            }
            if (!evaluate_dnf(std::span<const double>(&ds.x.data[row * m], m), spec)) break;
            // Rejected: retry with the same active-bit count.
        }
        ds.y[row] = 0;
    }
    return ds;
}

Matrix jitter(const Matrix& x, std::uint64_t seed) {
    Matrix out(x.rows, x.cols);
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> on_dist(3.0, 3.5);
    std::uniform_real_distribution<double> off_dist(0.0, 0.5);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double v = x.data[i];
        if (v == 1.0) {
            out.data[i] = on_dist(rng);
        } else if (v == 0.0) {
            out.data[i] = off_dist(rng);
        } else {
            throw std::invalid_argument("jitter: input must be binary");
        }
    }
    return out;
}

}  // namespace fpe
