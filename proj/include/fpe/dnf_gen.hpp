#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fpe/matrix.hpp"

namespace fpe {

/// Monotone read-once DNF over m literals: clause j owns the contiguous
/// literal block [j*k, (j+1)*k).
struct DnfSpec {
    std::size_t num_literals = 0;  // m
    std::size_t clause_size = 0;   // k

    std::size_t num_clauses() const { return num_literals / clause_size; }
    void validate() const;

    std::size_t min_ones() const { return num_literals / 4; }
    std::size_t max_ones() const { return num_literals / 4 + num_literals / 8; }
};

struct BooleanDataset {
    Matrix x;             // n x m, 0/1 entries (or jittered reals)
    std::vector<int> y;   // 0/1 labels
    DnfSpec spec;
    std::uint64_t seed = 0;
    bool jittered = false;
};

/// True iff some clause has all k of its literals set. Entries must be 0/1.
bool evaluate_dnf(std::span<const double> row, const DnfSpec& spec);

/// Alg-style generator: n/2 positives (one saturated clause plus random
/// padding to the active-bit range), n/2 negatives (half by flipping one
/// literal out of a saturated clause, half by rejection-sampled random
/// assignments). Labels are verified against evaluate_dnf.
BooleanDataset generate(std::size_t n, const DnfSpec& spec, std::uint64_t seed);

/// Map 1-bits to uniform [3, 3.5] and 0-bits to uniform [0, 0.5].
Matrix jitter(const Matrix& x, std::uint64_t seed);

}  // namespace fpe
