#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <span>

#include "fpe/dnf_gen.hpp"

using namespace fpe;

namespace {

std::span<const double> row_of(const Matrix& x, std::size_t i) {
    return std::span<const double>(&x.data[i * x.cols], x.cols);
}

std::size_t popcount_row(const Matrix& x, std::size_t i) {
    std::size_t count = 0;
    for (std::size_t j = 0; j < x.cols; ++j) count += (x(i, j) == 1.0);
    return count;
}

}  // namespace

TEST_CASE("evaluate_dnf clause-block semantics") {
    DnfSpec spec{12, 4};
    std::vector<double> all_ones(12, 1.0);
    CHECK(evaluate_dnf(all_ones, spec));
    std::vector<double> all_zeros(12, 0.0);
    CHECK_FALSE(evaluate_dnf(all_zeros, spec));

    std::vector<double> first_clause(12, 0.0);
    for (int i = 0; i < 4; ++i) first_clause[i] = 1.0;
    CHECK(evaluate_dnf(first_clause, spec));

    std::vector<double> straddle(12, 0.0);
    straddle[0] = straddle[1] = straddle[2] = straddle[4] = 1.0;
    CHECK_FALSE(evaluate_dnf(straddle, spec));

    std::vector<double> short_row(11, 1.0);
    CHECK_THROWS_AS(evaluate_dnf(short_row, spec), std::invalid_argument);
}

TEST_CASE("DnfSpec validation") {
    CHECK_THROWS_AS((DnfSpec{10, 4}).validate(), std::invalid_argument);
    CHECK_THROWS_AS((DnfSpec{0, 4}).validate(), std::invalid_argument);
    DnfSpec ok{32, 4};
    CHECK(ok.num_clauses() == 8);
    CHECK(ok.min_ones() == 8);
    CHECK(ok.max_ones() == 12);
}

TEST_CASE("generated labels are sound, balanced, popcount-bounded") {
    const DnfSpec spec{32, 4};
    BooleanDataset ds = generate(1000, spec, 42);
    REQUIRE(ds.x.rows == 1000);
    std::size_t positives = 0;
    for (std::size_t i = 0; i < 1000; ++i) {
        const bool satisfied = evaluate_dnf(row_of(ds.x, i), spec);
        CHECK(satisfied == (ds.y[i] == 1));
        if (ds.y[i] == 1) {
            ++positives;
            const std::size_t ones = popcount_row(ds.x, i);
            CHECK(ones >= spec.min_ones());
            CHECK(ones <= spec.max_ones());
        }
    }
    CHECK(positives == 500);
}

TEST_CASE("small-m spec still generates sound data") {
    // m = 12 makes minOnes (3) smaller than k (4); positives clamp to k bits.
    const DnfSpec spec{12, 4};
    BooleanDataset ds = generate(400, spec, 7);
    for (std::size_t i = 0; i < ds.x.rows; ++i) {
        CHECK(evaluate_dnf(row_of(ds.x, i), spec) == (ds.y[i] == 1));
        if (ds.y[i] == 1) CHECK(popcount_row(ds.x, i) <= spec.max_ones());
    }
}

TEST_CASE("generation is deterministic and rejects bad inputs") {
    const DnfSpec spec{16, 4};
    BooleanDataset a = generate(200, spec, 5);
    BooleanDataset b = generate(200, spec, 5);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    BooleanDataset c = generate(200, spec, 6);
    CHECK_FALSE(a.x == c.x);

    CHECK_THROWS_AS(generate(201, spec, 5), std::invalid_argument);
    // k = 8 with m = 16: maxOnes = 4 + 2 = 6 < k, positives infeasible.
    CHECK_THROWS_AS(generate(200, DnfSpec{16, 8}, 5), std::invalid_argument);
}

TEST_CASE("jitter maps bits into disjoint ranges and is reversible") {
    const DnfSpec spec{32, 4};
    BooleanDataset ds = generate(300, spec, 11);
    Matrix jx = jitter(ds.x, 99);
    REQUIRE(jx.same_shape(ds.x));
    for (std::size_t i = 0; i < jx.data.size(); ++i) {
        if (ds.x.data[i] == 1.0) {
            CHECK(jx.data[i] >= 3.0);
            CHECK(jx.data[i] <= 3.5);
        } else {
            CHECK(jx.data[i] >= 0.0);
            CHECK(jx.data[i] <= 0.5);
        }
        // Thresholding at 1.0 recovers the bit exactly.
        CHECK((jx.data[i] > 1.0 ? 1.0 : 0.0) == ds.x.data[i]);
    }

    Matrix not_binary(1, 2, 0.5);
    CHECK_THROWS_AS(jitter(not_binary, 0), std::invalid_argument);
}

TEST_CASE("label soundness across specs and seeds") {
    // 10,000 rows across m in {12, 32, 128} and 5 seeds apiece.
    for (std::size_t m : {12u, 32u, 128u}) {
        const DnfSpec spec{m, 4};
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            BooleanDataset ds = generate(668, spec, seed);
            std::size_t positives = 0;
            for (std::size_t i = 0; i < ds.x.rows; ++i) {
                CHECK(evaluate_dnf(row_of(ds.x, i), spec) == (ds.y[i] == 1));
                positives += ds.y[i];
            }
            CHECK(positives == ds.x.rows / 2);
        }
    }
}
