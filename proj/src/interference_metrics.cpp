#include "fpe/interference_metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace fpe {

Matrix gram_matrix(const Matrix& w1) {
    Matrix g = matmul_at(w1, w1);
    // Force exact symmetry against summation-order effects.
    for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = i + 1; j < g.cols; ++j) g(j, i) = g(i, j);
    return g;
}

std::vector<double> feature_capacity(const Matrix& w) {
    const std::size_t d = w.cols;
    const Matrix g = gram_matrix(w);  // g(i,j) = c_i . c_j
    std::vector<double> capacity(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        const double self = g(i, i);
        if (self == 0.0) continue;  // zero column: capacity 0 by convention
        double denom = 0.0;
        for (std::size_t j = 0; j < d; ++j) denom += g(i, j) * g(i, j);
        capacity[i] = self * self / denom;
    }
    return capacity;
}

double total_capacity(const Matrix& w) {
    double total = 0.0;
    for (double c : feature_capacity(w)) total += c;
    return total;
}

std::vector<double> clause_capacity(const std::vector<double>& per_feature, std::size_t k) {
    if (k == 0 || per_feature.size() % k != 0)
        throw std::invalid_argument("clause_capacity: k must divide the feature count");
    std::vector<double> out(per_feature.size() / k, 0.0);
    for (std::size_t j = 0; j < out.size(); ++j) {
        for (std::size_t i = j * k; i < (j + 1) * k; ++i) out[j] += per_feature[i];
        out[j] /= static_cast<double>(k);
    }
    return out;
}

double mean_pairwise_cosine(const Matrix& w1) {
    const std::size_t h = w1.rows;
    if (h < 2) return 0.0;
    std::vector<double> norms(h, 0.0);
    for (std::size_t i = 0; i < h; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < w1.cols; ++j) sq += w1(i, j) * w1(i, j);
        norms[i] = std::sqrt(sq);
    }
    double total = 0.0;
    for (std::size_t a = 0; a < h; ++a) {
        for (std::size_t b = a + 1; b < h; ++b) {
            if (norms[a] == 0.0 || norms[b] == 0.0) continue;  // similarity 0
            double dot = 0.0;
            for (std::size_t j = 0; j < w1.cols; ++j) dot += w1(a, j) * w1(b, j);
            total += dot / (norms[a] * norms[b]);
        }
    }
    return total / (static_cast<double>(h) * static_cast<double>(h - 1) / 2.0);
}

double relative_improvement(double fpe_acc, double dense_acc) {
    if (dense_acc <= 0.0)
        throw std::invalid_argument("relative_improvement: dense accuracy must be positive");
    return (fpe_acc - dense_acc) / dense_acc;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2)
        throw std::invalid_argument("welch_t_test: each sample needs >= 2 values");
    auto mean_var = [](std::span<const double> s) {
        double mean = 0.0;
        for (double v : s) mean += v;
        mean /= static_cast<double>(s.size());
        double var = 0.0;
        for (double v : s) var += (v - mean) * (v - mean);
        var /= static_cast<double>(s.size() - 1);
        return std::pair<double, double>(mean, var);
    };
    const auto [mean_a, var_a] = mean_var(a);
    const auto [mean_b, var_b] = mean_var(b);
    const double sa = var_a / static_cast<double>(a.size());
    const double sb = var_b / static_cast<double>(b.size());
    if (sa + sb == 0.0) {
        if (mean_a == mean_b) return {0.0, static_cast<double>(a.size() + b.size() - 2), 1.0};
        throw std::invalid_argument("welch_t_test: both samples degenerate");
    }
    WelchResult r;
    r.t = (mean_a - mean_b) / std::sqrt(sa + sb);
    r.df = (sa + sb) * (sa + sb) /
           (sa * sa / static_cast<double>(a.size() - 1) +
            sb * sb / static_cast<double>(b.size() - 1));
    const boost::math::students_t dist(r.df);
    r.p_two_sided = 2.0 * boost::math::cdf(dist, -std::abs(r.t));
    return r;
}

}  // namespace fpe
