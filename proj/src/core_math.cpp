#include "fpe/core_math.hpp"

#include <algorithm>
#include <cmath>

#include "fpe/errors.hpp"

namespace fpe {

Matrix relu(const Matrix& x) {
    Matrix out = x;
    for (double& v : out.data) v = std::max(0.0, v);
    return out;
}

Matrix sigmoid(const Matrix& x) {
    Matrix out = x;
    for (double& v : out.data) {
        // Evaluate through exp of a non-positive argument only.
        if (v >= 0.0) {
            v = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            v = e / (1.0 + e);
        }
    }
    return out;
}

Matrix stable_softmax(const Matrix& z) {
    Matrix out = z;
    for (std::size_t i = 0; i < z.rows; ++i) {
        double* row = &out.data[i * z.cols];
        double mx = row[0];
        for (std::size_t j = 1; j < z.cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < z.cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < z.cols; ++j) row[j] /= sum;
    }
    return out;
}

double bce_loss(const Matrix& p, const std::vector<int>& y) {
    if (p.rows != y.size() || p.cols != 1)
        throw std::invalid_argument("bce_loss: need n x 1 probabilities matching labels");
    double total = 0.0;
    for (std::size_t i = 0; i < p.rows; ++i) {
        const double pi = std::clamp(p.data[i], kProbClamp, 1.0 - kProbClamp);
        total += y[i] ? -std::log(pi) : -std::log(1.0 - pi);
    }
    return total / static_cast<double>(p.rows);
}

double ce_loss(const Matrix& logits, const std::vector<int>& y) {
    if (logits.rows != y.size())
        throw std::invalid_argument("ce_loss: batch size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        if (y[i] < 0 || static_cast<std::size_t>(y[i]) >= logits.cols)
            throw std::invalid_argument("ce_loss: label out of range");
        const double* row = &logits.data[i * logits.cols];
        double mx = row[0];
        for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, row[j]);
        double lse = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) lse += std::exp(row[j] - mx);
        total += std::log(lse) + mx - row[static_cast<std::size_t>(y[i])];
    }
    return total / static_cast<double>(logits.rows);
}

Matrix layer_norm(const Matrix& x, const std::vector<double>& gain,
                  const std::vector<double>& shift) {
    if (x.cols == 0) throw std::invalid_argument("layer_norm: empty feature dimension");
    if (gain.size() != x.cols || shift.size() != x.cols)
        throw std::invalid_argument("layer_norm: gain/shift size mismatch");
    Matrix out(x.rows, x.cols);
    const double inv_n = 1.0 / static_cast<double>(x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* row = &x.data[i * x.cols];
        double mean = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) mean += row[j];
        mean *= inv_n;
        double var = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double d = row[j] - mean;
            var += d * d;
        }
        var *= inv_n;
        const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
        double* orow = &out.data[i * x.cols];
        for (std::size_t j = 0; j < x.cols; ++j)
            orow[j] = (row[j] - mean) * inv_std * gain[j] + shift[j];
    }
    return out;
}

double grad_check(const std::function<double(const std::vector<double>&)>& f,
                  const std::vector<double>& theta,
                  const std::vector<double>& analytic_grad) {
    if (theta.size() != analytic_grad.size())
        throw std::invalid_argument("grad_check: gradient length mismatch");
    constexpr double delta = 1e-4;
    std::vector<double> probe = theta;
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        probe[i] = theta[i] + delta;
        const double fp = f(probe);
        probe[i] = theta[i] - delta;
        const double fm = f(probe);
        probe[i] = theta[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("grad_check: non-finite evaluation at coordinate " +
                               std::to_string(i));
        const double g_fd = (fp - fm) / (2.0 * delta);
        const double g_an = analytic_grad[i];
        const double err = std::abs(g_fd - g_an) /
                           std::max(1e-8, std::abs(g_fd) + std::abs(g_an));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace fpe
