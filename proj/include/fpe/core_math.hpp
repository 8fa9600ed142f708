#pragma once

#include <functional>
#include <span>
#include <vector>

#include "fpe/matrix.hpp"

namespace fpe {

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before log.
inline constexpr double kProbClamp = 1e-7;
// Added to the variance inside layer_norm.
inline constexpr double kLayerNormEps = 1e-5;

Matrix relu(const Matrix& x);

/// Numerically stable elementwise logistic sigmoid.
Matrix sigmoid(const Matrix& x);

/// Per-row softmax with the row maximum subtracted before exponentiation.
Matrix stable_softmax(const Matrix& z);

/// Mean binary cross-entropy of probabilities p (n x 1) against 0/1 labels.
double bce_loss(const Matrix& p, const std::vector<int>& y);

/// Mean negative log-softmax probability of the true class, computed in
/// log-space from raw logits (n x C).
double ce_loss(const Matrix& logits, const std::vector<int>& y);

/// Per-row normalization to zero mean / unit variance followed by the affine
/// map gain * x + shift. gain/shift have one entry per column.
Matrix layer_norm(const Matrix& x, const std::vector<double>& gain,
                  const std::vector<double>& shift);

/// Central-difference gradient check. Returns the max over coordinates of
/// |g_fd - g_an| / max(1e-8, |g_fd| + |g_an|), with step 1e-4.
double grad_check(const std::function<double(const std::vector<double>&)>& f,
                  const std::vector<double>& theta,
                  const std::vector<double>& analytic_grad);

}  // namespace fpe
