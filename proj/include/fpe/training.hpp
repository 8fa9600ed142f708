#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fpe/masked_net.hpp"
#include "fpe/matrix.hpp"

namespace fpe {

struct RewireConfig {
    std::size_t period = 0;   // epochs between mask updates
    double fraction = 0.0;    // fraction of nnz to regrow each update
};

/// Hyperparameters. Defaults follow the Boolean-task training recipe.
struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 500;
    std::size_t epochs = 1000;
    std::size_t warmup = 1000;
    double lambda_l1 = 1e-7;      // L1 on first-layer weights
    double lambda_l2 = 1e-5;      // L2 on all parameters
    double lambda_orth = 0.0;     // ||W1 W1^T - I||_F^2 penalty
    std::size_t trials = 5;
    // When set, the min(1, epoch/warmup) ramp multiplies the regularizers.
    // Off by default so the loss matches the plain sum of terms.
    bool ramp_regularizers = false;
    std::optional<RewireConfig> rewire;
    std::uint64_t seed = 0;
};

struct RewireEvent {
    std::size_t epoch = 0;
    std::size_t positions_changed = 0;
};

struct TrainHistory {
    std::vector<double> epoch_loss;  // mean batch loss incl. regularizers
    std::vector<std::pair<std::size_t, double>> test_accuracy;
    std::vector<RewireEvent> rewire_events;
};

/// Mutable spans over every trainable tensor in a fixed order: per layer
/// weights then bias, then LayerNorm gains and shifts.
std::vector<std::span<double>> param_views(MlpModel& model);
std::vector<std::span<const double>> grad_views(const ModelGrads& grads);

/// Flatten parameters (or gradients) in the param_views order.
std::vector<double> flatten_params(const MlpModel& model);
std::vector<double> flatten_grads(const ModelGrads& grads);
void unflatten_params(MlpModel& model, const std::vector<double>& theta);

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::size_t step_count = 0;
    static AdamState for_model(const MlpModel& model);
};

/// One bias-corrected Adam update over all parameter tensors.
void adam_step(const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, AdamState& state,
               double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

/// Task loss plus regularizer terms and their gradients for one batch.
/// ramp scales the regularizer contributions (1.0 when ramping is off).
double loss_and_grads(const MlpModel& model, const Matrix& x, const std::vector<int>& y,
                      const TrainConfig& cfg, double ramp, ModelGrads& grads);

struct TrainOptions {
    const Matrix* x_test = nullptr;           // enables accuracy cadence
    const std::vector<int>* y_test = nullptr;
    std::size_t eval_every = 0;               // epochs; 0 disables
    std::function<void(std::size_t epoch, double mean_loss, MlpModel& model)> on_epoch_end;
};

/// Mini-batch Adam for cfg.epochs with per-epoch shuffling; masks are
/// enforced after every step. Rewires per cfg.rewire when set. Throws
/// NumericError on a non-finite loss, naming the epoch and batch.
TrainHistory train(MlpModel& model, const Matrix& x, const std::vector<int>& y,
                   const TrainConfig& cfg, const TrainOptions& options = {});

/// train with the rewiring preconditions checked up front.
TrainHistory train_with_rewiring(MlpModel& model, const Matrix& x,
                                 const std::vector<int>& y, const TrainConfig& cfg,
                                 const TrainOptions& options = {});

/// Fraction correct. Binary heads threshold probabilities at 0.5 (strictly
/// greater predicts 1); multiclass takes the argmax, lowest index on ties.
double evaluate(const MlpModel& model, const Matrix& x, const std::vector<int>& y);

struct TrialResult {
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
};

struct TrialsOutcome {
    MlpModel best_model;
    double best_accuracy = 0.0;
    std::size_t best_trial = 0;
    std::vector<TrialResult> trials;
};

/// cfg.trials independent train/evaluate runs with seeds cfg.seed + t.
/// Returns the accuracy-maximizing model (earliest on ties) and all rows.
TrialsOutcome run_trials(const std::function<MlpModel(std::uint64_t seed)>& make_model,
                         const Matrix& x_train, const std::vector<int>& y_train,
                         const Matrix& x_test, const std::vector<int>& y_test,
                         const TrainConfig& cfg);

}  // namespace fpe
