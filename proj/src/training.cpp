#include "fpe/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fpe/core_math.hpp"
#include "fpe/errors.hpp"
#include "fpe/fpe_expand.hpp"
#include "fpe/rng.hpp"

namespace fpe {

std::vector<std::span<double>> param_views(MlpModel& model) {
    std::vector<std::span<double>> views;
    for (auto& layer : model.layers) {
        views.emplace_back(layer.weights.data);
        if (layer.has_bias()) views.emplace_back(layer.bias);
    }
    for (auto& gain : model.ln_gain) views.emplace_back(gain);
    for (auto& shift : model.ln_shift) views.emplace_back(shift);
    return views;
}

std::vector<std::span<const double>> grad_views(const ModelGrads& grads) {
    std::vector<std::span<const double>> views;
    for (const auto& layer : grads.layers) {
        views.emplace_back(layer.d_weights.data);
        if (!layer.d_bias.empty()) views.emplace_back(layer.d_bias);
    }
    for (const auto& gain : grads.d_ln_gain) views.emplace_back(gain);
    for (const auto& shift : grads.d_ln_shift) views.emplace_back(shift);
    return views;
}

namespace {

std::vector<std::span<const double>> const_param_views(const MlpModel& model) {
    std::vector<std::span<const double>> views;
    for (const auto& layer : model.layers) {
        views.emplace_back(layer.weights.data);
        if (layer.has_bias()) views.emplace_back(layer.bias);
    }
    for (const auto& gain : model.ln_gain) views.emplace_back(gain);
    for (const auto& shift : model.ln_shift) views.emplace_back(shift);
    return views;
}

}  // namespace

std::vector<double> flatten_params(const MlpModel& model) {
    std::vector<double> flat;
    for (const auto view : const_param_views(model))
        flat.insert(flat.end(), view.begin(), view.end());
    return flat;
}

std::vector<double> flatten_grads(const ModelGrads& grads) {
    std::vector<double> flat;
    for (const auto view : grad_views(grads)) flat.insert(flat.end(), view.begin(), view.end());
    return flat;
}

void unflatten_params(MlpModel& model, const std::vector<double>& theta) {
    std::size_t offset = 0;
    for (auto view : param_views(model)) {
        if (offset + view.size() > theta.size())
            throw std::invalid_argument("unflatten_params: vector too short");
        std::copy_n(theta.begin() + static_cast<std::ptrdiff_t>(offset), view.size(),
                    view.begin());
        offset += view.size();
    }
    if (offset != theta.size())
        throw std::invalid_argument("unflatten_params: vector length mismatch");
}

AdamState AdamState::for_model(const MlpModel& model) {
    AdamState state;
    for (const auto view : const_param_views(model)) {
        state.m.emplace_back(view.size(), 0.0);
        state.v.emplace_back(view.size(), 0.0);
    }
    return state;
}

void adam_step(const std::vector<std::span<double>>& params,
               const std::vector<std::span<const double>>& grads, AdamState& state,
               double learning_rate, double beta1, double beta2, double eps) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: tensor count mismatch");
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (std::size_t g = 0; g < params.size(); ++g) {
        auto p = params[g];
        auto grad = grads[g];
        auto& m = state.m[g];
        auto& v = state.v[g];
        if (p.size() != grad.size() || p.size() != m.size())
            throw std::invalid_argument("adam_step: tensor size mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

double loss_and_grads(const MlpModel& model, const Matrix& x, const std::vector<int>& y,
                      const TrainConfig& cfg, double ramp, ModelGrads& grads) {
    ForwardCache cache;
    forward(model, x, &cache);
    double loss = (model.output_kind == OutputKind::BinarySigmoid)
                      ? bce_loss(cache.output, y)
                      : ce_loss(cache.output, y);
    grads = backward(model, cache, y);

    const Matrix& w1 = model.layers.front().weights;
    Matrix& dw1 = grads.layers.front().d_weights;

    const double l1 = cfg.lambda_l1 * ramp;
    if (l1 > 0.0) {
        double abs_sum = 0.0;
        for (std::size_t i = 0; i < w1.data.size(); ++i) {
            abs_sum += std::abs(w1.data[i]);
            // L1 subgradient at 0 is taken as 0.
            if (w1.data[i] > 0.0)
                dw1.data[i] += l1;
            else if (w1.data[i] < 0.0)
                dw1.data[i] -= l1;
        }
        loss += l1 * abs_sum;
    }

    const double l2 = cfg.lambda_l2 * ramp;
    if (l2 > 0.0) {
        double sq_sum = 0.0;
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            const auto& w = model.layers[l].weights.data;
            auto& dw = grads.layers[l].d_weights.data;
            for (std::size_t i = 0; i < w.size(); ++i) {
                sq_sum += w[i] * w[i];
                dw[i] += 2.0 * l2 * w[i];
            }
            const auto& b = model.layers[l].bias;
            auto& db = grads.layers[l].d_bias;
            for (std::size_t i = 0; i < b.size(); ++i) {
                sq_sum += b[i] * b[i];
                db[i] += 2.0 * l2 * b[i];
            }
        }
        for (std::size_t l = 0; l < model.ln_gain.size(); ++l) {
            for (std::size_t i = 0; i < model.ln_gain[l].size(); ++i) {
                sq_sum += model.ln_gain[l][i] * model.ln_gain[l][i];
                grads.d_ln_gain[l][i] += 2.0 * l2 * model.ln_gain[l][i];
            }
            for (std::size_t i = 0; i < model.ln_shift[l].size(); ++i) {
                sq_sum += model.ln_shift[l][i] * model.ln_shift[l][i];
                grads.d_ln_shift[l][i] += 2.0 * l2 * model.ln_shift[l][i];
            }
        }
        loss += l2 * sq_sum;
    }

    const double lo = cfg.lambda_orth * ramp;
    if (lo > 0.0) {
        Matrix a = matmul_bt(w1, w1);  // W1 W1^T
        for (std::size_t i = 0; i < a.rows; ++i) a(i, i) -= 1.0;
        double fro_sq = 0.0;
        for (double v : a.data) fro_sq += v * v;
        loss += lo * fro_sq;
        // d/dW ||W W^T - I||_F^2 = 4 (W W^T - I) W
        Matrix d_orth = matmul(a, w1);
        for (std::size_t i = 0; i < dw1.data.size(); ++i)
            dw1.data[i] += 4.0 * lo * d_orth.data[i];
    }

    // Regularizers never move masked weights.
    const Matrix& mask1 = model.layers.front().mask;
    for (std::size_t i = 0; i < mask1.data.size(); ++i)
        if (mask1.data[i] == 0.0) dw1.data[i] = 0.0;
    return loss;
}

namespace {

void gather_batch(const Matrix& x, const std::vector<int>& y,
                  std::span<const std::size_t> indices, Matrix& bx, std::vector<int>& by) {
    bx = Matrix(indices.size(), x.cols);
    by.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::copy_n(&x.data[indices[i] * x.cols], x.cols, &bx.data[i * x.cols]);
        by[i] = y[indices[i]];
    }
}

}  // namespace

TrainHistory train(MlpModel& model, const Matrix& x, const std::vector<int>& y,
                   const TrainConfig& cfg, const TrainOptions& options) {
    if (x.rows != y.size()) throw std::invalid_argument("train: label count mismatch");
    if (x.cols != model.input_dim()) throw std::invalid_argument("train: feature dim mismatch");
    if (cfg.batch_size == 0) throw std::invalid_argument("train: batch size must be >= 1");

    TrainHistory history;
    AdamState state = AdamState::for_model(model);
    auto shuffle_rng = make_rng(derive_seed(cfg.seed, "shuffle"));
    auto rewire_rng = make_rng(derive_seed(cfg.seed, "rewire"));
    std::vector<std::size_t> order(x.rows);
    std::iota(order.begin(), order.end(), 0);

    Matrix bx;
    std::vector<int> by;
    ModelGrads grads;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double ramp =
            cfg.ramp_regularizers && cfg.warmup > 0
                ? std::min(1.0, static_cast<double>(epoch) / static_cast<double>(cfg.warmup))
                : 1.0;
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, order.size() - start);
            gather_batch(x, y, std::span(order).subspan(start, len), bx, by);
            const double loss = loss_and_grads(model, bx, by, cfg, ramp, grads);
            if (!std::isfinite(loss))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batches));
            auto params = param_views(model);
            adam_step(params, grad_views(grads), state, cfg.learning_rate);
            apply_masks(model);
            loss_sum += loss;
            ++batches;
        }
        history.epoch_loss.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);

        if (cfg.rewire && cfg.rewire->period > 0 && epoch % cfg.rewire->period == 0) {
            const std::size_t changed = rewire_masks(model, cfg.rewire->fraction, rewire_rng);
            history.rewire_events.push_back({epoch, changed});
        }
        if (options.eval_every > 0 && options.x_test && options.y_test &&
            epoch % options.eval_every == 0)
            history.test_accuracy.emplace_back(epoch,
                                               evaluate(model, *options.x_test, *options.y_test));
        if (options.on_epoch_end)
            options.on_epoch_end(epoch, history.epoch_loss.back(), model);
    }
    return history;
}

TrainHistory train_with_rewiring(MlpModel& model, const Matrix& x,
                                 const std::vector<int>& y, const TrainConfig& cfg,
                                 const TrainOptions& options) {
    if (!cfg.rewire) throw std::invalid_argument("train_with_rewiring: cfg.rewire not set");
    std::size_t weight_slots = 0;
    for (const auto& layer : model.layers) weight_slots += layer.weights.data.size();
    if (nonzero_weight_count(model) == weight_slots)
        throw std::invalid_argument("train_with_rewiring: model has no masked positions");
    return train(model, x, y, cfg, options);
}

double evaluate(const MlpModel& model, const Matrix& x, const std::vector<int>& y) {
    if (x.rows != y.size()) throw std::invalid_argument("evaluate: label count mismatch");
    const Matrix out = forward(model, x);
    std::size_t correct = 0;
    if (model.output_kind == OutputKind::BinarySigmoid) {
        for (std::size_t i = 0; i < out.rows; ++i) {
            const int pred = out(i, 0) > 0.5 ? 1 : 0;
            correct += (pred == y[i]);
        }
    } else {
        for (std::size_t i = 0; i < out.rows; ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < out.cols; ++j)
                if (out(i, j) > out(i, best)) best = j;  // ties keep the lowest index
            correct += (static_cast<int>(best) == y[i]);
        }
    }
    return static_cast<double>(correct) / static_cast<double>(x.rows);
}

TrialsOutcome run_trials(const std::function<MlpModel(std::uint64_t seed)>& make_model,
                         const Matrix& x_train, const std::vector<int>& y_train,
                         const Matrix& x_test, const std::vector<int>& y_test,
                         const TrainConfig& cfg) {
    if (cfg.trials == 0) throw std::invalid_argument("run_trials: need at least one trial");
    TrialsOutcome outcome;
    outcome.best_accuracy = -1.0;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        const std::uint64_t trial_seed = cfg.seed + t;
        MlpModel model = make_model(trial_seed);
        TrainConfig trial_cfg = cfg;
        trial_cfg.seed = trial_seed;
        train(model, x_train, y_train, trial_cfg);
        const double acc = evaluate(model, x_test, y_test);
        outcome.trials.push_back({t, trial_seed, acc});
        if (acc > outcome.best_accuracy) {
            outcome.best_accuracy = acc;
            outcome.best_model = std::move(model);
            outcome.best_trial = t;
        }
    }
    return outcome;
}

}  // namespace fpe
