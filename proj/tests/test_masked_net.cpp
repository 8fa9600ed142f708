#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "fpe/core_math.hpp"
#include "fpe/errors.hpp"
#include "fpe/masked_net.hpp"
#include "fpe/training.hpp"

using namespace fpe;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
    Matrix m(r, c);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (double& v : m.data) v = dist(rng);
    return m;
}

std::vector<int> random_labels(std::size_t n, int classes, std::mt19937_64& rng) {
    std::vector<int> y(n);
    std::uniform_int_distribution<int> dist(0, classes - 1);
    for (int& v : y) v = dist(rng);
    return y;
}

void randomly_mask(MlpModel& model, double keep_prob, std::mt19937_64& rng) {
    std::bernoulli_distribution keep(keep_prob);
    for (auto& layer : model.layers)
        for (double& m : layer.mask.data) m = keep(rng) ? 1.0 : 0.0;
    apply_masks(model);
}

// Full training loss as a function of the flattened parameter vector, with
// masked weights pinned to zero so they are constants, not free parameters.
double masked_loss_at(MlpModel probe, const std::vector<double>& theta, const Matrix& x,
                      const std::vector<int>& y, const TrainConfig& cfg) {
    unflatten_params(probe, theta);
    apply_masks(probe);
    ModelGrads scratch;
    return loss_and_grads(probe, x, y, cfg, 1.0, scratch);
}

}  // namespace

TEST_CASE("init_model shapes, accounting, determinism") {
    MlpModel model = init_model({32, 8, 1}, 7);
    CHECK(model.layers.size() == 2);
    CHECK(nonzero_weight_count(model) == 32 * 8 + 8 * 1);
    CHECK(nonzero_param_count(model) == 32 * 8 + 8 + 8 * 1 + 1);  // 273

    MlpModel again = init_model({32, 8, 1}, 7);
    for (std::size_t l = 0; l < model.layers.size(); ++l)
        CHECK(model.layers[l].weights == again.layers[l].weights);

    MlpModel deep = init_model({512, 8, 8, 8, 8, 100}, 1);
    CHECK(deep.layers.size() == 5);

    CHECK_THROWS_AS(init_model({16, 0, 1}, 0), std::invalid_argument);
}

TEST_CASE("forward closed-form cases") {
    InitOptions opts;
    MlpModel model = init_model({2, 1, 1}, 0, opts);
    for (auto& layer : model.layers)
        for (double& w : layer.weights.data) w = 0.0;
    Matrix x(3, 2, 1.0);
    Matrix out = forward(model, x);
    for (double v : out.data) CHECK(v == 0.5);

    // Single neuron: W1 = [[1, 0]], W2 = [[1]], x = [2, 5] -> sigmoid(2)
    model.layers[0].weights.data = {1.0, 0.0};
    model.layers[1].weights.data = {1.0};
    Matrix x2(1, 2);
    x2.data = {2.0, 5.0};
    const double expect = 1.0 / (1.0 + std::exp(-2.0));
    CHECK(forward(model, x2)(0, 0) == doctest::Approx(expect).epsilon(1e-12));

    Matrix bad(1, 3, 0.0);
    CHECK_THROWS_AS(forward(model, bad), std::invalid_argument);
}

TEST_CASE("forward is deterministic and mask storage is immaterial") {
    std::mt19937_64 rng(9);
    MlpModel model = init_model({6, 4, 2}, 5, {true, false, OutputKind::MulticlassLogits});
    randomly_mask(model, 0.6, rng);
    Matrix x = random_matrix(5, 6, rng);

    Matrix out1 = forward(model, x);
    Matrix out2 = forward(model, x);
    CHECK(out1 == out2);

    // Writing junk into masked slots then re-applying the mask must not
    // change anything either.
    MlpModel junk = model;
    for (auto& layer : junk.layers)
        for (std::size_t i = 0; i < layer.mask.data.size(); ++i)
            if (layer.mask.data[i] == 0.0) layer.weights.data[i] = 123.0;
    apply_masks(junk);
    CHECK(forward(junk, x) == out1);
}

TEST_CASE("apply_masks zeroes and is idempotent") {
    MlpModel model = init_model({4, 3, 1}, 2);
    model.layers[0].mask(1, 2) = 0.0;
    model.layers[0].weights(1, 2) = 3.2;
    CHECK_FALSE(masks_consistent(model));
    apply_masks(model);
    CHECK(model.layers[0].weights(1, 2) == 0.0);
    CHECK(masks_consistent(model));
    const std::size_t count = nonzero_param_count(model);
    MlpModel once = model;
    apply_masks(model);
    CHECK(model.layers[0].weights == once.layers[0].weights);
    CHECK(nonzero_param_count(model) == count);
}

TEST_CASE("half-masked layer nnz") {
    MaskedLayer layer;
    layer.weights = Matrix(8, 8, 1.0);
    layer.mask = Matrix(8, 8, 0.0);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 4; ++j) layer.mask(i, j) = 1.0;
    layer.apply_mask();
    CHECK(layer.nnz() == 32);
}

TEST_CASE("backward zeroes masked gradients") {
    std::mt19937_64 rng(13);
    MlpModel model = init_model({10, 4, 1}, 3);
    randomly_mask(model, 0.5, rng);
    Matrix x = random_matrix(6, 10, rng);
    std::vector<int> y = random_labels(6, 2, rng);
    ForwardCache cache;
    forward(model, x, &cache);
    ModelGrads grads = backward(model, cache, y);
    for (std::size_t l = 0; l < model.layers.size(); ++l)
        for (std::size_t i = 0; i < model.layers[l].mask.data.size(); ++i)
            if (model.layers[l].mask.data[i] == 0.0)
                CHECK(grads.layers[l].d_weights.data[i] == 0.0);
}

TEST_CASE("backward rejects a mismatched cache") {
    std::mt19937_64 rng(19);
    MlpModel model = init_model({4, 3, 1}, 1);
    Matrix x = random_matrix(5, 4, rng);
    ForwardCache cache;
    forward(model, x, &cache);
    std::vector<int> wrong_count = {1, 0};
    CHECK_THROWS_AS(backward(model, cache, wrong_count), std::invalid_argument);
    MlpModel other = init_model({4, 3, 3, 1}, 1);
    std::vector<int> y = random_labels(5, 2, rng);
    CHECK_THROWS_AS(backward(other, cache, y), std::runtime_error);
}

TEST_CASE("backward matches finite differences on random masked models") {
    std::mt19937_64 rng(77);
    struct Arch {
        std::vector<std::size_t> dims;
        bool layer_norm;
        OutputKind head;
    };
    const Arch archs[] = {
        {{12, 5, 1}, false, OutputKind::BinarySigmoid},
        {{9, 6, 4, 3}, true, OutputKind::MulticlassLogits},
        {{8, 5, 5, 5, 5, 2}, true, OutputKind::MulticlassLogits},
    };
    for (const Arch& arch : archs) {
        for (int rep = 0; rep < 3; ++rep) {
            MlpModel model =
                init_model(arch.dims, rng(), {true, arch.layer_norm, arch.head});
            // Keep weights away from zero so the L1 term stays smooth across
            // the finite-difference step.
            for (auto& layer : model.layers)
                for (double& w : layer.weights.data) {
                    const double sign = w >= 0.0 ? 1.0 : -1.0;
                    w = sign * (0.05 + std::abs(w));
                }
            randomly_mask(model, 0.7, rng);
            const std::size_t batch = 6;
            Matrix x = random_matrix(batch, arch.dims.front(), rng);
            std::vector<int> y = random_labels(
                batch, static_cast<int>(arch.dims.back() == 1 ? 2 : arch.dims.back()), rng);

            TrainConfig cfg;
            cfg.lambda_l1 = 1e-3;
            cfg.lambda_l2 = 1e-3;
            cfg.lambda_orth = 1e-3;
            ModelGrads grads;
            loss_and_grads(model, x, y, cfg, 1.0, grads);
            const std::vector<double> analytic = flatten_grads(grads);
            const std::vector<double> theta = flatten_params(model);
            auto f = [&](const std::vector<double>& t) {
                return masked_loss_at(model, t, x, y, cfg);
            };
            CHECK(grad_check(f, theta, analytic) < 1e-4);
        }
    }
}

TEST_CASE("checkpoint round-trip is bit exact") {
    std::mt19937_64 rng(55);
    MlpModel model =
        init_model({10, 6, 6, 3}, 99, {true, true, OutputKind::MulticlassLogits});
    randomly_mask(model, 0.5, rng);
    const std::string path = "test_model_roundtrip.fpemodel";
    save_model(model, path);
    MlpModel loaded = load_model(path);
    CHECK(loaded.layers.size() == model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        CHECK(loaded.layers[l].weights == model.layers[l].weights);
        CHECK(loaded.layers[l].mask == model.layers[l].mask);
        CHECK(loaded.layers[l].bias == model.layers[l].bias);
    }
    CHECK(loaded.ln_gain == model.ln_gain);
    CHECK(loaded.ln_shift == model.ln_shift);
    CHECK(loaded.use_layer_norm == model.use_layer_norm);
    CHECK(loaded.output_kind == model.output_kind);
    CHECK(loaded.seed == model.seed);
    std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects corrupted files") {
    MlpModel model = init_model({4, 3, 1}, 1);
    const std::string path = "test_model_corrupt.fpemodel";
    save_model(model, path);

    // Truncation
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_model(path), FormatError);

    // Inconsistent mask/weight payload
    MlpModel bad = init_model({4, 3, 1}, 1);
    bad.layers[0].mask(0, 0) = 0.0;  // weight left nonzero
    save_model(bad, path);
    CHECK_THROWS_AS(load_model(path), FormatError);

    std::remove(path.c_str());
    CHECK_THROWS_AS(load_model(path), FormatError);
}
