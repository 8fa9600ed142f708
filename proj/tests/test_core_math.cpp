#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fpe/core_math.hpp"
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

}  // namespace

TEST_CASE("matmul identity, zero and scalar cases") {
    std::mt19937_64 rng(11);
    // Power-of-two entries make identity products exact.
    Matrix b(3, 2);
    b.data = {0.5, 2.0, 4.0, 0.25, 8.0, 1.0};
    Matrix i3 = Matrix::identity(3);
    CHECK(matmul(i3, b) == b);
    Matrix i2 = Matrix::identity(2);
    CHECK(matmul(b, i2) == b);

    Matrix zero(2, 3, 0.0);
    Matrix a = random_matrix(4, 2, rng);
    Matrix prod = matmul(a, zero);
    for (double v : prod.data) CHECK(v == 0.0);

    Matrix two(1, 1, 2.0), three(1, 1, 3.0);
    CHECK(matmul(two, three)(0, 0) == 6.0);
}

TEST_CASE("matmul rejects mismatched shapes") {
    Matrix a(2, 3), b(4, 2);
    CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
}

TEST_CASE("matmul_bt and matmul_at agree with explicit transpose") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 10; ++rep) {
        Matrix a = random_matrix(5, 3, rng);
        Matrix b = random_matrix(4, 3, rng);
        Matrix expect = matmul(a, transpose(b));
        Matrix got = matmul_bt(a, b);
        REQUIRE(got.same_shape(expect));
        for (std::size_t i = 0; i < got.data.size(); ++i)
            CHECK(got.data[i] == doctest::Approx(expect.data[i]).epsilon(1e-12));

        Matrix c = random_matrix(5, 4, rng);
        Matrix expect2 = matmul(transpose(a), c);
        Matrix got2 = matmul_at(a, c);
        REQUIRE(got2.same_shape(expect2));
        for (std::size_t i = 0; i < got2.data.size(); ++i)
            CHECK(got2.data[i] == doctest::Approx(expect2.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("relu clamps negatives only") {
    Matrix x(1, 3);
    x.data = {-1.0, 2.0, 0.0};
    Matrix y = relu(x);
    CHECK(y.data[0] == 0.0);
    CHECK(y.data[1] == 2.0);
    CHECK(y.data[2] == 0.0);
}

TEST_CASE("sigmoid midpoint, symmetry and saturation") {
    Matrix zero(1, 1, 0.0);
    CHECK(sigmoid(zero)(0, 0) == 0.5);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(-30.0, 30.0);
    for (int rep = 0; rep < 50; ++rep) {
        const double x = dist(rng);
        Matrix plus(1, 1, x), minus(1, 1, -x);
        CHECK(sigmoid(minus)(0, 0) ==
              doctest::Approx(1.0 - sigmoid(plus)(0, 0)).epsilon(1e-12));
    }

    Matrix big(1, 1, 40.0);
    const double saturated = sigmoid(big)(0, 0);
    CHECK(std::isfinite(saturated));
    CHECK(saturated == doctest::Approx(1.0).epsilon(1e-12));
    Matrix huge(1, 1, -5000.0);
    CHECK(std::isfinite(sigmoid(huge)(0, 0)));
}

TEST_CASE("softmax uniform rows, shift invariance, extreme logits") {
    Matrix uniform(1, 5, 3.25);
    Matrix probs = stable_softmax(uniform);
    for (std::size_t j = 0; j < 5; ++j) CHECK(probs(0, j) == doctest::Approx(0.2).epsilon(1e-12));

    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 20; ++rep) {
        Matrix z = random_matrix(3, 4, rng, 5.0);
        Matrix shifted = z;
        const double c = 13.7;
        for (double& v : shifted.data) v += c;
        Matrix p1 = stable_softmax(z);
        Matrix p2 = stable_softmax(shifted);
        for (std::size_t i = 0; i < p1.data.size(); ++i)
            CHECK(std::abs(p1.data[i] - p2.data[i]) < 1e-12);
        for (std::size_t i = 0; i < p1.rows; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < p1.cols; ++j) sum += p1(i, j);
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }

    Matrix extreme(1, 2);
    extreme.data = {1000.0, 0.0};
    Matrix pe = stable_softmax(extreme);
    CHECK(pe(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pe(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::isfinite(pe(0, 0)));
}

TEST_CASE("bce closed forms") {
    Matrix half(4, 1, 0.5);
    CHECK(bce_loss(half, {0, 1, 1, 0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Matrix perfect(2, 1);
    perfect.data = {1.0, 0.0};
    CHECK(bce_loss(perfect, {1, 0}) == doctest::Approx(0.0).epsilon(1e-6));

    Matrix quarter(1, 1, 0.25);
    CHECK(bce_loss(quarter, {1}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("ce closed forms and label validation") {
    Matrix uniform(3, 7, 0.0);
    CHECK(ce_loss(uniform, {0, 3, 6}) == doctest::Approx(std::log(7.0)).epsilon(1e-12));

    Matrix hot(1, 4, 0.0);
    hot(0, 2) = 1e4;
    CHECK(ce_loss(hot, {2}) == doctest::Approx(0.0).epsilon(1e-4));

    Matrix two(1, 2, 0.0);
    CHECK(ce_loss(two, {0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    CHECK_THROWS_AS(ce_loss(two, {2}), std::invalid_argument);
    CHECK_THROWS_AS(ce_loss(two, {-1}), std::invalid_argument);
}

TEST_CASE("ce for two classes equals bce after sigmoid reparameterization") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        Matrix z = random_matrix(6, 2, rng, 3.0);
        std::vector<int> y;
        std::uniform_int_distribution<int> coin(0, 1);
        for (int i = 0; i < 6; ++i) y.push_back(coin(rng));
        // softmax([z0, z1])[1] = sigmoid(z1 - z0)
        Matrix margin(6, 1);
        for (std::size_t i = 0; i < 6; ++i) margin(i, 0) = z(i, 1) - z(i, 0);
        const double ce = ce_loss(z, y);
        const double bce = bce_loss(sigmoid(margin), y);
        CHECK(ce == doctest::Approx(bce).epsilon(1e-8));
    }
}

TEST_CASE("layer_norm constant rows, normalized rows, moments") {
    std::vector<double> gain(4, 1.0), shift(4, 0.0);
    Matrix constant(1, 4, 3.7);
    Matrix out = layer_norm(constant, gain, shift);
    for (double v : out.data) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<double> gain2(2, 1.0), shift2(2, 0.0);
    Matrix pm(1, 2);
    pm.data = {-1.0, 1.0};
    Matrix out2 = layer_norm(pm, gain2, shift2);
    CHECK(out2(0, 0) == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(out2(0, 1) == doctest::Approx(1.0).epsilon(1e-4));

    // High-variance rows make the epsilon correction negligible.
    std::mt19937_64 rng(23);
    Matrix x = random_matrix(5, 16, rng, 20.0);
    std::vector<double> gain3(16, 1.0), shift3(16, 0.0);
    Matrix normed = layer_norm(x, gain3, shift3);
    for (std::size_t i = 0; i < normed.rows; ++i) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < 16; ++j) mean += normed(i, j);
        mean /= 16.0;
        for (std::size_t j = 0; j < 16; ++j)
            var += (normed(i, j) - mean) * (normed(i, j) - mean);
        var /= 16.0;
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-6);
    }

    CHECK_THROWS_AS(layer_norm(x, gain2, shift2), std::invalid_argument);
}

TEST_CASE("grad_check exact on quadratics and constants") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    std::vector<double> theta(10);
    for (double& v : theta) v = dist(rng);
    auto quadratic = [](const std::vector<double>& t) {
        double s = 0.0;
        for (double v : t) s += v * v;
        return s;
    };
    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) grad[i] = 2.0 * theta[i];
    CHECK(grad_check(quadratic, theta, grad) < 1e-6);

    auto constant = [](const std::vector<double>&) { return 4.2; };
    std::vector<double> zeros(theta.size(), 0.0);
    CHECK(grad_check(constant, theta, zeros) == 0.0);
}

TEST_CASE("grad_check validates a full 2-layer BCE model") {
    std::mt19937_64 rng(101);
    MlpModel model = init_model({16, 4, 1}, 42);
    Matrix x = random_matrix(8, 16, rng);
    std::vector<int> y;
    std::uniform_int_distribution<int> coin(0, 1);
    for (int i = 0; i < 8; ++i) y.push_back(coin(rng));

    TrainConfig cfg;
    cfg.lambda_l1 = 0.0;
    cfg.lambda_l2 = 0.0;
    ModelGrads grads;
    loss_and_grads(model, x, y, cfg, 1.0, grads);
    const std::vector<double> analytic = flatten_grads(grads);
    const std::vector<double> theta = flatten_params(model);
    MlpModel probe = model;
    auto f = [&](const std::vector<double>& t) {
        unflatten_params(probe, t);
        ForwardCache cache;
        forward(probe, x, &cache);
        return bce_loss(cache.output, y);
    };
    CHECK(grad_check(f, theta, analytic) < 1e-4);
}
