#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sae/dataset.hpp"
#include "sae/rbm.hpp"
#include "testutil.hpp"

using namespace sae;

namespace {

RbmParams random_rbm(std::size_t n_visible, std::size_t n_hidden, std::uint64_t seed,
                     double scale = 1.0) {
    Rng rng(seed);
    RbmParams rbm = init_rbm(n_visible, n_hidden, rng, 0.01);
    for (double& w : rbm.weights.values()) w = scale * rng.gaussian();
    for (double& b : rbm.visible_bias) b = scale * rng.gaussian();
    for (double& c : rbm.hidden_bias) c = scale * rng.gaussian();
    return rbm;
}

std::vector<double> flatten(const RbmGradient& g) {
    std::vector<double> flat(g.weights.values());
    flat.insert(flat.end(), g.visible_bias.begin(), g.visible_bias.end());
    flat.insert(flat.end(), g.hidden_bias.begin(), g.hidden_bias.end());
    return flat;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("energy: zero parameters give zero energy") {
    Rng rng(1);
    const RbmParams rbm = init_rbm(3, 2, rng, 0.0);
    const std::vector<double> v{1, 0, 1}, h{1, 1};
    CHECK(energy(rbm, v, h) == 0.0);
}

TEST_CASE("energy: single active pair evaluates to -1") {
    Rng rng(1);
    RbmParams rbm = init_rbm(1, 1, rng, 0.0);
    rbm.weights(0, 0) = 1.0;
    const std::vector<double> v{1}, h{1};
    CHECK(energy(rbm, v, h) == -1.0);
}

TEST_CASE("energy: matches the per-state summation oracle on all 32 states") {
    const RbmParams rbm = random_rbm(3, 2, 21);
    for (std::uint32_t vs = 0; vs < 8; ++vs)
        for (std::uint32_t hs = 0; hs < 4; ++hs) {
            const auto v = oracles::bits_of(vs, 3);
            const auto h = oracles::bits_of(hs, 2);
            CHECK(energy(rbm, v, h) ==
                  doctest::Approx(oracles::energy_naive(rbm, v, h)).epsilon(1e-12));
        }
}

TEST_CASE("energy: dimension mismatch throws") {
    const RbmParams rbm = random_rbm(3, 2, 5);
    const std::vector<double> v{1, 0}, h{1, 1};
    CHECK_THROWS_AS(energy(rbm, v, h), DimensionError);
}

TEST_CASE("hidden_probs: zero model outputs 0.5 everywhere") {
    Rng rng(2);
    const RbmParams rbm = init_rbm(4, 3, rng, 0.0);
    const Matrix probs = hidden_probs(rbm, testutil::random_matrix(5, 4, 3));
    CHECK(probs.rows() == 5);
    CHECK(probs.cols() == 3);
    for (double p : probs.values()) CHECK(p == 0.5);
}

TEST_CASE("hidden_probs: a dominant weight saturates the unit") {
    Rng rng(2);
    RbmParams rbm = init_rbm(3, 1, rng, 0.0);
    rbm.weights(0, 1) = 1e6;
    Matrix v(1, 3);
    v(0, 1) = 1.0;
    CHECK(std::abs(hidden_probs(rbm, v)(0, 0) - 1.0) < 1e-9);
}

TEST_CASE("hidden_probs: matches joint-derived conditionals (4 visible, 3 hidden)") {
    const RbmParams rbm = random_rbm(4, 3, 31);
    const auto table = oracles::enumerate_joint(rbm);
    for (std::uint32_t vs = 0; vs < 16; ++vs) {
        Matrix v(1, 4);
        const auto bits = oracles::bits_of(vs, 4);
        for (std::size_t j = 0; j < 4; ++j) v(0, j) = bits[j];
        const Matrix probs = hidden_probs(rbm, v);
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(std::abs(probs(0, i) - oracles::hidden_conditional(table, vs, i)) < 1e-10);
    }
}

TEST_CASE("visible_probs: zero model outputs 0.5 and shapes check out") {
    Rng rng(2);
    const RbmParams rbm = init_rbm(4, 3, rng, 0.0);
    const Matrix probs = visible_probs(rbm, testutil::random_matrix(2, 3, 4));
    CHECK(probs.rows() == 2);
    CHECK(probs.cols() == 4);
    for (double p : probs.values()) CHECK(p == 0.5);
    CHECK_THROWS_AS(visible_probs(rbm, Matrix(2, 4)), DimensionError);
}

TEST_CASE("visible_probs equals hidden_probs on the flipped model") {
    const RbmParams rbm = random_rbm(4, 3, 33);
    RbmParams flipped;
    flipped.weights = transpose(rbm.weights);
    flipped.visible_bias = rbm.hidden_bias;
    flipped.hidden_bias = rbm.visible_bias;
    const Matrix h = testutil::random_matrix(6, 3, 5);
    CHECK(testutil::matrices_equal(visible_probs(rbm, h), hidden_probs(flipped, h)));
}

TEST_CASE("visible_probs: matches joint-derived conditionals (3 visible, 3 hidden)") {
    const RbmParams rbm = random_rbm(3, 3, 37);
    const auto table = oracles::enumerate_joint(rbm);
    for (std::uint32_t hs = 0; hs < 8; ++hs) {
        Matrix h(1, 3);
        const auto bits = oracles::bits_of(hs, 3);
        for (std::size_t i = 0; i < 3; ++i) h(0, i) = bits[i];
        const Matrix probs = visible_probs(rbm, h);
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(std::abs(probs(0, j) - oracles::visible_conditional(table, hs, j)) < 1e-10);
    }
}

TEST_CASE("conditional factorization: p(h|v) equals the product of unit conditionals") {
    const RbmParams rbm = random_rbm(3, 3, 41);
    const auto table = oracles::enumerate_joint(rbm);
    for (std::uint32_t vs = 0; vs < 8; ++vs) {
        Matrix v(1, 3);
        const auto vbits = oracles::bits_of(vs, 3);
        for (std::size_t j = 0; j < 3; ++j) v(0, j) = vbits[j];
        const Matrix probs = hidden_probs(rbm, v);
        for (std::uint32_t hs = 0; hs < 8; ++hs) {
            double product = 1.0;
            for (std::size_t i = 0; i < 3; ++i)
                product *= ((hs >> i) & 1u) ? probs(0, i) : 1.0 - probs(0, i);
            CHECK(std::abs(product - oracles::hidden_vector_conditional(table, vs, hs)) < 1e-10);
        }
    }
}

TEST_CASE("cd_update: zero learning rate leaves parameters untouched") {
    RbmParams rbm = random_rbm(4, 3, 51, 0.3);
    const RbmParams before = rbm;
    CdHyperparams hp;
    hp.learning_rate = 0.0;
    Rng rng(9);
    cd_update(rbm, testutil::random_binary_matrix(6, 4, 10), hp, 0, rng);
    CHECK(testutil::matrices_equal(rbm.weights, before.weights));
    CHECK(rbm.visible_bias == before.visible_bias);
    CHECK(rbm.hidden_bias == before.hidden_bias);
}

TEST_CASE("cd_update: momentum 0 has no velocity memory") {
    const RbmParams base = random_rbm(3, 2, 52, 0.2);
    const Matrix batch = testutil::random_binary_matrix(5, 3, 11);
    CdHyperparams hp;
    hp.momentum_schedule = {{0, 0.0}};
    hp.sample_hidden = false;  // deterministic negative phase

    RbmParams fresh = base;
    Rng rng_a(1);
    cd_update(fresh, batch, hp, 0, rng_a);

    RbmParams preloaded = base;
    for (double& v : preloaded.vel_weights.values()) v = 123.0;
    for (double& v : preloaded.vel_visible_bias) v = -7.0;
    for (double& v : preloaded.vel_hidden_bias) v = 3.0;
    Rng rng_b(1);
    cd_update(preloaded, batch, hp, 0, rng_b);

    CHECK(testutil::matrices_equal(fresh.weights, preloaded.weights));
    CHECK(fresh.visible_bias == preloaded.visible_bias);
    CHECK(fresh.hidden_bias == preloaded.hidden_bias);
}

TEST_CASE("cd_update: momentum accumulates velocity across steps") {
    const RbmParams base = random_rbm(3, 2, 53, 0.2);
    const Matrix batch = testutil::random_binary_matrix(5, 3, 12);
    CdHyperparams hp;
    hp.sample_hidden = false;

    // With momentum 0.5 and a repeated (frozen-parameters) gradient, the
    // second step is 1.5x the first.
    hp.momentum_schedule = {{0, 0.5}};
    RbmParams rbm = base;
    Rng rng(1);
    cd_update(rbm, batch, hp, 0, rng);
    const double step1 = rbm.weights(0, 0) - base.weights(0, 0);
    RbmParams again = base;
    again.vel_weights = rbm.vel_weights;
    again.vel_visible_bias = rbm.vel_visible_bias;
    again.vel_hidden_bias = rbm.vel_hidden_bias;
    cd_update(again, batch, hp, 0, rng);
    const double step2 = again.weights(0, 0) - base.weights(0, 0);
    CHECK(step2 == doctest::Approx(1.5 * step1).epsilon(1e-12));
}

TEST_CASE("averaged CD-1 direction correlates with the exact gradient") {
    const Matrix data = testutil::random_binary_matrix(12, 3, 77);
    for (std::uint64_t point = 0; point < 2; ++point) {
        const RbmParams theta = random_rbm(3, 2, 500 + point, 0.6);
        const RbmGradient exact = exact_loglik_grad(theta, data);

        CdHyperparams hp;
        hp.learning_rate = 1.0;
        hp.momentum_schedule = {{0, 0.0}};
        std::vector<double> mean_update(flatten(exact).size(), 0.0);
        Rng trial_rng(900 + point);
        for (int trial = 0; trial < 200; ++trial) {
            const MinibatchPlan plan(data.rows(), 6, trial_rng.next());
            const Matrix batch = gather_rows(data, plan.batch(0));
            RbmParams step = theta;
            Rng rng(trial_rng.next());
            cd_update(step, batch, hp, 0, rng);
            std::size_t k = 0;
            for (std::size_t i = 0; i < step.weights.size(); ++i)
                mean_update[k++] += step.weights.values()[i] - theta.weights.values()[i];
            for (std::size_t i = 0; i < step.visible_bias.size(); ++i)
                mean_update[k++] += step.visible_bias[i] - theta.visible_bias[i];
            for (std::size_t i = 0; i < step.hidden_bias.size(); ++i)
                mean_update[k++] += step.hidden_bias[i] - theta.hidden_bias[i];
        }
        CHECK(cosine(mean_update, flatten(exact)) > 0.5);
    }
}

TEST_CASE("reconstruction_error: near-identity channel reconstructs binary data") {
    Rng rng(3);
    RbmParams rbm = init_rbm(2, 2, rng, 0.0);
    const double k = 40.0;
    rbm.weights(0, 0) = rbm.weights(1, 1) = k;
    rbm.visible_bias = {-k / 2, -k / 2};
    rbm.hidden_bias = {-k / 2, -k / 2};
    const Matrix data = Matrix::from_rows({{0, 1}, {1, 0}, {1, 1}, {0, 0}});
    CHECK(reconstruction_error(rbm, data) < 1e-3);
}

TEST_CASE("reconstruction_error: zero model on all-0.5 data is exactly zero") {
    Rng rng(3);
    const RbmParams rbm = init_rbm(4, 2, rng, 0.0);
    const Matrix data(5, 4, 0.5);
    CHECK(reconstruction_error(rbm, data) == 0.0);
}

TEST_CASE("reconstruction_error: non-negative for random models") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const RbmParams rbm = random_rbm(5, 3, 60 + seed);
        CHECK(reconstruction_error(rbm, testutil::random_matrix(7, 5, seed)) >= 0.0);
    }
}

TEST_CASE("transform: zero model maps to all-0.5 of hidden width") {
    Rng rng(4);
    const RbmParams rbm = init_rbm(6, 4, rng, 0.0);
    const Matrix out = transform(rbm, testutil::random_matrix(9, 6, 8));
    CHECK(out.rows() == 9);
    CHECK(out.cols() == 4);
    for (double v : out.values()) CHECK(v == 0.5);
}

TEST_CASE("transform: shape contract for a 784-to-1000 layer") {
    Rng rng(4);
    const RbmParams rbm = init_rbm(784, 1000, rng, 0.01);
    const Matrix out = transform(rbm, testutil::random_matrix(3, 784, 9));
    CHECK(out.rows() == 3);
    CHECK(out.cols() == 1000);
}

TEST_CASE("transform is exactly hidden_probs") {
    const RbmParams rbm = random_rbm(5, 4, 61);
    const Matrix data = testutil::random_matrix(6, 5, 10);
    CHECK(testutil::matrices_equal(transform(rbm, data), hidden_probs(rbm, data)));
}

TEST_CASE("epoch_stats is bit-equal to separate error and transform calls") {
    const RbmParams rbm = random_rbm(5, 3, 62);
    const Matrix train = testutil::random_matrix(8, 5, 11);
    const Matrix valid = testutil::random_matrix(4, 5, 12);
    const EpochStats stats = epoch_stats(rbm, train, valid);
    CHECK(stats.train_err == reconstruction_error(rbm, train));
    CHECK(stats.valid_err == reconstruction_error(rbm, valid));
    CHECK(testutil::matrices_equal(stats.train_hidden, transform(rbm, train)));
    CHECK(testutil::matrices_equal(stats.valid_hidden, transform(rbm, valid)));
}

TEST_CASE("partition function: zero 2x2 model counts 16 equal states") {
    Rng rng(5);
    const RbmParams rbm = init_rbm(2, 2, rng, 0.0);
    CHECK(partition_function(rbm) == doctest::Approx(16.0).epsilon(1e-14));
}

TEST_CASE("joint distribution normalizes to 1") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const RbmParams rbm = random_rbm(3, 3, 70 + seed);
        const auto table = oracles::enumerate_joint(rbm);
        double total = 0.0;
        for (double u : table.unnormalized) total += u / table.z;
        CHECK(std::abs(total - 1.0) < 1e-12);
        CHECK(partition_function(rbm) == doctest::Approx(table.z).epsilon(1e-12));
    }
}

TEST_CASE("exact_loglik_grad: stationary at the zero model with uniform data") {
    Rng rng(6);
    const RbmParams rbm = init_rbm(2, 2, rng, 0.0);
    Matrix data(4, 2);
    for (std::uint32_t vs = 0; vs < 4; ++vs) {
        const auto bits = oracles::bits_of(vs, 2);
        data(vs, 0) = bits[0];
        data(vs, 1) = bits[1];
    }
    const RbmGradient grad = exact_loglik_grad(rbm, data);
    for (double g : flatten(grad)) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("exact_loglik_grad: matches finite differences of exact_loglik") {
    const Matrix data = testutil::random_matrix(6, 3, 80);  // probabilities allowed
    RbmParams rbm = random_rbm(3, 3, 81, 0.7);
    const RbmGradient grad = exact_loglik_grad(rbm, data);
    const double eps = 1e-5;

    const auto check_param = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + eps;
        const double up = exact_loglik(rbm, data);
        param = saved - eps;
        const double down = exact_loglik(rbm, data);
        param = saved;
        const double numeric = (up - down) / (2.0 * eps);
        CHECK(testutil::relative_error(analytic, numeric) < 1e-6);
    };

    for (std::size_t i = 0; i < rbm.weights.size(); ++i)
        check_param(rbm.weights.values()[i], grad.weights.values()[i]);
    for (std::size_t j = 0; j < rbm.visible_bias.size(); ++j)
        check_param(rbm.visible_bias[j], grad.visible_bias[j]);
    for (std::size_t i = 0; i < rbm.hidden_bias.size(); ++i)
        check_param(rbm.hidden_bias[i], grad.hidden_bias[i]);
}

TEST_CASE("exact oracles refuse oversized models") {
    Rng rng(7);
    const RbmParams rbm = init_rbm(16, 8, rng, 0.01);
    CHECK_THROWS_AS(partition_function(rbm), EnumerationError);
    CHECK_THROWS_AS(exact_loglik(rbm, Matrix(1, 16)), EnumerationError);
    CHECK_THROWS_AS(exact_loglik_grad(rbm, Matrix(1, 16)), EnumerationError);
}

TEST_CASE("CD-1 training decreases reconstruction error over 500 epochs") {
    const Matrix data = testutil::random_binary_matrix(16, 3, 90);
    Rng init_rng(91);
    RbmParams rbm = init_rbm(3, 2, init_rng, 0.01);
    CdHyperparams hp;  // paper schedule: 0.5 then 0.9 momentum, lr 0.1
    Rng rng(92);
    double after_first = 0.0;
    for (std::size_t epoch = 0; epoch < 500; ++epoch) {
        cd_epoch(rbm, data, hp, 8, epoch, mix_seed({93, epoch}), rng);
        if (epoch == 0) after_first = reconstruction_error(rbm, data);
    }
    CHECK(reconstruction_error(rbm, data) < after_first);
}

TEST_CASE("training is bit-deterministic in the seed") {
    const Matrix data = testutil::random_binary_matrix(20, 4, 95);
    const auto train_once = [&] {
        Rng init_rng(96);
        RbmParams rbm = init_rbm(4, 3, init_rng, 0.01);
        CdHyperparams hp;
        Rng rng(97);
        for (std::size_t epoch = 0; epoch < 12; ++epoch)
            cd_epoch(rbm, data, hp, 5, epoch, mix_seed({98, epoch}), rng);
        return rbm;
    };
    const RbmParams a = train_once();
    const RbmParams b = train_once();
    CHECK(testutil::matrices_equal(a.weights, b.weights));
    CHECK(a.visible_bias == b.visible_bias);
    CHECK(a.hidden_bias == b.hidden_bias);
    CHECK(testutil::matrices_equal(a.vel_weights, b.vel_weights));
}

TEST_CASE("momentum schedule: value switches at the configured epoch") {
    CdHyperparams hp;  // default: 0.5 from 0, 0.9 from 5
    CHECK(hp.momentum_for(0) == 0.5);
    CHECK(hp.momentum_for(4) == 0.5);
    CHECK(hp.momentum_for(5) == 0.9);
    CHECK(hp.momentum_for(100) == 0.9);
}
