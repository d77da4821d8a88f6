#include <doctest.h>

#include <cstdint>

#include "sae/greedy.hpp"
#include "testutil.hpp"

using namespace sae;

namespace {

TrainingConfig small_config(std::vector<std::size_t> arch, std::size_t epochs,
                            std::uint64_t seed) {
    TrainingConfig cfg;
    cfg.arch = std::move(arch);
    cfg.epochs_per_layer = epochs;
    cfg.batch_size = 10;
    cfg.seed = seed;
    return cfg;
}

bool rbms_equal(const RbmParams& a, const RbmParams& b) {
    return testutil::matrices_equal(a.weights, b.weights) && a.visible_bias == b.visible_bias &&
           a.hidden_bias == b.hidden_bias && testutil::matrices_equal(a.vel_weights, b.vel_weights) &&
           a.vel_visible_bias == b.vel_visible_bias && a.vel_hidden_bias == b.vel_hidden_bias;
}

}  // namespace

TEST_CASE("greedy with one layer degenerates to plain RBM training") {
    const Matrix train = testutil::random_matrix(50, 16, 1);
    const Matrix valid = testutil::random_matrix(10, 16, 2);
    const TrainingConfig cfg = small_config({16, 6}, 3, 42);

    TraceSink sink;
    const std::vector<RbmParams> rbms = greedy_pretrain(cfg, train, valid, sink);
    REQUIRE(rbms.size() == 1);

    Rng init_rng = layer_init_rng(cfg.seed, 0);
    Rng sampling_rng = layer_sampling_rng(cfg.seed, 0);
    RbmParams reference = init_rbm(16, 6, init_rng);
    for (std::size_t epoch = 0; epoch < 3; ++epoch)
        cd_epoch(reference, train, cfg.cd, cfg.batch_size, epoch,
                 pretrain_shuffle_seed(cfg.seed, 0, epoch), sampling_rng);
    CHECK(rbms_equal(rbms[0], reference));
}

TEST_CASE("greedy trace has one EPOCH event per (layer, epoch), strictly sequenced") {
    const Matrix train = testutil::random_matrix(40, 12, 3);
    const Matrix valid = testutil::random_matrix(8, 12, 4);
    const TrainingConfig cfg = small_config({12, 8, 5, 3}, 4, 7);

    TraceSink sink;
    greedy_pretrain(cfg, train, valid, sink);
    const std::vector<TraceEvent> events = sink.snapshot();
    CHECK(events.size() == 3 * 4);
    for (const TraceEvent& e : events) CHECK(e.kind == EventKind::Epoch);

    // Layer l starts only after layer l-1 has fully finished.
    std::int64_t previous_layer_end = 0;
    for (std::uint32_t layer = 1; layer <= 3; ++layer) {
        std::int64_t first_start = INT64_MAX, last_end = 0;
        for (const TraceEvent& e : events)
            if (e.worker_id == layer) {
                first_start = std::min(first_start, e.t_start_ns);
                last_end = std::max(last_end, e.t_end_ns);
            }
        CHECK(first_start >= previous_layer_end);
        previous_layer_end = last_end;
    }
}

TEST_CASE("greedy: two runs with one seed are bit-identical") {
    const Matrix train = testutil::random_matrix(30, 10, 5);
    const Matrix valid = testutil::random_matrix(6, 10, 6);
    const TrainingConfig cfg = small_config({10, 7, 4}, 2, 11);

    TraceSink sink_a, sink_b;
    const auto run_a = greedy_pretrain(cfg, train, valid, sink_a);
    const auto run_b = greedy_pretrain(cfg, train, valid, sink_b);
    REQUIRE(run_a.size() == run_b.size());
    for (std::size_t l = 0; l < run_a.size(); ++l) CHECK(rbms_equal(run_a[l], run_b[l]));
}

TEST_CASE("greedy: mismatched data width is rejected") {
    const TrainingConfig cfg = small_config({12, 6}, 1, 9);
    TraceSink sink;
    CHECK_THROWS_AS(
        greedy_pretrain(cfg, Matrix(10, 8, 0.1), Matrix(4, 8, 0.1), sink), DimensionError);
}

TEST_CASE("greedy autoencoder variant: zero learning rate returns the initialization") {
    const Matrix train = testutil::random_matrix(20, 9, 7);
    const Matrix valid = testutil::random_matrix(5, 9, 8);
    TrainingConfig cfg = small_config({9, 4}, 2, 13);
    cfg.unit = PretrainUnit::Autoencoder;
    cfg.backprop_learning_rate = 0.0;

    TraceSink sink;
    const std::vector<Layer> layers = greedy_pretrain_ae(cfg, train, valid, sink);
    REQUIRE(layers.size() == 1);

    Rng init_rng = layer_init_rng(cfg.seed, 0);
    const Layer expected = init_layer(9, 4, init_rng);
    CHECK(testutil::matrices_equal(layers[0].weights, expected.weights));
    CHECK(layers[0].bias == expected.bias);
    CHECK(sink.size() == 2);
}

TEST_CASE("greedy autoencoder variant: returned layer dims chain like the architecture") {
    const Matrix train = testutil::random_matrix(30, 10, 9);
    const Matrix valid = testutil::random_matrix(6, 10, 10);
    TrainingConfig cfg = small_config({10, 6, 3}, 1, 15);
    cfg.unit = PretrainUnit::Autoencoder;
    cfg.backprop_learning_rate = 0.01;

    TraceSink sink;
    const std::vector<Layer> layers = greedy_pretrain_ae(cfg, train, valid, sink);
    REQUIRE(layers.size() == 2);
    CHECK(layers[0].in_dim() == 10);
    CHECK(layers[0].out_dim() == 6);
    CHECK(layers[1].in_dim() == 6);
    CHECK(layers[1].out_dim() == 3);
}
