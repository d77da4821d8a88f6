#include "sae/greedy.hpp"

namespace sae {

std::uint64_t pretrain_shuffle_seed(std::uint64_t seed, std::size_t layer, std::size_t epoch) {
    return mix_seed({seed, seed_stream::shuffle, layer, epoch});
}

Rng layer_init_rng(std::uint64_t seed, std::size_t layer) {
    return Rng(mix_seed({seed, seed_stream::weight_init, layer}));
}

Rng layer_sampling_rng(std::uint64_t seed, std::size_t layer) {
    return Rng(mix_seed({seed, seed_stream::cd_sampling, layer}));
}

namespace {

void check_input(const TrainingConfig& cfg, const Matrix& train, const Matrix& valid) {
    cfg.validate();
    if (train.cols() != cfg.arch.front() || valid.cols() != cfg.arch.front())
        throw DimensionError("pretrain: data has " + std::to_string(train.cols()) +
                             " features, net.arch starts at " +
                             std::to_string(cfg.arch.front()));
    if (train.rows() == 0) throw DataError("pretrain: empty training set");
}

}  // namespace

std::vector<RbmParams> greedy_pretrain(const TrainingConfig& cfg, const Matrix& train,
                                       const Matrix& valid, TraceSink& trace) {
    check_input(cfg, train, valid);
    std::vector<RbmParams> rbms;
    rbms.reserve(cfg.layer_count());

    Matrix layer_train = train;
    Matrix layer_valid = valid;
    for (std::size_t layer = 0; layer < cfg.layer_count(); ++layer) {
        Rng init_rng = layer_init_rng(cfg.seed, layer);
        Rng sampling_rng = layer_sampling_rng(cfg.seed, layer);
        RbmParams rbm = init_rbm(cfg.arch[layer], cfg.arch[layer + 1], init_rng);

        for (std::size_t epoch = 0; epoch < cfg.epochs_per_layer; ++epoch) {
            TraceEvent event;
            event.worker_id = static_cast<std::uint32_t>(layer + 1);
            event.epoch_index = epoch;
            event.kind = EventKind::Epoch;
            event.input_version = 0;
            event.t_start_ns = monotonic_now_ns();
            cd_epoch(rbm, layer_train, cfg.cd, cfg.batch_size, epoch,
                     pretrain_shuffle_seed(cfg.seed, layer, epoch), sampling_rng);
            event.train_err = reconstruction_error(rbm, layer_train);
            event.valid_err = reconstruction_error(rbm, layer_valid);
            event.t_end_ns = monotonic_now_ns();
            trace.append(event);
        }

        layer_train = transform(rbm, layer_train);
        layer_valid = transform(rbm, layer_valid);
        rbms.push_back(std::move(rbm));
    }
    return rbms;
}

std::vector<Layer> greedy_pretrain_ae(const TrainingConfig& cfg, const Matrix& train,
                                      const Matrix& valid, TraceSink& trace) {
    check_input(cfg, train, valid);
    std::vector<Layer> encoder;
    encoder.reserve(cfg.layer_count());

    Matrix layer_train = train;
    Matrix layer_valid = valid;
    for (std::size_t layer = 0; layer < cfg.layer_count(); ++layer) {
        Rng init_rng = layer_init_rng(cfg.seed, layer);
        StackedAutoencoder unit;
        unit.layers.push_back(init_layer(cfg.arch[layer], cfg.arch[layer + 1], init_rng));
        unit.layers.push_back(init_layer(cfg.arch[layer + 1], cfg.arch[layer], init_rng));
        unit.code_index = 1;

        for (std::size_t epoch = 0; epoch < cfg.epochs_per_layer; ++epoch) {
            TraceEvent event;
            event.worker_id = static_cast<std::uint32_t>(layer + 1);
            event.epoch_index = epoch;
            event.kind = EventKind::Epoch;
            event.input_version = 0;
            event.t_start_ns = monotonic_now_ns();
            backprop_epoch(unit, layer_train, cfg.backprop_learning_rate, cfg.batch_size,
                           pretrain_shuffle_seed(cfg.seed, layer, epoch));
            event.train_err = mse_per_example(layer_train, forward(unit, layer_train).output());
            event.valid_err = mse_per_example(layer_valid, forward(unit, layer_valid).output());
            event.t_end_ns = monotonic_now_ns();
            trace.append(event);
        }

        Layer trained = unit.layers.front();
        Matrix next_train = matmul_bt(layer_train, trained.weights);
        add_row_bias(next_train, trained.bias);
        sigmoid_inplace(next_train);
        Matrix next_valid = matmul_bt(layer_valid, trained.weights);
        add_row_bias(next_valid, trained.bias);
        sigmoid_inplace(next_valid);
        layer_train = std::move(next_train);
        layer_valid = std::move(next_valid);
        encoder.push_back(std::move(trained));
    }
    return encoder;
}

}  // namespace sae
