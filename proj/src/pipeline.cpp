#include "sae/pipeline.hpp"

#include "sae/greedy.hpp"

#include <cstdio>
#include <cstdlib>

namespace sae {

const char* algorithm_name(Algorithm algorithm) {
    return algorithm == Algorithm::Greedy ? "greedy" : "sync";
}

namespace {

std::string resolve_data_path(const std::string& configured, const char* default_name,
                              const char* key) {
    if (!configured.empty()) return configured;
    if (const char* dir = std::getenv("SAETRAIN_DATA_DIR"))
        return std::string(dir) + "/" + default_name;
    throw DataError(std::string(key) + " not set and SAETRAIN_DATA_DIR is not defined");
}

Matrix limit_rows_shuffled(const Matrix& m, std::size_t limit, std::uint64_t seed) {
    if (limit == 0 || limit >= m.rows()) return m;
    std::vector<std::uint32_t> order(m.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
    Rng rng(seed);
    rng.shuffle(order);
    order.resize(limit);
    return gather_rows(m, order);
}

Matrix limit_rows_head(const Matrix& m, std::size_t limit) {
    if (limit == 0 || limit >= m.rows()) return m;
    std::vector<std::uint32_t> order(limit);
    for (std::size_t i = 0; i < limit; ++i) order[i] = static_cast<std::uint32_t>(i);
    return gather_rows(m, order);
}

}  // namespace

SplitData prepare_data(const TrainingConfig& cfg, const LabeledDataset& train_set,
                       const LabeledDataset& test_set) {
    SplitData out;
    if (cfg.data.per_class_valid > 0) {
        auto [train, valid] =
            stratified_split(train_set, cfg.data.per_class_valid, cfg.data.split_seed);
        out.train = std::move(train.images);
        out.valid = std::move(valid.images);
    } else {
        out.train = train_set.images;
        out.valid = train_set.images;  // degenerate: validate on the training data
    }
    out.train = limit_rows_shuffled(
        out.train, cfg.data.train_limit,
        mix_seed({cfg.data.split_seed, seed_stream::split, 0x11f1ULL}));
    if (test_set.size() > 0) out.test = limit_rows_head(test_set.images, cfg.data.test_limit);
    return out;
}

SplitData load_data(const TrainingConfig& cfg, bool need_test) {
    const std::string images =
        resolve_data_path(cfg.data.images, "train-images-idx3-ubyte", "data.images");
    const std::string labels =
        resolve_data_path(cfg.data.labels, "train-labels-idx1-ubyte", "data.labels");
    const LabeledDataset train_set = load_idx(images, labels);

    LabeledDataset test_set;
    if (need_test) {
        const std::string test_images =
            resolve_data_path(cfg.data.test_images, "t10k-images-idx3-ubyte", "data.test_images");
        const std::string test_labels =
            resolve_data_path(cfg.data.test_labels, "t10k-labels-idx1-ubyte", "data.test_labels");
        test_set = load_idx(test_images, test_labels);
    }
    return prepare_data(cfg, train_set, test_set);
}

PretrainResult run_pretrain(Algorithm algorithm, const TrainingConfig& cfg, const Matrix& train,
                            const Matrix& valid) {
    PretrainResult result;
    TraceSink sink;
    if (algorithm == Algorithm::Greedy) {
        if (cfg.unit == PretrainUnit::Rbm)
            result.rbms = greedy_pretrain(cfg, train, valid, sink);
        else
            result.encoder_layers = greedy_pretrain_ae(cfg, train, valid, sink);
    } else {
        if (cfg.unit != PretrainUnit::Rbm)
            throw ConfigError("synchronized pre-training supports pretrain.unit = rbm only", 0,
                              "pretrain.unit");
        result.rbms = sync_pretrain(cfg, train, valid, sink);
    }
    result.trace = sink.snapshot();
    result.wall_ns = trace_span_ns(result.trace);
    return result;
}

StackedAutoencoder unfold_result(const PretrainResult& result) {
    if (!result.rbms.empty()) return unfold(result.rbms);
    return unfold(result.encoder_layers);
}

FinetuneResult run_finetune(StackedAutoencoder& net, const TrainingConfig& cfg,
                            const Matrix& train, const Matrix& valid, std::uint64_t seed,
                            std::uint64_t first_epoch, std::size_t epochs) {
    FinetuneResult result;
    for (std::size_t i = 0; i < epochs; ++i) {
        FinetuneEpoch row;
        row.epoch = first_epoch + i;
        row.t_start_ns = monotonic_now_ns();
        row.train_err =
            backprop_epoch(net, train, cfg.backprop_learning_rate, cfg.batch_size,
                           mix_seed({seed, seed_stream::finetune_shuffle, row.epoch}));
        row.valid_err = evaluate(net, valid);
        row.t_end_ns = monotonic_now_ns();
        result.wall_ns += row.t_end_ns - row.t_start_ns;
        result.log.push_back(row);
    }
    return result;
}

EndToEndResult run_end_to_end(Algorithm algorithm, const TrainingConfig& cfg,
                              const SplitData& data) {
    EndToEndResult result;
    result.pretrain = run_pretrain(algorithm, cfg, data.train, data.valid);
    result.net = unfold_result(result.pretrain);
    result.valid_end_of_pretrain = evaluate(result.net, data.valid);
    result.finetune = run_finetune(result.net, cfg, data.train, data.valid, cfg.seed, 0,
                                   cfg.finetune_epochs);
    result.valid_after_finetune = result.finetune.log.empty()
                                      ? result.valid_end_of_pretrain
                                      : result.finetune.log.back().valid_err;

    result.report.algorithm = algorithm_name(algorithm);
    result.report.pretrain_wall_ns = result.pretrain.wall_ns;
    result.report.finetune_wall_ns = result.finetune.wall_ns;
    result.report.train_err = evaluate(result.net, data.train);
    result.report.test_err = data.test.rows() ? evaluate(result.net, data.test) : 0.0;
    result.report.config_hash = config_hash(cfg);
    result.report.seed = cfg.seed;
    return result;
}

std::string format_duration_ns(std::int64_t ns) {
    const std::int64_t total_seconds = ns / 1000000000;
    const std::int64_t hours = total_seconds / 3600;
    const std::int64_t minutes = (total_seconds % 3600) / 60;
    const double seconds = static_cast<double>(ns % 60000000000LL) / 1e9;
    char buf[64];
    if (hours > 0)
        std::snprintf(buf, sizeof buf, "%lldh %lldm %.1fs", static_cast<long long>(hours),
                      static_cast<long long>(minutes), seconds);
    else if (minutes > 0)
        std::snprintf(buf, sizeof buf, "%lldm %.1fs", static_cast<long long>(minutes), seconds);
    else
        std::snprintf(buf, sizeof buf, "%.2fs", static_cast<double>(ns) / 1e9);
    return buf;
}

}  // namespace sae
