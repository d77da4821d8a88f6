#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sae/config.hpp"
#include "sae/dataset.hpp"
#include "sae/metrics.hpp"
#include "sae/sync.hpp"

namespace sae {

enum class Algorithm { Greedy, Sync };

const char* algorithm_name(Algorithm algorithm);

/// Stratified-split data with the configured limits applied. `test` is empty
/// when no test pair was configured or requested.
struct SplitData {
    Matrix train;
    Matrix valid;
    Matrix test;
};

/// Pure split/limit step, shared by everything that already has datasets.
SplitData prepare_data(const TrainingConfig& cfg, const LabeledDataset& train_set,
                       const LabeledDataset& test_set);

/// Loads the configured IDX pairs (falling back to $SAETRAIN_DATA_DIR for
/// unset paths) and applies prepare_data.
SplitData load_data(const TrainingConfig& cfg, bool need_test);

/// Pre-training by either algorithm, with the trace captured.
struct PretrainResult {
    std::vector<RbmParams> rbms;        // RBM unit
    std::vector<Layer> encoder_layers;  // autoencoder unit
    std::vector<TraceEvent> trace;
    std::int64_t wall_ns = 0;  // trace span
};

PretrainResult run_pretrain(Algorithm algorithm, const TrainingConfig& cfg, const Matrix& train,
                            const Matrix& valid);

/// Unfolds whichever unit type the result holds.
StackedAutoencoder unfold_result(const PretrainResult& result);

struct FinetuneEpoch {
    std::uint64_t epoch = 0;
    double train_err = 0.0;
    double valid_err = 0.0;
    std::int64_t t_start_ns = 0;
    std::int64_t t_end_ns = 0;
};

struct FinetuneResult {
    std::vector<FinetuneEpoch> log;
    std::int64_t wall_ns = 0;
};

/// `epochs` additional backprop epochs starting at absolute index
/// `first_epoch`; epoch seeds derive from (seed, absolute epoch), so a
/// checkpoint/resume pair reproduces a single longer run exactly.
FinetuneResult run_finetune(StackedAutoencoder& net, const TrainingConfig& cfg,
                            const Matrix& train, const Matrix& valid, std::uint64_t seed,
                            std::uint64_t first_epoch, std::size_t epochs);

/// Pre-train, unfold, fine-tune, evaluate: one comparable run.
struct EndToEndResult {
    PretrainResult pretrain;
    StackedAutoencoder net;
    FinetuneResult finetune;
    RunReport report;
    double valid_end_of_pretrain = 0.0;
    double valid_after_finetune = 0.0;
};

EndToEndResult run_end_to_end(Algorithm algorithm, const TrainingConfig& cfg,
                              const SplitData& data);

std::string format_duration_ns(std::int64_t ns);

}  // namespace sae
