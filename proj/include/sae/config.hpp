#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sae/rbm.hpp"

namespace sae {

enum class PretrainUnit { Rbm, Autoencoder };
enum class SyncMode { FreeRunning, DeterministicRounds };
enum class Termination { AllStipulated, FirstLayerDone };

inline constexpr std::size_t kUnlimitedEpochs = std::numeric_limits<std::size_t>::max();

/// Per-worker epoch budgets for synchronized pre-training.
struct WorkerSchedule {
    std::vector<std::size_t> stipulated_epochs;  // empty: use epochs_per_layer
    std::size_t wake_epochs = 1;
    Termination termination = Termination::FirstLayerDone;
    std::vector<std::size_t> extra_epochs;  // empty: unlimited post-stipulation budget
};

struct DataConfig {
    std::string images;
    std::string labels;
    std::string test_images;
    std::string test_labels;
    std::size_t per_class_valid = 1000;
    std::uint64_t split_seed = 1;
    std::size_t train_limit = 0;  // 0: keep everything
    std::size_t test_limit = 0;
};

struct TrainingConfig {
    std::vector<std::size_t> arch{784, 1000, 500, 250, 30};
    PretrainUnit unit = PretrainUnit::Rbm;
    CdHyperparams cd;
    double backprop_learning_rate = 0.001;
    std::size_t batch_size = 100;
    std::size_t epochs_per_layer = 20;
    std::size_t finetune_epochs = 10;
    std::uint64_t seed = 1;
    WorkerSchedule schedule;
    SyncMode mode = SyncMode::FreeRunning;
    double watchdog_seconds = 120.0;
    bool pin_workers = false;
    DataConfig data;
    std::string out_dir = "out";

    std::size_t layer_count() const { return arch.empty() ? 0 : arch.size() - 1; }

    /// Per-layer stipulated epochs with epochs_per_layer as the fallback.
    std::vector<std::size_t> stipulated() const;

    /// Per-layer post-stipulation budgets; kUnlimitedEpochs when unset.
    std::vector<std::size_t> extra_budget() const;

    /// Throws ConfigError on any violated invariant.
    void validate() const;
};

/// Parses `key = value` lines with dotted keys; '#' starts a comment.
/// Unknown keys and malformed values raise ConfigError with the line number.
TrainingConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
TrainingConfig parse_config_file(const std::string& path);

/// Same parsers, applied on top of an existing configuration (later sources
/// override earlier ones: preset, then file, then flags).
void apply_config_text(TrainingConfig& cfg, const std::string& text,
                       const std::string& origin = "<config>");
void apply_config_file(TrainingConfig& cfg, const std::string& path);

/// Applies a single dotted-key override, as used by command-line flags.
void apply_config_value(TrainingConfig& cfg, const std::string& key, const std::string& value,
                        int line = 0);

/// Named parameter bundles: "paper" (full-scale reference setup) and "desk"
/// (small setup that finishes in minutes).
void apply_preset(TrainingConfig& cfg, const std::string& name);

/// Canonical echo of every resolved key, one per line; parsing it back
/// reproduces the configuration exactly.
std::string config_echo(const TrainingConfig& cfg);

/// FNV-1a over the echo minus output-location keys; runs must match on this
/// hash to be comparable.
std::uint64_t config_hash(const TrainingConfig& cfg);

const char* pretrain_unit_name(PretrainUnit unit);
const char* sync_mode_name(SyncMode mode);
const char* termination_name(Termination termination);

}  // namespace sae
