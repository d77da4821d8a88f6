#pragma once

#include <vector>

#include "sae/autoencoder.hpp"
#include "sae/config.hpp"
#include "sae/trace.hpp"

namespace sae {

/// Derived seed for the minibatch permutation of (layer, epoch). Shared by
/// the greedy baseline and the synchronized workers so that schedules with
/// the same seed walk the same batch orders.
std::uint64_t pretrain_shuffle_seed(std::uint64_t seed, std::size_t layer, std::size_t epoch);

/// RNG for a layer's weight initialization.
Rng layer_init_rng(std::uint64_t seed, std::size_t layer);

/// RNG stream for a layer's CD hidden-state sampling.
Rng layer_sampling_rng(std::uint64_t seed, std::size_t layer);

/// Baseline greedy layer-wise pre-training: each layer's RBM trains to
/// completion, then the data is transformed and the next layer starts.
/// Emits one EPOCH trace event per (layer, epoch).
std::vector<RbmParams> greedy_pretrain(const TrainingConfig& cfg, const Matrix& train,
                                       const Matrix& valid, TraceSink& trace);

/// Same schedule with one-hidden-layer autoencoder units trained by
/// backprop; returns the trained encoder layers.
std::vector<Layer> greedy_pretrain_ae(const TrainingConfig& cfg, const Matrix& train,
                                      const Matrix& valid, TraceSink& trace);

}  // namespace sae
