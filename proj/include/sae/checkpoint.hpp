#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sae/autoencoder.hpp"
#include "sae/rbm.hpp"

namespace sae {

// Binary checkpoint files. Layout: 8-byte magic "SAECKP01", one kind byte
// (0 = RBM stack, 1 = stacked autoencoder, 2 = encoder layer stack), then
// little-endian u32/u64 shape and counter fields followed by row-major
// little-endian IEEE-754 doubles. Round trips are bit-exact.

enum class CheckpointKind : std::uint8_t { RbmStack = 0, Sae = 1, LayerStack = 2 };

/// Peeks at the header; throws on anything that is not a checkpoint.
CheckpointKind checkpoint_kind(const std::string& path);

struct RbmStackCheckpoint {
    std::vector<RbmParams> rbms;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> epochs_done;  // one counter per layer
};

void save_rbm_stack(const std::string& path, const RbmStackCheckpoint& checkpoint);
RbmStackCheckpoint load_rbm_stack(const std::string& path);

struct SaeCheckpoint {
    StackedAutoencoder net;
    std::uint64_t seed = 0;
    std::uint64_t epochs_done = 0;  // fine-tuning epochs completed
};

void save_sae(const std::string& path, const SaeCheckpoint& checkpoint);
SaeCheckpoint load_sae(const std::string& path);

struct LayerStackCheckpoint {
    std::vector<Layer> layers;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> epochs_done;
};

void save_layer_stack(const std::string& path, const LayerStackCheckpoint& checkpoint);
LayerStackCheckpoint load_layer_stack(const std::string& path);

}  // namespace sae
