#pragma once

#include <cstdint>

#include "sae/dataset.hpp"

namespace sae {

/// Deterministic 28x28 10-class corpus for offline runs: each class is a set
/// of smooth stroke-like blobs, each example a jittered, intensity-scaled,
/// lightly speckled instance. Classes are interleaved (label = index % 10) so
/// any prefix stays roughly balanced.
LabeledDataset make_synthetic_digits(std::size_t per_class, std::uint64_t seed);

}  // namespace sae
