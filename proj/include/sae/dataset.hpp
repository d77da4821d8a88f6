#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sae/linalg.hpp"

namespace sae {

/// Images as one example per row, pixels scaled to [0,1]; labels 0-9.
struct LabeledDataset {
    Matrix images;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

/// Loads an IDX image/label pair (big-endian, magic 0x00000803 / 0x00000801).
/// Pixel bytes are scaled to [0,1] by division by 255.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Writes a dataset back out in IDX format. Pixels are rounded to the nearest
/// byte, so a load/save/load round trip is bit-identical.
void save_idx(const LabeledDataset& data, const std::string& images_path,
              const std::string& labels_path);

/// Splits off a validation set with exactly `per_class` examples of each
/// label 0-9, chosen deterministically from `seed`. The remainder keeps its
/// original order. Throws SplitError naming the first class that is short.
std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& data,
                                                           std::size_t per_class,
                                                           std::uint64_t seed);

/// One epoch's shuffled minibatch schedule over `rows` examples. Every batch
/// has exactly `batch_size` rows except possibly the last, which is kept.
class MinibatchPlan {
public:
    MinibatchPlan(std::size_t rows, std::size_t batch_size, std::uint64_t epoch_seed);

    std::size_t batch_size() const { return batch_size_; }
    std::uint64_t epoch_seed() const { return epoch_seed_; }
    std::size_t batch_count() const;
    std::span<const std::uint32_t> batch(std::size_t index) const;
    const std::vector<std::uint32_t>& permutation() const { return permutation_; }

private:
    std::size_t batch_size_;
    std::uint64_t epoch_seed_;
    std::vector<std::uint32_t> permutation_;
};

/// Copies the named rows into a dense batch matrix.
Matrix gather_rows(const Matrix& data, std::span<const std::uint32_t> rows);

}  // namespace sae
