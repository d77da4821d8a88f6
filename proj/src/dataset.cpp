#include "sae/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sae/rng.hpp"

namespace sae {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_u32_be(std::ifstream& in, const std::string& path) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4))
        throw IdxError(IdxError::Kind::Truncated, "truncated IDX header in " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_u32_be(std::ofstream& out, std::uint32_t v) {
    const std::array<unsigned char, 4> b{static_cast<unsigned char>(v >> 24),
                                         static_cast<unsigned char>(v >> 16),
                                         static_cast<unsigned char>(v >> 8),
                                         static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b.data()), 4);
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream images(images_path, std::ios::binary);
    if (!images) throw DataError("cannot open image file " + images_path);
    std::ifstream labels(labels_path, std::ios::binary);
    if (!labels) throw DataError("cannot open label file " + labels_path);

    const std::uint32_t images_magic = read_u32_be(images, images_path);
    if (images_magic != kImagesMagic) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "bad image magic 0x%08x in ", images_magic);
        throw IdxError(IdxError::Kind::BadMagic, buf + images_path);
    }
    const std::uint32_t image_count = read_u32_be(images, images_path);
    const std::uint32_t image_rows = read_u32_be(images, images_path);
    const std::uint32_t image_cols = read_u32_be(images, images_path);

    const std::uint32_t labels_magic = read_u32_be(labels, labels_path);
    if (labels_magic != kLabelsMagic) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "bad label magic 0x%08x in ", labels_magic);
        throw IdxError(IdxError::Kind::BadMagic, buf + labels_path);
    }
    const std::uint32_t label_count = read_u32_be(labels, labels_path);

    if (image_count != label_count)
        throw IdxError(IdxError::Kind::CountMismatch,
                       std::to_string(image_count) + " images vs " +
                           std::to_string(label_count) + " labels (" + images_path + ", " +
                           labels_path + ")");

    const std::size_t pixels = std::size_t(image_rows) * image_cols;
    LabeledDataset data;
    data.images = Matrix(image_count, pixels);
    data.labels.resize(label_count);

    std::vector<unsigned char> buffer(pixels);
    for (std::uint32_t i = 0; i < image_count; ++i) {
        if (!images.read(reinterpret_cast<char*>(buffer.data()), std::streamsize(pixels)))
            throw IdxError(IdxError::Kind::Truncated,
                           "image file " + images_path + " truncated at example " +
                               std::to_string(i));
        double* row = data.images.row(i);
        for (std::size_t p = 0; p < pixels; ++p) row[p] = buffer[p] / 255.0;
    }
    if (label_count > 0) {
        std::vector<unsigned char> raw_labels(label_count);
        if (!labels.read(reinterpret_cast<char*>(raw_labels.data()),
                         std::streamsize(label_count)))
            throw IdxError(IdxError::Kind::Truncated, "label file " + labels_path + " truncated");
        for (std::uint32_t i = 0; i < label_count; ++i) data.labels[i] = raw_labels[i];
    }
    return data;
}

void save_idx(const LabeledDataset& data, const std::string& images_path,
              const std::string& labels_path) {
    // 28x28 when the pixel count allows it, else a flat 1xN raster.
    std::uint32_t rows = 28, cols = 28;
    if (data.images.cols() != 784) {
        rows = 1;
        cols = static_cast<std::uint32_t>(data.images.cols());
    }

    std::ofstream images(images_path, std::ios::binary);
    if (!images) throw IoError(images_path, "cannot write " + images_path);
    write_u32_be(images, kImagesMagic);
    write_u32_be(images, static_cast<std::uint32_t>(data.images.rows()));
    write_u32_be(images, rows);
    write_u32_be(images, cols);
    std::vector<unsigned char> buffer(data.images.cols());
    for (std::size_t i = 0; i < data.images.rows(); ++i) {
        const double* row = data.images.row(i);
        for (std::size_t p = 0; p < buffer.size(); ++p)
            buffer[p] = static_cast<unsigned char>(std::lround(row[p] * 255.0));
        images.write(reinterpret_cast<const char*>(buffer.data()),
                     std::streamsize(buffer.size()));
    }
    if (!images) throw IoError(images_path, "failed writing " + images_path);

    std::ofstream labels(labels_path, std::ios::binary);
    if (!labels) throw IoError(labels_path, "cannot write " + labels_path);
    write_u32_be(labels, kLabelsMagic);
    write_u32_be(labels, static_cast<std::uint32_t>(data.labels.size()));
    for (int label : data.labels) {
        const unsigned char b = static_cast<unsigned char>(label);
        labels.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!labels) throw IoError(labels_path, "failed writing " + labels_path);
}

std::pair<LabeledDataset, LabeledDataset> stratified_split(const LabeledDataset& data,
                                                           std::size_t per_class,
                                                           std::uint64_t seed) {
    std::array<std::vector<std::uint32_t>, 10> by_class;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        const int label = data.labels[i];
        if (label < 0 || label > 9)
            throw DataError("label " + std::to_string(label) + " outside 0-9 at example " +
                            std::to_string(i));
        by_class[label].push_back(static_cast<std::uint32_t>(i));
    }

    std::vector<char> in_valid(data.size(), 0);
    for (int label = 0; label < 10; ++label) {
        auto& indices = by_class[label];
        if (indices.size() < per_class)
            throw SplitError(label, "class " + std::to_string(label) + " has only " +
                                        std::to_string(indices.size()) + " examples, need " +
                                        std::to_string(per_class));
        Rng rng(mix_seed({seed, seed_stream::split, static_cast<std::uint64_t>(label)}));
        rng.shuffle(indices);
        for (std::size_t k = 0; k < per_class; ++k) in_valid[indices[k]] = 1;
    }

    const std::size_t valid_rows = per_class * 10;
    LabeledDataset train, valid;
    train.images = Matrix(data.size() - valid_rows, data.images.cols());
    valid.images = Matrix(valid_rows, data.images.cols());
    train.labels.reserve(data.size() - valid_rows);
    valid.labels.reserve(valid_rows);

    std::size_t train_row = 0, valid_row = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        LabeledDataset& dest = in_valid[i] ? valid : train;
        std::size_t& dest_row = in_valid[i] ? valid_row : train_row;
        const double* src = data.images.row(i);
        std::copy(src, src + data.images.cols(), dest.images.row(dest_row));
        dest.labels.push_back(data.labels[i]);
        ++dest_row;
    }
    return {std::move(train), std::move(valid)};
}

MinibatchPlan::MinibatchPlan(std::size_t rows, std::size_t batch_size, std::uint64_t epoch_seed)
    : batch_size_(batch_size), epoch_seed_(epoch_seed), permutation_(rows) {
    if (batch_size == 0) throw Error("minibatch size must be >= 1");
    for (std::size_t i = 0; i < rows; ++i) permutation_[i] = static_cast<std::uint32_t>(i);
    Rng rng(mix_seed({epoch_seed, seed_stream::shuffle}));
    rng.shuffle(permutation_);
}

std::size_t MinibatchPlan::batch_count() const {
    return (permutation_.size() + batch_size_ - 1) / batch_size_;
}

std::span<const std::uint32_t> MinibatchPlan::batch(std::size_t index) const {
    const std::size_t begin = index * batch_size_;
    const std::size_t end = std::min(begin + batch_size_, permutation_.size());
    return {permutation_.data() + begin, end - begin};
}

Matrix gather_rows(const Matrix& data, std::span<const std::uint32_t> rows) {
    Matrix out(rows.size(), data.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double* src = data.row(rows[i]);
        std::copy(src, src + data.cols(), out.row(i));
    }
    return out;
}

}  // namespace sae
