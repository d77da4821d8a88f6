#include "sae/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace sae {

namespace {

constexpr char kMagic[8] = {'S', 'A', 'E', 'C', 'K', 'P', '0', '1'};

class Writer {
public:
    explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError(path, "cannot write checkpoint " + path);
    }

    void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }

    void u32(std::uint32_t v) {
        std::array<unsigned char, 4> b{static_cast<unsigned char>(v),
                                       static_cast<unsigned char>(v >> 8),
                                       static_cast<unsigned char>(v >> 16),
                                       static_cast<unsigned char>(v >> 24)};
        out_.write(reinterpret_cast<const char*>(b.data()), 4);
    }

    void u64(std::uint64_t v) {
        u32(static_cast<std::uint32_t>(v));
        u32(static_cast<std::uint32_t>(v >> 32));
    }

    void doubles(const std::vector<double>& values) {
        if constexpr (std::endian::native == std::endian::little) {
            out_.write(reinterpret_cast<const char*>(values.data()),
                       static_cast<std::streamsize>(values.size() * sizeof(double)));
        } else {
            for (double d : values) u64(std::bit_cast<std::uint64_t>(d));
        }
    }

    void matrix(const Matrix& m) {
        u32(static_cast<std::uint32_t>(m.rows()));
        u32(static_cast<std::uint32_t>(m.cols()));
        doubles(m.values());
    }

    void vec(const std::vector<double>& v) {
        u32(static_cast<std::uint32_t>(v.size()));
        doubles(v);
    }

    void finish() {
        out_.flush();
        if (!out_) throw IoError(path_, "failed writing checkpoint " + path_);
    }

private:
    std::string path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError(path, "cannot open checkpoint " + path);
    }

    std::uint8_t u8() {
        char c = 0;
        if (!in_.get(c)) fail("truncated");
        return static_cast<std::uint8_t>(c);
    }

    std::uint32_t u32() {
        std::array<unsigned char, 4> b{};
        if (!in_.read(reinterpret_cast<char*>(b.data()), 4)) fail("truncated");
        return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
               (std::uint32_t(b[3]) << 24);
    }

    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        return lo | (static_cast<std::uint64_t>(u32()) << 32);
    }

    void doubles(std::vector<double>& values) {
        if constexpr (std::endian::native == std::endian::little) {
            if (!in_.read(reinterpret_cast<char*>(values.data()),
                          static_cast<std::streamsize>(values.size() * sizeof(double))))
                fail("truncated");
        } else {
            for (double& d : values) d = std::bit_cast<double>(u64());
        }
    }

    Matrix matrix() {
        const std::uint32_t rows = u32();
        const std::uint32_t cols = u32();
        Matrix m(rows, cols);
        doubles(m.values());
        return m;
    }

    std::vector<double> vec() {
        std::vector<double> v(u32());
        doubles(v);
        return v;
    }

    void expect_magic() {
        char buf[8];
        if (!in_.read(buf, 8) || std::memcmp(buf, kMagic, 8) != 0)
            fail("not a checkpoint file (bad magic)");
    }

    [[noreturn]] void fail(const std::string& why) {
        throw IoError(path_, "checkpoint " + path_ + ": " + why);
    }

private:
    std::string path_;
    std::ifstream in_;
};

void write_header(Writer& w, CheckpointKind kind) {
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u8(static_cast<std::uint8_t>(kind));
}

}  // namespace

CheckpointKind checkpoint_kind(const std::string& path) {
    Reader r(path);
    r.expect_magic();
    const std::uint8_t kind = r.u8();
    if (kind > 2) r.fail("unknown checkpoint kind " + std::to_string(kind));
    return static_cast<CheckpointKind>(kind);
}

void save_rbm_stack(const std::string& path, const RbmStackCheckpoint& checkpoint) {
    Writer w(path);
    write_header(w, CheckpointKind::RbmStack);
    w.u64(checkpoint.seed);
    w.u32(static_cast<std::uint32_t>(checkpoint.rbms.size()));
    for (std::size_t i = 0; i < checkpoint.rbms.size(); ++i) {
        const RbmParams& rbm = checkpoint.rbms[i];
        w.u64(i < checkpoint.epochs_done.size() ? checkpoint.epochs_done[i] : 0);
        w.matrix(rbm.weights);
        w.vec(rbm.visible_bias);
        w.vec(rbm.hidden_bias);
        w.matrix(rbm.vel_weights);
        w.vec(rbm.vel_visible_bias);
        w.vec(rbm.vel_hidden_bias);
    }
    w.finish();
}

RbmStackCheckpoint load_rbm_stack(const std::string& path) {
    Reader r(path);
    r.expect_magic();
    if (r.u8() != static_cast<std::uint8_t>(CheckpointKind::RbmStack))
        r.fail("not an RBM stack checkpoint");
    RbmStackCheckpoint checkpoint;
    checkpoint.seed = r.u64();
    const std::uint32_t count = r.u32();
    checkpoint.rbms.resize(count);
    checkpoint.epochs_done.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        checkpoint.epochs_done[i] = r.u64();
        RbmParams& rbm = checkpoint.rbms[i];
        rbm.weights = r.matrix();
        rbm.visible_bias = r.vec();
        rbm.hidden_bias = r.vec();
        rbm.vel_weights = r.matrix();
        rbm.vel_visible_bias = r.vec();
        rbm.vel_hidden_bias = r.vec();
    }
    return checkpoint;
}

void save_sae(const std::string& path, const SaeCheckpoint& checkpoint) {
    Writer w(path);
    write_header(w, CheckpointKind::Sae);
    w.u64(checkpoint.seed);
    w.u64(checkpoint.epochs_done);
    w.u32(static_cast<std::uint32_t>(checkpoint.net.code_index));
    w.u32(static_cast<std::uint32_t>(checkpoint.net.layers.size()));
    for (const Layer& layer : checkpoint.net.layers) {
        w.matrix(layer.weights);
        w.vec(layer.bias);
    }
    w.finish();
}

SaeCheckpoint load_sae(const std::string& path) {
    Reader r(path);
    r.expect_magic();
    if (r.u8() != static_cast<std::uint8_t>(CheckpointKind::Sae))
        r.fail("not a stacked-autoencoder checkpoint");
    SaeCheckpoint checkpoint;
    checkpoint.seed = r.u64();
    checkpoint.epochs_done = r.u64();
    checkpoint.net.code_index = r.u32();
    const std::uint32_t count = r.u32();
    checkpoint.net.layers.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        checkpoint.net.layers[i].weights = r.matrix();
        checkpoint.net.layers[i].bias = r.vec();
    }
    return checkpoint;
}

void save_layer_stack(const std::string& path, const LayerStackCheckpoint& checkpoint) {
    Writer w(path);
    write_header(w, CheckpointKind::LayerStack);
    w.u64(checkpoint.seed);
    w.u32(static_cast<std::uint32_t>(checkpoint.layers.size()));
    for (std::size_t i = 0; i < checkpoint.layers.size(); ++i) {
        w.u64(i < checkpoint.epochs_done.size() ? checkpoint.epochs_done[i] : 0);
        w.matrix(checkpoint.layers[i].weights);
        w.vec(checkpoint.layers[i].bias);
    }
    w.finish();
}

LayerStackCheckpoint load_layer_stack(const std::string& path) {
    Reader r(path);
    r.expect_magic();
    if (r.u8() != static_cast<std::uint8_t>(CheckpointKind::LayerStack))
        r.fail("not an encoder layer-stack checkpoint");
    LayerStackCheckpoint checkpoint;
    checkpoint.seed = r.u64();
    const std::uint32_t count = r.u32();
    checkpoint.layers.resize(count);
    checkpoint.epochs_done.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        checkpoint.epochs_done[i] = r.u64();
        checkpoint.layers[i].weights = r.matrix();
        checkpoint.layers[i].bias = r.vec();
    }
    return checkpoint;
}

}  // namespace sae
