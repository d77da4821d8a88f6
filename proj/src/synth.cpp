#include "sae/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "sae/rng.hpp"

namespace sae {

namespace {

constexpr int kSide = 28;

struct Blob {
    double cx, cy, sigma, amplitude;
};

using Prototype = std::array<double, kSide * kSide>;

Prototype render_class(std::uint64_t seed, int label) {
    Rng rng(mix_seed({seed, seed_stream::synth, static_cast<std::uint64_t>(label)}));
    std::vector<Blob> blobs(4 + static_cast<std::size_t>(rng.below(3)));
    for (Blob& b : blobs) {
        b.cx = 5.0 + 18.0 * rng.uniform();
        b.cy = 5.0 + 18.0 * rng.uniform();
        b.sigma = 1.5 + 2.5 * rng.uniform();
        b.amplitude = 0.6 + 0.4 * rng.uniform();
    }
    Prototype proto{};
    double peak = 0.0;
    for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x) {
            double v = 0.0;
            for (const Blob& b : blobs) {
                const double dx = x - b.cx;
                const double dy = y - b.cy;
                v += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
            }
            proto[y * kSide + x] = v;
            peak = std::max(peak, v);
        }
    if (peak > 0.0)
        for (double& v : proto) v = std::min(1.0, v / peak);
    return proto;
}

}  // namespace

LabeledDataset make_synthetic_digits(std::size_t per_class, std::uint64_t seed) {
    std::array<Prototype, 10> prototypes;
    for (int label = 0; label < 10; ++label) prototypes[label] = render_class(seed, label);

    const std::size_t count = per_class * 10;
    LabeledDataset data;
    data.images = Matrix(count, kSide * kSide);
    data.labels.resize(count);

    Rng rng(mix_seed({seed, seed_stream::synth, 0xeaccedULL}));
    for (std::size_t i = 0; i < count; ++i) {
        const int label = static_cast<int>(i % 10);
        data.labels[i] = label;
        const Prototype& proto = prototypes[label];

        const int shift_x = static_cast<int>(rng.below(5)) - 2;
        const int shift_y = static_cast<int>(rng.below(5)) - 2;
        const double intensity = 0.75 + 0.25 * rng.uniform();

        double* row = data.images.row(i);
        for (int y = 0; y < kSide; ++y)
            for (int x = 0; x < kSide; ++x) {
                const int sx = x - shift_x;
                const int sy = y - shift_y;
                double v = 0.0;
                if (sx >= 0 && sx < kSide && sy >= 0 && sy < kSide)
                    v = intensity * proto[sy * kSide + sx];
                if (rng.uniform() < 0.02) v = std::min(1.0, v + 0.5 * rng.uniform());
                row[y * kSide + x] = v;
            }
        // Quantize to byte resolution so IDX round trips are exact.
        for (std::size_t p = 0; p < kSide * kSide; ++p)
            row[p] = std::lround(row[p] * 255.0) / 255.0;
    }
    return data;
}

}  // namespace sae
