#pragma once

#include <cstdint>
#include <vector>

#include "sae/linalg.hpp"
#include "sae/rbm.hpp"
#include "sae/rng.hpp"

namespace sae {

/// One affine + sigmoid layer: y = sigma(x W^T + b), W is out_dim x in_dim.
struct Layer {
    Matrix weights;
    std::vector<double> bias;

    std::size_t in_dim() const { return weights.cols(); }
    std::size_t out_dim() const { return weights.rows(); }
};

Layer init_layer(std::size_t in_dim, std::size_t out_dim, Rng& rng, double weight_sigma = 0.01);

/// Encoder layers followed by their mirrored decoder layers. For a K-layer
/// encoder there are 2K weight layers; activations()[code_index] (== K) is
/// the code.
struct StackedAutoencoder {
    std::vector<Layer> layers;
    std::size_t code_index = 0;

    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }
};

/// Mirrors pre-trained encoder layers into a full autoencoder. Decoder layer
/// weights start as transposes of the corresponding encoder weights (untied
/// copies); decoder biases are zero for plain layers.
StackedAutoencoder unfold(const std::vector<Layer>& encoder);

/// RBM variant: encoder layer l gets (W_l, hidden bias), the mirrored decoder
/// layer gets (W_l^T, visible bias).
StackedAutoencoder unfold(const std::vector<RbmParams>& rbms);

/// Forward pass with per-layer activations cached for backprop.
/// activations[0] is the input, activations[layers.size()] the reconstruction.
struct ForwardPass {
    std::vector<Matrix> activations;

    const Matrix& output() const { return activations.back(); }
    const Matrix& code(const StackedAutoencoder& net) const {
        return activations[net.code_index];
    }
};

ForwardPass forward(const StackedAutoencoder& net, const Matrix& input);

/// (1/N) sum_examples sum_features (x - xhat)^2.
double mse_per_example(const Matrix& x, const Matrix& xhat);

/// Full gradient of mse_per_example(x, forward(x)) in layer shapes.
std::vector<Layer> gradient(const StackedAutoencoder& net, const Matrix& input);

/// One epoch of plain minibatch SGD with targets = inputs. Returns the
/// row-weighted mean of the per-batch pre-update losses.
double backprop_epoch(StackedAutoencoder& net, const Matrix& data, double learning_rate,
                      std::size_t batch_size, std::uint64_t epoch_seed);

/// Central finite differences of the loss for every parameter; test oracle
/// for `gradient`. Only sensible for small nets.
std::vector<Layer> finite_diff_grad(const StackedAutoencoder& net, const Matrix& input,
                                    double eps);

}  // namespace sae
