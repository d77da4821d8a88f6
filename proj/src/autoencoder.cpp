#include "sae/autoencoder.hpp"

#include <cmath>

#include "sae/dataset.hpp"

namespace sae {

Layer init_layer(std::size_t in_dim, std::size_t out_dim, Rng& rng, double weight_sigma) {
    Layer layer;
    layer.weights = Matrix(out_dim, in_dim);
    for (double& w : layer.weights.values()) w = weight_sigma * rng.gaussian();
    layer.bias.assign(out_dim, 0.0);
    return layer;
}

namespace {

void check_chain(const std::vector<Layer>& layers, const char* what) {
    if (layers.empty()) throw Error(std::string(what) + ": empty encoder");
    for (std::size_t l = 1; l < layers.size(); ++l)
        if (layers[l].in_dim() != layers[l - 1].out_dim())
            throw DimensionError(std::string(what) + ": layer " + std::to_string(l) +
                                 " expects " + std::to_string(layers[l].in_dim()) +
                                 " inputs, got " + std::to_string(layers[l - 1].out_dim()));
}

}  // namespace

StackedAutoencoder unfold(const std::vector<Layer>& encoder) {
    check_chain(encoder, "unfold");
    StackedAutoencoder net;
    net.layers = encoder;
    net.code_index = encoder.size();
    for (std::size_t l = encoder.size(); l-- > 0;) {
        Layer mirrored;
        mirrored.weights = transpose(encoder[l].weights);
        mirrored.bias.assign(encoder[l].in_dim(), 0.0);
        net.layers.push_back(std::move(mirrored));
    }
    return net;
}

StackedAutoencoder unfold(const std::vector<RbmParams>& rbms) {
    if (rbms.empty()) throw Error("unfold: empty encoder");
    std::vector<Layer> encoder;
    encoder.reserve(rbms.size());
    for (const auto& rbm : rbms) {
        Layer layer;
        layer.weights = rbm.weights;
        layer.bias = rbm.hidden_bias;
        encoder.push_back(std::move(layer));
    }
    StackedAutoencoder net = unfold(encoder);
    // The mirrored half reconstructs each RBM's visible layer, so it starts
    // from the visible biases rather than zero.
    for (std::size_t l = 0; l < rbms.size(); ++l)
        net.layers[net.layers.size() - 1 - l].bias = rbms[l].visible_bias;
    return net;
}

ForwardPass forward(const StackedAutoencoder& net, const Matrix& input) {
    if (input.cols() != net.input_dim())
        throw DimensionError("forward: input " + input.shape_string() + " vs first layer " +
                             net.layers.front().weights.shape_string());
    ForwardPass pass;
    pass.activations.reserve(net.layers.size() + 1);
    pass.activations.push_back(input);
    for (const Layer& layer : net.layers) {
        Matrix pre = matmul_bt(pass.activations.back(), layer.weights);
        add_row_bias(pre, layer.bias);
        sigmoid_inplace(pre);
        pass.activations.push_back(std::move(pre));
    }
    return pass;
}

double mse_per_example(const Matrix& x, const Matrix& xhat) {
    if (!x.same_shape(xhat))
        throw DimensionError("mse_per_example: " + x.shape_string() + " vs " +
                             xhat.shape_string());
    double total = 0.0;
    const auto& a = x.values();
    const auto& b = xhat.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        total += d * d;
    }
    return x.rows() ? total / static_cast<double>(x.rows()) : 0.0;
}

namespace {

std::vector<Layer> backprop(const StackedAutoencoder& net, const ForwardPass& pass) {
    const Matrix& input = pass.activations.front();
    const Matrix& output = pass.activations.back();
    const double scale = 2.0 / static_cast<double>(input.rows());

    // delta = dLoss/d(pre-activation), starting from the output layer.
    Matrix delta(output.rows(), output.cols());
    for (std::size_t i = 0; i < delta.size(); ++i) {
        const double a = output.values()[i];
        delta.values()[i] = scale * (a - input.values()[i]) * a * (1.0 - a);
    }

    std::vector<Layer> grads(net.layers.size());
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const Matrix& below = pass.activations[l];
        grads[l].weights = matmul_at(delta, below);
        grads[l].bias.assign(net.layers[l].out_dim(), 0.0);
        for (std::size_t r = 0; r < delta.rows(); ++r) {
            const double* row = delta.row(r);
            for (std::size_t c = 0; c < delta.cols(); ++c) grads[l].bias[c] += row[c];
        }
        if (l > 0) {
            Matrix next = matmul(delta, net.layers[l].weights);
            for (std::size_t i = 0; i < next.size(); ++i) {
                const double a = below.values()[i];
                next.values()[i] *= a * (1.0 - a);
            }
            delta = std::move(next);
        }
    }
    return grads;
}

}  // namespace

std::vector<Layer> gradient(const StackedAutoencoder& net, const Matrix& input) {
    return backprop(net, forward(net, input));
}

double backprop_epoch(StackedAutoencoder& net, const Matrix& data, double learning_rate,
                      std::size_t batch_size, std::uint64_t epoch_seed) {
    const MinibatchPlan plan(data.rows(), batch_size, epoch_seed);
    double weighted_loss = 0.0;
    for (std::size_t b = 0; b < plan.batch_count(); ++b) {
        const Matrix batch = gather_rows(data, plan.batch(b));
        const ForwardPass pass = forward(net, batch);
        weighted_loss += mse_per_example(batch, pass.output()) * static_cast<double>(batch.rows());
        if (learning_rate == 0.0) continue;
        const std::vector<Layer> grads = backprop(net, pass);
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            auto& w = net.layers[l].weights.values();
            const auto& gw = grads[l].weights.values();
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= learning_rate * gw[i];
            for (std::size_t i = 0; i < net.layers[l].bias.size(); ++i)
                net.layers[l].bias[i] -= learning_rate * grads[l].bias[i];
        }
    }
    return data.rows() ? weighted_loss / static_cast<double>(data.rows()) : 0.0;
}

std::vector<Layer> finite_diff_grad(const StackedAutoencoder& net, const Matrix& input,
                                    double eps) {
    if (eps <= 0.0) throw Error("finite_diff_grad: eps must be positive");
    StackedAutoencoder probe = net;
    const auto loss = [&] { return mse_per_example(input, forward(probe, input).output()); };

    std::vector<Layer> grads(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        grads[l].weights = Matrix(net.layers[l].out_dim(), net.layers[l].in_dim());
        grads[l].bias.assign(net.layers[l].out_dim(), 0.0);
        for (std::size_t i = 0; i < probe.layers[l].weights.size(); ++i) {
            double& param = probe.layers[l].weights.values()[i];
            const double saved = param;
            param = saved + eps;
            const double up = loss();
            param = saved - eps;
            const double down = loss();
            param = saved;
            grads[l].weights.values()[i] = (up - down) / (2.0 * eps);
        }
        for (std::size_t i = 0; i < probe.layers[l].bias.size(); ++i) {
            double& param = probe.layers[l].bias[i];
            const double saved = param;
            param = saved + eps;
            const double up = loss();
            param = saved - eps;
            const double down = loss();
            param = saved;
            grads[l].bias[i] = (up - down) / (2.0 * eps);
        }
    }
    return grads;
}

}  // namespace sae
