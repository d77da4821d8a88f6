#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sae/linalg.hpp"
#include "sae/rng.hpp"

namespace sae {

/// Bernoulli-Bernoulli RBM parameters plus the momentum velocity state that
/// travels with them.
struct RbmParams {
    Matrix weights;                    // n_hidden x n_visible
    std::vector<double> visible_bias;  // length n_visible
    std::vector<double> hidden_bias;   // length n_hidden
    Matrix vel_weights;
    std::vector<double> vel_visible_bias;
    std::vector<double> vel_hidden_bias;

    std::size_t n_visible() const { return weights.cols(); }
    std::size_t n_hidden() const { return weights.rows(); }
};

/// Zero biases, Gaussian(0, weight_sigma) weights, zero velocities.
RbmParams init_rbm(std::size_t n_visible, std::size_t n_hidden, Rng& rng,
                   double weight_sigma = 0.01);

/// Momentum stage: `value` applies from `from_epoch` (inclusive) onward.
struct MomentumStage {
    std::size_t from_epoch;
    double value;
};

struct CdHyperparams {
    double learning_rate = 0.1;
    std::vector<MomentumStage> momentum_schedule{{0, 0.5}, {5, 0.9}};
    std::size_t cd_steps = 1;
    bool sample_hidden = true;

    double momentum_for(std::size_t epoch) const;
};

/// E(v,h) = -sum_ij w_ij h_i v_j - sum_j b_j v_j - sum_i c_i h_i.
double energy(const RbmParams& rbm, std::span<const double> v, std::span<const double> h);

/// p(H_i = 1 | v), rowwise over a batch: sigma(v W^T + c).
Matrix hidden_probs(const RbmParams& rbm, const Matrix& v_batch);

/// p(V_j = 1 | h), rowwise over a batch: sigma(h W + b).
Matrix visible_probs(const RbmParams& rbm, const Matrix& h_batch);

/// One CD-k parameter update on a minibatch. Positive statistics use the
/// hidden activation probabilities; hidden states are sampled (when
/// hp.sample_hidden) only to drive the reconstruction, which stays in
/// probability space. Gradients are normalized by the batch row count;
/// velocity <- momentum(epoch) * velocity + learning_rate * gradient, then
/// params += velocity.
void cd_update(RbmParams& rbm, const Matrix& batch, const CdHyperparams& hp,
               std::size_t epoch, Rng& rng);

/// Mean over examples of the squared deterministic round-trip error
/// sum_j (v_j - sigma-roundtrip(v)_j)^2. No sampling.
double reconstruction_error(const RbmParams& rbm, const Matrix& data);

/// Hidden activation probabilities of a dataset: the next layer's data.
Matrix transform(const RbmParams& rbm, const Matrix& data);

/// End-of-epoch bookkeeping: reconstruction errors on train and valid plus
/// the transformed datasets, sharing one hidden pass per dataset. Bit-equal
/// to calling reconstruction_error and transform separately; the shared pass
/// keeps publication off a sync worker's critical path.
struct EpochStats {
    double train_err = 0.0;
    double valid_err = 0.0;
    Matrix train_hidden;
    Matrix valid_hidden;
};

EpochStats epoch_stats(const RbmParams& rbm, const Matrix& train, const Matrix& valid);

/// One full epoch of CD training: shuffled minibatches of `batch_size` drawn
/// with `shuffle_seed`, one cd_update per batch. Both the greedy baseline and
/// the synchronized workers run epochs through this single entry point.
/// `on_batch`, when set, is called after every minibatch (progress ticks).
void cd_epoch(RbmParams& rbm, const Matrix& train, const CdHyperparams& hp,
              std::size_t batch_size, std::size_t epoch, std::uint64_t shuffle_seed, Rng& rng,
              const std::function<void()>& on_batch = {});

/// Gradient of the mean log-likelihood in parameter shapes.
struct RbmGradient {
    Matrix weights;
    std::vector<double> visible_bias;
    std::vector<double> hidden_bias;
};

// Exact enumeration oracles, feasible for n_visible + n_hidden <= 20; larger
// models raise EnumerationError. Visible rows may hold probabilities in
// [0,1]; hidden states are enumerated exactly.

/// Mean over examples of log p(v), with Z summed over all binary states.
double exact_loglik(const RbmParams& rbm, const Matrix& data);

/// Exact gradient of exact_loglik with respect to every parameter.
RbmGradient exact_loglik_grad(const RbmParams& rbm, const Matrix& data);

/// Partition function Z = sum_{v,h} exp(-E(v,h)).
double partition_function(const RbmParams& rbm);

}  // namespace sae
