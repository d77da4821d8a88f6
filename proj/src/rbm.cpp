#include "sae/rbm.hpp"

#include <cmath>

#include "sae/dataset.hpp"

namespace sae {

RbmParams init_rbm(std::size_t n_visible, std::size_t n_hidden, Rng& rng, double weight_sigma) {
    RbmParams rbm;
    rbm.weights = Matrix(n_hidden, n_visible);
    for (double& w : rbm.weights.values()) w = weight_sigma * rng.gaussian();
    rbm.visible_bias.assign(n_visible, 0.0);
    rbm.hidden_bias.assign(n_hidden, 0.0);
    rbm.vel_weights = Matrix(n_hidden, n_visible);
    rbm.vel_visible_bias.assign(n_visible, 0.0);
    rbm.vel_hidden_bias.assign(n_hidden, 0.0);
    return rbm;
}

double CdHyperparams::momentum_for(std::size_t epoch) const {
    double momentum = 0.0;
    for (const auto& stage : momentum_schedule)
        if (epoch >= stage.from_epoch) momentum = stage.value;
    return momentum;
}

double energy(const RbmParams& rbm, std::span<const double> v, std::span<const double> h) {
    if (v.size() != rbm.n_visible() || h.size() != rbm.n_hidden())
        throw DimensionError("energy: v length " + std::to_string(v.size()) + ", h length " +
                             std::to_string(h.size()) + " vs model " +
                             rbm.weights.shape_string());
    double e = 0.0;
    for (std::size_t i = 0; i < rbm.n_hidden(); ++i) {
        const double* w_row = rbm.weights.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < rbm.n_visible(); ++j) acc += w_row[j] * v[j];
        e -= h[i] * acc;
        e -= rbm.hidden_bias[i] * h[i];
    }
    for (std::size_t j = 0; j < rbm.n_visible(); ++j) e -= rbm.visible_bias[j] * v[j];
    return e;
}

Matrix hidden_probs(const RbmParams& rbm, const Matrix& v_batch) {
    if (v_batch.cols() != rbm.n_visible())
        throw DimensionError("hidden_probs: batch " + v_batch.shape_string() + " vs model " +
                             rbm.weights.shape_string());
    Matrix pre = matmul_bt(v_batch, rbm.weights);
    add_row_bias(pre, rbm.hidden_bias);
    sigmoid_inplace(pre);
    return pre;
}

Matrix visible_probs(const RbmParams& rbm, const Matrix& h_batch) {
    if (h_batch.cols() != rbm.n_hidden())
        throw DimensionError("visible_probs: batch " + h_batch.shape_string() + " vs model " +
                             rbm.weights.shape_string());
    Matrix pre = matmul(h_batch, rbm.weights);
    add_row_bias(pre, rbm.visible_bias);
    sigmoid_inplace(pre);
    return pre;
}

namespace {

Matrix sample_bernoulli(const Matrix& probs, Rng& rng) {
    Matrix states(probs.rows(), probs.cols());
    const auto& p = probs.values();
    auto& s = states.values();
    for (std::size_t i = 0; i < p.size(); ++i) s[i] = rng.bernoulli(p[i]) ? 1.0 : 0.0;
    return states;
}

void axpy_update(std::vector<double>& velocity, std::vector<double>& param,
                 const std::vector<double>& positive, const std::vector<double>& negative,
                 double momentum, double step) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = momentum * velocity[i] + step * (positive[i] - negative[i]);
        param[i] += velocity[i];
    }
}

}  // namespace

void cd_update(RbmParams& rbm, const Matrix& batch, const CdHyperparams& hp, std::size_t epoch,
               Rng& rng) {
    const Matrix pos_hidden = hidden_probs(rbm, batch);
    Matrix chain = hp.sample_hidden ? sample_bernoulli(pos_hidden, rng) : pos_hidden;

    Matrix recon = visible_probs(rbm, chain);
    Matrix neg_hidden = hidden_probs(rbm, recon);
    for (std::size_t step = 1; step < hp.cd_steps; ++step) {
        chain = hp.sample_hidden ? sample_bernoulli(neg_hidden, rng) : neg_hidden;
        recon = visible_probs(rbm, chain);
        neg_hidden = hidden_probs(rbm, recon);
    }

    const double inv_rows = 1.0 / static_cast<double>(batch.rows());
    const double momentum = hp.momentum_for(epoch);
    const double step = hp.learning_rate;

    const Matrix pos_stats = matmul_at(pos_hidden, batch);   // n_hidden x n_visible
    const Matrix neg_stats = matmul_at(neg_hidden, recon);
    auto& vel_w = rbm.vel_weights.values();
    auto& w = rbm.weights.values();
    const auto& pos = pos_stats.values();
    const auto& neg = neg_stats.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
        vel_w[i] = momentum * vel_w[i] + step * (pos[i] - neg[i]) * inv_rows;
        w[i] += vel_w[i];
    }
    axpy_update(rbm.vel_visible_bias, rbm.visible_bias, column_mean(batch), column_mean(recon),
                momentum, step);
    axpy_update(rbm.vel_hidden_bias, rbm.hidden_bias, column_mean(pos_hidden),
                column_mean(neg_hidden), momentum, step);
}

namespace {

double roundtrip_error(const RbmParams& rbm, const Matrix& data, const Matrix& hidden) {
    const Matrix recon = visible_probs(rbm, hidden);
    double total = 0.0;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        const double* x = data.row(r);
        const double* y = recon.row(r);
        double sum = 0.0;
        for (std::size_t c = 0; c < data.cols(); ++c) {
            const double d = x[c] - y[c];
            sum += d * d;
        }
        total += sum;
    }
    return data.rows() ? total / static_cast<double>(data.rows()) : 0.0;
}

}  // namespace

double reconstruction_error(const RbmParams& rbm, const Matrix& data) {
    return roundtrip_error(rbm, data, hidden_probs(rbm, data));
}

Matrix transform(const RbmParams& rbm, const Matrix& data) { return hidden_probs(rbm, data); }

EpochStats epoch_stats(const RbmParams& rbm, const Matrix& train, const Matrix& valid) {
    EpochStats stats;
    stats.train_hidden = hidden_probs(rbm, train);
    stats.valid_hidden = hidden_probs(rbm, valid);
    stats.train_err = roundtrip_error(rbm, train, stats.train_hidden);
    stats.valid_err = roundtrip_error(rbm, valid, stats.valid_hidden);
    return stats;
}

void cd_epoch(RbmParams& rbm, const Matrix& train, const CdHyperparams& hp,
              std::size_t batch_size, std::size_t epoch, std::uint64_t shuffle_seed, Rng& rng,
              const std::function<void()>& on_batch) {
    const MinibatchPlan plan(train.rows(), batch_size, shuffle_seed);
    for (std::size_t b = 0; b < plan.batch_count(); ++b) {
        const Matrix batch = gather_rows(train, plan.batch(b));
        cd_update(rbm, batch, hp, epoch, rng);
        if (on_batch) on_batch();
    }
}

namespace {

void require_enumerable(const RbmParams& rbm) {
    if (rbm.n_visible() + rbm.n_hidden() > 20)
        throw EnumerationError("model " + rbm.weights.shape_string() +
                               " too large for exact enumeration (limit: 20 total units)");
}

// Writes the bits of `state` into the first `n` slots of `units`.
void decode_state(std::uint32_t state, std::span<double> units) {
    for (std::size_t i = 0; i < units.size(); ++i) units[i] = (state >> i) & 1u ? 1.0 : 0.0;
}

}  // namespace

double partition_function(const RbmParams& rbm) {
    require_enumerable(rbm);
    const std::size_t m = rbm.n_visible();
    const std::size_t n = rbm.n_hidden();
    std::vector<double> v(m), h(n);
    double z = 0.0;
    for (std::uint32_t vs = 0; vs < (1u << m); ++vs) {
        decode_state(vs, v);
        for (std::uint32_t hs = 0; hs < (1u << n); ++hs) {
            decode_state(hs, h);
            z += std::exp(-energy(rbm, v, h));
        }
    }
    return z;
}

double exact_loglik(const RbmParams& rbm, const Matrix& data) {
    require_enumerable(rbm);
    if (data.cols() != rbm.n_visible())
        throw DimensionError("exact_loglik: data " + data.shape_string() + " vs model " +
                             rbm.weights.shape_string());
    const std::size_t n = rbm.n_hidden();
    std::vector<double> h(n);
    const double log_z = std::log(partition_function(rbm));
    double total = 0.0;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        double unnormalized = 0.0;
        for (std::uint32_t hs = 0; hs < (1u << n); ++hs) {
            decode_state(hs, h);
            unnormalized += std::exp(-energy(rbm, data.row_span(r), h));
        }
        total += std::log(unnormalized) - log_z;
    }
    return total / static_cast<double>(data.rows());
}

RbmGradient exact_loglik_grad(const RbmParams& rbm, const Matrix& data) {
    require_enumerable(rbm);
    if (data.cols() != rbm.n_visible())
        throw DimensionError("exact_loglik_grad: data " + data.shape_string() + " vs model " +
                             rbm.weights.shape_string());
    const std::size_t m = rbm.n_visible();
    const std::size_t n = rbm.n_hidden();

    RbmGradient grad;
    grad.weights = Matrix(n, m);
    grad.visible_bias.assign(m, 0.0);
    grad.hidden_bias.assign(n, 0.0);

    // Model expectations E_p[h_i v_j], E_p[v_j], E_p[h_i] over the full joint.
    Matrix model_hv(n, m);
    std::vector<double> model_v(m, 0.0), model_h(n, 0.0);
    std::vector<double> v(m), h(n);
    double z = 0.0;
    for (std::uint32_t vs = 0; vs < (1u << m); ++vs) {
        decode_state(vs, v);
        for (std::uint32_t hs = 0; hs < (1u << n); ++hs) {
            decode_state(hs, h);
            const double weight = std::exp(-energy(rbm, v, h));
            z += weight;
            for (std::size_t i = 0; i < n; ++i) {
                if (h[i] == 0.0) continue;
                model_h[i] += weight;
                double* row = model_hv.row(i);
                for (std::size_t j = 0; j < m; ++j) row[j] += weight * v[j];
            }
            for (std::size_t j = 0; j < m; ++j) model_v[j] += weight * v[j];
        }
    }
    for (double& x : model_hv.values()) x /= z;
    for (double& x : model_v) x /= z;
    for (double& x : model_h) x /= z;

    // Data expectations E_{p(h|v_e)}[...] averaged over examples, with h
    // enumerated exactly for each example.
    const double inv_rows = 1.0 / static_cast<double>(data.rows());
    for (std::size_t r = 0; r < data.rows(); ++r) {
        const auto example = data.row_span(r);
        double norm = 0.0;
        std::vector<double> h_mean(n, 0.0);
        for (std::uint32_t hs = 0; hs < (1u << n); ++hs) {
            decode_state(hs, h);
            const double weight = std::exp(-energy(rbm, example, h));
            norm += weight;
            for (std::size_t i = 0; i < n; ++i)
                if (h[i] != 0.0) h_mean[i] += weight;
        }
        for (double& x : h_mean) x /= norm;
        for (std::size_t i = 0; i < n; ++i) {
            double* row = grad.weights.row(i);
            for (std::size_t j = 0; j < m; ++j) row[j] += inv_rows * h_mean[i] * example[j];
            grad.hidden_bias[i] += inv_rows * h_mean[i];
        }
        for (std::size_t j = 0; j < m; ++j) grad.visible_bias[j] += inv_rows * example[j];
    }

    for (std::size_t i = 0; i < n; ++i) {
        double* row = grad.weights.row(i);
        const double* model_row = model_hv.row(i);
        for (std::size_t j = 0; j < m; ++j) row[j] -= model_row[j];
        grad.hidden_bias[i] -= model_h[i];
    }
    for (std::size_t j = 0; j < m; ++j) grad.visible_bias[j] -= model_v[j];
    return grad;
}

}  // namespace sae
