#pragma once

// Dense feed-forward network with sigmoid hidden layers and a linear output
// layer, trained with backprop + Adam. Batches are stored column-wise: an
// (inputs x batch) matrix holds one sample per column.

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "rng.hpp"

namespace gridmkt::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Mlp {
    std::vector<int> layer_sizes;
    std::vector<Matrix> weights;  // weights[l] is (layer_sizes[l+1] x layer_sizes[l])
    std::vector<Vector> biases;

    std::size_t layer_count() const { return weights.size(); }
    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
        }
        return n;
    }

    bool same_architecture(const Mlp& other) const { return layer_sizes == other.layer_sizes; }

    bool all_finite() const {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
        }
        return true;
    }

    friend bool operator==(const Mlp& a, const Mlp& b) {
        if (a.layer_sizes != b.layer_sizes) return false;
        for (std::size_t l = 0; l < a.weights.size(); ++l) {
            if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
        }
        return true;
    }
};

// Same shape as the network parameters.
struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

inline void check_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) {
        throw ContractViolation("Mlp needs at least an input and an output layer");
    }
    for (int s : sizes) {
        if (s <= 0) throw ContractViolation("Mlp layer sizes must be positive");
    }
}

inline Mlp zero_mlp(const std::vector<int>& sizes) {
    check_sizes(sizes);
    Mlp net;
    net.layer_sizes = sizes;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        net.weights.push_back(Matrix::Zero(sizes[l + 1], sizes[l]));
        net.biases.push_back(Vector::Zero(sizes[l + 1]));
    }
    return net;
}

// Uniform in +-1/sqrt(fan_in), zero biases.
inline Mlp init_weights(const std::vector<int>& sizes, Rng& rng) {
    Mlp net = zero_mlp(sizes);
    for (auto& w : net.weights) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
            for (Eigen::Index r = 0; r < w.rows(); ++r) {
                w(r, c) = rng.uniform(-bound, bound);
            }
        }
    }
    return net;
}

inline Gradients zero_gradients(const Mlp& net) {
    Gradients g;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        g.weights.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
        g.biases.push_back(Vector::Zero(net.biases[l].size()));
    }
    return g;
}

namespace detail {
inline void sigmoid_inplace(Matrix& m) {
    m = (1.0 + (-m.array()).exp()).inverse().matrix();
}
}  // namespace detail

// Activations of every layer; activations[0] is the input batch.
struct ForwardCache {
    std::vector<Matrix> activations;

    const Matrix& output() const { return activations.back(); }
};

inline ForwardCache forward_batch(const Mlp& net, const Matrix& inputs) {
    if (inputs.rows() != net.input_size()) {
        throw ContractViolation("forward: input has " + std::to_string(inputs.rows()) + " rows, network expects " +
                                std::to_string(net.input_size()));
    }
    ForwardCache cache;
    cache.activations.reserve(net.layer_count() + 1);
    cache.activations.push_back(inputs);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        Matrix z = net.weights[l] * cache.activations.back();
        z.colwise() += net.biases[l];
        if (l + 1 < net.layer_count()) {
            detail::sigmoid_inplace(z);
        }
        cache.activations.push_back(std::move(z));
    }
    return cache;
}

inline Vector forward(const Mlp& net, std::span<const double> input) {
    if (static_cast<int>(input.size()) != net.input_size()) {
        throw ContractViolation("forward: input length " + std::to_string(input.size()) + ", network expects " +
                                std::to_string(net.input_size()));
    }
    Matrix x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
    return forward_batch(net, x).output().col(0);
}

// Parameter gradients summed over the batch, given dLoss/dOutput per column.
inline Gradients backward_batch(const Mlp& net, const ForwardCache& cache, const Matrix& output_grads) {
    if (output_grads.rows() != net.output_size() || output_grads.cols() != cache.output().cols()) {
        throw ContractViolation("backward: output gradient shape does not match the forward pass");
    }
    Gradients g;
    const std::size_t layers = net.layer_count();
    g.weights.resize(layers);
    g.biases.resize(layers);
    Matrix delta = output_grads;  // dL/dz of the current layer
    for (std::size_t l = layers; l-- > 0;) {
        const Matrix& below = cache.activations[l];
        g.weights[l].noalias() = delta * below.transpose();
        g.biases[l] = delta.rowwise().sum();
        if (l > 0) {
            Matrix up = net.weights[l].transpose() * delta;
            // below holds sigmoid outputs a; da/dz = a(1-a)
            delta = (up.array() * below.array() * (1.0 - below.array())).matrix();
        }
    }
    return g;
}

inline Gradients backward(const Mlp& net, std::span<const double> input, std::span<const double> output_grad) {
    if (static_cast<int>(output_grad.size()) != net.output_size()) {
        throw ContractViolation("backward: output gradient length does not match the network output");
    }
    Matrix x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
    if (x.rows() != net.input_size()) {
        throw ContractViolation("backward: input length does not match the network input");
    }
    ForwardCache cache = forward_batch(net, x);
    Matrix dy = Eigen::Map<const Vector>(output_grad.data(), static_cast<Eigen::Index>(output_grad.size()));
    return backward_batch(net, cache, dy);
}

struct AdamState {
    std::vector<Matrix> m_weights, v_weights;
    std::vector<Vector> m_biases, v_biases;
    long long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_network(const Mlp& net) {
        AdamState s;
        Gradients z = zero_gradients(net);
        s.m_weights = z.weights;
        s.v_weights = z.weights;
        s.m_biases = z.biases;
        s.v_biases = z.biases;
        return s;
    }

    friend bool operator==(const AdamState& a, const AdamState& b) {
        return a.step == b.step && a.beta1 == b.beta1 && a.beta2 == b.beta2 && a.epsilon == b.epsilon &&
               a.m_weights == b.m_weights && a.v_weights == b.v_weights && a.m_biases == b.m_biases &&
               a.v_biases == b.v_biases;
    }
};

// Bias-corrected Adam.
inline void adam_step(Mlp& net, const Gradients& grads, AdamState& state, double lr) {
    const std::size_t layers = net.layer_count();
    if (grads.weights.size() != layers || grads.biases.size() != layers || state.m_weights.size() != layers) {
        throw ContractViolation("adam_step: gradient/state layout does not match the network");
    }
    for (std::size_t l = 0; l < layers; ++l) {
        if (grads.weights[l].rows() != net.weights[l].rows() || grads.weights[l].cols() != net.weights[l].cols() ||
            grads.biases[l].size() != net.biases[l].size()) {
            throw ContractViolation("adam_step: gradient shape mismatch in layer " + std::to_string(l));
        }
        if (!grads.weights[l].allFinite() || !grads.biases[l].allFinite()) {
            throw NumericalError("adam_step: non-finite gradient in layer " + std::to_string(l));
        }
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = (state.beta2 * v.array() + (1.0 - state.beta2) * g.array().square()).matrix();
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
    };
    for (std::size_t l = 0; l < layers; ++l) {
        update(net.weights[l], grads.weights[l], state.m_weights[l], state.v_weights[l]);
        update(net.biases[l], grads.biases[l], state.m_biases[l], state.v_biases[l]);
    }
}

// target <- tau * online + (1 - tau) * target
inline void soft_update(Mlp& target, const Mlp& online, double tau) {
    if (!target.same_architecture(online)) {
        throw ContractViolation("soft_update: target and online architectures differ");
    }
    for (std::size_t l = 0; l < target.layer_count(); ++l) {
        target.weights[l] = tau * online.weights[l] + (1.0 - tau) * target.weights[l];
        target.biases[l] = tau * online.biases[l] + (1.0 - tau) * target.biases[l];
    }
}

}  // namespace gridmkt::nn
