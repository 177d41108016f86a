#pragma once

// Deep Q-learning machinery shared by the grid and prosumer agents:
// replay buffer, epsilon schedule, epsilon-greedy selection, TD targets and
// the per-step learning update (MSE on the TD error, Adam, soft target update).

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "neural.hpp"
#include "rng.hpp"

namespace gridmkt {

struct Transition {
    std::vector<double> state;
    int action = 0;
    double reward = 0.0;
    std::vector<double> next_state;

    friend bool operator==(const Transition&, const Transition&) = default;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 100000) : capacity_(capacity) {
        if (capacity_ == 0) {
            throw ConfigError("replay buffer capacity must be positive");
        }
    }

    void store(Transition t) {
        if (storage_.size() < capacity_) {
            storage_.push_back(std::move(t));
        } else {
            storage_[head_] = std::move(t);
        }
        head_ = (head_ + 1) % capacity_;
        ++inserted_;
    }

    // Uniform without replacement (Floyd's algorithm); nullopt while the
    // buffer holds fewer than batch_size transitions.
    std::optional<std::vector<Transition>> sample(std::size_t batch_size, Rng& rng) const {
        if (batch_size == 0 || storage_.size() < batch_size) {
            return std::nullopt;
        }
        const std::size_t n = storage_.size();
        std::vector<std::size_t> picked;
        picked.reserve(batch_size);
        for (std::size_t j = n - batch_size; j < n; ++j) {
            const std::size_t t = rng.index(j + 1);
            const bool seen = std::find(picked.begin(), picked.end(), t) != picked.end();
            picked.push_back(seen ? j : t);
        }
        std::vector<Transition> batch;
        batch.reserve(batch_size);
        for (std::size_t i : picked) {
            batch.push_back(storage_[i]);
        }
        return batch;
    }

    std::size_t size() const { return storage_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t inserted() const { return inserted_; }

    // Oldest first.
    std::vector<Transition> contents() const {
        if (storage_.size() < capacity_) {
            return storage_;
        }
        std::vector<Transition> out;
        out.reserve(capacity_);
        for (std::size_t i = 0; i < capacity_; ++i) {
            out.push_back(storage_[(head_ + i) % capacity_]);
        }
        return out;
    }

    // Rebuilds a buffer from contents() output and the insertion counter.
    // Physical slot order is reproduced too, so sampling continues identically.
    static ReplayBuffer restore(std::size_t capacity, std::vector<Transition> oldest_first, std::uint64_t inserted) {
        if (oldest_first.size() > capacity || inserted < oldest_first.size() ||
            (oldest_first.size() < capacity && inserted != oldest_first.size())) {
            throw ContractViolation("ReplayBuffer::restore: inconsistent size/insertion count");
        }
        ReplayBuffer b(capacity);
        if (oldest_first.size() < capacity) {
            b.storage_ = std::move(oldest_first);
            b.head_ = b.storage_.size() % capacity;
        } else {
            b.storage_.resize(capacity);
            const std::size_t head = static_cast<std::size_t>(inserted % capacity);
            for (std::size_t i = 0; i < capacity; ++i) {
                b.storage_[(head + i) % capacity] = std::move(oldest_first[i]);
            }
            b.head_ = head;
        }
        b.inserted_ = inserted;
        return b;
    }

    friend bool operator==(const ReplayBuffer& a, const ReplayBuffer& b) {
        return a.capacity_ == b.capacity_ && a.inserted_ == b.inserted_ && a.contents() == b.contents();
    }

private:
    std::size_t capacity_;
    std::vector<Transition> storage_;
    std::size_t head_ = 0;
    std::uint64_t inserted_ = 0;
};

struct EpsilonSchedule {
    int warm_episodes = 300;
    double final_epsilon = 0.01;
    int total_episodes = 10000;
};

// 1 during the warm period, then linear down to final_epsilon at the last episode.
inline double epsilon(const EpsilonSchedule& s, int episode) {
    if (episode < s.warm_episodes) {
        return 1.0;
    }
    const int last = s.total_episodes - 1;
    if (episode >= last || last <= s.warm_episodes) {
        return s.final_epsilon;
    }
    const double frac = static_cast<double>(episode - s.warm_episodes) / static_cast<double>(last - s.warm_episodes);
    return 1.0 - (1.0 - s.final_epsilon) * frac;
}

struct DqnHyperparams {
    std::vector<int> hidden_layers{1000};
    double gamma = 0.99;
    double learning_rate = 1e-3;
    double tau = 1e-5;
    int batch_size = 64;
    std::size_t replay_capacity = 100000;

    void validate() const {
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
        if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
        if (batch_size <= 0) throw ConfigError("batch_size must be positive");
        if (replay_capacity < static_cast<std::size_t>(batch_size)) {
            throw ConfigError("replay_capacity must be at least batch_size");
        }
        for (int h : hidden_layers) {
            if (h <= 0) throw ConfigError("hidden layer sizes must be positive");
        }
    }

    friend bool operator==(const DqnHyperparams&, const DqnHyperparams&) = default;
};

struct DqnAgent {
    nn::Mlp online;
    nn::Mlp target;
    ReplayBuffer buffer;
    nn::AdamState adam;
    double gamma = 0.99;
    double lr = 1e-3;
    double tau = 1e-5;
    int batch_size = 64;
    int action_count = 0;
    Rng rng;

    int observation_size() const { return online.input_size(); }
};

inline DqnAgent make_agent(const DqnHyperparams& hp, int observation_size, int action_count, std::uint64_t seed) {
    hp.validate();
    std::vector<int> sizes{observation_size};
    sizes.insert(sizes.end(), hp.hidden_layers.begin(), hp.hidden_layers.end());
    sizes.push_back(action_count);
    Rng rng(seed);
    nn::Mlp online = nn::init_weights(sizes, rng);
    DqnAgent agent{online, online, ReplayBuffer(hp.replay_capacity), nn::AdamState::for_network(online),
                   hp.gamma, hp.learning_rate, hp.tau, hp.batch_size, action_count, rng};
    return agent;
}

// Lowest index wins ties.
inline int argmax(const nn::Vector& q) {
    int best = 0;
    for (int a = 1; a < q.size(); ++a) {
        if (q[a] > q[best]) best = a;
    }
    return best;
}

inline int greedy_action(const DqnAgent& agent, std::span<const double> state) {
    return argmax(nn::forward(agent.online, state));
}

inline int select_action(const DqnAgent& agent, std::span<const double> state, double eps, Rng& rng) {
    if (!(eps >= 0.0 && eps <= 1.0)) {
        throw ContractViolation("select_action: epsilon must lie in [0, 1]");
    }
    if (eps > 0.0 && rng.uniform() < eps) {
        return static_cast<int>(rng.index(static_cast<std::size_t>(agent.action_count)));
    }
    return greedy_action(agent, state);
}

namespace detail {
inline nn::Matrix stack_columns(const std::vector<Transition>& batch, bool next, int rows) {
    nn::Matrix m(rows, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto& v = next ? batch[k].next_state : batch[k].state;
        if (static_cast<int>(v.size()) != rows) {
            throw ContractViolation("transition state length does not match the agent's observation size");
        }
        m.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const nn::Vector>(v.data(), rows);
    }
    return m;
}
}  // namespace detail

// y_k = r_k + gamma * max_a Q_target(next_state_k, a). No terminal masking.
inline std::vector<double> td_targets(const DqnAgent& agent, const std::vector<Transition>& batch) {
    if (batch.empty()) {
        throw ContractViolation("td_targets: empty batch");
    }
    const nn::Matrix next = detail::stack_columns(batch, true, agent.observation_size());
    const nn::Matrix q_next = nn::forward_batch(agent.target, next).output();
    std::vector<double> y(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
        y[k] = batch[k].reward + agent.gamma * q_next.col(static_cast<Eigen::Index>(k)).maxCoeff();
        if (!std::isfinite(y[k])) {
            throw NumericalError("td_targets: non-finite target");
        }
    }
    return y;
}

// One minibatch update; nullopt (and no parameter change) while the buffer
// is underfull. Returns the MSE loss before the update.
inline std::optional<double> learn_step(DqnAgent& agent) {
    auto batch = agent.buffer.sample(static_cast<std::size_t>(agent.batch_size), agent.rng);
    if (!batch) {
        return std::nullopt;
    }
    const std::vector<double> y = td_targets(agent, *batch);
    const nn::Matrix states = detail::stack_columns(*batch, false, agent.observation_size());
    const nn::ForwardCache cache = nn::forward_batch(agent.online, states);
    const nn::Matrix& q = cache.output();

    const auto n = static_cast<Eigen::Index>(batch->size());
    nn::Matrix grad = nn::Matrix::Zero(q.rows(), n);
    double loss = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const int a = (*batch)[static_cast<std::size_t>(k)].action;
        if (a < 0 || a >= agent.action_count) {
            throw ContractViolation("learn_step: stored action index out of range");
        }
        const double err = q(a, k) - y[static_cast<std::size_t>(k)];
        loss += err * err;
        grad(a, k) = 2.0 * err / static_cast<double>(n);
    }
    loss /= static_cast<double>(n);
    if (!std::isfinite(loss)) {
        throw NumericalError("learn_step: non-finite loss");
    }
    nn::adam_step(agent.online, nn::backward_batch(agent.online, cache, grad), agent.adam, agent.lr);
    nn::soft_update(agent.target, agent.online, agent.tau);
    return loss;
}

}  // namespace gridmkt
