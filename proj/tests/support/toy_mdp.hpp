#pragma once

// Two-state, two-action deterministic MDP: action a moves to state a.
// Small enough for exact value iteration, used to check the DQN end to end.

#include <array>
#include <cmath>
#include <vector>

#include "gridmkt/dqn.hpp"

namespace toy {

inline constexpr double kReward[2][2] = {{0.1, 0.0}, {0.0, 0.3}};
inline constexpr double kGamma = 0.9;

inline std::vector<double> encode(int s) { return s == 0 ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0}; }

using QTable = std::array<std::array<double, 2>, 2>;

inline QTable value_iteration(double gamma = kGamma) {
    QTable q{};
    for (int it = 0; it < 10000; ++it) {
        QTable next{};
        double delta = 0.0;
        for (int s = 0; s < 2; ++s) {
            for (int a = 0; a < 2; ++a) {
                next[s][a] = kReward[s][a] + gamma * std::max(q[a][0], q[a][1]);
                delta = std::max(delta, std::abs(next[s][a] - q[s][a]));
            }
        }
        q = next;
        if (delta < 1e-14) break;
    }
    return q;
}

struct Result {
    QTable learned{};
    QTable exact{};
    double max_error = 0.0;
};

// Trains on uniformly explored transitions.
inline Result train_dqn(std::uint64_t seed, int steps = 4000) {
    gridmkt::DqnHyperparams hp;
    hp.hidden_layers = {16};
    hp.gamma = kGamma;
    hp.learning_rate = 5e-3;
    hp.tau = 0.05;
    hp.batch_size = 32;
    hp.replay_capacity = 10000;
    auto agent = gridmkt::make_agent(hp, 2, 2, seed);
    gridmkt::Rng explore(seed ^ 0x5eedULL);
    int s = 0;
    for (int t = 0; t < steps; ++t) {
        const int a = gridmkt::select_action(agent, encode(s), 1.0, explore);
        agent.buffer.store({encode(s), a, kReward[s][a], encode(a)});
        gridmkt::learn_step(agent);
        s = a;
    }
    Result r;
    r.exact = value_iteration();
    for (int st = 0; st < 2; ++st) {
        const auto q = gridmkt::nn::forward(agent.online, encode(st));
        for (int a = 0; a < 2; ++a) {
            r.learned[st][a] = q[a];
            r.max_error = std::max(r.max_error, std::abs(q[a] - r.exact[st][a]));
        }
    }
    return r;
}

}  // namespace toy
