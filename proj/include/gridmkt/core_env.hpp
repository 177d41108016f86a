#pragma once

// Physical microgrid model for one 15-minute slot: battery clipping and
// integration, prosumer net injection, merit-order dispatch and the
// per-slot money flows between grid, generators and prosumers.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace gridmkt {

inline constexpr double kSlotHours = 0.25;
inline constexpr int kSlotsPerDay = 96;

struct GeneratorSpec {
    double p_min = 0.0;  // kW
    double p_max = 0.0;  // kW
    double beta = 0.0;   // incremental cost, $/kWh

    void validate() const {
        if (!(p_min >= 0.0 && p_min <= p_max && std::isfinite(p_max))) {
            throw ConfigError("generator limits must satisfy 0 <= p_min <= p_max");
        }
        if (!(beta > 0.0 && std::isfinite(beta))) {
            throw ConfigError("generator incremental cost must be positive");
        }
    }
};

struct BatterySpec {
    double capacity = 0.0;  // kWh
    double p_b_max = 0.0;   // kW
    double soc_min = 0.0;   // kWh
    double soc_max = 0.0;   // kWh

    void validate() const {
        if (!(soc_min >= 0.0 && soc_min < soc_max && soc_max <= capacity)) {
            throw ConfigError("battery must satisfy 0 <= soc_min < soc_max <= capacity");
        }
        if (!(p_b_max > 0.0 && std::isfinite(p_b_max))) {
            throw ConfigError("battery p_b_max must be positive");
        }
    }
};

struct ProsumerState {
    double soc = 0.0;  // kWh
    BatterySpec battery;
    double p_h_max = 0.0;  // kW, injection limit in both directions
};

struct Exogenous {
    std::vector<double> pv;           // kW per prosumer
    std::vector<double> consumption;  // kW per prosumer
    double consumer_load = 0.0;       // kW
    double sell_price = 0.0;          // $/kWh
    int slot_index = 0;
};

struct StepOutcome {
    std::vector<double> p_h;  // signed, + means injection into the grid
    std::vector<double> p_b;  // signed, + means charging
    std::vector<double> p_g;
    double buy_price = 0.0;
    double sell_price = 0.0;
    double total_demand = 0.0;  // consumer load plus prosumer draws
    double grid_reward = 0.0;
    std::vector<double> prosumer_rewards;
    double grid_revenue = 0.0;
    std::vector<double> gen_costs;
    std::vector<double> prosumer_payments;  // paid by the grid for injections
    bool min_gen_relaxed = false;

    friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

inline double clip_battery_command(double soc, double command, const BatterySpec& spec, double dt) {
    spec.validate();
    if (!(dt > 0.0)) {
        throw ContractViolation("clip_battery_command: dt must be positive");
    }
    double p = std::clamp(command, -spec.p_b_max, spec.p_b_max);
    if (p > 0.0) {
        p = std::max(0.0, std::min(p, (spec.soc_max - soc) / dt));
    } else if (p < 0.0) {
        p = std::min(0.0, std::max(p, (spec.soc_min - soc) / dt));
    }
    return p;
}

// Integrates one slot. The command must already be clipped; the result is
// snapped into the SoC window once it is known to be within 1e-9 of it.
inline double update_soc(double soc, double p_b, double dt, const BatterySpec& spec) {
    constexpr double tol = 1e-9;
    const double next = soc + p_b * dt;
    if (next < spec.soc_min - tol || next > spec.soc_max + tol) {
        throw InvariantViolation("update_soc: state of charge " + std::to_string(next) +
                                 " kWh outside [" + std::to_string(spec.soc_min) + ", " +
                                 std::to_string(spec.soc_max) + "]; command was not clipped");
    }
    return std::clamp(next, spec.soc_min, spec.soc_max);
}

// Excess beyond the injection limit is curtailed PV; the battery command is left alone.
inline double prosumer_net_injection(double pv, double p_b, double consumption, double p_h_max) {
    return std::clamp(pv - p_b - consumption, -p_h_max, p_h_max);
}

struct DispatchResult {
    std::vector<double> p_g;
    bool min_gen_relaxed = false;
};

inline DispatchResult dispatch(double residual_demand, std::span<const GeneratorSpec> generators) {
    constexpr double tol = 1e-9;
    if (!std::isfinite(residual_demand) || residual_demand < -tol) {
        throw ContractViolation("dispatch: residual demand must be a non-negative number");
    }
    double capacity = 0.0;
    for (std::size_t i = 0; i < generators.size(); ++i) {
        if (i > 0 && generators[i].beta < generators[i - 1].beta) {
            throw ContractViolation("dispatch: generators must be sorted by ascending incremental cost");
        }
        capacity += generators[i].p_max;
    }
    if (residual_demand > capacity + tol) {
        throw InfeasibleDispatch("dispatch: residual demand " + std::to_string(residual_demand) +
                                 " kW exceeds total generation capacity " + std::to_string(capacity) +
                                 " kW");
    }

    DispatchResult out;
    out.p_g.assign(generators.size(), 0.0);
    double remaining = std::max(0.0, residual_demand);
    for (std::size_t i = 0; i < generators.size() && remaining > 0.0; ++i) {
        const bool last = (i + 1 == generators.size());
        const double take = last ? remaining : std::min(remaining, generators[i].p_max);
        out.p_g[i] = take;
        remaining -= take;
        if (take > 0.0 && take < generators[i].p_min) {
            out.min_gen_relaxed = true;
        }
    }
    return out;
}

inline double prosumer_reward(double p_h, double rho_b, double rho_s, double dt) {
    return p_h > 0.0 ? p_h * rho_b * dt : p_h * rho_s * dt;
}

// Fills the monetary fields of `out` from its flows. Expects p_h, p_g,
// buy_price, sell_price and total_demand to be set.
inline void settle_rewards(StepOutcome& out, std::span<const GeneratorSpec> generators, double dt) {
    out.grid_revenue = out.total_demand * out.sell_price * dt;
    out.gen_costs.resize(out.p_g.size());
    double spend = 0.0;
    for (std::size_t i = 0; i < out.p_g.size(); ++i) {
        out.gen_costs[i] = out.p_g[i] * generators[i].beta * dt;
        spend += out.gen_costs[i];
    }
    out.prosumer_payments.resize(out.p_h.size());
    out.prosumer_rewards.resize(out.p_h.size());
    for (std::size_t j = 0; j < out.p_h.size(); ++j) {
        out.prosumer_payments[j] = std::max(0.0, out.p_h[j]) * out.buy_price * dt;
        spend += out.prosumer_payments[j];
        out.prosumer_rewards[j] = prosumer_reward(out.p_h[j], out.buy_price, out.sell_price, dt);
    }
    out.grid_reward = out.grid_revenue - spend;
}

struct StepResult {
    std::vector<ProsumerState> states;
    StepOutcome outcome;
};

// One slot: clip -> net injection -> dispatch -> rewards, then SoC update.
// `export_limits` optionally caps positive injection per prosumer below
// p_h_max (surplus above it is curtailed); empty means no extra cap.
inline StepResult step(std::span<const ProsumerState> states, double buy_price,
                       std::span<const double> battery_commands, const Exogenous& exo,
                       std::span<const GeneratorSpec> generators, double dt,
                       std::span<const double> export_limits = {}) {
    const std::size_t m = states.size();
    if (battery_commands.size() != m || exo.pv.size() != m || exo.consumption.size() != m) {
        throw ContractViolation("step: one battery command, pv and consumption value per prosumer required");
    }
    if (!export_limits.empty() && export_limits.size() != m) {
        throw ContractViolation("step: export limits must be empty or one per prosumer");
    }
    if (!(buy_price > 0.0 && std::isfinite(buy_price)) || !(exo.sell_price > 0.0)) {
        throw ContractViolation("step: prices must be positive");
    }

    StepResult res;
    StepOutcome& out = res.outcome;
    out.buy_price = buy_price;
    out.sell_price = exo.sell_price;
    out.p_b.resize(m);
    out.p_h.resize(m);
    res.states.assign(states.begin(), states.end());

    double injections = 0.0;
    double draws = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const ProsumerState& s = states[j];
        out.p_b[j] = clip_battery_command(s.soc, battery_commands[j], s.battery, dt);
        double p_h = prosumer_net_injection(exo.pv[j], out.p_b[j], exo.consumption[j], s.p_h_max);
        if (!export_limits.empty()) {
            p_h = std::min(p_h, std::max(0.0, export_limits[j]));
        }
        out.p_h[j] = p_h;
        injections += std::max(0.0, p_h);
        draws += std::max(0.0, -p_h);
    }

    out.total_demand = exo.consumer_load + draws;
    const double residual = out.total_demand - injections;
    if (residual < -1e-9) {
        throw InfeasibleDispatch("slot " + std::to_string(exo.slot_index) + ": prosumer injections " +
                                 std::to_string(injections) + " kW exceed demand " +
                                 std::to_string(out.total_demand) + " kW");
    }
    try {
        DispatchResult d = dispatch(std::max(0.0, residual), generators);
        out.p_g = std::move(d.p_g);
        out.min_gen_relaxed = d.min_gen_relaxed;
    } catch (const InfeasibleDispatch& e) {
        throw InfeasibleDispatch("slot " + std::to_string(exo.slot_index) + ": " + e.what());
    }

    settle_rewards(out, generators, dt);

    for (std::size_t j = 0; j < m; ++j) {
        res.states[j].soc = update_soc(states[j].soc, out.p_b[j], dt, states[j].battery);
    }
    return res;
}

}  // namespace gridmkt
