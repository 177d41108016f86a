#pragma once

// Market-specific glue between the environment and the DQN agents:
// observation encodings, action-index maps and the conventional
// (non-learning) policies.

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "core_env.hpp"
#include "errors.hpp"

namespace gridmkt {

inline constexpr std::array<double, 6> kBuyPrices{0.05, 0.06, 0.07, 0.08, 0.09, 0.10};
inline constexpr double kConventionalBuyPrice = 0.05;
inline constexpr int kBatteryActionCount = 3;

// Grid agent sees last slot's costs (its own price drives this slot's
// prosumer costs, so those are not known yet).
struct GridObservation {
    std::vector<double> prev_gen_costs;       // $ per generator
    std::vector<double> prev_prosumer_costs;  // $ per prosumer
    double demand = 0.0;                      // kW forecast for this slot
    double slot_of_day = 0.0;                 // [0, 1)
};

struct GridObsScale {
    std::vector<double> gen_cost_max;
    std::vector<double> prosumer_cost_max;
    double demand_max = 1.0;
};

struct ProsumerObservation {
    double soc = 0.0;  // kWh
    double pv = 0.0;   // kW
    double buy_price = 0.0;
    double consumption = 0.0;  // kW
    double slot_of_day = 0.0;
};

struct ProsumerObsScale {
    double capacity = 1.0;         // kWh
    double pv_max = 1.0;           // kW
    double consumption_max = 1.0;  // kW
    double price_min = kBuyPrices.front();
    double price_span = kBuyPrices.back() - kBuyPrices.front();
};

inline double slot_of_day(int slot) { return static_cast<double>(slot) / kSlotsPerDay; }

namespace detail {
inline double ratio(double value, double scale, const char* what) {
    if (!std::isfinite(value)) {
        throw ContractViolation(std::string("observation feature '") + what + "' is not finite");
    }
    if (!(scale > 0.0)) {
        throw ContractViolation(std::string("observation scale for '") + what + "' must be positive");
    }
    return value / scale;
}
}  // namespace detail

// [gen costs..., prosumer costs..., demand, slot]
inline std::vector<double> encode_grid_obs(const GridObservation& obs, const GridObsScale& scale) {
    if (obs.prev_gen_costs.size() != scale.gen_cost_max.size() ||
        obs.prev_prosumer_costs.size() != scale.prosumer_cost_max.size()) {
        throw ContractViolation("encode_grid_obs: observation and scale sizes differ");
    }
    std::vector<double> v;
    v.reserve(obs.prev_gen_costs.size() + obs.prev_prosumer_costs.size() + 2);
    for (std::size_t i = 0; i < obs.prev_gen_costs.size(); ++i) {
        v.push_back(detail::ratio(obs.prev_gen_costs[i], scale.gen_cost_max[i], "generator cost"));
    }
    for (std::size_t j = 0; j < obs.prev_prosumer_costs.size(); ++j) {
        v.push_back(detail::ratio(obs.prev_prosumer_costs[j], scale.prosumer_cost_max[j], "prosumer cost"));
    }
    v.push_back(detail::ratio(obs.demand, scale.demand_max, "demand"));
    v.push_back(detail::ratio(obs.slot_of_day, 1.0, "slot"));
    return v;
}

inline constexpr std::size_t kProsumerObsSize = 5;

// [soc, pv, price, consumption, slot]
inline std::vector<double> encode_prosumer_obs(const ProsumerObservation& obs, const ProsumerObsScale& scale) {
    return {
        detail::ratio(obs.soc, scale.capacity, "soc"),
        detail::ratio(obs.pv, scale.pv_max, "pv"),
        detail::ratio(obs.buy_price - scale.price_min, scale.price_span, "buy price"),
        detail::ratio(obs.consumption, scale.consumption_max, "consumption"),
        detail::ratio(obs.slot_of_day, 1.0, "slot"),
    };
}

inline double ga_action_to_price(int index) {
    if (index < 0 || index >= static_cast<int>(kBuyPrices.size())) {
        throw ContractViolation("ga_action_to_price: index " + std::to_string(index) + " outside [0, 6)");
    }
    return kBuyPrices[static_cast<std::size_t>(index)];
}

// 0 charge, 1 idle, 2 discharge.
inline double pa_action_to_command(int index, double p_b_max) {
    switch (index) {
        case 0: return p_b_max;
        case 1: return 0.0;
        case 2: return -p_b_max;
        default:
            throw ContractViolation("pa_action_to_command: index " + std::to_string(index) + " outside [0, 3)");
    }
}

inline constexpr double kFullTolerance = 1e-9;

inline bool battery_full(double soc, const BatterySpec& spec) { return soc >= spec.soc_max - kFullTolerance; }

// Store PV surplus until full, cover deficits from the battery, buy the rest.
inline double conventional_prosumer_policy(const ProsumerObservation& obs, const BatterySpec& spec, double dt) {
    const double surplus = obs.pv - obs.consumption;
    if (surplus > 0.0) {
        if (battery_full(obs.soc, spec)) {
            return 0.0;
        }
        return std::max(0.0, std::min({surplus, spec.p_b_max, (spec.soc_max - obs.soc) / dt}));
    }
    if (surplus < 0.0) {
        return -std::max(0.0, std::min({-surplus, spec.p_b_max, (obs.soc - spec.soc_min) / dt}));
    }
    return 0.0;
}

// Conventional prosumers export only with a full battery; otherwise any
// surplus the battery cannot absorb is curtailed.
inline double conventional_export_limit(double soc, const BatterySpec& spec, double p_h_max) {
    return battery_full(soc, spec) ? p_h_max : 0.0;
}

inline double conventional_grid_policy() { return kConventionalBuyPrice; }

}  // namespace gridmkt
