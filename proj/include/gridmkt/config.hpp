#pragma once

// Scenario description, its JSON document form and the digest used to tie
// checkpoints and metrics to the configuration that produced them.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core_env.hpp"
#include "dqn.hpp"
#include "market_agents.hpp"
#include "profiles.hpp"

namespace gridmkt {

struct ProsumerConfig {
    BatterySpec battery;
    double p_h_max = 10.0;
    double initial_soc = 3.0;
    ProfileSpec pv;
    ProfileSpec consumption;
};

struct ScenarioConfig {
    std::vector<GeneratorSpec> generators;
    std::vector<ProsumerConfig> prosumers;
    ProfileSpec consumer;
    std::vector<double> buy_prices{kBuyPrices.begin(), kBuyPrices.end()};
    double conventional_buy_price = kConventionalBuyPrice;
    double dt = kSlotHours;
    int iterations_per_episode = kSlotsPerDay;
    int episodes = 10000;
    std::uint64_t seed = 1;
    bool resample_profiles = true;
    int checkpoint_interval = 500;
    int warm_episodes = 300;
    double final_epsilon = 0.01;
    DqnHyperparams grid_agent{{1000}};
    DqnHyperparams prosumer_agent{{1000, 1000}};

    EpsilonSchedule epsilon_schedule() const { return {warm_episodes, final_epsilon, episodes}; }

    void validate() const;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

inline double lower_bound(const ProfileSpec& p) {
    if (!p.csv_path.empty() || p.kind == ProfileKind::Pv) return 0.0;
    return p.peak * p.baseline_fraction * (1.0 - p.jitter_fraction);
}

inline double upper_bound(const ProfileSpec& p) {
    if (!p.csv_path.empty()) return load_profile_csv(p.csv_path).peak();
    return p.upper_bound();
}

}  // namespace detail

inline void ScenarioConfig::validate() const {
    using detail::require;
    require(!generators.empty(), "scenario needs at least one generator");
    require(!prosumers.empty(), "scenario needs at least one prosumer");
    for (std::size_t i = 0; i < generators.size(); ++i) {
        generators[i].validate();
        require(i == 0 || generators[i - 1].beta <= generators[i].beta,
                "generators must be listed by ascending incremental cost");
    }
    for (const auto& p : prosumers) {
        p.battery.validate();
        require(p.p_h_max > 0.0, "prosumer p_h_max must be positive");
        require(p.initial_soc >= p.battery.soc_min && p.initial_soc <= p.battery.soc_max,
                "prosumer initial_soc must lie within [soc_min, soc_max]");
        require(p.pv.kind == ProfileKind::Pv, "prosumer pv profile must have kind pv");
        require(p.consumption.kind == ProfileKind::Consumption, "prosumer consumption profile must have kind consumption");
        p.pv.validate();
        p.consumption.validate();
    }
    require(consumer.kind == ProfileKind::ConsumerLoad, "consumer profile must have kind consumer_load");
    consumer.validate();
    require(buy_prices.size() >= 2, "at least two buy prices required");
    for (std::size_t i = 0; i < buy_prices.size(); ++i) {
        require(buy_prices[i] > 0.0, "buy prices must be positive");
        require(i == 0 || buy_prices[i] > buy_prices[i - 1], "buy prices must be strictly increasing");
    }
    require(conventional_buy_price > 0.0, "conventional_buy_price must be positive");
    require(dt > 0.0, "dt must be positive");
    require(iterations_per_episode == kSlotsPerDay, "iterations_per_episode must be 96");
    require(episodes > 0, "episodes must be positive");
    require(checkpoint_interval > 0, "checkpoint_interval must be positive");
    require(warm_episodes >= 0, "warm_episodes must be non-negative");
    require(final_epsilon >= 0.0 && final_epsilon <= 1.0, "final_epsilon must lie in [0, 1]");
    grid_agent.validate();
    prosumer_agent.validate();

    // Worst cases over all synthetic draws: the grid must be able to absorb
    // every injection and serve every draw.
    double capacity = 0.0;
    for (const auto& g : generators) capacity += g.p_max;
    double max_injection = 0.0;
    double max_draw = 0.0;
    for (const auto& p : prosumers) {
        max_injection += std::min(p.p_h_max, std::max(0.0, detail::upper_bound(p.pv) + p.battery.p_b_max -
                                                               detail::lower_bound(p.consumption)));
        max_draw += std::min(p.p_h_max, detail::upper_bound(p.consumption) + p.battery.p_b_max);
    }
    require(max_injection <= detail::lower_bound(consumer) || !consumer.csv_path.empty(),
            "worst-case prosumer injection exceeds the minimum consumer load; the grid could not absorb it");
    require(detail::upper_bound(consumer) + max_draw <= capacity,
            "worst-case demand exceeds total generation capacity");
}

// ---- JSON mapping -------------------------------------------------------

inline ProfileKind profile_kind_from(const std::string& s) {
    if (s == "pv") return ProfileKind::Pv;
    if (s == "consumption") return ProfileKind::Consumption;
    if (s == "consumer_load") return ProfileKind::ConsumerLoad;
    throw ParseError("unknown profile kind '" + s + "'");
}

inline void to_json(nlohmann::json& j, const ProfileSpec& p) {
    j = {{"kind", std::string(to_string(p.kind))}, {"peak", p.peak}, {"jitter_fraction", p.jitter_fraction}};
    if (p.kind == ProfileKind::Pv) {
        j["sunrise_slot"] = p.sunrise_slot;
        j["sunset_slot"] = p.sunset_slot;
    } else {
        j["baseline_fraction"] = p.baseline_fraction;
        j["morning_center"] = p.morning_center;
        j["morning_width"] = p.morning_width;
        j["morning_amplitude"] = p.morning_amplitude;
        j["evening_center"] = p.evening_center;
        j["evening_width"] = p.evening_width;
    }
    if (!p.csv_path.empty()) j["csv"] = p.csv_path;
}

inline void from_json(const nlohmann::json& j, ProfileSpec& p) {
    p = ProfileSpec{};
    p.kind = profile_kind_from(j.at("kind").get<std::string>());
    p.peak = j.at("peak").get<double>();
    p.jitter_fraction = j.value("jitter_fraction", 0.0);
    if (p.kind == ProfileKind::Pv) {
        p.sunrise_slot = j.value("sunrise_slot", p.sunrise_slot);
        p.sunset_slot = j.value("sunset_slot", p.sunset_slot);
    } else {
        p.baseline_fraction = j.value("baseline_fraction", p.baseline_fraction);
        p.morning_center = j.value("morning_center", p.morning_center);
        p.morning_width = j.value("morning_width", p.morning_width);
        p.morning_amplitude = j.value("morning_amplitude", p.morning_amplitude);
        p.evening_center = j.value("evening_center", p.evening_center);
        p.evening_width = j.value("evening_width", p.evening_width);
    }
    p.csv_path = j.value("csv", std::string{});
}

inline void to_json(nlohmann::json& j, const DqnHyperparams& h) {
    j = {{"hidden_layers", h.hidden_layers}, {"gamma", h.gamma},           {"learning_rate", h.learning_rate},
         {"tau", h.tau},                     {"batch_size", h.batch_size}, {"replay_capacity", h.replay_capacity}};
}

inline void from_json(const nlohmann::json& j, DqnHyperparams& h) {
    h.hidden_layers = j.value("hidden_layers", h.hidden_layers);
    h.gamma = j.value("gamma", h.gamma);
    h.learning_rate = j.value("learning_rate", h.learning_rate);
    h.tau = j.value("tau", h.tau);
    h.batch_size = j.value("batch_size", h.batch_size);
    h.replay_capacity = j.value("replay_capacity", h.replay_capacity);
}

inline void to_json(nlohmann::json& j, const ScenarioConfig& c) {
    j = nlohmann::json::object();
    for (const auto& g : c.generators) {
        j["generators"].push_back({{"p_min", g.p_min}, {"p_max", g.p_max}, {"beta", g.beta}});
    }
    for (const auto& p : c.prosumers) {
        j["prosumers"].push_back({{"battery",
                                   {{"capacity", p.battery.capacity},
                                    {"p_b_max", p.battery.p_b_max},
                                    {"soc_min", p.battery.soc_min},
                                    {"soc_max", p.battery.soc_max}}},
                                  {"p_h_max", p.p_h_max},
                                  {"initial_soc", p.initial_soc},
                                  {"pv", p.pv},
                                  {"consumption", p.consumption}});
    }
    j["consumer"] = c.consumer;
    j["buy_prices"] = c.buy_prices;
    j["conventional_buy_price"] = c.conventional_buy_price;
    j["dt_hours"] = c.dt;
    j["iterations_per_episode"] = c.iterations_per_episode;
    j["episodes"] = c.episodes;
    j["seed"] = c.seed;
    j["resample_profiles"] = c.resample_profiles;
    j["checkpoint_interval"] = c.checkpoint_interval;
    j["epsilon"] = {{"warm_episodes", c.warm_episodes}, {"final_epsilon", c.final_epsilon}};
    j["grid_agent"] = c.grid_agent;
    j["prosumer_agent"] = c.prosumer_agent;
}

inline void from_json(const nlohmann::json& j, ScenarioConfig& c) {
    c = ScenarioConfig{};
    for (const auto& g : j.at("generators")) {
        c.generators.push_back({g.at("p_min").get<double>(), g.at("p_max").get<double>(), g.at("beta").get<double>()});
    }
    for (const auto& p : j.at("prosumers")) {
        ProsumerConfig pc;
        const auto& b = p.at("battery");
        pc.battery.capacity = b.at("capacity").get<double>();
        pc.battery.p_b_max = b.at("p_b_max").get<double>();
        pc.battery.soc_min = b.value("soc_min", 0.1 * pc.battery.capacity);
        pc.battery.soc_max = b.value("soc_max", 0.9 * pc.battery.capacity);
        pc.p_h_max = p.value("p_h_max", pc.p_h_max);
        pc.initial_soc = p.at("initial_soc").get<double>();
        pc.pv = p.at("pv").get<ProfileSpec>();
        pc.consumption = p.at("consumption").get<ProfileSpec>();
        c.prosumers.push_back(pc);
    }
    c.consumer = j.at("consumer").get<ProfileSpec>();
    c.buy_prices = j.value("buy_prices", c.buy_prices);
    c.conventional_buy_price = j.value("conventional_buy_price", c.conventional_buy_price);
    c.dt = j.value("dt_hours", c.dt);
    c.iterations_per_episode = j.value("iterations_per_episode", c.iterations_per_episode);
    c.episodes = j.value("episodes", c.episodes);
    c.seed = j.value("seed", c.seed);
    c.resample_profiles = j.value("resample_profiles", c.resample_profiles);
    c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
    if (j.contains("epsilon")) {
        c.warm_episodes = j["epsilon"].value("warm_episodes", c.warm_episodes);
        c.final_epsilon = j["epsilon"].value("final_epsilon", c.final_epsilon);
    }
    if (j.contains("grid_agent")) j["grid_agent"].get_to(c.grid_agent);
    if (j.contains("prosumer_agent")) j["prosumer_agent"].get_to(c.prosumer_agent);
}

inline ScenarioConfig parse_config(const std::string& text, const std::string& origin = "<config>") {
    ScenarioConfig c;
    try {
        c = nlohmann::json::parse(text).get<ScenarioConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    c.validate();
    return c;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

inline std::string canonical_json(const ScenarioConfig& c) { return nlohmann::json(c).dump(); }

// FNV-1a over the canonical document, as 16 hex digits. Run length and
// checkpoint cadence are left out so a checkpoint can be evaluated (or a run
// compared) with a different --episodes.
inline std::string config_digest(const ScenarioConfig& c) {
    nlohmann::json j = c;
    j.erase("episodes");
    j.erase("checkpoint_interval");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// Reference microgrid with full-size networks.
inline ScenarioConfig reference_scenario() {
    ScenarioConfig c;
    c.generators = {{5.0, 20.0, 0.03}, {0.0, 50.0, 0.3}};
    const double pv_peak[3] = {2.5, 2.25, 2.0};
    const double capacity[3] = {8.0, 9.0, 10.0};
    const double soc0[3] = {3.0, 3.5, 4.0};
    const double cons_peak[3] = {0.8, 1.2, 1.5};
    for (int j = 0; j < 3; ++j) {
        ProsumerConfig p;
        p.battery = {capacity[j], 2.0, 0.1 * capacity[j], 0.9 * capacity[j]};
        p.p_h_max = 10.0;
        p.initial_soc = soc0[j];
        p.pv.kind = ProfileKind::Pv;
        p.pv.peak = pv_peak[j];
        p.pv.sunrise_slot = 24;
        p.pv.sunset_slot = 76;
        p.pv.jitter_fraction = 0.05;
        p.consumption.kind = ProfileKind::Consumption;
        p.consumption.peak = cons_peak[j];
        p.consumption.baseline_fraction = 0.25;
        p.consumption.morning_center = 30.0;
        p.consumption.morning_width = 4.0;
        p.consumption.morning_amplitude = 0.6;
        p.consumption.evening_center = 78.0;
        p.consumption.evening_width = 6.0;
        p.consumption.jitter_fraction = 0.05;
        c.prosumers.push_back(p);
    }
    c.consumer.kind = ProfileKind::ConsumerLoad;
    c.consumer.peak = 24.0;
    c.consumer.baseline_fraction = 0.6;
    c.consumer.morning_center = 32.0;
    c.consumer.morning_width = 6.0;
    c.consumer.morning_amplitude = 0.7;
    c.consumer.evening_center = 76.0;
    c.consumer.evening_width = 8.0;
    c.consumer.jitter_fraction = 0.05;
    return c;
}

}  // namespace gridmkt
