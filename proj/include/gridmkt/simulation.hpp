#pragma once

// Episode and run orchestration: one grid agent sets the buy price, each
// prosumer agent then picks a battery action, the environment settles the
// slot, and (in training) every agent stores a transition and takes one
// learning step.

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "config.hpp"
#include "core_env.hpp"
#include "dqn.hpp"
#include "market_agents.hpp"
#include "metrics.hpp"
#include "profiles.hpp"

namespace gridmkt {

// Stream ids for derive_seed.
inline constexpr std::uint64_t kProfileStream = 1u << 20;
inline constexpr std::uint64_t kEvalProfileStream = 2u << 20;
inline constexpr std::uint64_t kAgentStream = 0;

struct DayInputs {
    DayProfile consumer;
    std::vector<DayProfile> pv;
    std::vector<DayProfile> consumption;

    Exogenous exogenous(int slot) const {
        Exogenous e;
        for (std::size_t j = 0; j < pv.size(); ++j) {
            e.pv.push_back(pv[j][static_cast<std::size_t>(slot)]);
            e.consumption.push_back(consumption[j][static_cast<std::size_t>(slot)]);
        }
        e.consumer_load = consumer[static_cast<std::size_t>(slot)];
        e.sell_price = sell_price(slot);
        e.slot_index = slot;
        return e;
    }

    // Consumer load plus what prosumers would draw with idle batteries.
    double demand_forecast(int slot) const {
        const auto s = static_cast<std::size_t>(slot);
        double d = consumer[s];
        for (std::size_t j = 0; j < pv.size(); ++j) d += std::max(0.0, consumption[j][s] - pv[j][s]);
        return d;
    }
};

// Profiles are a pure function of (seed, episode) so resumed and evaluation
// runs see the same days without carrying generator state around.
inline DayInputs make_day(const ScenarioConfig& cfg, int episode, bool evaluation = false) {
    const std::uint64_t stream = (evaluation ? kEvalProfileStream : kProfileStream) +
                                 (cfg.resample_profiles ? static_cast<std::uint64_t>(episode) : 0u);
    Rng rng(derive_seed(cfg.seed, stream));
    DayInputs day;
    day.consumer = make_profile(cfg.consumer, rng);
    day.consumer.label = "consumer";
    for (std::size_t j = 0; j < cfg.prosumers.size(); ++j) {
        day.pv.push_back(make_profile(cfg.prosumers[j].pv, rng));
        day.pv.back().label = "pv_" + std::to_string(j + 1);
        day.consumption.push_back(make_profile(cfg.prosumers[j].consumption, rng));
        day.consumption.back().label = "consumption_" + std::to_string(j + 1);
    }
    day.consumer.validate();
    for (const auto& p : day.pv) p.validate();
    for (const auto& p : day.consumption) p.validate();
    return day;
}

struct ObservationScales {
    GridObsScale grid;
    std::vector<ProsumerObsScale> prosumers;
};

inline ObservationScales make_scales(const ScenarioConfig& cfg) {
    ObservationScales s;
    const double price_max = cfg.buy_prices.back();
    for (const auto& g : cfg.generators) s.grid.gen_cost_max.push_back(g.p_max * g.beta * cfg.dt);
    double demand_max = 0.0;
    for (const auto& g : cfg.generators) demand_max += g.p_max;
    for (const auto& p : cfg.prosumers) {
        s.grid.prosumer_cost_max.push_back(p.p_h_max * price_max * cfg.dt);
        demand_max += p.p_h_max;
        ProsumerObsScale ps;
        ps.capacity = p.battery.capacity;
        ps.pv_max = detail::upper_bound(p.pv);
        ps.consumption_max = detail::upper_bound(p.consumption);
        ps.price_min = cfg.buy_prices.front();
        ps.price_span = cfg.buy_prices.back() - cfg.buy_prices.front();
        if (!(ps.pv_max > 0.0)) ps.pv_max = 1.0;
        if (!(ps.consumption_max > 0.0)) ps.consumption_max = 1.0;
        s.prosumers.push_back(ps);
    }
    s.grid.demand_max = demand_max;
    return s;
}

struct Agents {
    DqnAgent grid;
    std::vector<DqnAgent> prosumers;
};

inline Agents make_agents(const ScenarioConfig& cfg) {
    const int grid_obs = static_cast<int>(cfg.generators.size() + cfg.prosumers.size() + 2);
    Agents a{make_agent(cfg.grid_agent, grid_obs, static_cast<int>(cfg.buy_prices.size()),
                        derive_seed(cfg.seed, kAgentStream)),
             {}};
    for (std::size_t j = 0; j < cfg.prosumers.size(); ++j) {
        a.prosumers.push_back(make_agent(cfg.prosumer_agent, static_cast<int>(kProsumerObsSize),
                                         kBatteryActionCount, derive_seed(cfg.seed, kAgentStream + 1 + j)));
    }
    return a;
}

inline Checkpoint make_checkpoint(const Agents& agents, const std::string& digest, int next_episode,
                                  bool include_replay) {
    Checkpoint cp;
    cp.config_digest = digest;
    cp.next_episode = next_episode;
    cp.agents.push_back(snapshot(agents.grid, include_replay));
    for (const auto& p : agents.prosumers) cp.agents.push_back(snapshot(p, include_replay));
    return cp;
}

inline void restore_agents(Agents& agents, const Checkpoint& cp) {
    if (cp.agents.size() != agents.prosumers.size() + 1) {
        throw CheckpointError(CheckpointError::Kind::Corrupt, "checkpoint agent count does not match the scenario");
    }
    restore(agents.grid, cp.agents[0]);
    for (std::size_t j = 0; j < agents.prosumers.size(); ++j) restore(agents.prosumers[j], cp.agents[j + 1]);
}

struct SlotRecord {
    int episode = 0;
    int slot = 0;
    std::vector<double> soc_before;
    std::vector<double> soc_after;
    Exogenous exo;
    StepOutcome outcome;
};

using SlotSink = std::function<void(const SlotRecord&)>;

namespace detail {

struct LossAccumulator {
    double sum = 0.0;
    int count = 0;
    void add(const std::optional<double>& l) {
        if (l) {
            sum += *l;
            ++count;
        }
    }
    double mean() const { return count ? sum / count : 0.0; }
};

inline std::vector<double> prosumer_obs(const ObservationScales& scales, const DayInputs& day, std::size_t j,
                                        double soc, double price, int slot) {
    const auto s = static_cast<std::size_t>(slot);
    return encode_prosumer_obs({soc, day.pv[j][s], price, day.consumption[j][s], slot_of_day(slot)},
                               scales.prosumers[j]);
}

}  // namespace detail

// Runs one 96-slot day. `agents` may be null in baseline mode. Eval and
// baseline modes never touch learning state (agents are read-only there).
inline EpisodeMetrics run_episode(const ScenarioConfig& cfg, const ObservationScales& scales, const DayInputs& day,
                                  Agents* agents, RunMode mode, int episode, double eps,
                                  const SlotSink& sink = {}) {
    const std::size_t m = cfg.prosumers.size();
    const std::size_t k = cfg.generators.size();
    if (mode != RunMode::Baseline && agents == nullptr) {
        throw ContractViolation("run_episode: train/eval modes need agents");
    }
    const bool train = mode == RunMode::Train;

    std::vector<ProsumerState> states;
    for (const auto& p : cfg.prosumers) states.push_back({p.initial_soc, p.battery, p.p_h_max});

    EpisodeMetrics metrics;
    metrics.episode = episode;
    metrics.epsilon = train ? eps : 0.0;
    metrics.bills.assign(m, 0.0);
    metrics.prosumer_rewards.assign(m, 0.0);
    metrics.loss_pa.assign(m, 0.0);

    GridObservation grid_obs{std::vector<double>(k, 0.0), std::vector<double>(m, 0.0), 0.0, 0.0};
    std::vector<std::optional<Transition>> pending(m);
    detail::LossAccumulator ga_loss;
    std::vector<detail::LossAccumulator> pa_loss(m);

    auto finish_pending = [&](double next_price, int next_slot, const std::vector<ProsumerState>& now) {
        for (std::size_t j = 0; j < m; ++j) {
            if (!pending[j]) continue;
            pending[j]->next_state =
                detail::prosumer_obs(scales, day, j, now[j].soc, next_price, next_slot);
            agents->prosumers[j].buffer.store(std::move(*pending[j]));
            pending[j].reset();
            pa_loss[j].add(learn_step(agents->prosumers[j]));
        }
    };

    for (int t = 0; t < kSlotsPerDay; ++t) {
        const Exogenous exo = day.exogenous(t);
        grid_obs.demand = day.demand_forecast(t);
        grid_obs.slot_of_day = slot_of_day(t);

        double price = cfg.conventional_buy_price;
        std::vector<double> commands(m, 0.0);
        std::vector<double> export_limits;
        std::vector<double> ga_state;
        int ga_action = 0;
        std::vector<std::vector<double>> pa_states(m);
        std::vector<int> pa_actions(m, 0);

        if (mode == RunMode::Baseline) {
            price = cfg.conventional_buy_price;
            for (std::size_t j = 0; j < m; ++j) {
                const ProsumerObservation obs{states[j].soc, exo.pv[j], price, exo.consumption[j], slot_of_day(t)};
                commands[j] = conventional_prosumer_policy(obs, states[j].battery, cfg.dt);
                export_limits.push_back(conventional_export_limit(states[j].soc, states[j].battery, states[j].p_h_max));
            }
        } else {
            ga_state = encode_grid_obs(grid_obs, scales.grid);
            ga_action = train ? select_action(agents->grid, ga_state, eps, agents->grid.rng)
                              : greedy_action(agents->grid, ga_state);
            price = cfg.buy_prices[static_cast<std::size_t>(ga_action)];
            if (train) finish_pending(price, t, states);
            for (std::size_t j = 0; j < m; ++j) {
                pa_states[j] = detail::prosumer_obs(scales, day, j, states[j].soc, price, t);
                pa_actions[j] = train ? select_action(agents->prosumers[j], pa_states[j], eps, agents->prosumers[j].rng)
                                      : greedy_action(agents->prosumers[j], pa_states[j]);
                commands[j] = pa_action_to_command(pa_actions[j], cfg.prosumers[j].battery.p_b_max);
            }
        }

        StepResult res = step(states, price, commands, exo, cfg.generators, cfg.dt, export_limits);
        const StepOutcome& out = res.outcome;

        metrics.grid_reward += out.grid_reward;
        metrics.base_kwh += out.p_g[0] * cfg.dt;
        for (std::size_t i = 1; i < k; ++i) metrics.reserve_kwh += out.p_g[i] * cfg.dt;
        for (std::size_t j = 0; j < m; ++j) {
            metrics.prosumer_rewards[j] += out.prosumer_rewards[j];
            metrics.bills[j] -= out.prosumer_rewards[j];
        }
        metrics.consumer_payment += exo.consumer_load * exo.sell_price * cfg.dt;
        for (double c : out.gen_costs) metrics.generation_cost += c;

        if (sink) {
            SlotRecord rec{episode, t, {}, {}, exo, out};
            for (std::size_t j = 0; j < m; ++j) {
                rec.soc_before.push_back(states[j].soc);
                rec.soc_after.push_back(res.states[j].soc);
            }
            sink(rec);
        }

        grid_obs.prev_gen_costs = out.gen_costs;
        grid_obs.prev_prosumer_costs = out.prosumer_payments;

        if (train) {
            // The day wraps: the last slot bootstraps from slot 0.
            const int next_slot = (t + 1) % kSlotsPerDay;
            GridObservation next_obs = grid_obs;
            next_obs.demand = day.demand_forecast(next_slot);
            next_obs.slot_of_day = slot_of_day(next_slot);
            std::vector<double> ga_next = encode_grid_obs(next_obs, scales.grid);
            agents->grid.buffer.store({ga_state, ga_action, out.grid_reward, ga_next});
            ga_loss.add(learn_step(agents->grid));

            for (std::size_t j = 0; j < m; ++j) {
                pending[j] = Transition{pa_states[j], pa_actions[j], out.prosumer_rewards[j], {}};
            }
            if (t + 1 == kSlotsPerDay) {
                const double next_price =
                    cfg.buy_prices[static_cast<std::size_t>(greedy_action(agents->grid, ga_next))];
                finish_pending(next_price, next_slot, res.states);
            }
        }
        states = std::move(res.states);
    }

    metrics.loss_ga = ga_loss.mean();
    for (std::size_t j = 0; j < m; ++j) metrics.loss_pa[j] = pa_loss[j].mean();
    return metrics;
}

// ---- per-slot audit log ---------------------------------------------------

inline std::string slot_log_header(std::size_t generators, std::size_t prosumers) {
    std::string h = "episode,slot,buy_price,sell_price,consumer_load,total_demand,grid_reward,min_gen_relaxed";
    for (std::size_t i = 1; i <= generators; ++i) h += ",p_g_" + std::to_string(i);
    for (const char* f : {"pv", "consumption", "p_b", "p_h", "soc_before", "soc_after", "prosumer_reward"}) {
        for (std::size_t j = 1; j <= prosumers; ++j) h += "," + std::string(f) + "_" + std::to_string(j);
    }
    return h;
}

inline std::string slot_log_row(const SlotRecord& r) {
    const StepOutcome& o = r.outcome;
    std::string s = std::to_string(r.episode) + "," + std::to_string(r.slot);
    for (double v : {o.buy_price, o.sell_price, r.exo.consumer_load, o.total_demand, o.grid_reward}) {
        s += "," + format_double(v);
    }
    s += o.min_gen_relaxed ? ",1" : ",0";
    for (double v : o.p_g) s += "," + format_double(v);
    for (const auto* vec : {&r.exo.pv, &r.exo.consumption, &o.p_b, &o.p_h, &r.soc_before, &r.soc_after,
                            &o.prosumer_rewards}) {
        for (double v : *vec) s += "," + format_double(v);
    }
    return s;
}

// ---- runs -------------------------------------------------------------------

struct RunOptions {
    std::string out_dir;              // empty: nothing written
    std::string resume_checkpoint;    // train: continue from this file
    std::string checkpoint_path;      // empty: <out_dir>/checkpoint.bin
    bool checkpoint_replay = false;   // include replay buffers in checkpoints
    bool verbose_slots = false;       // write <out_dir>/slots.csv
    std::optional<int> stop_after;    // train: stop once this episode index is reached
    int first_episode = 0;            // eval/baseline numbering
};

namespace detail {

inline void write_run_info(const std::string& out_dir, const ScenarioConfig& cfg, RunMode mode) {
    std::ofstream out(std::filesystem::path(out_dir) / "run.json", std::ios::binary);
    if (!out) {
        throw IoError("cannot write '" + out_dir + "/run.json'");
    }
    nlohmann::json j = {{"mode", std::string(to_string(mode))},
                        {"config_digest", config_digest(cfg)},
                        {"seed", cfg.seed},
                        {"episodes", cfg.episodes},
                        {"prosumers", cfg.prosumers.size()}};
    out << j.dump(2) << '\n';
}

class RunOutputs {
public:
    // With `resume_from`, rows for earlier episodes already in the output
    // directory are kept so a resumed run yields one contiguous file.
    RunOutputs(const RunOptions& opt, const ScenarioConfig& cfg, RunMode mode, int resume_from = 0) {
        if (opt.out_dir.empty()) return;
        std::error_code ec;
        std::filesystem::create_directories(opt.out_dir, ec);
        if (ec) {
            throw IoError("cannot create output directory '" + opt.out_dir + "': " + ec.message());
        }
        const auto metrics_path = (std::filesystem::path(opt.out_dir) / "metrics.csv").string();
        std::vector<EpisodeMetrics> kept;
        if (resume_from > 0 && std::filesystem::exists(metrics_path)) {
            for (auto& row : read_metrics_csv(metrics_path)) {
                if (row.episode < resume_from && row.bills.size() == cfg.prosumers.size()) kept.push_back(std::move(row));
            }
        }
        write_run_info(opt.out_dir, cfg, mode);
        metrics_.emplace(metrics_path, cfg.prosumers.size());
        for (const auto& row : kept) metrics_->append(row);
        if (opt.verbose_slots) {
            const auto path = (std::filesystem::path(opt.out_dir) / "slots.csv").string();
            slots_.open(path, std::ios::binary | std::ios::trunc);
            if (!slots_) throw IoError("cannot write '" + path + "'");
            slots_ << slot_log_header(cfg.generators.size(), cfg.prosumers.size()) << '\n';
        }
    }

    void episode(const EpisodeMetrics& m) {
        if (metrics_) metrics_->append(m);
    }

    SlotSink sink() {
        if (!slots_.is_open()) return {};
        return [this](const SlotRecord& r) { slots_ << slot_log_row(r) << '\n'; };
    }

private:
    std::optional<MetricsCsvWriter> metrics_;
    std::ofstream slots_;
};

}  // namespace detail

struct TrainingResult {
    RunMetrics metrics;
    Agents agents;
    int next_episode = 0;
};

inline TrainingResult run_training(const ScenarioConfig& cfg, const RunOptions& opt = {}) {
    cfg.validate();
    const std::string digest = config_digest(cfg);
    const ObservationScales scales = make_scales(cfg);
    Agents agents = make_agents(cfg);
    int start = 0;
    if (!opt.resume_checkpoint.empty()) {
        const Checkpoint cp = load_checkpoint(opt.resume_checkpoint, digest);
        restore_agents(agents, cp);
        start = static_cast<int>(cp.next_episode);
    }
    const int stop = std::min(cfg.episodes, opt.stop_after.value_or(cfg.episodes));
    std::string cp_path = opt.checkpoint_path;
    if (cp_path.empty() && !opt.out_dir.empty()) {
        cp_path = (std::filesystem::path(opt.out_dir) / "checkpoint.bin").string();
    }

    detail::RunOutputs outputs(opt, cfg, RunMode::Train, start);
    const SlotSink sink = outputs.sink();
    const EpsilonSchedule schedule = cfg.epsilon_schedule();

    TrainingResult result;
    result.metrics = {RunMode::Train, digest, cfg.seed, {}};
    for (int e = start; e < stop; ++e) {
        const DayInputs day = make_day(cfg, e);
        EpisodeMetrics m = run_episode(cfg, scales, day, &agents, RunMode::Train, e, epsilon(schedule, e), sink);
        outputs.episode(m);
        result.metrics.episodes.push_back(std::move(m));
        const bool last = e + 1 == stop;
        if (!cp_path.empty() && ((e + 1) % cfg.checkpoint_interval == 0 || last)) {
            save_checkpoint(cp_path, make_checkpoint(agents, digest, e + 1, opt.checkpoint_replay));
        }
    }
    result.next_episode = std::max(start, stop);
    result.agents = std::move(agents);
    return result;
}

inline RunMetrics run_baseline(const ScenarioConfig& cfg, const RunOptions& opt = {}) {
    cfg.validate();
    const ObservationScales scales = make_scales(cfg);
    detail::RunOutputs outputs(opt, cfg, RunMode::Baseline);
    const SlotSink sink = outputs.sink();
    RunMetrics run{RunMode::Baseline, config_digest(cfg), cfg.seed, {}};
    for (int e = 0; e < cfg.episodes; ++e) {
        const DayInputs day = make_day(cfg, e);
        EpisodeMetrics m = run_episode(cfg, scales, day, nullptr, RunMode::Baseline, e, 0.0, sink);
        outputs.episode(m);
        run.episodes.push_back(std::move(m));
    }
    return run;
}

// Greedy rollouts of trained agents on evaluation days; `agents` is copied
// so the caller's learning state is untouched.
inline RunMetrics run_eval(const ScenarioConfig& cfg, Agents agents, const RunOptions& opt = {}) {
    cfg.validate();
    const ObservationScales scales = make_scales(cfg);
    detail::RunOutputs outputs(opt, cfg, RunMode::Eval);
    const SlotSink sink = outputs.sink();
    RunMetrics run{RunMode::Eval, config_digest(cfg), cfg.seed, {}};
    for (int i = 0; i < cfg.episodes; ++i) {
        const int e = opt.first_episode + i;
        const DayInputs day = make_day(cfg, e, true);
        EpisodeMetrics m = run_episode(cfg, scales, day, &agents, RunMode::Eval, e, 0.0, sink);
        outputs.episode(m);
        run.episodes.push_back(std::move(m));
    }
    return run;
}

inline RunMetrics run_eval_from_checkpoint(const ScenarioConfig& cfg, const std::string& checkpoint,
                                           const RunOptions& opt = {}) {
    Agents agents = make_agents(cfg);
    restore_agents(agents, load_checkpoint(checkpoint, config_digest(cfg)));
    return run_eval(cfg, std::move(agents), opt);
}

// Reads <dir>/metrics.csv and <dir>/run.json.
inline RunMetrics load_run(const std::string& dir) {
    const auto info_path = std::filesystem::path(dir) / "run.json";
    std::ifstream in(info_path);
    if (!in) {
        throw IoError("cannot open '" + info_path.string() + "'");
    }
    RunMetrics run;
    try {
        nlohmann::json j = nlohmann::json::parse(in);
        run.mode = run_mode_from(j.at("mode").get<std::string>());
        run.config_digest = j.at("config_digest").get<std::string>();
        run.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(info_path.string() + ": " + e.what());
    }
    run.episodes = read_metrics_csv((std::filesystem::path(dir) / "metrics.csv").string());
    return run;
}

}  // namespace gridmkt
