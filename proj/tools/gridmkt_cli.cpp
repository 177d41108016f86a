// Command-line front end: train, baseline, eval, compare, emit-profiles.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gridmkt/gridmkt.hpp"

namespace {

struct CommonArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> episodes;
    std::string out;
    bool verbose_slots = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, const std::string& default_out) {
    a.out = default_out;
    cmd->add_option("--config", a.config, "Scenario config (JSON); defaults to the built-in reference scenario");
    cmd->add_option("--seed", a.seed, "Run seed (overrides the config)");
    cmd->add_option("--episodes", a.episodes, "Episode count (overrides the config)")->check(CLI::PositiveNumber);
    cmd->add_option("--out", a.out, "Output directory")->capture_default_str();
    cmd->add_flag("--verbose-slots", a.verbose_slots, "Also write per-slot outcomes to slots.csv");
}

gridmkt::ScenarioConfig resolve_config(const CommonArgs& a) {
    gridmkt::ScenarioConfig cfg = a.config.empty() ? gridmkt::reference_scenario() : gridmkt::load_config(a.config);
    if (a.seed) cfg.seed = *a.seed;
    if (a.episodes) cfg.episodes = *a.episodes;
    cfg.validate();
    return cfg;
}

void print_tail(const gridmkt::RunMetrics& run) {
    if (run.episodes.empty()) return;
    const auto& e = run.episodes.back();
    std::cout << to_string(run.mode) << ": " << run.episodes.size() << " episodes, digest " << run.config_digest
              << "\n  last episode " << e.episode << ": grid_reward " << gridmkt::format_double(e.grid_reward)
              << ", reserve_kwh " << gridmkt::format_double(e.reserve_kwh);
    for (std::size_t j = 0; j < e.bills.size(); ++j) {
        std::cout << ", bill_" << j + 1 << ' ' << gridmkt::format_double(e.bills[j]);
    }
    std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Microgrid energy-market simulator with DQN grid and prosumer agents"};
    app.require_subcommand(1);

    CommonArgs train_args;
    std::string resume;
    std::optional<int> stop_after;
    bool checkpoint_replay = false;
    auto* train = app.add_subcommand("train", "Train the grid and prosumer agents");
    add_common(train, train_args, "runs/train");
    train->add_option("--checkpoint", resume, "Resume from this checkpoint");
    train->add_option("--stop-after", stop_after, "Stop once this many episodes have run in total");
    train->add_flag("--checkpoint-replay", checkpoint_replay, "Store replay buffers in checkpoints (exact resume)");

    CommonArgs base_args;
    auto* baseline = app.add_subcommand("baseline", "Run the conventional scenario (fixed price, rule-based batteries)");
    add_common(baseline, base_args, "runs/baseline");

    CommonArgs eval_args;
    std::string eval_checkpoint;
    auto* eval = app.add_subcommand("eval", "Greedy evaluation of trained agents");
    add_common(eval, eval_args, "runs/eval");
    eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint with trained agents")->required();

    std::string run_a, run_b, compare_out;
    int window = 100;
    auto* cmp = app.add_subcommand("compare", "Compare two run directories over their final episodes");
    cmp->add_option("run_a", run_a, "Reference run directory (e.g. baseline)")->required();
    cmp->add_option("run_b", run_b, "Candidate run directory (e.g. train)")->required();
    cmp->add_option("--window", window, "Number of final episodes to average")->capture_default_str()->check(
        CLI::PositiveNumber);
    cmp->add_option("--out", compare_out, "Write the deltas to this CSV file");

    CommonArgs prof_args;
    int profile_episode = 0;
    auto* profiles = app.add_subcommand("emit-profiles", "Write one day's profiles as CSV files");
    add_common(profiles, prof_args, "runs/profiles");
    profiles->add_option("--episode", profile_episode, "Episode whose day to emit")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            const auto cfg = resolve_config(train_args);
            gridmkt::RunOptions opt;
            opt.out_dir = train_args.out;
            opt.resume_checkpoint = resume;
            opt.verbose_slots = train_args.verbose_slots;
            opt.stop_after = stop_after;
            opt.checkpoint_replay = checkpoint_replay;
            const auto res = gridmkt::run_training(cfg, opt);
            print_tail(res.metrics);
        } else if (*baseline) {
            const auto cfg = resolve_config(base_args);
            gridmkt::RunOptions opt;
            opt.out_dir = base_args.out;
            opt.verbose_slots = base_args.verbose_slots;
            print_tail(gridmkt::run_baseline(cfg, opt));
        } else if (*eval) {
            const auto cfg = resolve_config(eval_args);
            gridmkt::RunOptions opt;
            opt.out_dir = eval_args.out;
            opt.verbose_slots = eval_args.verbose_slots;
            print_tail(gridmkt::run_eval_from_checkpoint(cfg, eval_checkpoint, opt));
        } else if (*cmp) {
            const auto a = gridmkt::load_run(run_a);
            const auto b = gridmkt::load_run(run_b);
            const auto summary = gridmkt::compare(a, b, window);
            std::cout << gridmkt::format_summary(summary, run_a, run_b);
            if (!compare_out.empty()) gridmkt::write_comparison_csv(compare_out, summary);
        } else if (*profiles) {
            const auto cfg = resolve_config(prof_args);
            const auto day = gridmkt::make_day(cfg, profile_episode);
            std::filesystem::create_directories(prof_args.out);
            const std::filesystem::path dir(prof_args.out);
            gridmkt::write_profile_csv((dir / "consumer.csv").string(), day.consumer);
            for (std::size_t j = 0; j < day.pv.size(); ++j) {
                gridmkt::write_profile_csv((dir / ("pv_" + std::to_string(j + 1) + ".csv")).string(), day.pv[j]);
                gridmkt::write_profile_csv((dir / ("consumption_" + std::to_string(j + 1) + ".csv")).string(),
                                           day.consumption[j]);
            }
            std::cout << "wrote " << 1 + 2 * day.pv.size() << " profiles to " << prof_args.out << '\n';
        }
    } catch (const gridmkt::CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << '\n';
        return 3;
    } catch (const gridmkt::InfeasibleDispatch& e) {
        std::cerr << "infeasible dispatch: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
