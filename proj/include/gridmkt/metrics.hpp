#pragma once

// Per-episode metrics, their CSV form, and run-vs-run comparison.

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace gridmkt {

enum class RunMode { Train, Eval, Baseline };

inline std::string_view to_string(RunMode m) {
    switch (m) {
        case RunMode::Train: return "train";
        case RunMode::Eval: return "eval";
        case RunMode::Baseline: return "baseline";
    }
    return "?";
}

inline RunMode run_mode_from(std::string_view s) {
    if (s == "train") return RunMode::Train;
    if (s == "eval") return RunMode::Eval;
    if (s == "baseline") return RunMode::Baseline;
    throw ParseError("unknown run mode '" + std::string(s) + "'");
}

struct EpisodeMetrics {
    int episode = 0;
    double epsilon = 0.0;
    double grid_reward = 0.0;  // $ over the day
    double reserve_kwh = 0.0;  // energy from every generator after the first
    double base_kwh = 0.0;     // energy from the first (cheapest) generator
    std::vector<double> bills;             // cost minus revenue, $ per prosumer
    std::vector<double> prosumer_rewards;  // revenue minus cost, $ per prosumer
    double loss_ga = 0.0;                  // mean TD loss over the episode's updates
    std::vector<double> loss_pa;

    // Not part of the CSV; kept for accounting checks.
    double consumer_payment = 0.0;
    double generation_cost = 0.0;

    friend bool operator==(const EpisodeMetrics&, const EpisodeMetrics&) = default;
};

struct RunMetrics {
    RunMode mode = RunMode::Train;
    std::string config_digest;
    std::uint64_t seed = 0;
    std::vector<EpisodeMetrics> episodes;
};

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

inline double parse_double(std::string_view s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ParseError("not a number: '" + std::string(s) + "'");
    }
    return v;
}

inline std::string metrics_header(std::size_t prosumers) {
    std::string h = "episode,epsilon,grid_reward,reserve_kwh,base_kwh";
    for (std::size_t j = 1; j <= prosumers; ++j) h += ",bill_" + std::to_string(j);
    for (std::size_t j = 1; j <= prosumers; ++j) h += ",prosumer_reward_" + std::to_string(j);
    h += ",loss_ga";
    for (std::size_t j = 1; j <= prosumers; ++j) h += ",loss_pa_" + std::to_string(j);
    return h;
}

inline std::string metrics_row(const EpisodeMetrics& m) {
    std::string r = std::to_string(m.episode);
    for (double v : {m.epsilon, m.grid_reward, m.reserve_kwh, m.base_kwh}) r += "," + format_double(v);
    for (double v : m.bills) r += "," + format_double(v);
    for (double v : m.prosumer_rewards) r += "," + format_double(v);
    r += "," + format_double(m.loss_ga);
    for (double v : m.loss_pa) r += "," + format_double(v);
    return r;
}

// Appends rows as episodes finish so a crashed run keeps its history.
class MetricsCsvWriter {
public:
    MetricsCsvWriter(const std::string& path, std::size_t prosumers) : path_(path) {
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_) {
            throw IoError("cannot write metrics file '" + path + "'");
        }
        out_ << metrics_header(prosumers) << '\n';
    }

    void append(const EpisodeMetrics& m) {
        out_ << metrics_row(m) << '\n';
        out_.flush();
        if (!out_) {
            throw IoError("write failed on '" + path_ + "'");
        }
    }

private:
    std::string path_;
    std::ofstream out_;
};

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

inline std::vector<EpisodeMetrics> read_metrics_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open metrics file '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(path + ": empty metrics file");
    }
    const auto header = split_csv(line);
    if (header.size() < 6 || (header.size() - 6) % 3 != 0) {
        throw ParseError(path + ": unexpected metrics header");
    }
    const std::size_t m = (header.size() - 6) / 3;
    if (line != metrics_header(m)) {
        throw ParseError(path + ": unexpected metrics header");
    }
    std::vector<EpisodeMetrics> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size()) {
            throw ParseError(path + ": line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                             " fields, expected " + std::to_string(header.size()));
        }
        try {
            EpisodeMetrics e;
            e.episode = static_cast<int>(parse_double(cells[0]));
            e.epsilon = parse_double(cells[1]);
            e.grid_reward = parse_double(cells[2]);
            e.reserve_kwh = parse_double(cells[3]);
            e.base_kwh = parse_double(cells[4]);
            for (std::size_t j = 0; j < m; ++j) e.bills.push_back(parse_double(cells[5 + j]));
            for (std::size_t j = 0; j < m; ++j) e.prosumer_rewards.push_back(parse_double(cells[5 + m + j]));
            e.loss_ga = parse_double(cells[5 + 2 * m]);
            for (std::size_t j = 0; j < m; ++j) e.loss_pa.push_back(parse_double(cells[6 + 2 * m + j]));
            rows.push_back(std::move(e));
        } catch (const ParseError& err) {
            throw ParseError(path + ": line " + std::to_string(lineno) + ": " + err.what());
        }
    }
    return rows;
}

struct MetricDelta {
    std::string name;
    double mean_a = 0.0;
    double mean_b = 0.0;
    double percent_change = 0.0;  // (b - a) / |a| * 100
};

struct ComparisonSummary {
    int window = 0;
    std::vector<MetricDelta> deltas;  // grid_reward, reserve_kwh, bill_1..bill_M

    const MetricDelta& find(std::string_view name) const {
        for (const auto& d : deltas) {
            if (d.name == name) return d;
        }
        throw ContractViolation("no comparison metric named '" + std::string(name) + "'");
    }
};

inline double percent_change(double a, double b) {
    if (a == b) return 0.0;
    if (a == 0.0) return b > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    return (b - a) / std::abs(a) * 100.0;
}

// Means over the final `window` episodes of each run (all episodes when
// a run is shorter than the window).
inline ComparisonSummary compare(const RunMetrics& a, const RunMetrics& b, int window) {
    if (a.config_digest != b.config_digest) {
        throw ContractViolation("compare: runs come from different configurations (digest " + a.config_digest +
                                " vs " + b.config_digest + ")");
    }
    if (window <= 0) {
        throw ContractViolation("compare: window must be positive");
    }
    if (a.episodes.empty() || b.episodes.empty()) {
        throw ContractViolation("compare: both runs need at least one episode");
    }
    const std::size_t m = a.episodes.front().bills.size();
    if (b.episodes.front().bills.size() != m) {
        throw ContractViolation("compare: runs have different prosumer counts");
    }
    auto tail_mean = [window](const RunMetrics& r, auto field) {
        const std::size_t n = r.episodes.size();
        const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(window), n);
        double sum = 0.0;
        for (std::size_t i = n - w; i < n; ++i) sum += field(r.episodes[i]);
        return sum / static_cast<double>(w);
    };
    ComparisonSummary s;
    s.window = window;
    auto add = [&](std::string name, auto field) {
        const double ma = tail_mean(a, field);
        const double mb = tail_mean(b, field);
        s.deltas.push_back({std::move(name), ma, mb, percent_change(ma, mb)});
    };
    add("grid_reward", [](const EpisodeMetrics& e) { return e.grid_reward; });
    add("reserve_kwh", [](const EpisodeMetrics& e) { return e.reserve_kwh; });
    for (std::size_t j = 0; j < m; ++j) {
        add("bill_" + std::to_string(j + 1), [j](const EpisodeMetrics& e) { return e.bills[j]; });
    }
    return s;
}

inline std::string format_summary(const ComparisonSummary& s, std::string_view label_a, std::string_view label_b) {
    std::ostringstream os;
    os << "comparison over the final " << s.window << " episodes (" << label_a << " -> " << label_b << ")\n";
    for (const auto& d : s.deltas) {
        os << "  " << d.name << ": " << format_double(d.mean_a) << " -> " << format_double(d.mean_b) << " ("
           << (d.percent_change >= 0 ? "+" : "") << format_double(std::round(d.percent_change * 100.0) / 100.0)
           << "%)\n";
    }
    return os.str();
}

inline void write_comparison_csv(const std::string& path, const ComparisonSummary& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write comparison file '" + path + "'");
    }
    out << "metric,mean_a,mean_b,percent_change\n";
    for (const auto& d : s.deltas) {
        out << d.name << ',' << format_double(d.mean_a) << ',' << format_double(d.mean_b) << ','
            << format_double(d.percent_change) << '\n';
    }
}

}  // namespace gridmkt
