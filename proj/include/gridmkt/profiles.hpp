#pragma once

// Day profiles (96 quarter-hour samples) for PV output, household
// consumption and the passive consumer load, plus the sell-price schedule.

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "core_env.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace gridmkt {

struct DayProfile {
    std::vector<double> samples;
    std::string label;

    void validate() const {
        if (samples.size() != static_cast<std::size_t>(kSlotsPerDay)) {
            throw ContractViolation("profile '" + label + "': expected 96 samples, found " +
                                    std::to_string(samples.size()));
        }
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (!std::isfinite(samples[i]) || samples[i] < 0.0) {
                throw ContractViolation("profile '" + label + "': sample " + std::to_string(i) +
                                        " is negative or not finite");
            }
        }
    }

    double operator[](std::size_t slot) const { return samples[slot]; }

    double peak() const {
        double m = 0.0;
        for (double v : samples) m = std::max(m, v);
        return m;
    }
};

enum class ProfileKind { Pv, Consumption, ConsumerLoad };

inline std::string_view to_string(ProfileKind k) {
    switch (k) {
        case ProfileKind::Pv: return "pv";
        case ProfileKind::Consumption: return "consumption";
        case ProfileKind::ConsumerLoad: return "consumer_load";
    }
    return "?";
}

struct ProfileSpec {
    ProfileKind kind = ProfileKind::Pv;
    double peak = 1.0;  // kW
    double jitter_fraction = 0.0;

    // pv
    int sunrise_slot = 24;
    int sunset_slot = 72;

    // consumption / consumer_load
    double baseline_fraction = 0.2;
    double morning_center = 30.0;
    double morning_width = 5.0;
    double morning_amplitude = 0.6;  // relative to the evening bump
    double evening_center = 76.0;
    double evening_width = 7.0;

    // When set, samples come from this CSV instead of the synthetic shape.
    std::string csv_path;

    void validate() const {
        if (!(peak > 0.0 && std::isfinite(peak))) {
            throw ConfigError("profile peak must be positive");
        }
        if (!(jitter_fraction >= 0.0 && jitter_fraction < 0.5)) {
            throw ConfigError("profile jitter_fraction must lie in [0, 0.5)");
        }
        auto in_day = [](double s) { return s >= 0.0 && s < kSlotsPerDay; };
        if (kind == ProfileKind::Pv) {
            if (!in_day(sunrise_slot) || !in_day(sunset_slot) || sunrise_slot >= sunset_slot) {
                throw ConfigError("pv profile needs 0 <= sunrise_slot < sunset_slot < 96");
            }
        } else {
            if (!in_day(morning_center) || !in_day(evening_center)) {
                throw ConfigError("consumption peak slots must lie in [0, 96)");
            }
            if (!(morning_width > 0.0 && evening_width > 0.0)) {
                throw ConfigError("consumption bump widths must be positive");
            }
            if (!(morning_amplitude >= 0.0 && morning_amplitude <= 1.0)) {
                throw ConfigError("morning_amplitude must lie in [0, 1]");
            }
            if (!(baseline_fraction >= 0.05 && baseline_fraction < 1.0)) {
                throw ConfigError("baseline_fraction must lie in [0.05, 1)");
            }
        }
    }

    // Largest value any synthetic draw can take.
    double upper_bound() const { return peak * (1.0 + jitter_fraction); }
};

namespace detail {

inline void apply_jitter(std::vector<double>& samples, double jitter, Rng& rng) {
    if (jitter == 0.0) {
        return;
    }
    for (double& v : samples) {
        v *= 1.0 + jitter * rng.uniform(-1.0, 1.0);
    }
}

}  // namespace detail

// Half-sine between sunrise and sunset, zero at night.
inline DayProfile synth_pv(const ProfileSpec& spec, Rng& rng) {
    if (spec.kind != ProfileKind::Pv) {
        throw ConfigError("synth_pv: spec kind must be pv");
    }
    spec.validate();
    DayProfile p{std::vector<double>(kSlotsPerDay, 0.0), "pv"};
    const double span = spec.sunset_slot - spec.sunrise_slot;
    for (int s = spec.sunrise_slot; s <= spec.sunset_slot; ++s) {
        p.samples[s] = spec.peak * std::sin(std::numbers::pi * (s - spec.sunrise_slot) / span);
    }
    p.samples[spec.sunrise_slot] = 0.0;
    p.samples[spec.sunset_slot] = 0.0;
    detail::apply_jitter(p.samples, spec.jitter_fraction, rng);
    return p;
}

// Baseline plus the larger of a morning and an evening Gaussian bump; the
// evening bump reaches exactly `peak` at its centre.
inline DayProfile synth_consumption(const ProfileSpec& spec, Rng& rng) {
    if (spec.kind == ProfileKind::Pv) {
        throw ConfigError("synth_consumption: spec kind must be consumption or consumer_load");
    }
    spec.validate();
    DayProfile p{std::vector<double>(kSlotsPerDay, 0.0), std::string(to_string(spec.kind))};
    auto bump = [](double s, double centre, double width) {
        const double d = (s - centre) / width;
        return std::exp(-0.5 * d * d);
    };
    const double b = spec.baseline_fraction;
    for (int s = 0; s < kSlotsPerDay; ++s) {
        const double shape = std::max(spec.morning_amplitude * bump(s, spec.morning_center, spec.morning_width),
                                      bump(s, spec.evening_center, spec.evening_width));
        p.samples[s] = spec.peak * (b + (1.0 - b) * shape);
    }
    detail::apply_jitter(p.samples, spec.jitter_fraction, rng);
    return p;
}

// One numeric column of 96 rows, optional "kw" header, LF or CRLF.
inline DayProfile load_profile_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open profile file '" + path + "'");
    }
    DayProfile p;
    p.label = path;
    std::string line;
    std::size_t row = 0;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const auto b = line.find_first_not_of(" \t");
        const auto e = line.find_last_not_of(" \t");
        std::string_view cell = b == std::string::npos ? std::string_view{}
                                                       : std::string_view(line).substr(b, e - b + 1);
        if (first) {
            first = false;
            if (cell == "kw") {
                continue;
            }
        }
        if (cell.empty()) {
            continue;
        }
        ++row;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
            throw ParseError(path + ": row " + std::to_string(row) + ": not a number: '" + std::string(cell) + "'");
        }
        if (v < 0.0) {
            throw ParseError(path + ": row " + std::to_string(row) + ": negative value " + std::string(cell));
        }
        p.samples.push_back(v);
    }
    if (p.samples.size() != static_cast<std::size_t>(kSlotsPerDay)) {
        throw ParseError(path + ": expected 96 samples, found " + std::to_string(p.samples.size()));
    }
    return p;
}

inline void write_profile_csv(const std::string& path, const DayProfile& p) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write profile file '" + path + "'");
    }
    out << "kw\n";
    for (double v : p.samples) {
        std::array<char, 32> buf{};
        auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
        out.write(buf.data(), ptr - buf.data());
        out << '\n';
    }
}

// Dispatches on kind and honours csv_path.
inline DayProfile make_profile(const ProfileSpec& spec, Rng& rng) {
    if (!spec.csv_path.empty()) {
        return load_profile_csv(spec.csv_path);
    }
    return spec.kind == ProfileKind::Pv ? synth_pv(spec, rng) : synth_consumption(spec, rng);
}

inline constexpr int kPriceStepSlot = 44;  // 11:00

inline double sell_price(int slot_index) {
    if (slot_index < 0 || slot_index >= kSlotsPerDay) {
        throw ContractViolation("sell_price: slot index " + std::to_string(slot_index) + " outside [0, 96)");
    }
    return slot_index < kPriceStepSlot ? 0.05 : 0.095;
}

}  // namespace gridmkt
