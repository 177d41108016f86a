#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "gridmkt/profiles.hpp"

using namespace gridmkt;

namespace {

ProfileSpec pv_spec(double peak, double jitter = 0.0) {
    ProfileSpec s;
    s.kind = ProfileKind::Pv;
    s.peak = peak;
    s.sunrise_slot = 24;
    s.sunset_slot = 72;
    s.jitter_fraction = jitter;
    return s;
}

ProfileSpec consumption_spec(double peak, double jitter = 0.0) {
    ProfileSpec s;
    s.kind = ProfileKind::Consumption;
    s.peak = peak;
    s.baseline_fraction = 0.05;
    s.jitter_fraction = jitter;
    return s;
}

std::string temp_file(const std::string& name, const std::string& body) {
    const auto path = std::filesystem::temp_directory_path() / ("gridmkt_" + name);
    std::ofstream(path, std::ios::binary) << body;
    return path.string();
}

std::string rows(int n, const std::string& value) {
    std::string s;
    for (int i = 0; i < n; ++i) s += value + "\n";
    return s;
}

}  // namespace

TEST(SynthPv, HalfSineFormula) {
    Rng rng(1);
    const auto p = synth_pv(pv_spec(2.5), rng);
    ASSERT_EQ(p.samples.size(), 96u);
    EXPECT_DOUBLE_EQ(p[48], 2.5);
    EXPECT_EQ(p[0], 0.0);
    EXPECT_EQ(p[24], 0.0);
    EXPECT_EQ(p[80], 0.0);
    // Independent evaluation of peak * sin(pi (s - 24) / 48).
    EXPECT_NEAR(p[36], 2.5 * std::sin(std::numbers::pi / 4.0), 1e-12);
}

TEST(SynthPv, RangeAndUnimodal) {
    Rng rng(3);
    const auto p = synth_pv(pv_spec(2.0), rng);
    for (int s = 0; s < 96; ++s) {
        EXPECT_GE(p[s], 0.0);
        EXPECT_LE(p[s], 2.0);
    }
    for (int s = 25; s <= 48; ++s) EXPECT_GE(p[s], p[s - 1]);
    for (int s = 49; s <= 72; ++s) EXPECT_LE(p[s], p[s - 1]);
}

TEST(SynthPv, SeedDeterminismAndJitterBound) {
    Rng a(99), b(99);
    const auto pa = synth_pv(pv_spec(2.5, 0.2), a);
    const auto pb = synth_pv(pv_spec(2.5, 0.2), b);
    EXPECT_EQ(pa.samples, pb.samples);
    EXPECT_LE(pa.peak(), 2.5 * 1.2);
    EXPECT_GE(pa[48], 2.5 * 0.8);
    EXPECT_EQ(pa[10], 0.0);
}

TEST(SynthPv, InvalidSpec) {
    Rng rng(1);
    auto s = pv_spec(2.0);
    s.sunrise_slot = 80;
    EXPECT_THROW(synth_pv(s, rng), ConfigError);
    s = pv_spec(2.0, 0.5);
    EXPECT_THROW(synth_pv(s, rng), ConfigError);
    s = pv_spec(-1.0);
    EXPECT_THROW(synth_pv(s, rng), ConfigError);
    EXPECT_THROW(synth_pv(consumption_spec(1.0), rng), ConfigError);
}

TEST(SynthConsumption, EveningPeakEqualsPeak) {
    Rng rng(1);
    const auto spec = consumption_spec(1.0);
    const auto p = synth_consumption(spec, rng);
    double evening_max = 0.0;
    for (int s = 64; s < 90; ++s) evening_max = std::max(evening_max, p[s]);
    EXPECT_DOUBLE_EQ(evening_max, 1.0);
    EXPECT_DOUBLE_EQ(p[static_cast<int>(spec.evening_center)], 1.0);
}

TEST(SynthConsumption, BaselineAndBimodal) {
    Rng rng(1);
    const auto spec = consumption_spec(1.0);
    const auto p = synth_consumption(spec, rng);
    for (int s = 0; s < 96; ++s) EXPECT_GE(p[s], 0.05);
    // Morning local maximum, trough at noon, evening maximum.
    const int morning = static_cast<int>(spec.morning_center);
    EXPECT_GT(p[morning], p[48]);
    EXPECT_GT(p[morning], p[morning - 6]);
    EXPECT_GT(p[76], p[48]);
}

TEST(SynthConsumption, NoJitterIgnoresSeed) {
    Rng a(1), b(2);
    EXPECT_EQ(synth_consumption(consumption_spec(1.0), a).samples, synth_consumption(consumption_spec(1.0), b).samples);
}

TEST(SynthConsumption, JitterBound) {
    Rng rng(5);
    const auto p = synth_consumption(consumption_spec(1.0, 0.3), rng);
    EXPECT_LE(p.peak(), 1.3);
    for (double v : p.samples) EXPECT_GT(v, 0.0);
}

TEST(LoadProfileCsv, AllZero) {
    const auto path = temp_file("zero.csv", rows(96, "0.0"));
    const auto p = load_profile_csv(path);
    EXPECT_EQ(p.samples, std::vector<double>(96, 0.0));
}

TEST(LoadProfileCsv, HeaderAndCrlf) {
    std::string body = "kw\r\n";
    for (int i = 0; i < 96; ++i) body += std::to_string(i * 0.5) + "\r\n";
    const auto p = load_profile_csv(temp_file("crlf.csv", body));
    EXPECT_DOUBLE_EQ(p[95], 47.5);
}

TEST(LoadProfileCsv, WrongCount) {
    const auto path = temp_file("short.csv", rows(95, "1.0"));
    try {
        load_profile_csv(path);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("expected 96 samples, found 95"), std::string::npos) << e.what();
    }
}

TEST(LoadProfileCsv, NegativeRowNamed) {
    std::string body = rows(9, "1.0") + "-1.0\n" + rows(86, "1.0");
    try {
        load_profile_csv(temp_file("neg.csv", body));
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("row 10"), std::string::npos) << e.what();
    }
}

TEST(LoadProfileCsv, NonNumericRowNamed) {
    std::string body = "kw\n" + rows(3, "1.0") + "abc\n" + rows(92, "1.0");
    try {
        load_profile_csv(temp_file("nan.csv", body));
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("row 4"), std::string::npos) << e.what();
    }
}

TEST(LoadProfileCsv, WriteThenLoad) {
    Rng rng(8);
    const auto p = synth_pv(pv_spec(2.2, 0.1), rng);
    const auto path = (std::filesystem::temp_directory_path() / "gridmkt_roundtrip.csv").string();
    write_profile_csv(path, p);
    EXPECT_EQ(load_profile_csv(path).samples, p.samples);
}

TEST(SellPrice, Schedule) {
    EXPECT_EQ(sell_price(0), 0.05);
    EXPECT_EQ(sell_price(43), 0.05);
    EXPECT_EQ(sell_price(44), 0.095);
    EXPECT_EQ(sell_price(95), 0.095);
    EXPECT_THROW(sell_price(96), ContractViolation);
    EXPECT_THROW(sell_price(-1), ContractViolation);
}

TEST(SellPrice, TwoValuedStep) {
    int changes = 0;
    for (int s = 0; s < 96; ++s) {
        const double p = sell_price(s);
        EXPECT_TRUE(p == 0.05 || p == 0.095);
        if (s > 0 && p != sell_price(s - 1)) ++changes;
    }
    EXPECT_EQ(changes, 1);
}
