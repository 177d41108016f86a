#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "gridmkt/config.hpp"

using namespace gridmkt;

TEST(Config, DefaultScenarioValid) {
    const auto c = reference_scenario();
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.generators.size(), 2u);
    EXPECT_EQ(c.prosumers.size(), 3u);
    EXPECT_EQ(c.generators[0].p_max, 20.0);
    EXPECT_EQ(c.generators[1].beta, 0.3);
    EXPECT_EQ(c.prosumers[2].battery.capacity, 10.0);
    EXPECT_EQ(c.dt, 0.25);
    EXPECT_EQ(c.episodes, 10000);
    EXPECT_EQ(c.grid_agent.hidden_layers, std::vector<int>{1000});
    EXPECT_EQ(c.prosumer_agent.hidden_layers, (std::vector<int>{1000, 1000}));
}

TEST(Config, JsonRoundTrip) {
    const auto c = reference_scenario();
    const auto back = parse_config(canonical_json(c));
    EXPECT_EQ(canonical_json(back), canonical_json(c));
    EXPECT_EQ(config_digest(back), config_digest(c));
}

TEST(Config, DigestSensitivity) {
    const auto base = reference_scenario();
    auto edited = base;
    edited.prosumers[1].battery.capacity = 9.5;
    EXPECT_NE(config_digest(base), config_digest(edited));
    auto tau = base;
    tau.grid_agent.tau = 1e-3;
    EXPECT_NE(config_digest(base), config_digest(tau));
    auto seed = base;
    seed.seed = 99;
    EXPECT_NE(config_digest(base), config_digest(seed));
    // Run length is not part of the scenario identity.
    auto longer = base;
    longer.episodes = 50;
    longer.checkpoint_interval = 7;
    EXPECT_EQ(config_digest(base), config_digest(longer));
    EXPECT_EQ(config_digest(base).size(), 16u);
}

TEST(Config, ShippedConfigsLoad) {
    const std::filesystem::path dir = std::filesystem::path(GRIDMKT_SOURCE_DIR) / "configs";
    for (const char* name : {"reference_microgrid.json", "desk_scale.json"}) {
        SCOPED_TRACE(name);
        const auto c = load_config((dir / name).string());
        EXPECT_EQ(c.prosumers.size(), 3u);
    }
    // The full-size file reproduces the built-in scenario.
    EXPECT_EQ(config_digest(load_config((dir / "reference_microgrid.json").string())), config_digest(reference_scenario()));
}

TEST(Config, ValidationErrors) {
    auto no_gen = reference_scenario();
    no_gen.generators.clear();
    EXPECT_THROW(no_gen.validate(), ConfigError);

    auto no_pros = reference_scenario();
    no_pros.prosumers.clear();
    EXPECT_THROW(no_pros.validate(), ConfigError);

    auto unsorted = reference_scenario();
    std::swap(unsorted.generators[0], unsorted.generators[1]);
    EXPECT_THROW(unsorted.validate(), ConfigError);

    auto soc = reference_scenario();
    soc.prosumers[0].initial_soc = 7.5;  // above soc_max 7.2
    EXPECT_THROW(soc.validate(), ConfigError);

    auto slots = reference_scenario();
    slots.iterations_per_episode = 48;
    EXPECT_THROW(slots.validate(), ConfigError);

    auto prices = reference_scenario();
    prices.buy_prices = {0.06, 0.05};
    EXPECT_THROW(prices.validate(), ConfigError);

    auto tiny_grid = reference_scenario();
    tiny_grid.generators[1].p_max = 5.0;
    EXPECT_THROW(tiny_grid.validate(), ConfigError);

    auto surplus = reference_scenario();
    surplus.consumer.peak = 2.0;  // cannot absorb prosumer exports
    EXPECT_THROW(surplus.validate(), ConfigError);
}

TEST(Config, ParseErrors) {
    EXPECT_THROW(parse_config("{not json"), ParseError);
    EXPECT_THROW(parse_config("{}"), ParseError);
    auto j = nlohmann::json(reference_scenario());
    j["consumer"]["kind"] = "wind";
    EXPECT_THROW(parse_config(j.dump()), ParseError);
    EXPECT_THROW(load_config("/nonexistent/gridmkt.json"), IoError);
}

TEST(Config, OptionalKeysDefault) {
    auto j = nlohmann::json(reference_scenario());
    j.erase("buy_prices");
    j.erase("epsilon");
    j["prosumers"][0]["battery"].erase("soc_min");
    j["prosumers"][0]["battery"].erase("soc_max");
    const auto c = parse_config(j.dump());
    EXPECT_EQ(c.buy_prices.size(), 6u);
    EXPECT_EQ(c.warm_episodes, 300);
    EXPECT_DOUBLE_EQ(c.prosumers[0].battery.soc_min, 0.8);
    EXPECT_DOUBLE_EQ(c.prosumers[0].battery.soc_max, 7.2);
}
