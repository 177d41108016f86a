#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "gridmkt/checkpoint.hpp"

using namespace gridmkt;

namespace {

DqnAgent trained_agent(std::uint64_t seed) {
    DqnHyperparams hp;
    hp.hidden_layers = {6, 5};
    hp.batch_size = 4;
    hp.replay_capacity = 8;
    hp.tau = 0.01;
    auto a = make_agent(hp, 3, 2, seed);
    Rng rng(seed + 1);
    for (int i = 0; i < 12; ++i) {
        a.buffer.store({{rng.uniform(), rng.uniform(), rng.uniform()}, i % 2, rng.uniform(-1, 1),
                        {rng.uniform(), rng.uniform(), rng.uniform()}});
        learn_step(a);
    }
    return a;
}

Checkpoint sample_checkpoint(bool replay) {
    Checkpoint cp;
    cp.config_digest = "0123456789abcdef";
    cp.next_episode = 50;
    cp.agents.push_back(snapshot(trained_agent(1), replay));
    cp.agents.push_back(snapshot(trained_agent(2), replay));
    return cp;
}

CheckpointError::Kind decode_kind(std::vector<char> bytes, const std::string& digest = {}) {
    try {
        decode_checkpoint(std::move(bytes), digest);
    } catch (const CheckpointError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "decode unexpectedly succeeded";
    return CheckpointError::Kind::Io;
}

}  // namespace

TEST(Checkpoint, MagicLeads) {
    const auto bytes = encode_checkpoint(sample_checkpoint(false));
    EXPECT_EQ(std::string(bytes.data(), 7), "GRIDMKT");
    EXPECT_EQ(std::string(bytes.data() + bytes.size() - 7, 7), "GRIDEND");
}

TEST(Checkpoint, RoundTripBitIdentical) {
    for (bool replay : {false, true}) {
        const auto cp = sample_checkpoint(replay);
        const auto back = decode_checkpoint(encode_checkpoint(cp), cp.config_digest);
        EXPECT_EQ(back, cp);
        EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(cp));
    }
}

TEST(Checkpoint, FileRoundTripAndRestore) {
    const auto path = (std::filesystem::temp_directory_path() / "gridmkt_cp_test.bin").string();
    auto agent = trained_agent(5);
    Checkpoint cp;
    cp.config_digest = "d";
    cp.agents.push_back(snapshot(agent, true));
    save_checkpoint(path, cp);
    const auto loaded = load_checkpoint(path, "d");

    auto fresh = trained_agent(9);
    restore(fresh, loaded.agents[0]);
    EXPECT_EQ(fresh.online, agent.online);
    EXPECT_EQ(fresh.target, agent.target);
    EXPECT_EQ(fresh.adam, agent.adam);
    EXPECT_EQ(fresh.rng, agent.rng);
    EXPECT_EQ(fresh.buffer, agent.buffer);
    // Both continue identically.
    for (int i = 0; i < 5; ++i) EXPECT_EQ(learn_step(fresh), learn_step(agent));
    EXPECT_EQ(fresh.online, agent.online);
}

TEST(Checkpoint, WithoutReplayRestoresEmptyBuffer) {
    auto agent = trained_agent(3);
    auto other = trained_agent(4);
    restore(other, snapshot(agent, false));
    EXPECT_EQ(other.buffer.size(), 0u);
    EXPECT_EQ(other.online, agent.online);
}

TEST(Checkpoint, DigestMismatch) {
    const auto bytes = encode_checkpoint(sample_checkpoint(false));
    EXPECT_EQ(decode_kind(bytes, "ffffffffffffffff"), CheckpointError::Kind::DigestMismatch);
}

TEST(Checkpoint, TruncatedIsCorrupt) {
    const auto bytes = encode_checkpoint(sample_checkpoint(true));
    for (std::size_t cut : {std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
        SCOPED_TRACE(cut);
        EXPECT_EQ(decode_kind({bytes.begin(), bytes.begin() + static_cast<long>(cut)}),
                  CheckpointError::Kind::Corrupt);
    }
}

TEST(Checkpoint, BadMagicAndTrailingBytes) {
    auto bytes = encode_checkpoint(sample_checkpoint(false));
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_EQ(decode_kind(bad), CheckpointError::Kind::Corrupt);
    auto extra = bytes;
    extra.push_back('\0');
    EXPECT_EQ(decode_kind(extra), CheckpointError::Kind::Corrupt);
}

TEST(Checkpoint, VersionMismatch) {
    auto bytes = encode_checkpoint(sample_checkpoint(false));
    const std::uint32_t v = 2;
    std::memcpy(bytes.data() + 7, &v, sizeof v);
    EXPECT_EQ(decode_kind(bytes), CheckpointError::Kind::VersionMismatch);
}

TEST(Checkpoint, MissingFileIsIo) {
    try {
        load_checkpoint("/nonexistent/dir/cp.bin");
        FAIL();
    } catch (const CheckpointError& e) {
        EXPECT_EQ(e.kind(), CheckpointError::Kind::Io);
        EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/cp.bin"), std::string::npos);
    }
}

TEST(Checkpoint, ArchitectureMismatchOnRestore) {
    DqnHyperparams hp;
    hp.hidden_layers = {3};
    hp.batch_size = 2;
    hp.replay_capacity = 4;
    auto small = make_agent(hp, 3, 2, 1);
    EXPECT_THROW(restore(small, snapshot(trained_agent(1), false)), CheckpointError);
}
