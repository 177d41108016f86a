#pragma once

// Binary run checkpoint.
//
// Layout (little-endian, no padding):
//   "GRIDMKT"                      7 bytes magic
//   u32 version                    currently 1
//   str config_digest              u32 length + bytes
//   i64 next_episode
//   u32 agent_count                grid agent first, then prosumers in order
//   per agent:
//     mlp online, mlp target       u32 n_sizes, i32 sizes[n], then per layer
//                                  the weight matrix row-major, then biases
//     adam                         i64 step, f64 beta1, beta2, epsilon, then
//                                  m_w, v_w (row-major) and m_b, v_b per layer
//     str rng                      textual mt19937_64 state
//     u8 has_replay                if 1: u64 capacity, u64 inserted, u64 n,
//                                  n transitions oldest first, each
//                                  u32 len, f64 state[len], i32 action,
//                                  f64 reward, u32 len, f64 next_state[len]
//   "GRIDEND"                      7 bytes trailer

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "dqn.hpp"
#include "errors.hpp"

namespace gridmkt {

inline constexpr char kCheckpointMagic[] = "GRIDMKT";
inline constexpr char kCheckpointTrailer[] = "GRIDEND";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct AgentSnapshot {
    nn::Mlp online;
    nn::Mlp target;
    nn::AdamState adam;
    std::string rng_state;
    std::optional<ReplayBuffer> replay;

    friend bool operator==(const AgentSnapshot&, const AgentSnapshot&) = default;
};

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::string config_digest;
    std::int64_t next_episode = 0;
    std::vector<AgentSnapshot> agents;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline AgentSnapshot snapshot(const DqnAgent& a, bool include_replay) {
    AgentSnapshot s{a.online, a.target, a.adam, a.rng.serialize(), std::nullopt};
    if (include_replay) s.replay = a.buffer;
    return s;
}

// Restores learning state into an agent built from the same hyperparameters.
inline void restore(DqnAgent& a, const AgentSnapshot& s) {
    if (!a.online.same_architecture(s.online) || !a.target.same_architecture(s.target)) {
        throw CheckpointError(CheckpointError::Kind::Corrupt, "checkpoint network architecture does not match the agent");
    }
    a.online = s.online;
    a.target = s.target;
    a.adam = s.adam;
    a.rng.deserialize(s.rng_state);
    a.buffer = s.replay ? *s.replay : ReplayBuffer(a.buffer.capacity());
}

namespace detail {

class Writer {
public:
    template <class T>
    void pod(const T& v) {
        const char* p = reinterpret_cast<const char*>(&v);
        bytes.insert(bytes.end(), p, p + sizeof(T));
    }
    void raw(const char* p, std::size_t n) { bytes.insert(bytes.end(), p, p + n); }
    void str(const std::string& s) {
        pod(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void doubles(const double* p, std::size_t n) { raw(reinterpret_cast<const char*>(p), n * sizeof(double)); }
    void row_major(const nn::Matrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) pod(m(r, c));
    }
    void vec(const nn::Vector& v) { doubles(v.data(), static_cast<std::size_t>(v.size())); }

    std::vector<char> bytes;
};

class Reader {
public:
    explicit Reader(std::vector<char> data) : bytes_(std::move(data)) {}

    template <class T>
    T pod() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string raw(std::size_t n) {
        need(n);
        std::string s(bytes_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    std::string str() { return raw(pod<std::uint32_t>()); }
    void row_major(nn::Matrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = pod<double>();
    }
    void vec(nn::Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = pod<double>();
    }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw CheckpointError(CheckpointError::Kind::Corrupt, "checkpoint is truncated");
        }
    }
    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

inline void write_mlp(Writer& w, const nn::Mlp& net) {
    w.pod(static_cast<std::uint32_t>(net.layer_sizes.size()));
    for (int s : net.layer_sizes) w.pod(static_cast<std::int32_t>(s));
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        w.row_major(net.weights[l]);
        w.vec(net.biases[l]);
    }
}

inline nn::Mlp read_mlp(Reader& r) {
    const auto n = r.pod<std::uint32_t>();
    if (n < 2 || n > 64) {
        throw CheckpointError(CheckpointError::Kind::Corrupt, "checkpoint has an implausible layer count");
    }
    std::vector<int> sizes;
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto s = r.pod<std::int32_t>();
        if (s <= 0 || s > (1 << 20)) {
            throw CheckpointError(CheckpointError::Kind::Corrupt, "checkpoint has an implausible layer size");
        }
        sizes.push_back(s);
    }
    nn::Mlp net = nn::zero_mlp(sizes);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        r.row_major(net.weights[l]);
        r.vec(net.biases[l]);
    }
    return net;
}

inline std::vector<double> read_doubles(Reader& r) {
    const auto n = r.pod<std::uint32_t>();
    std::vector<double> v;
    for (std::uint32_t i = 0; i < n; ++i) v.push_back(r.pod<double>());
    return v;
}

}  // namespace detail

inline std::vector<char> encode_checkpoint(const Checkpoint& cp) {
    detail::Writer w;
    w.raw(kCheckpointMagic, 7);
    w.pod(cp.version);
    w.str(cp.config_digest);
    w.pod(cp.next_episode);
    w.pod(static_cast<std::uint32_t>(cp.agents.size()));
    for (const auto& a : cp.agents) {
        detail::write_mlp(w, a.online);
        detail::write_mlp(w, a.target);
        w.pod(static_cast<std::int64_t>(a.adam.step));
        w.pod(a.adam.beta1);
        w.pod(a.adam.beta2);
        w.pod(a.adam.epsilon);
        for (const auto& m : a.adam.m_weights) w.row_major(m);
        for (const auto& m : a.adam.v_weights) w.row_major(m);
        for (const auto& v : a.adam.m_biases) w.vec(v);
        for (const auto& v : a.adam.v_biases) w.vec(v);
        w.str(a.rng_state);
        w.pod(static_cast<std::uint8_t>(a.replay ? 1 : 0));
        if (a.replay) {
            w.pod(static_cast<std::uint64_t>(a.replay->capacity()));
            w.pod(static_cast<std::uint64_t>(a.replay->inserted()));
            const auto items = a.replay->contents();
            w.pod(static_cast<std::uint64_t>(items.size()));
            for (const auto& t : items) {
                w.pod(static_cast<std::uint32_t>(t.state.size()));
                w.doubles(t.state.data(), t.state.size());
                w.pod(static_cast<std::int32_t>(t.action));
                w.pod(t.reward);
                w.pod(static_cast<std::uint32_t>(t.next_state.size()));
                w.doubles(t.next_state.data(), t.next_state.size());
            }
        }
    }
    w.raw(kCheckpointTrailer, 7);
    return std::move(w.bytes);
}

// `expected_digest`, when non-empty, must match the stored digest.
inline Checkpoint decode_checkpoint(std::vector<char> bytes, const std::string& expected_digest = {}) {
    using Kind = CheckpointError::Kind;
    detail::Reader r(std::move(bytes));
    if (r.raw(7) != std::string(kCheckpointMagic, 7)) {
        throw CheckpointError(Kind::Corrupt, "not a checkpoint file (bad magic)");
    }
    Checkpoint cp;
    cp.version = r.pod<std::uint32_t>();
    if (cp.version != kCheckpointVersion) {
        throw CheckpointError(Kind::VersionMismatch, "checkpoint format version " + std::to_string(cp.version) +
                                                         " is not supported (expected " +
                                                         std::to_string(kCheckpointVersion) + ")");
    }
    cp.config_digest = r.str();
    if (!expected_digest.empty() && cp.config_digest != expected_digest) {
        throw CheckpointError(Kind::DigestMismatch, "checkpoint was written for config digest " + cp.config_digest +
                                                        ", current config has " + expected_digest);
    }
    cp.next_episode = r.pod<std::int64_t>();
    const auto agents = r.pod<std::uint32_t>();
    if (agents > 1024) {
        throw CheckpointError(Kind::Corrupt, "checkpoint has an implausible agent count");
    }
    for (std::uint32_t k = 0; k < agents; ++k) {
        AgentSnapshot a;
        a.online = detail::read_mlp(r);
        a.target = detail::read_mlp(r);
        if (!a.online.same_architecture(a.target)) {
            throw CheckpointError(Kind::Corrupt, "checkpoint online/target architectures differ");
        }
        a.adam = nn::AdamState::for_network(a.online);
        a.adam.step = r.pod<std::int64_t>();
        a.adam.beta1 = r.pod<double>();
        a.adam.beta2 = r.pod<double>();
        a.adam.epsilon = r.pod<double>();
        for (auto& m : a.adam.m_weights) r.row_major(m);
        for (auto& m : a.adam.v_weights) r.row_major(m);
        for (auto& v : a.adam.m_biases) r.vec(v);
        for (auto& v : a.adam.v_biases) r.vec(v);
        a.rng_state = r.str();
        const auto has_replay = r.pod<std::uint8_t>();
        if (has_replay > 1) {
            throw CheckpointError(Kind::Corrupt, "checkpoint has a bad replay flag");
        }
        if (has_replay) {
            const auto capacity = r.pod<std::uint64_t>();
            const auto inserted = r.pod<std::uint64_t>();
            const auto n = r.pod<std::uint64_t>();
            if (capacity == 0 || n > capacity || n > inserted || (n < capacity && inserted != n)) {
                throw CheckpointError(Kind::Corrupt, "checkpoint replay header is inconsistent");
            }
            std::vector<Transition> items;
            for (std::uint64_t i = 0; i < n; ++i) {
                Transition t;
                t.state = detail::read_doubles(r);
                t.action = r.pod<std::int32_t>();
                t.reward = r.pod<double>();
                t.next_state = detail::read_doubles(r);
                items.push_back(std::move(t));
            }
            a.replay = ReplayBuffer::restore(capacity, std::move(items), inserted);
        }
        cp.agents.push_back(std::move(a));
    }
    if (r.raw(7) != std::string(kCheckpointTrailer, 7) || !r.at_end()) {
        throw CheckpointError(Kind::Corrupt, "checkpoint trailer missing or extra bytes present");
    }
    return cp;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& cp) {
    const auto bytes = encode_checkpoint(cp);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw CheckpointError(CheckpointError::Kind::Io, "cannot write checkpoint '" + tmp + "'");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw CheckpointError(CheckpointError::Kind::Io, "write failed on '" + tmp + "'");
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw CheckpointError(CheckpointError::Kind::Io, "cannot move checkpoint into place at '" + path + "'");
    }
}

inline Checkpoint load_checkpoint(const std::string& path, const std::string& expected_digest = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError(CheckpointError::Kind::Io, "cannot open checkpoint '" + path + "'");
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(std::move(bytes), expected_digest);
}

}  // namespace gridmkt
