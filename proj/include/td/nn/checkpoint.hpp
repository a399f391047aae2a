#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "td/nn/adam.hpp"
#include "td/nn/mlp.hpp"

namespace td::nn {

inline constexpr char kCheckpointMagic[4] = {'T', 'D', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Raw little-endian field writer for checkpoints.
class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& os) : os_(os) {}

    template <class T>
    void put(const T& value) {
        static_assert(std::is_trivially_copyable_v<T>);
        os_.write(reinterpret_cast<const char*>(&value), sizeof(T));
        if (!os_) throw std::runtime_error("checkpoint: write failed");
    }

    void header() {
        os_.write(kCheckpointMagic, 4);
        put(kCheckpointVersion);
    }

    void tag(const std::string& name) {
        put(static_cast<std::uint32_t>(name.size()));
        os_.write(name.data(), static_cast<std::streamsize>(name.size()));
    }

private:
    std::ostream& os_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& is) : is_(is) {}

    template <class T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        T value{};
        is_.read(reinterpret_cast<char*>(&value), sizeof(T));
        if (!is_) throw std::runtime_error("checkpoint: truncated input");
        return value;
    }

    void header() {
        char magic[4];
        is_.read(magic, 4);
        if (!is_ || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
            throw std::runtime_error("checkpoint: bad magic");
        }
        const auto version = get<std::uint32_t>();
        if (version != kCheckpointVersion) {
            throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
        }
    }

    void expect_tag(const std::string& name) {
        const auto n = get<std::uint32_t>();
        if (n > 256) throw std::runtime_error("checkpoint: corrupt tag");
        std::string s(n, '\0');
        is_.read(s.data(), n);
        if (!is_ || s != name) throw std::runtime_error("checkpoint: expected section " + name);
    }

private:
    std::istream& is_;
};

namespace detail {

template <class S, class M>
void put_matrix(BinaryWriter& w, const M& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) w.put<S>(m(r, c));
    }
}

template <class S, class M>
void get_matrix(BinaryReader& r, M& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.get<S>();
    }
}

}  // namespace detail

/// Layer shapes, head kind and scalar width, then row-major weights and biases.
template <class S>
void write_network(BinaryWriter& w, const MlpSpec& spec, const MlpParams<S>& params) {
    w.put(static_cast<std::uint32_t>(sizeof(S)));
    w.put(static_cast<std::uint32_t>(spec.head));
    w.put(static_cast<std::uint32_t>(spec.layerSizes.size()));
    for (int s : spec.layerSizes) w.put(static_cast<std::uint32_t>(s));
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        detail::put_matrix<S>(w, params.weights[l]);
        detail::put_matrix<S>(w, params.biases[l]);
    }
}

template <class S>
MlpParams<S> read_network(BinaryReader& r, MlpSpec& spec) {
    if (r.get<std::uint32_t>() != sizeof(S)) throw std::runtime_error("checkpoint: scalar width mismatch");
    const auto head = r.get<std::uint32_t>();
    if (head > 1) throw std::runtime_error("checkpoint: unknown head kind");
    const auto n = r.get<std::uint32_t>();
    if (n < 2 || n > 64) throw std::runtime_error("checkpoint: corrupt layer count");
    spec.head = static_cast<Head>(head);
    spec.layerSizes.clear();
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto s = r.get<std::uint32_t>();
        if (s == 0 || s > (1u << 20)) throw std::runtime_error("checkpoint: corrupt layer size");
        spec.layerSizes.push_back(static_cast<int>(s));
    }
    spec.validate();
    MlpParams<S> p = MlpParams<S>::zeros(spec);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        detail::get_matrix<S>(r, p.weights[l]);
        detail::get_matrix<S>(r, p.biases[l]);
    }
    return p;
}

template <class S>
void write_adam(BinaryWriter& w, const MlpSpec& spec, const AdamState<MlpParams<S>>& s) {
    w.put(s.step);
    write_network(w, spec, s.m);
    write_network(w, spec, s.v);
}

template <class S>
AdamState<MlpParams<S>> read_adam(BinaryReader& r, const MlpSpec& spec) {
    AdamState<MlpParams<S>> s;
    s.step = r.get<std::int64_t>();
    MlpSpec a, b;
    s.m = read_network<S>(r, a);
    s.v = read_network<S>(r, b);
    if (!(a == spec) || !(b == spec)) throw std::runtime_error("checkpoint: optimizer shape mismatch");
    return s;
}

inline void write_adam(BinaryWriter& w, const AdamState<double>& s) {
    w.put(s.step);
    w.put(s.m);
    w.put(s.v);
}

inline AdamState<double> read_adam(BinaryReader& r) {
    AdamState<double> s;
    s.step = r.get<std::int64_t>();
    s.m = r.get<double>();
    s.v = r.get<double>();
    return s;
}

/// Single-network checkpoint: header followed by one network section.
template <class S>
void save_network(std::ostream& os, const MlpSpec& spec, const MlpParams<S>& params) {
    BinaryWriter w(os);
    w.header();
    w.tag("network");
    write_network(w, spec, params);
}

template <class S>
MlpParams<S> load_network(std::istream& is, MlpSpec& spec) {
    BinaryReader r(is);
    r.header();
    r.expect_tag("network");
    return read_network<S>(r, spec);
}

}  // namespace td::nn
