#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "f0/bits.hpp"
#include "f0/hashing.hpp"
#include "f0/occupancy.hpp"

// Bucketed (1+eps) estimator: P counters holding the maximum offset-adjusted
// lsb level of the elements hashed into each bucket, with the offset D driven
// by a constant-factor tracking oracle. The estimate is Phi^-1(Q) * 2^D where
// Q counts the nonempty buckets.

namespace f0 {

class SaturationError : public std::runtime_error {
public:
    SaturationError() : std::runtime_error("all buckets occupied; Phi^-1 undefined") {}
};

struct KnwConfig {
    double eps = 0.1;
    int universe_bits = 32;
    double c0 = 100.0;  // P = ceil(c0 / eps^2)
    int d0 = 2;         // offset constant; tuned so desk-scale space and
                        // saturation rates hold with margin
    int h1_degree = 8;

    std::uint64_t buckets() const {
        return static_cast<std::uint64_t>(std::ceil(c0 / (eps * eps)));
    }
};

class KnwSketch {
public:
    KnwSketch(KnwConfig cfg, std::uint64_t seed)
        : cfg_(cfg),
          p_(cfg.buckets()),
          occupancy_(p_),
          h1_(KWiseHash::create(cfg.h1_degree, cfg.universe_bits, cfg.universe_bits,
                                derive_seed(seed, 0xB1))),
          h3_(KWiseHash::create(2, cfg.universe_bits, 61, derive_seed(seed, 0xB3))),
          h4_(KWiseHash::create(polylog_degree(p_), 61, 61, derive_seed(seed, 0xB4))),
          seed_(seed),
          counters_(p_, -1) {
        if (!(cfg.eps > 0 && cfg.eps < 2.3))
            throw std::invalid_argument("KnwSketch: eps out of range");
        log2_inv_eps2_ = static_cast<int>(std::ceil(std::log2(1.0 / (cfg.eps * cfg.eps))));
    }

    // Inserts x, then refreshes the offset from the oracle's current estimate.
    // The oracle value must be the latest constant-factor tracker output.
    void update(std::uint64_t x, double oracle_estimate) {
        if (!(oracle_estimate >= 0.0))
            throw std::invalid_argument("KnwSketch: oracle unavailable");
        int level = lsb(h1_.eval(x), cfg_.universe_bits);
        std::uint64_t bucket = h4_.eval_range(h3_.eval_range(x, p_ * p_), p_);
        int nv = level - offset_d_;
        if (nv < -1) nv = -1;
        if (nv > counters_[bucket]) {
            if (counters_[bucket] < 0) {
                ++q_;
            } else {
                payload_bits_ -= gamma_len(static_cast<std::uint64_t>(counters_[bucket]) + 1);
            }
            payload_bits_ += gamma_len(static_cast<std::uint64_t>(nv) + 1);
            counters_[bucket] = static_cast<std::int8_t>(nv);
        }
        int target = offset_target(oracle_estimate);
        if (target > offset_d_) rebase(target - offset_d_);
    }

    // Phi^-1(Q) * 2^D; 0 on an empty sketch, error when saturated.
    double query() const {
        if (q_ == 0) return 0.0;
        if (q_ == p_) throw SaturationError();
        return occupancy_.phi_inverse(static_cast<double>(q_)) * std::ldexp(1.0, offset_d_);
    }

    // Exact storage bits: P-bit presence map plus a gamma code per live counter.
    std::size_t space_bits() const { return static_cast<std::size_t>(p_) + payload_bits_; }
    std::size_t payload_bits() const { return payload_bits_; }

    std::uint64_t occupied() const { return q_; }
    std::uint64_t buckets() const { return p_; }
    int counter(std::uint64_t bucket) const { return counters_[bucket]; }
    int offset() const { return offset_d_; }
    const KnwConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }

    // Offset implied by an oracle estimate: floor(log2 est) - ceil(log2 1/eps^2) - D0.
    int offset_target(double oracle_estimate) const {
        if (oracle_estimate < 1.0) return 0;
        int m = std::ilogb(oracle_estimate);
        int t = m - log2_inv_eps2_ - cfg_.d0;
        return t < 0 ? 0 : t;
    }

    std::size_t serialized_bits() const {
        return kHeaderBits + space_bits();
    }

    std::vector<std::uint8_t> serialize() const {
        BitWriter w;
        write_state(w);
        BitString all = w.take();
        std::vector<std::uint8_t> bytes((all.size_bits() + 7) / 8);
        for (std::size_t i = 0; i < bytes.size(); ++i) {
            int n = static_cast<int>(std::min<std::size_t>(8, all.size_bits() - 8 * i));
            bytes[i] = static_cast<std::uint8_t>(all.read(8 * i, n));
        }
        return bytes;
    }

    void write_state(BitWriter& w) const {
        w.put(kMagic, 32);
        w.put(kVersion, 16);
        w.put(std::bit_cast<std::uint64_t>(cfg_.eps), 64);
        w.put(static_cast<std::uint64_t>(cfg_.universe_bits), 8);
        w.put(std::bit_cast<std::uint64_t>(cfg_.c0), 64);
        w.put(static_cast<std::uint64_t>(cfg_.d0), 8);
        w.put(static_cast<std::uint64_t>(cfg_.h1_degree), 8);
        w.put(seed_, 64);
        w.put(static_cast<std::uint64_t>(offset_d_), 16);
        for (std::uint64_t i = 0; i < p_; ++i) w.put(counters_[i] >= 0 ? 1 : 0, 1);
        for (std::uint64_t i = 0; i < p_; ++i)
            if (counters_[i] >= 0) w.put_gamma(static_cast<std::uint64_t>(counters_[i]) + 1);
    }

    static KnwSketch deserialize(std::span<const std::uint8_t> bytes) {
        std::vector<std::uint64_t> words((bytes.size() + 7) / 8, 0);
        for (std::size_t i = 0; i < bytes.size(); ++i)
            words[i / 8] |= static_cast<std::uint64_t>(bytes[i]) << (8 * (i % 8));
        BitString all(std::move(words), bytes.size() * 8);
        BitReader r(all);
        return read_state(r);
    }

    static KnwSketch read_state(BitReader& r) {
        if (r.get(32) != kMagic || r.get(16) != kVersion)
            throw DecodeError("KnwSketch: bad magic or version");
        KnwConfig cfg;
        cfg.eps = std::bit_cast<double>(r.get(64));
        cfg.universe_bits = static_cast<int>(r.get(8));
        cfg.c0 = std::bit_cast<double>(r.get(64));
        cfg.d0 = static_cast<int>(r.get(8));
        cfg.h1_degree = static_cast<int>(r.get(8));
        std::uint64_t seed = r.get(64);
        KnwSketch s(cfg, seed);
        s.offset_d_ = static_cast<int>(r.get(16));
        std::vector<bool> live(s.p_);
        for (std::uint64_t i = 0; i < s.p_; ++i) live[i] = r.get(1) != 0;
        for (std::uint64_t i = 0; i < s.p_; ++i) {
            if (!live[i]) continue;
            std::uint64_t code = r.get_gamma();
            s.counters_[i] = static_cast<std::int8_t>(code - 1);
            s.payload_bits_ += gamma_len(code);
            ++s.q_;
        }
        return s;
    }

    static constexpr std::size_t kHeaderBits = 32 + 16 + 64 + 8 + 64 + 8 + 8 + 64 + 16;

private:
    void rebase(int shift) {
        q_ = 0;
        payload_bits_ = 0;
        for (std::uint64_t i = 0; i < p_; ++i) {
            int c = counters_[i];
            if (c < 0) continue;
            c -= shift;
            if (c < -1) c = -1;
            counters_[i] = static_cast<std::int8_t>(c);
            if (c >= 0) {
                ++q_;
                payload_bits_ += gamma_len(static_cast<std::uint64_t>(c) + 1);
            }
        }
        offset_d_ += shift;
    }

    static constexpr std::uint64_t kMagic = 0x46304B57ULL;  // "F0KW"
    static constexpr std::uint64_t kVersion = 1;

    KnwConfig cfg_;
    std::uint64_t p_;
    OccupancyModel occupancy_;
    KWiseHash h1_, h3_, h4_;
    std::uint64_t seed_;
    std::vector<std::int8_t> counters_;
    int offset_d_ = 0;
    std::uint64_t q_ = 0;
    std::size_t payload_bits_ = 0;
    int log2_inv_eps2_ = 0;
};

}  // namespace f0
