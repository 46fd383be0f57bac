#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "f0/bits.hpp"
#include "f0/hashing.hpp"
#include "f0/sampler.hpp"

// FM level estimators, the compressed median+deviation group codec, and the
// constant-factor strong tracker assembled from them. A group stores its w2
// levels as a fixed-width median plus zigzag/gamma-coded deviations; a group
// whose encoding outgrows its bit budget is marked broken and frozen.

namespace f0 {

class AllGroupsBroken : public std::runtime_error {
public:
    AllGroupsBroken() : std::runtime_error("all estimator groups are broken") {}
};

struct FmEstimator {
    KWiseHash hash;
    int level = -1;  // max lsb over the stream so far; -1 while empty

    void update(std::uint64_t x) {
        int l = lsb(hash.eval(x), hash.out_bits());
        if (l > level) level = l;
    }
};

// Lower-middle median, deterministic and order independent.
template <typename T>
T median_lower(std::vector<T> v) {
    if (v.empty()) throw std::invalid_argument("median of empty set");
    std::size_t mid = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    return v[mid];
}

// Fixed width of the stored group median, covering levels in [-1, universe_bits].
inline int group_median_width(int universe_bits) {
    if (universe_bits < 2) throw std::invalid_argument("group codec needs universe_bits >= 2");
    return std::bit_width(static_cast<unsigned>(universe_bits - 1)) + 1;
}

inline std::size_t group_encoding_bits(std::span<const int> levels, int universe_bits) {
    if (levels.empty()) throw std::invalid_argument("group_encoding_bits: empty group");
    std::vector<int> tmp(levels.begin(), levels.end());
    int med = median_lower(std::move(tmp));
    std::size_t total = static_cast<std::size_t>(group_median_width(universe_bits));
    for (int l : levels) total += gamma_len(zigzag_encode(l - med) + 1);
    return total;
}

// Median first, then per-estimator zigzag deviations in Elias gamma code.
// Exceeding the budget yields the BROKEN value (nullopt), not an error.
inline std::optional<BitString> group_encode(std::span<const int> levels,
                                             std::size_t budget_bits, int universe_bits) {
    if (levels.empty()) throw std::invalid_argument("group_encode: empty group");
    if (group_encoding_bits(levels, universe_bits) > budget_bits) return std::nullopt;
    std::vector<int> tmp(levels.begin(), levels.end());
    int med = median_lower(std::move(tmp));
    BitWriter w;
    w.put(static_cast<std::uint64_t>(med + 1), group_median_width(universe_bits));
    for (int l : levels) w.put_gamma(zigzag_encode(l - med) + 1);
    return w.take();
}

inline std::vector<int> group_decode(const BitString& bits, std::size_t count,
                                     int universe_bits) {
    BitReader r(bits);
    int med = static_cast<int>(r.get(group_median_width(universe_bits))) - 1;
    std::vector<int> levels;
    levels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::int64_t dev = zigzag_decode(r.get_gamma() - 1);
        levels.push_back(med + static_cast<int>(dev));
    }
    return levels;
}

struct TrackerConfig {
    int universe_bits = 32;
    double delta = 1.0 / (1 << 20);
    double w_multiplier = 1.0;            // w = ceil(mult * (log2 n + log2 1/delta))
    double c2_bits_per_estimator = 12.0;  // group budget = ceil(c2 * w2)
    double smallness_c = 4.0;             // measured C of the smallness budget
    double group_size_k = 2.0;            // group-size check constant
    std::size_t w_override = 0;
    std::size_t w1_override = 0;
    std::size_t w2_override = 0;
    std::size_t pool_override = 0;

    std::size_t derive_w() const {
        if (w_override) return w_override;
        double v = w_multiplier * (universe_bits + std::log2(1.0 / delta));
        std::size_t w = static_cast<std::size_t>(std::ceil(v));
        return w < 16 ? 16 : w;
    }

    XiParams xi_params() const {
        XiParams p;
        p.universe_bits = 122;  // two field coefficients of a pairwise hash
        p.w = derive_w();
        p.w1 = w1_override;
        p.w2 = w2_override;
        p.pool_size = pool_override;
        p.r_functions = static_cast<std::size_t>(universe_bits);
        p.group_size_k = group_size_k;
        p.derive();
        return p;
    }
};

// Constant-factor strong tracker: w1 groups of w2 pairwise-hash FM estimators
// with seeds from the composed sampler, answering 2^(median of group medians).
class ConstantTracker {
public:
    ConstantTracker(TrackerConfig cfg, std::uint64_t master_seed)
        : ConstantTracker(cfg, XiSampler::from_master_seed(cfg.xi_params(), master_seed)) {}

    void update(std::uint64_t x) {
        for (Group& g : groups_) {
            if (g.broken) continue;
            bool changed = false;
            for (FmEstimator& e : g.members) {
                int before = e.level;
                e.update(x);
                changed |= e.level != before;
            }
            if (changed) reencode(g);
        }
    }

    // 2^(median over unbroken groups of the median level within the group);
    // the empty stream reports 0 rather than leaking the -1 sentinel.
    double query() const {
        std::vector<int> meds;
        meds.reserve(groups_.size());
        for (const Group& g : groups_) {
            if (g.broken) continue;
            std::vector<int> ls;
            ls.reserve(g.members.size());
            for (const FmEstimator& e : g.members) ls.push_back(e.level);
            meds.push_back(median_lower(std::move(ls)));
        }
        if (meds.empty()) throw AllGroupsBroken();
        int m = median_lower(std::move(meds));
        if (m < 0) return 0.0;
        return std::ldexp(1.0, m);
    }

    bool all_broken() const {
        for (const Group& g : groups_)
            if (!g.broken) return false;
        return true;
    }

    std::size_t unbroken_groups() const {
        std::size_t n = 0;
        for (const Group& g : groups_) n += g.broken ? 0 : 1;
        return n;
    }

    const TrackerConfig& config() const { return config_; }
    const XiSampler& sampler() const { return xi_; }
    std::size_t group_budget_bits() const { return budget_; }

    // Exact bit size of the serialized state.
    std::size_t persisted_bits() const {
        std::size_t total = kHeaderBits + xi_.seed_bits_total() + groups_.size();
        for (const Group& g : groups_)
            if (!g.broken) total += g.encoded_bits;
        return total;
    }

    // Cap implied by the construction: seeds + group budgets + header.
    std::size_t space_cap_bits() const {
        return kHeaderBits + xi_.seed_bits_total() + groups_.size() +
               groups_.size() * budget_;
    }

    std::vector<std::uint8_t> serialize() const {
        BitWriter w;
        w.put(kMagic, 32);
        w.put(kVersion, 16);
        w.put(static_cast<std::uint64_t>(config_.universe_bits), 8);
        w.put(std::bit_cast<std::uint64_t>(config_.delta), 64);
        w.put(std::bit_cast<std::uint64_t>(config_.w_multiplier), 64);
        w.put(std::bit_cast<std::uint64_t>(config_.c2_bits_per_estimator), 64);
        w.put(std::bit_cast<std::uint64_t>(config_.smallness_c), 64);
        w.put(std::bit_cast<std::uint64_t>(config_.group_size_k), 64);
        const XiParams& p = xi_.params();
        w.put(p.w, 32);
        w.put(p.w1, 32);
        w.put(p.w2, 32);
        w.put(p.pool_size, 64);
        w.put(xi_.seed1().size_bits(), 64);
        w.put(xi_.seed2().size_bits(), 64);
        for (std::size_t pos = 0; pos < xi_.seed1().size_bits(); pos += 64) {
            int n = static_cast<int>(std::min<std::size_t>(64, xi_.seed1().size_bits() - pos));
            w.put(xi_.seed1().read(pos, n), n);
        }
        for (std::size_t pos = 0; pos < xi_.seed2().size_bits(); pos += 64) {
            int n = static_cast<int>(std::min<std::size_t>(64, xi_.seed2().size_bits() - pos));
            w.put(xi_.seed2().read(pos, n), n);
        }
        for (const Group& g : groups_) {
            w.put(g.broken ? 1 : 0, 1);
            if (g.broken) continue;
            std::vector<int> ls;
            for (const FmEstimator& e : g.members) ls.push_back(e.level);
            std::optional<BitString> enc = group_encode(ls, budget_, config_.universe_bits);
            const BitString& b = *enc;  // unbroken groups are within budget
            for (std::size_t pos = 0; pos < b.size_bits(); pos += 64) {
                int n = static_cast<int>(std::min<std::size_t>(64, b.size_bits() - pos));
                w.put(b.read(pos, n), n);
            }
        }
        BitString all = w.take();
        std::vector<std::uint8_t> bytes((all.size_bits() + 7) / 8);
        for (std::size_t i = 0; i < bytes.size(); ++i) {
            int n = static_cast<int>(std::min<std::size_t>(8, all.size_bits() - 8 * i));
            bytes[i] = static_cast<std::uint8_t>(all.read(8 * i, n));
        }
        return bytes;
    }

    static ConstantTracker deserialize(std::span<const std::uint8_t> bytes) {
        std::vector<std::uint64_t> words((bytes.size() + 7) / 8, 0);
        for (std::size_t i = 0; i < bytes.size(); ++i)
            words[i / 8] |= static_cast<std::uint64_t>(bytes[i]) << (8 * (i % 8));
        BitString all(std::move(words), bytes.size() * 8);
        BitReader r(all);
        if (r.get(32) != kMagic || r.get(16) != kVersion)
            throw DecodeError("ConstantTracker: bad magic or version");
        TrackerConfig cfg;
        cfg.universe_bits = static_cast<int>(r.get(8));
        cfg.delta = std::bit_cast<double>(r.get(64));
        cfg.w_multiplier = std::bit_cast<double>(r.get(64));
        cfg.c2_bits_per_estimator = std::bit_cast<double>(r.get(64));
        cfg.smallness_c = std::bit_cast<double>(r.get(64));
        cfg.group_size_k = std::bit_cast<double>(r.get(64));
        cfg.w_override = r.get(32);
        cfg.w1_override = r.get(32);
        cfg.w2_override = r.get(32);
        cfg.pool_override = r.get(64);
        std::size_t s1_bits = r.get(64);
        std::size_t s2_bits = r.get(64);
        BitString s1 = read_bitstring(r, s1_bits);
        BitString s2 = read_bitstring(r, s2_bits);
        XiSampler xi(cfg.xi_params(), std::move(s1), std::move(s2));
        ConstantTracker t(cfg, std::move(xi));
        for (Group& g : t.groups_) {
            g.broken = r.get(1) != 0;
            if (g.broken) {
                g.encoded_bits = 0;
                continue;
            }
            // decode levels in place by re-parsing from the reader
            int width = group_median_width(cfg.universe_bits);
            int med = static_cast<int>(r.get(width)) - 1;
            std::size_t bits = static_cast<std::size_t>(width);
            for (FmEstimator& e : g.members) {
                std::uint64_t code = r.get_gamma();
                bits += gamma_len(code);
                e.level = med + static_cast<int>(zigzag_decode(code - 1));
            }
            g.encoded_bits = bits;
        }
        return t;
    }

private:
    struct Group {
        std::vector<FmEstimator> members;
        bool broken = false;
        std::size_t encoded_bits = 0;
    };

    static constexpr std::uint64_t kMagic = 0x46305354ULL;  // "F0ST"
    static constexpr std::uint64_t kVersion = 1;
    static constexpr std::size_t kHeaderBits = 32 + 16 + 8 + 64 * 5 + 32 * 3 + 64 + 64 * 2;

    ConstantTracker(TrackerConfig cfg, XiSampler xi)
        : config_(cfg), xi_(std::move(xi)) {
        budget_ = static_cast<std::size_t>(
            std::ceil(config_.c2_bits_per_estimator * double(xi_.params().w2)));
        std::vector<std::vector<Sample>> gs = xi_.groups();
        groups_.reserve(gs.size());
        for (const std::vector<Sample>& seeds : gs) {
            Group g;
            g.members.reserve(seeds.size());
            for (const Sample& s : seeds) {
                std::vector<std::uint64_t> coeffs = {s.bits(0, 61) % kMersenne61,
                                                     s.bits(61, 61) % kMersenne61};
                g.members.push_back(FmEstimator{
                    KWiseHash::from_coefficients(std::move(coeffs), config_.universe_bits,
                                                 config_.universe_bits),
                    -1});
            }
            std::vector<int> ls(g.members.size(), -1);
            std::size_t bits = group_encoding_bits(ls, config_.universe_bits);
            if (bits > budget_) {
                g.broken = true;
            } else {
                g.encoded_bits = bits;
            }
            groups_.push_back(std::move(g));
        }
    }

    static BitString read_bitstring(BitReader& r, std::size_t bits) {
        std::vector<std::uint64_t> words((bits + 63) / 64, 0);
        for (std::size_t pos = 0; pos < bits; pos += 64) {
            int n = static_cast<int>(std::min<std::size_t>(64, bits - pos));
            words[pos / 64] = r.get(n);
        }
        return BitString(std::move(words), bits);
    }

    void reencode(Group& g) {
        std::vector<int> ls;
        ls.reserve(g.members.size());
        for (const FmEstimator& e : g.members) ls.push_back(e.level);
        std::size_t bits = group_encoding_bits(ls, config_.universe_bits);
        if (bits > budget_) {
            g.broken = true;
            g.encoded_bits = 0;
        } else {
            g.encoded_bits = bits;
        }
    }

    TrackerConfig config_;
    XiSampler xi_;
    std::size_t budget_;
    std::vector<Group> groups_;
};

}  // namespace f0
