#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "f0/bits.hpp"
#include "f0/fm.hpp"
#include "f0/knw.hpp"
#include "f0/sampler.hpp"

// Assembly layer: the high-accuracy one-shot estimator (median of bucketed
// sketches whose seeds come from an expander-walk sampler, all sharing one
// constant-factor tracking oracle) and the strong-tracking variant (the same
// construction queried after every update, with a monotone report clamp).

namespace f0 {

class AllDiscarded : public std::runtime_error {
public:
    AllDiscarded() : std::runtime_error("no usable estimator instances remain") {}
};

enum class HaMode { small_eps, large_eps };

struct HaOptions {
    double small_instances_per_log_delta = 2.0;  // ceil(c * log2 1/delta) instances
    double large_instances_scale = 1.0;          // ceil(c * (sqrt(log2 n) + log2 1/delta))
    double instance_budget_buckets = 4.0;        // discard above mult * P bits
    std::size_t instances_override = 0;
    int knw_d0 = 2;
    double oracle_w_multiplier = 1.0;
    int seed_stride = kDefaultAveragingStride;
};

namespace detail {

inline double require_eps(double eps) {
    if (!(eps > 0 && eps < 0.5)) throw std::invalid_argument("eps must be in (0, 1/2)");
    return eps;
}

inline double require_delta(double delta) {
    if (!(delta > 0 && delta < 1)) throw std::invalid_argument("delta must be in (0, 1)");
    return delta;
}

// Mode split: small eps gets independent-style seeds from an averaging
// sampler, large eps goes through the grouped sampler.
inline HaMode ha_mode(double eps, int universe_bits) {
    double threshold = std::pow(1.0 / (universe_bits * std::numbers::ln2), 0.25);
    return eps < threshold ? HaMode::small_eps : HaMode::large_eps;
}

inline std::vector<std::uint64_t> instance_seeds(HaMode mode, std::size_t count,
                                                 std::uint64_t master_seed, int stride) {
    std::vector<std::uint64_t> seeds;
    seeds.reserve(count);
    if (mode == HaMode::small_eps) {
        BitString bits = BitString::random(averaging_seed_bits(count, 64, stride),
                                           derive_seed(master_seed, 0xC1));
        for (const Sample& s : averaging_sample(bits, count, 64, stride))
            seeds.push_back(s.bits(0, 64));
    } else {
        XiParams p;
        p.universe_bits = 64;
        p.w = count;
        p.r_functions = 64;
        p.group_size_k = 0.0;  // groups here are seed batches, not budgeted groups
        XiSampler xi = XiSampler::from_master_seed(p, derive_seed(master_seed, 0xC2));
        for (const std::vector<Sample>& g : xi.groups()) {
            for (const Sample& s : g) {
                if (seeds.size() < count) seeds.push_back(s.bits(0, 64));
            }
        }
    }
    return seeds;
}

}  // namespace detail

class HighAccuracyEstimator {
public:
    HighAccuracyEstimator(double eps, double delta, int universe_bits,
                          std::uint64_t master_seed, HaOptions opt = {})
        : eps_(detail::require_eps(eps)), delta_(detail::require_delta(delta)),
          mode_(detail::ha_mode(eps, universe_bits)),
          oracle_(make_oracle(delta, universe_bits, opt, master_seed)) {
        std::size_t m = opt.instances_override;
        if (m == 0) {
            double lg = std::log2(1.0 / delta);
            double v = mode_ == HaMode::small_eps
                           ? opt.small_instances_per_log_delta * lg
                           : opt.large_instances_scale * (std::sqrt(double(universe_bits)) + lg);
            m = static_cast<std::size_t>(std::ceil(v));
            if (m < 1) m = 1;
        }
        KnwConfig kc;
        kc.eps = eps;
        kc.universe_bits = universe_bits;
        kc.d0 = opt.knw_d0;
        budget_bits_ = static_cast<std::size_t>(opt.instance_budget_buckets *
                                                double(kc.buckets()));
        for (std::uint64_t s :
             detail::instance_seeds(mode_, m, master_seed, opt.seed_stride)) {
            instances_.emplace_back(kc, s);
            discarded_.push_back(false);
        }
    }

    // Oracle first, then every live instance sees the same oracle snapshot.
    void update(std::uint64_t x) {
        oracle_.update(x);
        double est = oracle_.query();
        for (std::size_t i = 0; i < instances_.size(); ++i) {
            if (discarded_[i]) continue;
            instances_[i].update(x, est);
            if (instances_[i].space_bits() > budget_bits_) discarded_[i] = true;
        }
    }

    // Median over non-discarded instances; a saturated instance is treated
    // as discarded for this query only.
    double query() const {
        std::vector<double> vals;
        vals.reserve(instances_.size());
        for (std::size_t i = 0; i < instances_.size(); ++i) {
            if (discarded_[i]) continue;
            try {
                vals.push_back(instances_[i].query());
            } catch (const SaturationError&) {
            }
        }
        if (vals.empty()) throw AllDiscarded();
        return median_lower(std::move(vals));
    }

    HaMode mode() const { return mode_; }
    std::size_t instances() const { return instances_.size(); }
    std::size_t discarded() const {
        std::size_t n = 0;
        for (bool d : discarded_) n += d ? 1 : 0;
        return n;
    }
    const ConstantTracker& oracle() const { return oracle_; }
    const std::vector<KnwSketch>& sketches() const { return instances_; }
    std::size_t instance_budget_bits() const { return budget_bits_; }

    std::size_t serialized_bits() const {
        std::size_t total = kHeaderBits + oracle_.persisted_bits();
        for (std::size_t i = 0; i < instances_.size(); ++i) {
            total += 1;
            if (!discarded_[i]) total += instances_[i].serialized_bits();
        }
        return total;
    }

    std::vector<std::uint8_t> serialize() const {
        BitWriter w;
        w.put(kMagic, 32);
        w.put(kVersion, 16);
        w.put(std::bit_cast<std::uint64_t>(eps_), 64);
        w.put(std::bit_cast<std::uint64_t>(delta_), 64);
        w.put(mode_ == HaMode::small_eps ? 0 : 1, 8);
        w.put(instances_.size(), 32);
        w.put(budget_bits_, 64);
        std::vector<std::uint8_t> ob = oracle_.serialize();
        w.put(ob.size(), 64);
        for (std::uint8_t b : ob) w.put(b, 8);
        for (std::size_t i = 0; i < instances_.size(); ++i) {
            w.put(discarded_[i] ? 1 : 0, 1);
            if (!discarded_[i]) instances_[i].write_state(w);
        }
        BitString all = w.take();
        std::vector<std::uint8_t> bytes((all.size_bits() + 7) / 8);
        for (std::size_t i = 0; i < bytes.size(); ++i) {
            int n = static_cast<int>(std::min<std::size_t>(8, all.size_bits() - 8 * i));
            bytes[i] = static_cast<std::uint8_t>(all.read(8 * i, n));
        }
        return bytes;
    }

    static HighAccuracyEstimator deserialize(std::span<const std::uint8_t> bytes) {
        std::vector<std::uint64_t> words((bytes.size() + 7) / 8, 0);
        for (std::size_t i = 0; i < bytes.size(); ++i)
            words[i / 8] |= static_cast<std::uint64_t>(bytes[i]) << (8 * (i % 8));
        BitString all(std::move(words), bytes.size() * 8);
        BitReader r(all);
        if (r.get(32) != kMagic || r.get(16) != kVersion)
            throw DecodeError("HighAccuracyEstimator: bad magic or version");
        double eps = std::bit_cast<double>(r.get(64));
        double delta = std::bit_cast<double>(r.get(64));
        HaMode mode = r.get(8) == 0 ? HaMode::small_eps : HaMode::large_eps;
        std::size_t m = r.get(32);
        std::size_t budget = r.get(64);
        std::size_t oracle_bytes = r.get(64);
        std::vector<std::uint8_t> ob(oracle_bytes);
        for (auto& b : ob) b = static_cast<std::uint8_t>(r.get(8));
        HighAccuracyEstimator h(eps, delta, mode, budget,
                                ConstantTracker::deserialize(ob));
        for (std::size_t i = 0; i < m; ++i) {
            bool disc = r.get(1) != 0;
            if (disc) {
                // discarded instances are frozen; a fresh empty sketch keeps
                // the slot without its payload
                KnwConfig kc;
                kc.eps = eps;
                h.instances_.emplace_back(kc, 0);
                h.discarded_.push_back(true);
            } else {
                h.instances_.push_back(KnwSketch::read_state(r));
                h.discarded_.push_back(false);
            }
        }
        return h;
    }

private:
    static constexpr std::uint64_t kMagic = 0x46304841ULL;  // "F0HA"
    static constexpr std::uint64_t kVersion = 1;
    static constexpr std::size_t kHeaderBits = 32 + 16 + 64 * 2 + 8 + 32 + 64 + 64;

    static ConstantTracker make_oracle(double delta, int universe_bits, const HaOptions& opt,
                                       std::uint64_t master_seed) {
        TrackerConfig tc;
        tc.universe_bits = universe_bits;
        tc.delta = delta / 2;  // half the failure budget goes to the oracle
        tc.w_multiplier = opt.oracle_w_multiplier;
        return ConstantTracker(tc, derive_seed(master_seed, 0xC0));
    }

    HighAccuracyEstimator(double eps, double delta, HaMode mode, std::size_t budget,
                          ConstantTracker oracle)
        : eps_(eps), delta_(delta), mode_(mode), oracle_(std::move(oracle)),
          budget_bits_(budget) {}

    double eps_;
    double delta_;
    HaMode mode_;
    ConstantTracker oracle_;
    std::vector<KnwSketch> instances_;
    std::vector<bool> discarded_;
    std::size_t budget_bits_ = 0;
};

struct StOptions {
    double reps_multiplier = 3.0;  // m = ceil(a * (log2 log2 n + log2 1/delta))
    std::size_t reps_override = 0;
    int knw_d0 = 2;
    double oracle_w_multiplier = 1.0;
    int seed_stride = kDefaultAveragingStride;
};

// Strong tracking: m bucketed sketches over one shared oracle, queried after
// every update; reports are clamped monotone (distinct counts never shrink)
// and the raw median is returned alongside so the clamp stays measurable.
class StrongTracker {
public:
    struct Report {
        double reported;
        double raw_median;
    };

    StrongTracker(double eps, double delta, int universe_bits, std::uint64_t master_seed,
                  StOptions opt = {})
        : eps_(detail::require_eps(eps)), delta_(detail::require_delta(delta)),
          oracle_(make_oracle(delta, universe_bits, opt, master_seed)) {
        std::size_t m = opt.reps_override;
        if (m == 0) {
            double v = opt.reps_multiplier *
                       (std::log2(double(universe_bits)) + std::log2(1.0 / delta));
            m = static_cast<std::size_t>(std::ceil(v));
            if (m < 1) m = 1;
        }
        KnwConfig kc;
        kc.eps = eps;
        kc.universe_bits = universe_bits;
        kc.d0 = opt.knw_d0;
        for (std::uint64_t s : detail::instance_seeds(HaMode::small_eps, m, master_seed,
                                                      opt.seed_stride)) {
            reps_.emplace_back(kc, s);
        }
    }

    Report update_and_report(std::uint64_t x) {
        oracle_.update(x);
        double est = oracle_.query();
        std::vector<double> vals;
        vals.reserve(reps_.size());
        for (KnwSketch& r : reps_) {
            r.update(x, est);
            try {
                vals.push_back(r.query());
            } catch (const SaturationError&) {
            }
        }
        double raw = vals.empty() ? last_reported_ : median_lower(std::move(vals));
        if (raw > last_reported_) last_reported_ = raw;
        return {last_reported_, raw};
    }

    double last_reported() const { return last_reported_; }
    std::size_t reps() const { return reps_.size(); }
    const ConstantTracker& oracle() const { return oracle_; }
    const std::vector<KnwSketch>& sketches() const { return reps_; }

    std::size_t serialized_bits() const {
        std::size_t total = 32 + 16 + 64 * 3 + 32 + 64 + oracle_.persisted_bits();
        for (const KnwSketch& r : reps_) total += r.serialized_bits();
        return total;
    }

    std::vector<std::uint8_t> serialize() const {
        BitWriter w;
        w.put(kMagic, 32);
        w.put(kVersion, 16);
        w.put(std::bit_cast<std::uint64_t>(eps_), 64);
        w.put(std::bit_cast<std::uint64_t>(delta_), 64);
        w.put(std::bit_cast<std::uint64_t>(last_reported_), 64);
        w.put(reps_.size(), 32);
        std::vector<std::uint8_t> ob = oracle_.serialize();
        w.put(ob.size(), 64);
        for (std::uint8_t b : ob) w.put(b, 8);
        for (const KnwSketch& r : reps_) r.write_state(w);
        BitString all = w.take();
        std::vector<std::uint8_t> bytes((all.size_bits() + 7) / 8);
        for (std::size_t i = 0; i < bytes.size(); ++i) {
            int n = static_cast<int>(std::min<std::size_t>(8, all.size_bits() - 8 * i));
            bytes[i] = static_cast<std::uint8_t>(all.read(8 * i, n));
        }
        return bytes;
    }

    static StrongTracker deserialize(std::span<const std::uint8_t> bytes) {
        std::vector<std::uint64_t> words((bytes.size() + 7) / 8, 0);
        for (std::size_t i = 0; i < bytes.size(); ++i)
            words[i / 8] |= static_cast<std::uint64_t>(bytes[i]) << (8 * (i % 8));
        BitString all(std::move(words), bytes.size() * 8);
        BitReader r(all);
        if (r.get(32) != kMagic || r.get(16) != kVersion)
            throw DecodeError("StrongTracker: bad magic or version");
        double eps = std::bit_cast<double>(r.get(64));
        double delta = std::bit_cast<double>(r.get(64));
        double last = std::bit_cast<double>(r.get(64));
        std::size_t m = r.get(32);
        std::size_t oracle_bytes = r.get(64);
        std::vector<std::uint8_t> ob(oracle_bytes);
        for (auto& b : ob) b = static_cast<std::uint8_t>(r.get(8));
        StrongTracker t(eps, delta, ConstantTracker::deserialize(ob));
        t.last_reported_ = last;
        for (std::size_t i = 0; i < m; ++i) t.reps_.push_back(KnwSketch::read_state(r));
        return t;
    }

private:
    static constexpr std::uint64_t kMagic = 0x46305452ULL;  // "F0TR"
    static constexpr std::uint64_t kVersion = 1;

    static ConstantTracker make_oracle(double delta, int universe_bits, const StOptions& opt,
                                       std::uint64_t master_seed) {
        TrackerConfig tc;
        tc.universe_bits = universe_bits;
        tc.delta = delta / 2;
        tc.w_multiplier = opt.oracle_w_multiplier;
        return ConstantTracker(tc, derive_seed(master_seed, 0xD0));
    }

    StrongTracker(double eps, double delta, ConstantTracker oracle)
        : eps_(eps), delta_(delta), oracle_(std::move(oracle)) {}

    double eps_;
    double delta_;
    ConstantTracker oracle_;
    std::vector<KnwSketch> reps_;
    double last_reported_ = 0.0;
};

}  // namespace f0
