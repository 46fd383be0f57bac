#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include "f0/fm.hpp"
#include "f0/knw.hpp"
#include "f0/occupancy.hpp"
#include "f0/stream.hpp"
#include "f0/trackers.hpp"

// Trial runner and Monte Carlo verifiers. All randomness flows from a master
// seed through per-trial indexed sub-seeds, so every aggregate is identical
// at any parallelism level.

namespace f0 {

// Deterministic indexed parallel loop: worker scheduling never affects results.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    int count = std::min<int>(threads, static_cast<int>(n));
    pool.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

struct WilsonInterval {
    double lo, hi;
};

// Wilson 95% interval; preferred over the normal approximation because the
// target failure rates are small.
inline WilsonInterval wilson95(std::size_t failures, std::size_t n) {
    if (n == 0) return {0.0, 1.0};
    const double z = 1.959963984540054;
    double p = static_cast<double>(failures) / static_cast<double>(n);
    double z2 = z * z;
    double denom = 1.0 + z2 / n;
    double center = (p + z2 / (2.0 * n)) / denom;
    double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    double lo = failures == 0 ? 0.0 : center - half;
    double hi = failures == n ? 1.0 : center + half;
    return {lo < 0 ? 0 : lo, hi > 1 ? 1 : hi};
}

enum class AlgoMode { constant, high_accuracy, strong_tracking };

inline std::string to_string(AlgoMode m) {
    switch (m) {
        case AlgoMode::constant: return "constant";
        case AlgoMode::high_accuracy: return "high-accuracy";
        default: return "strong-tracking";
    }
}

struct AlgoConfig {
    AlgoMode mode = AlgoMode::high_accuracy;
    double eps = 0.1;
    double delta = 1.0 / (1 << 7);
    int universe_bits = 32;
    // success tolerance; 0 derives the mode default (factor 8 for constant,
    // eps for one-shot, (1+eps)^2 - 1 for whole-trajectory tracking)
    double tolerance = 0.0;
    int knw_d0 = 2;
    double oracle_w_multiplier = 1.0;

    double derived_tolerance() const {
        if (tolerance > 0) return tolerance;
        switch (mode) {
            case AlgoMode::constant: return 8.0;
            case AlgoMode::high_accuracy: return eps;
            default: return (1.0 + eps) * (1.0 + eps) - 1.0;
        }
    }
};

struct TrialReport {
    std::uint64_t trial_seed = 0;
    std::uint64_t exact = 0;
    double estimate = 0.0;           // final estimate
    double max_rel_error = 0.0;      // worst checkpoint error (factor-1 for constant mode)
    double final_rel_error = 0.0;
    bool success = false;
    bool monotone = true;            // reported trajectory, tracking modes
    bool space_cap_ok = true;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> space_trace;  // (t, bits)
};

struct AggregateReport {
    std::size_t trials = 0;
    std::size_t failures = 0;
    double failure_rate = 0.0;
    WilsonInterval wilson{0.0, 0.0};
    double max_rel_error_p50 = 0.0;
    double max_rel_error_max = 0.0;
    std::uint64_t space_bits_p50 = 0;
    std::uint64_t space_bits_max = 0;
    bool all_monotone = true;
    bool all_space_cap_ok = true;
    std::vector<TrialReport> per_trial;
};

namespace detail {

inline bool is_power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

template <typename OnUpdate>
void replay(std::span<const std::uint64_t> stream, OnUpdate&& on_update) {
    std::unordered_set<std::uint64_t> seen;
    std::uint64_t t = 0;
    for (std::uint64_t x : stream) {
        ++t;
        bool fresh = seen.insert(x).second;
        on_update(t, x, static_cast<std::uint64_t>(seen.size()), fresh);
    }
}

}  // namespace detail

// Runs one seeded trial of the configured estimator against the exact oracle.
// Constant mode grades factor error at doubling points, high accuracy grades
// the final answer, strong tracking grades the whole reported trajectory.
inline TrialReport run_trial(const AlgoConfig& cfg, const StreamSpec& spec,
                             std::uint64_t trial_seed) {
    StreamSpec s = spec;
    s.seed = derive_seed(trial_seed, 0x51);
    std::uint64_t algo_seed = derive_seed(trial_seed, 0x52);
    std::vector<std::uint64_t> stream = gen_stream(s);

    TrialReport r;
    r.trial_seed = trial_seed;
    double tol = cfg.derived_tolerance();

    if (cfg.mode == AlgoMode::constant) {
        TrackerConfig tc;
        tc.universe_bits = cfg.universe_bits;
        tc.delta = cfg.delta;
        tc.w_multiplier = cfg.oracle_w_multiplier;
        ConstantTracker tracker(tc, algo_seed);
        double worst = 1.0;
        double last = 0.0;
        bool monotone = true;
        detail::replay(stream, [&](std::uint64_t t, std::uint64_t x, std::uint64_t f0, bool fresh) {
            tracker.update(x);
            if ((fresh && detail::is_power_of_two(f0)) || t == stream.size()) {
                double q = tracker.query();
                if (q < last) monotone = false;
                last = q;
                double factor = q <= 0 ? std::numeric_limits<double>::infinity()
                                       : std::max(q / double(f0), double(f0) / q);
                worst = std::max(worst, factor);
                r.space_trace.emplace_back(t, tracker.persisted_bits());
                if (tracker.persisted_bits() > tracker.space_cap_bits()) r.space_cap_ok = false;
            }
        });
        r.exact = exact_f0(stream);
        r.estimate = tracker.query();
        r.max_rel_error = worst;
        r.final_rel_error = r.exact
                                ? std::max(r.estimate / double(r.exact), double(r.exact) / r.estimate)
                                : 0.0;
        r.monotone = monotone;
        r.success = worst <= tol && r.space_cap_ok;
    } else if (cfg.mode == AlgoMode::high_accuracy) {
        HaOptions opt;
        opt.knw_d0 = cfg.knw_d0;
        opt.oracle_w_multiplier = cfg.oracle_w_multiplier;
        HighAccuracyEstimator ha(cfg.eps, cfg.delta, cfg.universe_bits, algo_seed, opt);
        detail::replay(stream, [&](std::uint64_t t, std::uint64_t x, std::uint64_t f0, bool fresh) {
            ha.update(x);
            if ((fresh && detail::is_power_of_two(f0)) || t == stream.size())
                r.space_trace.emplace_back(t, ha.serialized_bits());
        });
        r.exact = exact_f0(stream);
        double est = 0.0;
        bool errored = false;
        try {
            est = ha.query();
        } catch (const AllDiscarded&) {
            errored = true;
        }
        r.estimate = est;
        r.final_rel_error = r.exact == 0
                                ? std::abs(est)
                                : std::abs(est - double(r.exact)) / double(r.exact);
        r.max_rel_error = r.final_rel_error;
        r.success = !errored && r.final_rel_error <= tol;
    } else {
        StOptions opt;
        opt.knw_d0 = cfg.knw_d0;
        opt.oracle_w_multiplier = cfg.oracle_w_multiplier;
        StrongTracker st(cfg.eps, cfg.delta, cfg.universe_bits, algo_seed, opt);
        double worst = 0.0;
        double last = 0.0;
        bool monotone = true;
        bool in_band = true;
        // whole-trajectory band (1 +- eps)^2, per the doubling-point argument
        double lo_band = cfg.tolerance > 0 ? 1.0 - tol : (1.0 - cfg.eps) * (1.0 - cfg.eps);
        double hi_band = cfg.tolerance > 0 ? 1.0 + tol : (1.0 + cfg.eps) * (1.0 + cfg.eps);
        detail::replay(stream, [&](std::uint64_t t, std::uint64_t x, std::uint64_t f0, bool fresh) {
            StrongTracker::Report rep = st.update_and_report(x);
            if (rep.reported < last) monotone = false;
            last = rep.reported;
            double rel = std::abs(rep.reported - double(f0)) / double(f0);
            worst = std::max(worst, rel);
            if (rep.reported < lo_band * double(f0) || rep.reported > hi_band * double(f0))
                in_band = false;
            if ((fresh && detail::is_power_of_two(f0)) || t == stream.size())
                r.space_trace.emplace_back(t, st.serialized_bits());
        });
        r.exact = exact_f0(stream);
        r.estimate = last;
        r.max_rel_error = worst;
        r.final_rel_error = r.exact == 0
                                ? last
                                : std::abs(last - double(r.exact)) / double(r.exact);
        r.monotone = monotone;
        r.success = in_band && monotone;
    }
    return r;
}

// Per-trial seeds derive from (master_seed, index); aggregation is by trial
// index, so results are reproducible at any thread count.
inline AggregateReport run_trials(const AlgoConfig& cfg, const StreamSpec& spec,
                                  std::size_t trials, std::uint64_t master_seed,
                                  int threads = 1) {
    if (trials < 1) throw std::invalid_argument("run_trials: trials >= 1");
    AggregateReport agg;
    agg.per_trial.resize(trials);
    parallel_for(trials, threads, [&](std::size_t i) {
        agg.per_trial[i] = run_trial(cfg, spec, derive_seed(master_seed, i));
    });
    agg.trials = trials;
    std::vector<double> errs;
    std::vector<std::uint64_t> space;
    for (const TrialReport& t : agg.per_trial) {
        if (!t.success) ++agg.failures;
        agg.all_monotone &= t.monotone;
        agg.all_space_cap_ok &= t.space_cap_ok;
        errs.push_back(t.max_rel_error);
        std::uint64_t mx = 0;
        for (auto& [tt, bits] : t.space_trace) mx = std::max(mx, bits);
        space.push_back(mx);
    }
    agg.failure_rate = static_cast<double>(agg.failures) / static_cast<double>(trials);
    agg.wilson = wilson95(agg.failures, trials);
    agg.max_rel_error_p50 = median_lower(errs);
    agg.max_rel_error_max = *std::max_element(errs.begin(), errs.end());
    agg.space_bits_p50 = median_lower(space);
    agg.space_bits_max = *std::max_element(space.begin(), space.end());
    return agg;
}

// ---- Monte Carlo verifiers for the probabilistic building blocks ----

// Simulates t uniform balls into K bins with a full-entropy generator;
// independent oracle for the closed-form occupancy curve.
inline std::pair<double, double> phi_mc_oracle(std::uint64_t bins, std::uint64_t balls,
                                               std::size_t trials, std::uint64_t seed,
                                               int threads = 1) {
    if (trials < 1) throw std::invalid_argument("phi_mc_oracle: trials >= 1");
    std::vector<double> counts(trials);
    int use_threads = std::max(1, threads);
    std::vector<std::vector<std::uint32_t>> stamps(
        static_cast<std::size_t>(use_threads), std::vector<std::uint32_t>(bins, 0));
    std::atomic<std::size_t> next{0};
    auto worker = [&](int my_slot) {
        std::vector<std::uint32_t>& stamp = stamps[static_cast<std::size_t>(my_slot)];
        std::uint32_t epoch = 0;
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= trials) return;
            ++epoch;
            std::uint64_t st = derive_seed(seed, i);
            std::uint64_t occupied = 0;
            for (std::uint64_t b = 0; b < balls; ++b) {
                std::uint64_t bin = static_cast<std::uint64_t>(
                    (static_cast<unsigned __int128>(splitmix64(st)) * bins) >> 64);
                if (stamp[bin] != epoch) {
                    stamp[bin] = epoch;
                    ++occupied;
                }
            }
            counts[i] = static_cast<double>(occupied);
        }
    };
    if (use_threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < use_threads; ++t) pool.emplace_back(worker, t);
        for (auto& t : pool) t.join();
    }
    double mean = 0;
    for (double c : counts) mean += c;
    mean /= static_cast<double>(trials);
    double var = 0;
    for (double c : counts) var += (c - mean) * (c - mean);
    var /= trials > 1 ? static_cast<double>(trials - 1) : 1.0;
    double se = std::sqrt(var / static_cast<double>(trials));
    return {mean, se};
}

struct RandomWalkRow {
    double lambda;
    std::size_t exceed;
    double rate;
    double fitted_c;  // rate * lambda^2
};

// Heavy-tailed 4-wise independent walk: X = (B - p)/sqrt(p(1-p)) with
// B = [h(i) == 0] from a degree-4 hash, p = 1/T. Reports the empirical
// tail of sup |S_t| over lambda * sqrt(T) thresholds.
inline std::vector<RandomWalkRow> verify_random_walk_lemma(std::uint64_t horizon,
                                                           std::size_t trials,
                                                           const std::vector<double>& lambdas,
                                                           std::uint64_t seed,
                                                           int threads = 1) {
    if (!detail::is_power_of_two(horizon))
        throw std::invalid_argument("verify_random_walk_lemma: T must be a power of two");
    double p = horizon == 1 ? 0.5 : 1.0 / static_cast<double>(horizon);
    double denom = std::sqrt(p * (1.0 - p));
    int out_bits = horizon == 1 ? 1 : std::countr_zero(horizon);
    std::vector<double> sups(trials);
    parallel_for(trials, threads, [&](std::size_t i) {
        KWiseHash h = KWiseHash::create(4, 32, out_bits, derive_seed(seed, i));
        double s = 0.0, sup = 0.0;
        for (std::uint64_t t = 0; t < horizon; ++t) {
            double b = h.eval(t) == 0 ? 1.0 : 0.0;
            s += (b - p) / denom;
            sup = std::max(sup, std::abs(s));
        }
        sups[i] = sup;
    });
    double scale = std::sqrt(static_cast<double>(horizon));
    std::vector<RandomWalkRow> rows;
    for (double lam : lambdas) {
        std::size_t exceed = 0;
        for (double s : sups) exceed += s > lam * scale ? 1 : 0;
        double rate = static_cast<double>(exceed) / static_cast<double>(trials);
        rows.push_back({lam, exceed, rate, rate * lam * lam});
    }
    return rows;
}

struct SubexpTailRow {
    int lambda;
    std::size_t exceed;
    double rate;
    double bound;  // 4 * 2^-lambda
};

// Error tail of the FM level estimator at fixed F0 across hash seeds:
// P(|level - log2 F0| > lambda) against the 4 * 2^-lambda envelope.
inline std::vector<SubexpTailRow> verify_subexp_tails(std::uint64_t f0, std::size_t seeds,
                                                      int lambda_lo, int lambda_hi,
                                                      std::uint64_t seed, int threads = 1) {
    double lg = std::log2(static_cast<double>(f0));
    std::vector<double> devs(seeds);
    parallel_for(seeds, threads, [&](std::size_t i) {
        KWiseHash h = KWiseHash::create(2, 32, 32, derive_seed(seed, i));
        int level = -1;
        for (std::uint64_t n = 0; n < f0; ++n) {
            int l = lsb(h.eval(n), 32);
            if (l > level) level = l;
        }
        devs[i] = std::abs(static_cast<double>(level) - lg);
    });
    std::vector<SubexpTailRow> rows;
    for (int lam = lambda_lo; lam <= lambda_hi; ++lam) {
        std::size_t exceed = 0;
        for (double d : devs) exceed += d > lam ? 1 : 0;
        double rate = static_cast<double>(exceed) / static_cast<double>(seeds);
        rows.push_back({lam, exceed, rate, 4.0 * std::pow(2.0, -lam)});
    }
    return rows;
}

struct BallsBinsResult {
    double p75_scaled;           // 75th percentile of sup_t |phi - Phi| / sqrt(R)
    double p75_scaled_baseline;  // same with a full-entropy generator
    std::size_t trials;
};

// Tracks the running nonempty-bin count of q-wise throws against Phi and
// compares the sup deviation with a fully independent baseline.
inline BallsBinsResult verify_balls_bins(std::uint64_t bins, std::uint64_t throws,
                                         int q_degree, std::size_t trials,
                                         std::uint64_t seed, int threads = 1) {
    if (throws < 1) throw std::invalid_argument("verify_balls_bins: R >= 1");
    if (throws > bins / 20)
        throw std::invalid_argument("verify_balls_bins: needs R <= K/20");
    OccupancyModel model(bins);
    std::vector<double> dev(trials), dev_base(trials);
    int in_bits = std::max(1, static_cast<int>(std::bit_width(throws - 1)));
    parallel_for(trials, threads, [&](std::size_t i) {
        std::vector<std::uint32_t> stamp(bins, 0);
        for (int mode = 0; mode < 2; ++mode) {
            std::uint32_t epoch = static_cast<std::uint32_t>(mode + 1);
            KWiseHash h = KWiseHash::create(q_degree, in_bits, 61, derive_seed(seed, 2 * i));
            std::uint64_t st = derive_seed(seed, 2 * i + 1);
            std::uint64_t occupied = 0;
            double sup = 0.0;
            for (std::uint64_t t = 0; t < throws; ++t) {
                std::uint64_t bin;
                if (mode == 0) {
                    bin = h.eval_range(t, bins);
                } else {
                    bin = static_cast<std::uint64_t>(
                        (static_cast<unsigned __int128>(splitmix64(st)) * bins) >> 64);
                }
                if (stamp[bin] != epoch) {
                    stamp[bin] = epoch;
                    ++occupied;
                }
                sup = std::max(sup,
                               std::abs(double(occupied) - model.phi(double(t + 1))));
            }
            double scaled = sup / std::sqrt(static_cast<double>(throws));
            if (mode == 0)
                dev[i] = scaled;
            else
                dev_base[i] = scaled;
        }
    });
    auto p75 = [](std::vector<double> v) {
        std::size_t idx = (v.size() * 3) / 4;
        if (idx >= v.size()) idx = v.size() - 1;
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
        return v[idx];
    };
    return {p75(dev), p75(dev_base), trials};
}

}  // namespace f0
