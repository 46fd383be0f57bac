#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <unordered_map>

#include "f0/harness.hpp"
#include "f0/stream.hpp"

using namespace f0;

TEST_CASE("exact_f0 basics") {
    std::vector<std::uint64_t> empty;
    CHECK(exact_f0(empty) == 0);
    std::vector<std::uint64_t> triple = {5, 5, 5};
    CHECK(exact_f0(triple) == 1);
    std::vector<std::uint64_t> mixed = {1, 2, 1, 3, 2};
    CHECK(exact_f0(mixed) == 3);
    CHECK_THROWS_AS(exact_f0(mixed, 2), std::runtime_error);  // cap enforced
}

TEST_CASE("generator honors the distinct-count contract") {
    StreamSpec spec;
    spec.universe_bits = 20;
    spec.distinct_count = 12345;
    spec.duplication = Duplication::uniform_k;
    spec.dup_k = 3;
    spec.seed = 7;
    auto s = gen_stream(spec);
    CHECK(s.size() == 12345 * 3);
    CHECK(exact_f0(s) == 12345);

    spec.duplication = Duplication::zipf;
    spec.zipf_s = 1.1;
    spec.distinct_count = 10000;
    CHECK(exact_f0(gen_stream(spec)) == 10000);

    spec.distinct_count = 0;
    CHECK(gen_stream(spec).empty());
}

TEST_CASE("generator is deterministic in the seed") {
    StreamSpec spec;
    spec.universe_bits = 24;
    spec.distinct_count = 5000;
    spec.duplication = Duplication::zipf;
    spec.order = Order::shuffled;
    spec.seed = 42;
    CHECK(gen_stream(spec) == gen_stream(spec));
    spec.seed = 43;
    CHECK(gen_stream(spec) != gen_stream(StreamSpec{.universe_bits = 24,
                                                    .distinct_count = 5000,
                                                    .duplication = Duplication::zipf,
                                                    .order = Order::shuffled,
                                                    .seed = 42}));
}

TEST_CASE("adversarial blocks keep duplicates consecutive") {
    StreamSpec spec;
    spec.universe_bits = 16;
    spec.distinct_count = 200;
    spec.duplication = Duplication::uniform_k;
    spec.dup_k = 4;
    spec.order = Order::adversarial_blocks;
    spec.seed = 9;
    auto s = gen_stream(spec);
    std::unordered_map<std::uint64_t, int> last_pos;
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto it = last_pos.find(s[i]);
        if (it != last_pos.end()) CHECK(i == std::size_t(it->second) + 1);
        last_pos[s[i]] = int(i);
    }
}

TEST_CASE("dense universes draw without replacement") {
    StreamSpec spec;
    spec.universe_bits = 8;
    spec.distinct_count = 256;  // the whole universe
    spec.seed = 3;
    auto s = gen_stream(spec);
    CHECK(exact_f0(s) == 256);
    spec.distinct_count = 257;
    CHECK_THROWS_AS(gen_stream(spec), std::invalid_argument);
}

TEST_CASE("wilson interval matches a frozen reference") {
    WilsonInterval w = wilson95(0, 500);
    CHECK(w.lo == 0.0);
    CHECK(w.hi == doctest::Approx(0.007625).epsilon(1e-3));
    WilsonInterval v = wilson95(5, 500);
    CHECK(v.lo == doctest::Approx(0.00427).epsilon(1e-2));
    CHECK(v.hi == doctest::Approx(0.02324).epsilon(1e-2));
}

TEST_CASE("single trial aggregate equals the trial") {
    AlgoConfig cfg;
    cfg.mode = AlgoMode::constant;
    cfg.delta = 1.0 / 256;
    cfg.universe_bits = 24;
    StreamSpec spec;
    spec.universe_bits = 24;
    spec.distinct_count = 2000;
    AggregateReport agg = run_trials(cfg, spec, 1, 42);
    CHECK(agg.trials == 1);
    CHECK(agg.per_trial.size() == 1);
    CHECK(agg.failures == (agg.per_trial[0].success ? 0u : 1u));
    CHECK(agg.max_rel_error_max == agg.per_trial[0].max_rel_error);
}

TEST_CASE("aggregates are identical at different thread counts") {
    AlgoConfig cfg;
    cfg.mode = AlgoMode::high_accuracy;
    cfg.eps = 0.2;
    cfg.delta = 0.25;
    cfg.universe_bits = 24;
    StreamSpec spec;
    spec.universe_bits = 24;
    spec.distinct_count = 3000;
    spec.duplication = Duplication::uniform_k;
    spec.dup_k = 2;
    AggregateReport a = run_trials(cfg, spec, 12, 77, 1);
    AggregateReport b = run_trials(cfg, spec, 12, 77, 8);
    CHECK(a.failures == b.failures);
    CHECK(a.max_rel_error_max == b.max_rel_error_max);
    CHECK(a.space_bits_max == b.space_bits_max);
    REQUIRE(a.per_trial.size() == b.per_trial.size());
    for (std::size_t i = 0; i < a.per_trial.size(); ++i) {
        CHECK(a.per_trial[i].estimate == b.per_trial[i].estimate);
        CHECK(a.per_trial[i].space_trace == b.per_trial[i].space_trace);
    }
}

TEST_CASE("same master seed reproduces the aggregate") {
    AlgoConfig cfg;
    cfg.mode = AlgoMode::constant;
    cfg.delta = 1.0 / 256;
    cfg.universe_bits = 24;
    StreamSpec spec;
    spec.universe_bits = 24;
    spec.distinct_count = 1500;
    AggregateReport a = run_trials(cfg, spec, 6, 99, 2);
    AggregateReport b = run_trials(cfg, spec, 6, 99, 4);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(a.per_trial[i].estimate == b.per_trial[i].estimate);
}

TEST_CASE("phi_mc_oracle trivial cases are exact") {
    auto [m0, se0] = phi_mc_oracle(100, 0, 1000, 1);
    CHECK(m0 == 0.0);
    CHECK(se0 == 0.0);
    auto [m1, se1] = phi_mc_oracle(100, 1, 1000, 1);
    CHECK(m1 == 1.0);
    CHECK(se1 == 0.0);
}

TEST_CASE("phi_mc_oracle is thread-count independent") {
    auto a = phi_mc_oracle(500, 40, 5000, 9, 1);
    auto b = phi_mc_oracle(500, 40, 5000, 9, 4);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("random walk verifier: T = 1 tail equals the step tail") {
    auto rows = verify_random_walk_lemma(1, 4000, {0.4, 2.0}, 5);
    // with p = 1/2 each step is +-1, so sup = |X_1| = 1 exactly
    CHECK(rows[0].rate == 1.0);   // 1 > 0.4 always
    CHECK(rows[1].rate == 0.0);   // never above 2
}

TEST_CASE("random walk verifier rejects non powers of two") {
    CHECK_THROWS_AS(verify_random_walk_lemma(1000, 10, {2}, 1), std::invalid_argument);
}

TEST_CASE("random walk tail fits c / lambda^2 at a reduced horizon") {
    auto rows = verify_random_walk_lemma(1 << 10, 3000, {2, 4, 8}, 11);
    double c = 0;
    for (const auto& r : rows) c = std::max(c, r.fitted_c);
    CHECK(c <= 8.0);
    // tail vanishes for large lambda on a bounded sample
    auto far = verify_random_walk_lemma(1 << 10, 500, {64}, 13);
    CHECK(far[0].rate == 0.0);
}

TEST_CASE("balls and bins verifier basics") {
    CHECK_THROWS_AS(verify_balls_bins(100, 20, 8, 10, 1), std::invalid_argument);
    // R = 1: the single throw always occupies exactly one bin, phi(1) = 1
    auto one = verify_balls_bins(1000, 1, 4, 50, 3);
    CHECK(one.p75_scaled == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("balls and bins deviations stay near the independent baseline") {
    auto res = verify_balls_bins(2000, 100, 16, 500, 21);
    CHECK(res.p75_scaled <= 3.0);
    CHECK(res.p75_scaled <= 2.0 * res.p75_scaled_baseline + 1e-9);
}
