#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <unordered_set>
#include <vector>

#include "f0/knw.hpp"
#include "f0/occupancy.hpp"
#include "f0/stream.hpp"

using namespace f0;

namespace {

KnwConfig small_cfg(double eps = 0.3) {
    KnwConfig c;
    c.eps = eps;
    c.universe_bits = 24;
    return c;
}

}  // namespace

TEST_CASE("bucket count follows c0 / eps^2") {
    KnwConfig c;
    c.eps = 0.1;
    CHECK(c.buckets() == 10000);
    c.eps = 0.15;
    CHECK(c.buckets() == 4445);
}

TEST_CASE("fresh sketch: all sentinels, P bits, estimate zero") {
    KnwSketch s(small_cfg(), 1);
    CHECK(s.occupied() == 0);
    CHECK(s.space_bits() == s.buckets());
    CHECK(s.payload_bits() == 0);
    CHECK(s.query() == 0.0);
}

TEST_CASE("single counter at zero costs one extra bit") {
    KnwSketch s(small_cfg(), 2);
    // find an element with lsb(h1(x)) == 0 so its counter lands at 0
    std::uint64_t x = 0;
    for (;; ++x) {
        KnwSketch probe(small_cfg(), 2);
        probe.update(x, 1.0);
        if (probe.occupied() == 1 && probe.payload_bits() == 1) break;
        REQUIRE(x < 1000);
    }
    s.update(x, 1.0);
    CHECK(s.space_bits() == s.buckets() + 1);
}

TEST_CASE("duplicate inserts leave counters unchanged") {
    KnwSketch s(small_cfg(), 3);
    std::uint64_t st = 5;
    for (int i = 0; i < 500; ++i) s.update(splitmix64(st) & 0xffffff, double(i + 1));
    auto bytes = s.serialize();
    std::uint64_t st2 = 5;
    for (int i = 0; i < 100; ++i) s.update(splitmix64(st2) & 0xffffff, 500.0);
    CHECK(s.serialize() == bytes);
}

TEST_CASE("offset bump rebases every counter with clamping") {
    KnwSketch s(small_cfg(), 7);
    std::uint64_t st = 11;
    for (int i = 0; i < 2000; ++i) s.update(splitmix64(st) & 0xffffff, 1.0);
    REQUIRE(s.offset() == 0);

    KnwSketch t = KnwSketch::deserialize(s.serialize());
    // estimate large enough to force the offset up by exactly 2
    double est = std::ldexp(1.0, int(std::ceil(std::log2(1 / (0.3 * 0.3)))) + t.config().d0 + 2);
    REQUIRE(t.offset_target(est) == 2);
    std::uint64_t fresh = 0xABCDEF;
    s.update(fresh, 1.0);
    t.update(fresh, est);
    CHECK(t.offset() == 2);

    // every counter c becomes max(-1, c - 2)
    for (std::uint64_t b = 0; b < s.buckets(); ++b)
        CHECK(t.counter(b) == std::max(-1, s.counter(b) - 2));
    CHECK(t.occupied() <= s.occupied());
}

// Replaying the stream with the final offset fixed from the start gives the
// exact same state: clamped max commutes with rebasing.
TEST_CASE("rebase soundness: replay with final offset matches") {
    KnwConfig cfg = small_cfg(0.4);
    std::uint64_t st = 21;
    std::vector<std::uint64_t> xs;
    for (int i = 0; i < 3000; ++i) xs.push_back(splitmix64(st) & 0xffffff);

    KnwSketch live(cfg, 9);
    double est = 0;
    std::unordered_set<std::uint64_t> seen;
    for (auto x : xs) {
        seen.insert(x);
        est = double(seen.size());  // a perfect oracle, rising as the stream grows
        live.update(x, est);
    }

    KnwSketch replay(cfg, 9);
    // drive the offset to the final value first, then replay with it pinned
    replay.update(xs[0], est);
    REQUIRE(replay.offset() == live.offset());
    for (auto x : xs) replay.update(x, est);
    CHECK(replay.serialize() == live.serialize());
}

TEST_CASE("occupancy is nondecreasing under inserts at fixed offset") {
    KnwSketch s(small_cfg(), 13);
    std::uint64_t st = 31;
    std::uint64_t last = 0;
    for (int i = 0; i < 2000; ++i) {
        s.update(splitmix64(st) & 0xffffff, 1.0);
        CHECK(s.occupied() >= last);
        last = s.occupied();
    }
}

TEST_CASE("negative oracle estimate refused") {
    KnwSketch s(small_cfg(), 15);
    CHECK_THROWS_AS(s.update(1, -1.0), std::invalid_argument);
}

TEST_CASE("saturation raises an error") {
    KnwConfig c;
    c.eps = 2.2;  // 21 buckets
    c.universe_bits = 24;
    KnwSketch s(c, 17);
    std::uint64_t st = 41;
    for (int i = 0; i < 20000 && s.occupied() < s.buckets(); ++i)
        s.update(splitmix64(st) & 0xffffff, 1.0);
    REQUIRE(s.occupied() == s.buckets());
    CHECK_THROWS_AS(s.query(), SaturationError);
}

TEST_CASE("query inverts occupancy at offset zero") {
    KnwConfig c = small_cfg(0.1);  // P = 10^4
    KnwSketch s(c, 19);
    std::uint64_t st = 51;
    for (int i = 0; i < 400; ++i) s.update(splitmix64(st) & 0xffffff, 400.0);
    OccupancyModel m(10000);
    CHECK(s.offset() == 0);
    CHECK(s.query() == doctest::Approx(m.phi_inverse(double(s.occupied()))));
}

TEST_CASE("space accounting matches the serialized form") {
    KnwSketch s(small_cfg(), 23);
    std::uint64_t st = 61;
    for (int i = 0; i < 5000; ++i) s.update(splitmix64(st) & 0xffffff, double(1 + i));
    KnwSketch t = KnwSketch::deserialize(s.serialize());
    CHECK(t.space_bits() == s.space_bits());
    CHECK(t.payload_bits() == s.payload_bits());
    CHECK(t.occupied() == s.occupied());
    CHECK(s.serialized_bits() == KnwSketch::kHeaderBits + s.space_bits());
}

TEST_CASE("serialization round trips exactly and resumes identically") {
    KnwSketch s(small_cfg(), 27);
    std::uint64_t st = 71;
    for (int i = 0; i < 2500; ++i) s.update(splitmix64(st) & 0xffffff, double(i + 1));
    auto bytes = s.serialize();
    KnwSketch back = KnwSketch::deserialize(bytes);
    CHECK(back.serialize() == bytes);
    std::uint64_t st2 = st;
    for (int i = 0; i < 500; ++i) {
        std::uint64_t x = splitmix64(st2) & 0xffffff;
        s.update(x, 3000.0);
        back.update(x, 3000.0);
    }
    CHECK(back.serialize() == s.serialize());
    CHECK(back.query() == s.query());
}

// Side-by-side with an explicit-set simulation of the same hash classes:
// the sketch's final occupancy must match the simulated population mean
// within 3 combined standard errors.
TEST_CASE("final occupancy matches explicit-set simulation of the hash classes") {
    const std::uint64_t f0 = 30000;
    const int trials = 60;
    KnwConfig cfg;
    cfg.eps = 0.15;  // P = 4445
    cfg.universe_bits = 32;
    const std::uint64_t p = cfg.buckets();

    std::vector<double> q_sketch(trials), q_sim(trials);
    for (int t = 0; t < trials; ++t) {
        StreamSpec spec;
        spec.universe_bits = 32;
        spec.distinct_count = f0;
        spec.order = Order::sequential;
        spec.seed = derive_seed(81, t);
        std::vector<std::uint64_t> xs = gen_stream(spec);

        KnwSketch s(cfg, derive_seed(82, t));
        int final_d = s.offset_target(double(f0));
        for (auto x : xs) s.update(x, double(f0));
        REQUIRE(s.offset() == final_d);
        q_sketch[t] = double(s.occupied());

        // independent draw of the same hash classes, explicit subsampled set
        KWiseHash h1 = KWiseHash::create(cfg.h1_degree, 32, 32, derive_seed(83, t));
        KWiseHash h3 = KWiseHash::create(2, 32, 61, derive_seed(84, t));
        KWiseHash h4 = KWiseHash::create(polylog_degree(p), 61, 61, derive_seed(85, t));
        std::unordered_set<std::uint64_t> buckets_hit;
        for (auto x : xs) {
            if (lsb(h1.eval(x), 32) - final_d >= 0)
                buckets_hit.insert(h4.eval_range(h3.eval_range(x, p * p), p));
        }
        q_sim[t] = double(buckets_hit.size());
    }
    auto mean_se = [&](const std::vector<double>& v) {
        double m = 0;
        for (double x : v) m += x;
        m /= double(v.size());
        double var = 0;
        for (double x : v) var += (x - m) * (x - m);
        var /= double(v.size() - 1);
        return std::pair<double, double>(m, std::sqrt(var / double(v.size())));
    };
    auto [ms, ses] = mean_se(q_sketch);
    auto [mm, sem] = mean_se(q_sim);
    double combined = std::sqrt(ses * ses + sem * sem);
    CHECK(std::abs(ms - mm) <= 3 * combined);
}
