#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "f0/harness.hpp"
#include "f0/occupancy.hpp"

using namespace f0;

TEST_CASE("phi at the origin and a single ball") {
    for (std::uint64_t k : {20ull, 100ull, 1000ull, 100000ull}) {
        OccupancyModel m(k);
        CHECK(m.phi(0) == 0.0);
        CHECK(m.phi(1) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("bins below 20 rejected") {
    CHECK_THROWS_AS(OccupancyModel(19), std::invalid_argument);
}

TEST_CASE("phi is strictly increasing and bounded by min(t, K)") {
    OccupancyModel m(1000);
    double prev = -1;
    for (int t = 0; t <= 3000; t += 7) {
        double v = m.phi(t);
        CHECK(v > prev);
        CHECK(v <= std::min<double>(t, 1000) + 1e-9);
        prev = v;
    }
    CHECK_THROWS_AS(m.phi(-1), std::invalid_argument);
}

TEST_CASE("phi_inverse basics and round trip") {
    OccupancyModel m(1000);
    CHECK(m.phi_inverse(0) == 0.0);
    double t = 37;
    CHECK(m.phi_inverse(m.phi(t)) == doctest::Approx(t).epsilon(1e-9));
    CHECK_THROWS_AS(m.phi_inverse(1000), std::invalid_argument);
    CHECK_THROWS_AS(m.phi_inverse(-0.5), std::invalid_argument);
}

TEST_CASE("composition identity within 1e-9 relative on [0, K/20]") {
    OccupancyModel m(1000);
    for (int t = 1; t <= 50; ++t) {
        double back = m.phi_inverse(m.phi(t));
        CHECK(std::abs(back - t) <= 1e-9 * t);
    }
}

// 0.9 (b - a) <= Phi(b) - Phi(a) <= (b - a) for all integer pairs up to K/20.
TEST_CASE("bi-Lipschitz inequality exact over all pairs at K = 1000") {
    OccupancyModel m(1000);
    std::vector<double> vals(51);
    for (int t = 0; t <= 50; ++t) vals[t] = m.phi(t);
    for (int a = 0; a <= 50; ++a) {
        for (int b = a; b <= 50; ++b) {
            double diff = vals[b] - vals[a];
            CHECK(diff >= 0.9 * (b - a));
            CHECK(diff <= double(b - a));
        }
    }
}

// Closed form vs. the Monte Carlo occupancy oracle within 3 standard errors.
TEST_CASE("phi matches the Monte Carlo oracle") {
    OccupancyModel m(1000);
    auto [mean, se] = phi_mc_oracle(1000, 50, 200000, 424242);
    CHECK(std::abs(m.phi(50) - mean) <= 3 * se);
}

TEST_CASE("phi_inverse of one occupied bucket stays near one") {
    OccupancyModel m(1000);
    double v = m.phi_inverse(1.0);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
    // series cross-check ln(1 - 1/K) ~ -1/K
    double series = -1000.0 * std::log1p(-1.0 / 1000.0);
    CHECK(std::abs(series - v) <= 1e-3);
}
