#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "f0/bits.hpp"

// Deterministic stream generation and the exact distinct-count oracle used
// to grade every estimator at desk scale.

namespace f0 {

enum class Duplication { none, uniform_k, zipf };
enum class Order { sequential, shuffled, adversarial_blocks };

struct StreamSpec {
    int universe_bits = 32;
    std::uint64_t distinct_count = 0;
    Duplication duplication = Duplication::none;
    std::uint32_t dup_k = 3;   // copies per element under uniform_k
    double zipf_s = 1.1;
    Order order = Order::shuffled;
    std::uint64_t seed = 0;
};

// Exact F0 via an explicit set; refuses past the memory cap (desk scale only).
inline std::uint64_t exact_f0(std::span<const std::uint64_t> stream,
                              std::size_t element_cap = (std::size_t(1) << 27)) {
    std::unordered_set<std::uint64_t> seen;
    for (std::uint64_t x : stream) {
        seen.insert(x);
        if (seen.size() > element_cap)
            throw std::runtime_error("exact_f0: memory cap exceeded");
    }
    return seen.size();
}

// Deterministic in the seed; exactly distinct_count distinct values with the
// declared duplication and arrival order.
inline std::vector<std::uint64_t> gen_stream(const StreamSpec& spec) {
    if (spec.universe_bits < 1 || spec.universe_bits > 61)
        throw std::invalid_argument("gen_stream: universe_bits must be in [1, 61]");
    if (spec.universe_bits < 61 &&
        spec.distinct_count > (std::uint64_t(1) << spec.universe_bits))
        throw std::invalid_argument("gen_stream: distinct_count exceeds universe");
    if (spec.duplication == Duplication::zipf && !(spec.zipf_s > 0))
        throw std::invalid_argument("gen_stream: zipf exponent must be positive");

    std::uint64_t state = derive_seed(spec.seed, 0xE0);
    std::uint64_t mask = spec.universe_bits == 64
                             ? ~std::uint64_t(0)
                             : (std::uint64_t(1) << spec.universe_bits) - 1;

    std::vector<std::uint64_t> values;
    values.reserve(spec.distinct_count);
    if (spec.universe_bits <= 24 &&
        spec.distinct_count * 2 > (std::uint64_t(1) << spec.universe_bits)) {
        // dense regime: draw from a shuffled enumeration of the universe
        std::vector<std::uint64_t> all(std::uint64_t(1) << spec.universe_bits);
        std::iota(all.begin(), all.end(), 0);
        for (std::size_t i = all.size(); i > 1; --i) {
            std::size_t j = splitmix64(state) % i;
            std::swap(all[i - 1], all[j]);
        }
        values.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(spec.distinct_count));
    } else {
        std::unordered_set<std::uint64_t> seen;
        seen.reserve(spec.distinct_count * 2);
        while (values.size() < spec.distinct_count) {
            std::uint64_t v = splitmix64(state) & mask;
            if (seen.insert(v).second) values.push_back(v);
        }
    }

    std::vector<std::uint64_t> reps(values.size(), 1);
    if (spec.duplication == Duplication::uniform_k) {
        std::fill(reps.begin(), reps.end(), std::max<std::uint32_t>(1, spec.dup_k));
    } else if (spec.duplication == Duplication::zipf) {
        // heavy head: element i repeated ~ d/2 * (i+1)^-s times, at least once
        double head = static_cast<double>(values.size()) / 2.0;
        for (std::size_t i = 0; i < reps.size(); ++i) {
            double r = std::floor(head / std::pow(static_cast<double>(i + 1), spec.zipf_s));
            reps[i] = r < 1 ? 1 : static_cast<std::uint64_t>(r);
        }
    }

    std::vector<std::uint64_t> out;
    std::size_t total = 0;
    for (std::uint64_t r : reps) total += r;
    out.reserve(total);

    switch (spec.order) {
        case Order::sequential: {
            // distinct values first, remaining copies appended round-robin
            out.insert(out.end(), values.begin(), values.end());
            bool more = true;
            for (std::uint64_t round = 1; more; ++round) {
                more = false;
                for (std::size_t i = 0; i < values.size(); ++i) {
                    if (reps[i] > round) {
                        out.push_back(values[i]);
                        more = true;
                    }
                }
            }
            break;
        }
        case Order::adversarial_blocks: {
            // all copies of an element arrive consecutively
            for (std::size_t i = 0; i < values.size(); ++i)
                for (std::uint64_t r = 0; r < reps[i]; ++r) out.push_back(values[i]);
            break;
        }
        case Order::shuffled: {
            for (std::size_t i = 0; i < values.size(); ++i)
                for (std::uint64_t r = 0; r < reps[i]; ++r) out.push_back(values[i]);
            for (std::size_t i = out.size(); i > 1; --i) {
                std::size_t j = splitmix64(state) % i;
                std::swap(out[i - 1], out[j]);
            }
            break;
        }
    }
    return out;
}

}  // namespace f0
