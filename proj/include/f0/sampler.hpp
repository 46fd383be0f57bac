#pragma once

#include <cmath>
#include <cstdint>
#include <iterator>
#include <stdexcept>
#include <vector>

#include "f0/bits.hpp"
#include "f0/expander.hpp"

// Seed-efficient samplers built from expander walks: an averaging sampler
// (walk over the target universe) and the two-stage composed sampler that
// produces groups of estimator seeds. Every operation declares and checks
// its exact seed bit consumption.

namespace f0 {

// Walk repetition (steps between consecutive outputs) trades seed bits for
// sample quality; stride 32 makes outputs nearly independent for desk-scale
// counts, stride 1 is enough when only a sampled fraction must be preserved.
inline constexpr int kDefaultAveragingStride = 32;

inline std::size_t averaging_seed_bits(std::size_t count, int universe_bits, int stride) {
    int k = (universe_bits + 1) / 2;
    return ExpanderGraph::walk_seed_bits(k, count, stride);
}

// Walk over [2^universe_bits] embedded as Z_{2^k} x Z_{2^k}; every output is
// marginally uniform, and the empirical mean of any bounded f over the
// outputs concentrates per expander-walk Chernoff bounds.
inline std::vector<Sample> averaging_sample(const BitString& seed, std::size_t count,
                                            int universe_bits,
                                            int stride = kDefaultAveragingStride) {
    if (count < 1) throw std::invalid_argument("averaging_sample: count >= 1");
    if (universe_bits < 1 || universe_bits > 500)
        throw std::invalid_argument("averaging_sample: universe_bits out of range");
    if (seed.size_bits() < averaging_seed_bits(count, universe_bits, stride))
        throw std::invalid_argument("averaging_sample: seed too short");
    int k = (universe_bits + 1) / 2;
    ExpanderGraph g = ExpanderGraph::power_of_two(k);
    std::vector<Vertex> vs = g.walk(seed, count, stride);
    std::vector<Sample> out;
    out.reserve(count);
    for (const Vertex& v : vs) {
        Sample s = vertex_index(v.x, v.y, k);
        s.mask_low(universe_bits);
        out.push_back(s);
    }
    return out;
}

// True iff sum over the sequence of every test function stays within C per
// element: forall g, sum_x g(x) <= C * |seq|.
template <typename Seq, typename GFns>
bool c_small(const Seq& seq, const GFns& gs, double c) {
    if (std::size(seq) == 0) throw std::invalid_argument("c_small: empty sequence");
    for (const auto& g : gs) {
        double sum = 0;
        for (const auto& x : seq) sum += g(x);
        if (sum > c * static_cast<double>(std::size(seq))) return false;
    }
    return true;
}

struct XiParams {
    int universe_bits = 64;   // log M of the element universe
    std::size_t w = 16;       // total estimator budget
    std::size_t w2 = 0;       // group size; 0 derives max(8, ceil(4 log2 w))
    std::size_t w1 = 0;       // group count; 0 derives ceil(w / w2)
    std::size_t pool_size = 0;  // W; 0 derives min(w^4, 2^20), next power of two
    int group_stride = 4;     // steps between group members
    int pool_stride = 1;      // steps between pool entries
    std::size_t r_functions = 64;  // R test functions the smallness budget covers
    double group_size_k = 2.0;     // construction check: w2 >= k * log2(R)

    void derive() {
        if (w < 1) throw std::invalid_argument("XiParams: w >= 1");
        if (w2 == 0) {
            std::size_t v = static_cast<std::size_t>(std::ceil(4.0 * std::log2(double(w))));
            w2 = v < 8 ? 8 : v;
            if (w2 > w) w2 = w;
        }
        if (w1 == 0) w1 = (w + w2 - 1) / w2;
        if (pool_size == 0) {
            double p = std::pow(double(w), 4.0);
            pool_size = p > double(1 << 20) ? (std::size_t(1) << 20)
                                            : static_cast<std::size_t>(p);
        }
        pool_size = std::bit_ceil(pool_size);
    }
};

// Two-stage composed sampler: stage 1 picks a pool of W walk seeds with an
// averaging sampler over the walk-seed universe, stage 2 picks w1 uniform
// pool indices; each group is the expander walk the selected seed drives.
class XiSampler {
public:
    XiSampler(XiParams params, BitString seed_s1, BitString seed_s2)
        : p_(params), s1_(std::move(seed_s1)), s2_(std::move(seed_s2)) {
        p_.derive();
        if (p_.universe_bits < 1 || p_.universe_bits > 160)
            throw std::invalid_argument("XiSampler: universe_bits out of range");
        if (p_.w1 * p_.w2 < p_.w)
            throw std::invalid_argument("XiSampler: w1 * w2 must cover w");
        double need = p_.group_size_k * std::log2(double(p_.r_functions));
        if (double(p_.w2) < need)
            throw std::invalid_argument("XiSampler: group size below k * log2(R)");
        if (walk_seed_universe_bits(p_) > 500)
            throw std::invalid_argument("XiSampler: group walk seed exceeds sample width");
        if (s1_.size_bits() != seed1_bits(p_) || s2_.size_bits() != seed2_bits(p_))
            throw std::invalid_argument("XiSampler: seed length mismatch");
    }

    static XiSampler from_master_seed(XiParams params, std::uint64_t master_seed) {
        params.derive();
        BitString s1 = BitString::random(seed1_bits(params), derive_seed(master_seed, 0xA1));
        BitString s2 = BitString::random(seed2_bits(params), derive_seed(master_seed, 0xA2));
        return XiSampler(params, std::move(s1), std::move(s2));
    }

    // Seed length of one group walk over [2^universe_bits].
    static std::size_t walk_seed_universe_bits(const XiParams& p) {
        int k = (p.universe_bits + 1) / 2;
        return ExpanderGraph::walk_seed_bits(k, p.w2, p.group_stride);
    }

    static std::size_t seed1_bits(XiParams p) {
        p.derive();
        return averaging_seed_bits(p.pool_size, static_cast<int>(walk_seed_universe_bits(p)),
                                   p.pool_stride);
    }

    static std::size_t seed2_bits(XiParams p) {
        p.derive();
        return p.w1 * static_cast<std::size_t>(std::bit_width(p.pool_size - 1));
    }

    const XiParams& params() const { return p_; }
    const BitString& seed1() const { return s1_; }
    const BitString& seed2() const { return s2_; }
    std::size_t seed_bits_total() const { return s1_.size_bits() + s2_.size_bits(); }

    // The lemma regime asks w >= (log M)^Omega(1); desk configs sit below
    // w >= log M, so the gap is reported rather than enforced.
    bool within_lemma_regime() const { return p_.w >= static_cast<std::size_t>(p_.universe_bits); }

    // w1 groups of w2 elements of [2^universe_bits], deterministic in the seeds.
    std::vector<std::vector<Sample>> groups() const {
        int index_bits = std::bit_width(p_.pool_size - 1);
        std::vector<std::size_t> picks(p_.w1);
        for (std::size_t j = 0; j < p_.w1; ++j)
            picks[j] = s2_.read(j * index_bits, index_bits);

        std::size_t max_pick = 0;
        for (auto i : picks) max_pick = std::max(max_pick, i);

        // Stage 1: walk the pool, keeping only the selected walk seeds.
        int s0 = static_cast<int>(walk_seed_universe_bits(p_));
        int k1 = (s0 + 1) / 2;
        ExpanderGraph pool_graph = ExpanderGraph::power_of_two(k1);
        std::vector<Sample> selected(p_.w1);
        {
            std::size_t pos = 0;
            auto rd = [&](int n) {
                std::uint64_t v = s1_.read(pos, n);
                pos += static_cast<std::size_t>(n);
                return v;
            };
            Vertex v;
            for (int lo = 0; lo < k1; lo += 64)
                v.x.set_bits(lo, std::min(64, k1 - lo), rd(std::min(64, k1 - lo)));
            for (int lo = 0; lo < k1; lo += 64)
                v.y.set_bits(lo, std::min(64, k1 - lo), rd(std::min(64, k1 - lo)));
            for (std::size_t i = 0;; ++i) {
                for (std::size_t j = 0; j < p_.w1; ++j) {
                    if (picks[j] == i) {
                        Sample s = vertex_index(v.x, v.y, k1);
                        s.mask_low(s0);
                        selected[j] = s;
                    }
                }
                if (i >= max_pick) break;
                for (int s = 0; s < p_.pool_stride; ++s)
                    v = pool_graph.neighbor(v, static_cast<unsigned>(rd(3)));
            }
        }

        // Stage 2: each selected pool entry seeds one group walk.
        int kg = (p_.universe_bits + 1) / 2;
        ExpanderGraph group_graph = ExpanderGraph::power_of_two(kg);
        std::vector<std::vector<Sample>> out(p_.w1);
        for (std::size_t j = 0; j < p_.w1; ++j) {
            std::size_t pos = 0;
            auto rd = [&](int n) {
                std::uint64_t v = selected[j].bits(static_cast<int>(pos), n);
                pos += static_cast<std::size_t>(n);
                return v;
            };
            std::vector<Vertex> vs = group_graph.walk_from(rd, p_.w2, p_.group_stride);
            out[j].reserve(p_.w2);
            for (const Vertex& v : vs) {
                Sample s = vertex_index(v.x, v.y, kg);
                s.mask_low(p_.universe_bits);
                out[j].push_back(s);
            }
        }
        return out;
    }

private:
    XiParams p_;
    BitString s1_;
    BitString s2_;
};

}  // namespace f0
