#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "f0/bits.hpp"

// Explicit 8-regular Gabber-Galil expander on Z_m x Z_m with constant-time
// neighbor evaluation. The edge maps come in inverse pairs, so the neighbor
// multiset is symmetric and the adjacency matrix is symmetric.

namespace f0 {

struct Vertex {
    Coord x, y;
    bool operator==(const Vertex&) const = default;
};

class ExpanderGraph {
public:
    static constexpr int kDegree = 8;

    explicit ExpanderGraph(Coord side) : m_(side) {
        if (m_.is_zero()) throw std::invalid_argument("ExpanderGraph: side must be >= 1");
        coord_bits_ = -1;
        for (int k = 0; k <= 255; ++k) {
            Coord p;
            p.set_bits(k, 1, 1);
            if (p == m_) {
                coord_bits_ = k;
                break;
            }
        }
    }

    static ExpanderGraph from_side_u64(std::uint64_t m) { return ExpanderGraph(Coord::from_u64(m)); }

    // Side 2^k; required for bit-exact walk seeding.
    static ExpanderGraph power_of_two(int k) {
        Coord m;
        m.set_bits(k, 1, 1);
        return ExpanderGraph(m);
    }

    const Coord& side() const { return m_; }
    // log2(side) if the side is a power of two, -1 otherwise.
    int coord_bits() const { return coord_bits_; }

    // The 8 affine maps: (x+-y, y), (x+-y+-1, y), (x, y+-x), (x, y+-x+-1),
    // paired so edge e and edge e^1 are mutual inverses.
    Vertex neighbor(const Vertex& v, unsigned edge) const {
        if (edge >= kDegree) throw std::invalid_argument("ExpanderGraph: edge must be < 8");
        const Coord one = Coord::from_u64(m_ == Coord::from_u64(1) ? 0 : 1);
        switch (edge) {
            case 0: return {add_mod(v.x, v.y, m_), v.y};
            case 1: return {sub_mod(v.x, v.y, m_), v.y};
            case 2: return {add_mod(add_mod(v.x, v.y, m_), one, m_), v.y};
            case 3: return {sub_mod(sub_mod(v.x, v.y, m_), one, m_), v.y};
            case 4: return {v.x, add_mod(v.y, v.x, m_)};
            case 5: return {v.x, sub_mod(v.y, v.x, m_)};
            case 6: return {v.x, add_mod(add_mod(v.y, v.x, m_), one, m_)};
            default: return {v.x, sub_mod(sub_mod(v.y, v.x, m_), one, m_)};
        }
    }

    static unsigned inverse_edge(unsigned edge) { return edge ^ 1u; }

    // Seed bits consumed by a walk: start vertex plus 3 bits per step.
    static std::size_t walk_seed_bits(int coord_bits, std::size_t length, int stride = 1) {
        return 2 * static_cast<std::size_t>(coord_bits) +
               3 * static_cast<std::size_t>(stride) * (length - 1);
    }

    // Walk of `length` vertices, recording every stride-th position. The
    // start vertex comes from the first 2*coord_bits of the seed, each step
    // consumes 3 bits. Deterministic in the seed.
    template <typename Reader>
    std::vector<Vertex> walk_from(Reader&& next_bits, std::size_t length, int stride = 1) const {
        if (coord_bits_ < 0)
            throw std::invalid_argument("ExpanderGraph::walk: side must be a power of two");
        if (length < 1) throw std::invalid_argument("ExpanderGraph::walk: length must be >= 1");
        Vertex v;
        for (int lo = 0; lo < coord_bits_; lo += 64)
            v.x.set_bits(lo, std::min(64, coord_bits_ - lo),
                         next_bits(std::min(64, coord_bits_ - lo)));
        for (int lo = 0; lo < coord_bits_; lo += 64)
            v.y.set_bits(lo, std::min(64, coord_bits_ - lo),
                         next_bits(std::min(64, coord_bits_ - lo)));
        std::vector<Vertex> out;
        out.reserve(length);
        out.push_back(v);
        for (std::size_t i = 1; i < length; ++i) {
            for (int s = 0; s < stride; ++s)
                v = neighbor(v, static_cast<unsigned>(next_bits(3)));
            out.push_back(v);
        }
        return out;
    }

    std::vector<Vertex> walk(const BitString& seed, std::size_t length, int stride = 1) const {
        if (coord_bits_ < 0)
            throw std::invalid_argument("ExpanderGraph::walk: side must be a power of two");
        if (length < 1) throw std::invalid_argument("ExpanderGraph::walk: length must be >= 1");
        if (seed.size_bits() < walk_seed_bits(coord_bits_, length, stride))
            throw std::invalid_argument("ExpanderGraph::walk: seed too short");
        std::size_t pos = 0;
        auto rd = [&](int n) {
            std::uint64_t v = seed.read(pos, n);
            pos += static_cast<std::size_t>(n);
            return v;
        };
        return walk_from(rd, length, stride);
    }

private:
    Coord m_;
    int coord_bits_;
};

}  // namespace f0
