#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "f0/bits.hpp"

// k-wise independent polynomial hashing over a prime field. A degree-k seed
// (k coefficients) gives k-wise uniform outputs on any k fixed inputs; the
// production field is the Mersenne prime 2^61-1 (branch-free reduction,
// covers universes up to 2^60), small primes are used for exhaustive tests.

namespace f0 {

inline constexpr std::uint64_t kMersenne61 = (std::uint64_t(1) << 61) - 1;

namespace detail {

inline std::uint64_t mul_mod_mersenne61(std::uint64_t a, std::uint64_t b) {
    unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
    std::uint64_t lo = static_cast<std::uint64_t>(p) & kMersenne61;
    std::uint64_t hi = static_cast<std::uint64_t>(p >> 61);
    std::uint64_t s = lo + hi;
    if (s >= kMersenne61) s -= kMersenne61;
    return s;
}

inline std::uint64_t mul_mod_generic(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
    return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

}  // namespace detail

class KWiseHash {
public:
    // Coefficients drawn deterministically from `seed`; coefficients[i]
    // multiplies x^i. Same seed, same hash.
    static KWiseHash create(int degree, int universe_bits, int out_bits, std::uint64_t seed,
                            std::uint64_t field_modulus = kMersenne61) {
        std::vector<std::uint64_t> coeffs(static_cast<std::size_t>(degree));
        std::uint64_t s = seed;
        for (auto& c : coeffs) c = splitmix64(s) % field_modulus;
        return KWiseHash(std::move(coeffs), universe_bits, out_bits, field_modulus);
    }

    static KWiseHash from_coefficients(std::vector<std::uint64_t> coeffs, int universe_bits,
                                       int out_bits, std::uint64_t field_modulus = kMersenne61) {
        return KWiseHash(std::move(coeffs), universe_bits, out_bits, field_modulus);
    }

    // Raw field element, before output truncation.
    std::uint64_t eval_field(std::uint64_t x) const {
        std::uint64_t acc = 0;
        if (modulus_ == kMersenne61) {
            for (std::size_t i = coeffs_.size(); i-- > 0;) {
                acc = detail::mul_mod_mersenne61(acc, x);
                acc += coeffs_[i];
                if (acc >= kMersenne61) acc -= kMersenne61;
            }
        } else {
            for (std::size_t i = coeffs_.size(); i-- > 0;) {
                acc = detail::mul_mod_generic(acc, x, modulus_);
                acc += coeffs_[i];
                if (acc >= modulus_) acc -= modulus_;
            }
        }
        return acc;
    }

    // Low out_bits of the field element. k-wise uniform up to the negligible
    // modulus bias (measured in tests).
    std::uint64_t eval(std::uint64_t x) const {
        std::uint64_t v = eval_field(x);
        if (out_bits_ == 64) return v;
        return v & ((std::uint64_t(1) << out_bits_) - 1);
    }

    // Field element scaled to [0, range) -- for non power-of-two ranges.
    std::uint64_t eval_range(std::uint64_t x, std::uint64_t range) const {
        unsigned __int128 v = eval_field(x);
        return static_cast<std::uint64_t>(v * range >> 61);
    }

    int degree() const { return static_cast<int>(coeffs_.size()); }
    int universe_bits() const { return universe_bits_; }
    int out_bits() const { return out_bits_; }
    std::uint64_t field_modulus() const { return modulus_; }
    const std::vector<std::uint64_t>& coefficients() const { return coeffs_; }

private:
    KWiseHash(std::vector<std::uint64_t> coeffs, int universe_bits, int out_bits,
              std::uint64_t field_modulus)
        : coeffs_(std::move(coeffs)),
          universe_bits_(universe_bits),
          out_bits_(out_bits),
          modulus_(field_modulus) {
        if (coeffs_.empty() || coeffs_.size() > 64)
            throw std::invalid_argument("KWiseHash: degree must be in [1, 64]");
        if (universe_bits_ < 1 || universe_bits_ > 61)
            throw std::invalid_argument("KWiseHash: universe_bits must be in [1, 61]");
        if (out_bits_ < 1 || out_bits_ > 61)
            throw std::invalid_argument("KWiseHash: out_bits must be in [1, 61]");
        if (universe_bits_ < 61 && (std::uint64_t(1) << universe_bits_) > modulus_)
            throw std::invalid_argument("KWiseHash: field smaller than universe");
        for (auto c : coeffs_)
            if (c >= modulus_) throw std::invalid_argument("KWiseHash: coefficient >= modulus");
    }

    std::vector<std::uint64_t> coeffs_;
    int universe_bits_;
    int out_bits_;
    std::uint64_t modulus_;
};

// Degree of the polylog(P)-wise family used for bucket mixing: ceil(log2 P)^2,
// capped at 64 to keep evaluation constant time.
inline int polylog_degree(std::uint64_t p_range) {
    int lg = std::bit_width(p_range - 1);
    long long d = static_cast<long long>(lg) * lg;
    if (d < 2) d = 2;
    return static_cast<int>(d > 64 ? 64 : d);
}

}  // namespace f0
