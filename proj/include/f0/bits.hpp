#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <vector>

// Bit-level plumbing shared by every sketch: seed derivation, bit strings,
// variable-length integer codes and fixed-width wide unsigned integers.

namespace f0 {

class DecodeError : public std::runtime_error {
public:
    explicit DecodeError(const std::string& what) : std::runtime_error(what) {}
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stateless derivation of independent sub-seeds from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t label) {
    std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (label + 1));
    return splitmix64(s);
}

// Number of trailing zero bits; lsb(0) is the word width sentinel so that
// tracked levels stay finite (it occurs with probability 2^-width).
inline int lsb(std::uint64_t x, int width = 64) {
    return x == 0 ? width : std::countr_zero(x);
}

inline std::uint64_t zigzag_encode(std::int64_t d) {
    return (static_cast<std::uint64_t>(d) << 1) ^ static_cast<std::uint64_t>(d >> 63);
}

inline std::int64_t zigzag_decode(std::uint64_t z) {
    return static_cast<std::int64_t>((z >> 1) ^ (~(z & 1) + 1));
}

// Length in bits of the Elias gamma code of v >= 1.
inline std::size_t gamma_len(std::uint64_t v) {
    return 2 * static_cast<std::size_t>(std::bit_width(v)) - 1;
}

// Immutable bit string with canonical (zero-padded) storage.
class BitString {
public:
    BitString() = default;

    BitString(std::vector<std::uint64_t> words, std::size_t bits)
        : words_(std::move(words)), bits_(bits) {
        std::size_t need = (bits + 63) / 64;
        if (words_.size() != need) throw std::invalid_argument("BitString: word count mismatch");
        if (bits % 64 != 0 && !words_.empty()) {
            std::uint64_t mask = (std::uint64_t(1) << (bits % 64)) - 1;
            words_.back() &= mask;
        }
    }

    static BitString random(std::size_t bits, std::uint64_t seed) {
        std::vector<std::uint64_t> w((bits + 63) / 64);
        for (auto& x : w) x = splitmix64(seed);
        return BitString(std::move(w), bits);
    }

    std::size_t size_bits() const { return bits_; }
    const std::vector<std::uint64_t>& words() const { return words_; }

    // Reads n <= 64 bits starting at position pos (LSB-first stream).
    std::uint64_t read(std::size_t pos, int n) const {
        if (n == 0) return 0;
        if (n < 0 || n > 64 || pos + static_cast<std::size_t>(n) > bits_)
            throw std::out_of_range("BitString::read past end");
        std::size_t wi = pos / 64;
        int off = static_cast<int>(pos % 64);
        std::uint64_t lo = words_[wi] >> off;
        if (off + n > 64 && wi + 1 < words_.size()) lo |= words_[wi + 1] << (64 - off);
        if (n == 64) return lo;
        return lo & ((std::uint64_t(1) << n) - 1);
    }

    bool operator==(const BitString&) const = default;

private:
    std::vector<std::uint64_t> words_;
    std::size_t bits_ = 0;
};

// Append-only bit sink (LSB-first), used by the group codec and serializers.
class BitWriter {
public:
    void put(std::uint64_t v, int n) {
        if (n == 0) return;
        if (n < 0 || n > 64) throw std::invalid_argument("BitWriter::put width");
        if (n < 64) v &= (std::uint64_t(1) << n) - 1;
        std::size_t wi = bits_ / 64;
        int off = static_cast<int>(bits_ % 64);
        if (wi >= words_.size()) words_.push_back(0);
        words_[wi] |= v << off;
        if (off + n > 64) words_.push_back(v >> (64 - off));
        bits_ += static_cast<std::size_t>(n);
    }

    // Elias gamma code of v >= 1: (width-1) zeros, a one, then the low bits.
    void put_gamma(std::uint64_t v) {
        if (v == 0) throw std::invalid_argument("gamma code needs v >= 1");
        int nb = std::bit_width(v);
        put(0, nb - 1);
        put(1, 1);
        if (nb > 1) put(v, nb - 1);
    }

    std::size_t size_bits() const { return bits_; }

    BitString take() { return BitString(std::move(words_), bits_); }

private:
    std::vector<std::uint64_t> words_;
    std::size_t bits_ = 0;
};

class BitReader {
public:
    explicit BitReader(const BitString& bs) : bs_(bs) {}

    std::uint64_t get(int n) {
        if (pos_ + static_cast<std::size_t>(n) > bs_.size_bits())
            throw DecodeError("bit stream truncated");
        std::uint64_t v = bs_.read(pos_, n);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::uint64_t get_gamma() {
        int zeros = 0;
        while (get(1) == 0) {
            if (++zeros > 63) throw DecodeError("malformed gamma code");
        }
        if (zeros == 0) return 1;
        std::uint64_t rest = get(zeros);
        return (std::uint64_t(1) << zeros) | rest;
    }

    std::size_t pos() const { return pos_; }

private:
    const BitString& bs_;
    std::size_t pos_ = 0;
};

// Little-endian fixed-width unsigned integer. Only the operations the
// expander walks need: wrapping add/sub, compare, masking, bit extraction.
template <int Words>
struct WideUint {
    std::array<std::uint64_t, Words> limb{};

    static WideUint from_u64(std::uint64_t v) {
        WideUint r;
        r.limb[0] = v;
        return r;
    }

    bool operator==(const WideUint&) const = default;

    int cmp(const WideUint& o) const {
        for (int i = Words - 1; i >= 0; --i) {
            if (limb[i] != o.limb[i]) return limb[i] < o.limb[i] ? -1 : 1;
        }
        return 0;
    }
    bool operator<(const WideUint& o) const { return cmp(o) < 0; }
    bool operator>=(const WideUint& o) const { return cmp(o) >= 0; }

    WideUint& wrapping_add(const WideUint& o) {
        unsigned __int128 carry = 0;
        for (int i = 0; i < Words; ++i) {
            unsigned __int128 s = carry + limb[i] + o.limb[i];
            limb[i] = static_cast<std::uint64_t>(s);
            carry = s >> 64;
        }
        return *this;
    }

    WideUint& wrapping_sub(const WideUint& o) {
        std::uint64_t borrow = 0;
        for (int i = 0; i < Words; ++i) {
            std::uint64_t d = limb[i] - o.limb[i];
            std::uint64_t b2 = (limb[i] < o.limb[i]) ? 1 : 0;
            std::uint64_t d2 = d - borrow;
            if (d < borrow) b2 = 1;
            limb[i] = d2;
            borrow = b2;
        }
        return *this;
    }

    bool is_zero() const {
        for (auto v : limb)
            if (v != 0) return false;
        return true;
    }

    // Extracts n <= 64 bits starting at bit lo.
    std::uint64_t bits(int lo, int n) const {
        if (n == 0) return 0;
        int wi = lo / 64, off = lo % 64;
        std::uint64_t v = limb[wi] >> off;
        if (off + n > 64 && wi + 1 < Words) v |= limb[wi + 1] << (64 - off);
        if (n == 64) return v;
        return v & ((std::uint64_t(1) << n) - 1);
    }

    void set_bits(int lo, int n, std::uint64_t v) {
        if (n == 0) return;
        if (n < 64) v &= (std::uint64_t(1) << n) - 1;
        int wi = lo / 64, off = lo % 64;
        limb[wi] |= v << off;
        if (off + n > 64 && wi + 1 < Words) limb[wi + 1] |= v >> (64 - off);
    }

    WideUint& mask_low(int k) {
        for (int i = 0; i < Words; ++i) {
            int lo = i * 64;
            if (k <= lo) {
                limb[i] = 0;
            } else if (k < lo + 64) {
                limb[i] &= (std::uint64_t(1) << (k - lo)) - 1;
            }
        }
        return *this;
    }
};

template <int Words>
inline WideUint<Words> add_mod(WideUint<Words> a, const WideUint<Words>& b, const WideUint<Words>& m) {
    a.wrapping_add(b);
    if (a >= m) a.wrapping_sub(m);
    return a;
}

template <int Words>
inline WideUint<Words> sub_mod(WideUint<Words> a, const WideUint<Words>& b, const WideUint<Words>& m) {
    if (a < b) a.wrapping_add(m);
    a.wrapping_sub(b);
    return a;
}

using Coord = WideUint<4>;     // expander coordinates, up to 2^255
using Sample = WideUint<8>;    // sampled universe elements, up to 512 bits

// Builds the vertex index (x << k) | y as a Sample.
inline Sample vertex_index(const Coord& x, const Coord& y, int k) {
    Sample s;
    for (int lo = 0; lo < k; lo += 64) {
        int n = std::min(64, k - lo);
        s.set_bits(lo, n, y.bits(lo, n));
    }
    for (int lo = 0; lo < k; lo += 64) {
        int n = std::min(64, k - lo);
        s.set_bits(k + lo, n, x.bits(lo, n));
    }
    return s;
}

}  // namespace f0
