#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

// Balls-and-bins occupancy: Phi_K(t) is the expected number of nonempty bins
// after t uniform balls into K bins, and Phi^-1 converts an observed
// occupancy back into a ball count. Bi-Lipschitz on t <= K/20.

namespace f0 {

class OccupancyModel {
public:
    explicit OccupancyModel(std::uint64_t bins) : k_(bins) {
        if (bins < 20) throw std::invalid_argument("OccupancyModel: needs K >= 20");
        log1m_ = std::log1p(-1.0 / static_cast<double>(k_));
    }

    std::uint64_t bins() const { return k_; }

    // K * (1 - (1 - 1/K)^t); strictly increasing, Phi(0) = 0, Phi(t) <= min(t, K).
    double phi(double t) const {
        if (t < 0) throw std::invalid_argument("phi: t must be >= 0");
        return -static_cast<double>(k_) * std::expm1(t * log1m_);
    }

    // t = ln(1 - q/K) / ln(1 - 1/K); q >= K has no finite preimage.
    double phi_inverse(double q) const {
        if (q < 0 || q >= static_cast<double>(k_))
            throw std::invalid_argument("phi_inverse: q must be in [0, K)");
        return std::log1p(-q / static_cast<double>(k_)) / log1m_;
    }

private:
    std::uint64_t k_;
    double log1m_;
};

}  // namespace f0
