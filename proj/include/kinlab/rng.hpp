#pragma once

// Counter-based random numbers (Philox 4x32-10). Every Monte Carlo sample
// draws from a stream keyed by (seed, sample index), so results do not
// depend on how samples are scheduled across threads.

#include <Eigen/Core>
#include <cmath>
#include <cstdint>

namespace kinlab {

class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          ctr2_(static_cast<std::uint32_t>(stream)),
          ctr3_(static_cast<std::uint32_t>(stream >> 32)) {}

    std::uint32_t next_u32() {
        if (avail_ == 0) refill();
        return out_[--avail_];
    }

    // Uniform in [0,1).
    double next_double() {
        std::uint64_t hi = next_u32(), lo = next_u32();
        return static_cast<double>((hi << 21) ^ lo) * 0x1.0p-53;
    }

    // Uniform in (0,1], safe as a log() argument.
    double next_double_open() { return 1.0 - next_double(); }

    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u = next_double_open(), v = next_double();
        double r = std::sqrt(-2.0 * std::log(u));
        double a = 2.0 * M_PI * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    Eigen::VectorXd gaussian_vector(int n) {
        Eigen::VectorXd g(n);
        for (int i = 0; i < n; ++i) g[i] = next_gaussian();
        return g;
    }

    // Uniform point in the euclidean ball of the given radius: gaussian
    // direction scaled by radius * U^(1/dim).
    Eigen::VectorXd ball_point(int dim, double radius) {
        Eigen::VectorXd g = gaussian_vector(dim);
        double nrm = g.norm();
        if (nrm < 1e-300) return Eigen::VectorXd::Zero(dim);
        double r = radius * std::pow(next_double_open(), 1.0 / dim);
        return g * (r / nrm);
    }

private:
    static std::uint32_t mulhi(std::uint32_t a, std::uint32_t b) {
        return static_cast<std::uint32_t>((static_cast<std::uint64_t>(a) * b) >> 32);
    }

    void refill() {
        std::uint32_t c0 = ctr0_, c1 = ctr1_, c2 = ctr2_, c3 = ctr3_;
        std::uint32_t k0 = key0_, k1 = key1_;
        for (int round = 0; round < 10; ++round) {
            std::uint32_t lo0 = 0xD2511F53u * c0;
            std::uint32_t hi0 = mulhi(0xD2511F53u, c0);
            std::uint32_t lo1 = 0xCD9E8D57u * c2;
            std::uint32_t hi1 = mulhi(0xCD9E8D57u, c2);
            std::uint32_t n0 = hi1 ^ c1 ^ k0;
            std::uint32_t n1 = lo1;
            std::uint32_t n2 = hi0 ^ c3 ^ k1;
            std::uint32_t n3 = lo0;
            c0 = n0; c1 = n1; c2 = n2; c3 = n3;
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        out_[0] = c0; out_[1] = c1; out_[2] = c2; out_[3] = c3;
        avail_ = 4;
        if (++ctr0_ == 0) ++ctr1_;
    }

    std::uint32_t key0_, key1_;
    std::uint32_t ctr0_ = 0, ctr1_ = 0, ctr2_, ctr3_;
    std::uint32_t out_[4] = {0, 0, 0, 0};
    int avail_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Distinct sub-streams (suites, batch phases) derived from one master seed.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed ^ (tag * 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace kinlab
