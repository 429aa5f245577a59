#pragma once

#include <cmath>
#include <cstdint>

namespace lcm {

// Deterministic RNG used everywhere in the project. The core generator is
// splitmix64; all variate transforms are implemented here rather than through
// std:: distributions, whose output is not specified across standard library
// implementations. Identical seeds therefore give identical streams on every
// platform.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stateless mix of a seed with up to three stream coordinates. Used to derive
// independent counter-based streams, e.g. one per (epoch, observation, kernel,
// sample) or one per simulated user.
inline std::uint64_t mix_key(std::uint64_t seed, std::uint64_t a = 0,
                             std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = seed;
    s ^= splitmix64(a) + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
    s ^= splitmix64(b) + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
    s ^= splitmix64(c) + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
    std::uint64_t t = s;
    return splitmix64(t);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform on [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on the open interval (0, 1); safe as a logit/log argument.
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // 64-bit multiply-shift; bias is < 2^-64 per draw, irrelevant here.
        return static_cast<std::uint64_t>(
            (static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform_open();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double gumbel(double location, double scale) {
        return location - scale * std::log(-std::log(uniform_open()));
    }

    // Mirrored exponential: support (-inf, location].
    double signed_exponential(double location, double scale) {
        return location + scale * std::log(uniform_open());
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// One uniform-(0,1) draw from a counter-based stream; the key encodes the
// stream coordinates so the draw is independent of evaluation order.
inline double counter_uniform_open(std::uint64_t seed, std::uint64_t a,
                                   std::uint64_t b, std::uint64_t c) {
    std::uint64_t k = mix_key(seed, a, b, c);
    return (static_cast<double>(splitmix64(k) >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace lcm
