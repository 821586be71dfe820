#ifndef UQSIM_RNG_HPP
#define UQSIM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace uqsim {

// FNV-1a over a string, used to derive substream seeds from stream names.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// One substream per (role, entity). Streams are seeded from
// hash(master_seed, name) so adding an instance to a scenario never
// perturbs the draws of existing instances.
inline std::uint64_t derive_stream_seed(std::uint64_t master, std::string_view name) {
    return splitmix64(master ^ fnv1a(name));
}

// A named random stream. Sampling is implemented directly on top of the
// raw 64-bit output (not std::*_distribution, whose algorithms are
// implementation-defined), so identical seeds give identical draws on
// every platform.
class RngStream {
  public:
    RngStream() : gen_(0) {}
    explicit RngStream(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() {
        ++draws_;
        return gen_();
    }

    // Uniform on the open interval (0, 1).
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Uniform on [0, n).
    std::uint64_t uniform_below(std::uint64_t n) {
        return next_u64() % n;
    }

    double exponential(double mean) {
        return -mean * std::log(uniform01());
    }

    double normal() {
        // Box-Muller; one fresh pair per call keeps draw counts predictable.
        double u1 = uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double lognormal(double mu, double sigma) {
        return std::exp(mu + sigma * normal());
    }

    // Number of raw draws consumed so far (used by tests).
    std::uint64_t draw_count() const { return draws_; }

  private:
    std::mt19937_64 gen_;
    std::uint64_t draws_ = 0;
};

}  // namespace uqsim

#endif
