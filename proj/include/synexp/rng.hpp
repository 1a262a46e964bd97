#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>

#include "synexp/hashing.hpp"

namespace synexp {

/// Deterministic random stream. Wraps std::mt19937_64 (whose output sequence
/// is fully specified by the standard) and hand-rolls every variate so that
/// results do not depend on the standard library's distribution
/// implementations. All randomness in the project flows through named
/// sub-streams derived from one root seed; see stream_seed().
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller. Consumes exactly two draws per call.
    double normal() {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Sample an index from an (unnormalized is fine) non-negative weight vector.
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw std::invalid_argument("categorical: weights must have positive mass");
        double u = uniform() * total;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            u -= weights[i];
            if (u < 0.0) return i;
        }
        return weights.size() - 1;
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[uniform_int(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Derive the seed of a named sub-stream from a root seed. Extra integer ids
/// (iteration, episode, turn, ...) fold in so that parallel consumers get
/// independent streams regardless of scheduling.
inline std::uint64_t stream_seed(std::uint64_t root, std::string_view name) {
    return hash_combine(root, fnv1a64(name));
}

template <typename... Ids>
std::uint64_t stream_seed(std::uint64_t root, std::string_view name, Ids... ids) {
    std::uint64_t h = stream_seed(root, name);
    ((h = hash_combine(h, static_cast<std::uint64_t>(ids))), ...);
    return h;
}

}  // namespace synexp
