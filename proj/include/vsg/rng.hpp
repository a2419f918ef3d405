#ifndef VSG_RNG_HPP
#define VSG_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace vsg {

// Deterministic random stream. The engine (mt19937_64) is fully specified by
// the standard; the distributions are hand-rolled because the std:: ones are
// implementation-defined and would break byte-reproducibility across stdlibs.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : engine_(mix(seed + 0x9e3779b97f4a7c15ULL * (stream + 1))) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, n), unbiased via rejection.
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Box-Muller; draws a fresh pair per call so the stream position is
    // independent of call history.
    double normal(double mean, double stddev) {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double z = std::sqrt(-2.0 * std::log(u1)) *
                         std::cos(2.0 * 3.14159265358979323846 * u2);
        return mean + stddev * z;
    }

    // Fisher-Yates permutation of {0, ..., n-1}.
    std::vector<int> permutation(int n) {
        std::vector<int> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(uniform_below(static_cast<std::uint64_t>(i) + 1));
            std::swap(perm[i], perm[j]);
        }
        return perm;
    }

private:
    // splitmix64 finalizer, used only to spread seed/stream bits.
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
};

}  // namespace vsg

#endif
