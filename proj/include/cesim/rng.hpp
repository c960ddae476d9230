#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cesim {

// splitmix64: used to derive independent sub-stream seeds from one master
// seed so that e.g. arrival sampling never shares state with policy sampling.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Thin deterministic wrapper around mt19937_64. The transforms are spelled
// out here (rather than std::uniform_real_distribution etc.) because the
// standard distributions are implementation-defined and results must be
// reproducible from a seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // independent generator for a named sub-stream of a master seed
    static Rng sub(std::uint64_t master, std::uint64_t tag) {
        return Rng(splitmix64(master ^ splitmix64(tag)));
    }

    std::uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n), unbiased via rejection
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = eng_();
        } while (v >= limit);
        return v % n;
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // exponential inter-arrival time, mean 1/rate
    double exponential(double rate) {
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return -std::log(u) / rate;
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace cesim
