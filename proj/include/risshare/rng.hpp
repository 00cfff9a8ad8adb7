#pragma once

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <random>

namespace risshare {

// Seeded random source. The engine is std::mt19937_64 and every variate is
// derived from its raw 64-bit output with fixed arithmetic, so streams are
// reproducible across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // Independent substream keyed by (seed, tags...). Uses std::seed_seq,
    // whose mixing is fully specified by the standard.
    static Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    double normal();
    // Circularly symmetric complex Gaussian with unit variance.
    std::complex<double> complex_normal();

    // Text round trip of the full generator state.
    void save(std::ostream &out) const;
    void load(std::istream &in);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace risshare
