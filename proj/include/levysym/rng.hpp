#pragma once

#include <cstdint>

namespace levysym {

// Philox4x32-10 counter-based generator. Streams are independent for
// distinct (seed, stream) pairs, so parallel path generation is
// order-independent and reproducible.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream) {}

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    // Uniform on [0,1) with 53 random bits.
    double uniform();
    // Uniform on (0,1], safe as a log() argument.
    double uniform_pos();
    double uniform_range(double lo, double hi);
    // Standard normal (Box-Muller, one spare cached).
    double normal();
    // Exact Poisson sample for any mean >= 0.
    std::uint64_t poisson(double mean);
    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);
    // Uniform direction on the unit sphere in dimension d (1, 2 or 3).
    void unit_vector(int dim, double* out);

    using result_type = std::uint32_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return 0xffffffffu; }
    result_type operator()() { return next_u32(); }

private:
    void refill();

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::uint32_t buffer_[4] = {0, 0, 0, 0};
    int buffered_ = 0;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

} // namespace levysym
