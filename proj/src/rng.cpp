#include "levysym/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace levysym {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::uint32_t ctr[4], const std::uint32_t key[2]) {
    std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * ctr[0];
    std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * ctr[2];
    std::uint32_t out[4];
    out[0] = static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0];
    out[1] = static_cast<std::uint32_t>(p1);
    out[2] = static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1];
    out[3] = static_cast<std::uint32_t>(p0);
    ctr[0] = out[0];
    ctr[1] = out[1];
    ctr[2] = out[2];
    ctr[3] = out[3];
}

} // namespace

void Rng::refill() {
    std::uint32_t ctr[4] = {
        static_cast<std::uint32_t>(block_),
        static_cast<std::uint32_t>(block_ >> 32),
        static_cast<std::uint32_t>(stream_),
        static_cast<std::uint32_t>(stream_ >> 32),
    };
    std::uint32_t key[2] = {
        static_cast<std::uint32_t>(seed_),
        static_cast<std::uint32_t>(seed_ >> 32),
    };
    for (int r = 0; r < 10; ++r) {
        philox_round(ctr, key);
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    for (int i = 0; i < 4; ++i) buffer_[i] = ctr[i];
    buffered_ = 4;
    ++block_;
}

std::uint32_t Rng::next_u32() {
    if (buffered_ == 0) refill();
    return buffer_[--buffered_];
}

std::uint64_t Rng::next_u64() {
    std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_pos() {
    return 1.0 - uniform();
}

double Rng::uniform_range(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    double u = uniform_pos();
    double v = uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    double a = 2.0 * std::numbers::pi * v;
    spare_normal_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::uint64_t Rng::poisson(double mean) {
    if (mean < 0.0 || !std::isfinite(mean))
        throw std::invalid_argument("poisson: bad mean");
    if (mean == 0.0) return 0;
    // Exact for any mean: split into pieces with mean <= 32 (a sum of
    // independent Poissons is Poisson) and use inversion per piece.
    std::uint64_t total = 0;
    double remaining = mean;
    while (remaining > 0.0) {
        double chunk = remaining > 32.0 ? 32.0 : remaining;
        remaining -= chunk;
        double p = std::exp(-chunk);
        double cdf = p;
        double u = uniform();
        std::uint64_t k = 0;
        while (u > cdf && k < 2000) {
            ++k;
            p *= chunk / static_cast<double>(k);
            cdf += p;
        }
        total += k;
    }
    return total;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n == 0");
    // Rejection to avoid modulo bias.
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

void Rng::unit_vector(int dim, double* out) {
    switch (dim) {
        case 1:
            out[0] = uniform() < 0.5 ? -1.0 : 1.0;
            break;
        case 2: {
            double a = 2.0 * std::numbers::pi * uniform();
            out[0] = std::cos(a);
            out[1] = std::sin(a);
            break;
        }
        case 3: {
            double z = uniform_range(-1.0, 1.0);
            double a = 2.0 * std::numbers::pi * uniform();
            double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            out[0] = r * std::cos(a);
            out[1] = r * std::sin(a);
            out[2] = z;
            break;
        }
        default:
            throw std::invalid_argument("unit_vector: dim must be 1, 2 or 3");
    }
}

} // namespace levysym
