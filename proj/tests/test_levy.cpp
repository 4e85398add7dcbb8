#include "doctest.h"

#include "levysym/levy.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <numbers>

using namespace levysym;

namespace {

LevyTriple brownian(int dim, double var = 1.0) {
    LevyTriple T;
    T.dim = dim;
    T.b.assign(dim, 0.0);
    T.A.assign(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) T.A[i * dim + i] = var;
    return T;
}

JumpSpec power_law(double c, double alpha, double r0, double r1) {
    JumpSpec j;
    j.family = JumpFamily::PowerLaw;
    j.plaw_c = c;
    j.plaw_alpha = alpha;
    j.plaw_r0 = r0;
    j.plaw_r1 = r1;
    return j;
}

} // namespace

TEST_CASE("triple validation") {
    LevyTriple T = brownian(2);
    CHECK_NOTHROW(validate_triple(T));
    T.A[1] = 0.5;
    CHECK_THROWS(validate_triple(T)); // not symmetric
    T.A[1] = T.A[2] = 0.5;
    CHECK_NOTHROW(validate_triple(T));
    T.A[0] = T.A[3] = 0.1; // eigenvalue 0.1 - 0.5 < 0
    CHECK_THROWS(validate_triple(T));
    T = brownian(1);
    T.atoms.push_back({{0.0}, 1.0});
    CHECK_THROWS(validate_triple(T)); // atom at origin
}

TEST_CASE("power law mass above the truncation radius") {
    // rho = |y|^{-1-3/2} on |y| < 1, d = 1: mass above 1/4 is
    // 2 * (4^{3/2} - 1) / (3/2) = 28/3
    JumpSpec j = power_law(1.0, 1.5, 0.0, 1.0);
    CHECK(jump_mass_above(j, 1, 0.25) == doctest::Approx(28.0 / 3.0).epsilon(1e-14));
    CHECK(std::isinf(jump_mass_above(j, 1, 0.0)));
    CHECK(jump_mass_above(j, 1, 1.0) == 0.0);
    // the truncation radius stored in the spec acts like a floor
    j.trunc_r = 0.5;
    CHECK(jump_mass_above(j, 1, 0.25) == jump_mass_above(power_law(1.0, 1.5, 0.0, 1.0), 1, 0.5));
}

TEST_CASE("gaussian and uniform ball masses") {
    JumpSpec g;
    g.family = JumpFamily::GaussianMixture;
    g.gauss.push_back({2.0, {0.0}, 1.0});
    CHECK(jump_mass_above(g, 1, 0.0) == doctest::Approx(2.0));
    // P(|Z| > 1) = 2(1 - Phi(1))
    CHECK(jump_mass_above(g, 1, 1.0) ==
          doctest::Approx(2.0 * std::erfc(1.0 / std::numbers::sqrt2)).epsilon(1e-12));

    JumpSpec u;
    u.family = JumpFamily::UniformBall;
    u.ub_mass = 3.0;
    u.ub_radius = 2.0;
    u.ub_center = {0.0, 0.0, 0.0};
    CHECK(jump_mass_above(u, 3, 1.0) == doctest::Approx(3.0 * (1.0 - 0.125)));
    u.ub_center = {0.5};
    CHECK(jump_mass_above(u, 1, 0.0) == doctest::Approx(3.0));
    // interval (-1.5, 2.5), cut (-1,1) has length 2 of 4
    CHECK(jump_mass_above(u, 1, 1.0) == doctest::Approx(1.5));
}

TEST_CASE("offset gaussian compensator matches numeric integration") {
    JumpSpec g;
    g.family = JumpFamily::GaussianMixture;
    g.gauss.push_back({1.5, {0.3}, 0.4});
    double out[1];
    jump_first_moment_band(g, 1, 0.1, 1.0, out);
    // crude Riemann check
    double acc = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) {
        double y = -1.0 + 2.0 * (i + 0.5) / n;
        if (std::abs(y) <= 0.1) continue;
        double z = (y - 0.3) / 0.4;
        acc += y * 1.5 * std::exp(-0.5 * z * z) /
               (0.4 * std::sqrt(2.0 * std::numbers::pi)) * (2.0 / n);
    }
    CHECK(out[0] == doctest::Approx(acc).epsilon(1e-4));
}

TEST_CASE("sampling above a cutoff matches the radial law") {
    JumpSpec j = power_law(1.0, 1.2, 0.0, 2.0);
    Rng rng(7, 0);
    const int n = 40000;
    double mean_r = 0.0;
    for (int i = 0; i < n; ++i) {
        double y[1];
        jump_sample_above(j, 1, 0.5, rng, y);
        double r = std::abs(y[0]);
        CHECK(r > 0.5);
        CHECK(r <= 2.0);
        mean_r += r;
    }
    mean_r /= n;
    // E[R] for density ~ r^{-1-a} on (lo, hi): (a/(lo^-a - hi^-a)) *
    // (lo^{1-a} - hi^{1-a})/(a-1)
    double a = 1.2, lo = 0.5, hi = 2.0;
    double norm = std::pow(lo, -a) - std::pow(hi, -a);
    double expect = a / norm * (std::pow(lo, 1.0 - a) - std::pow(hi, 1.0 - a)) / (a - 1.0);
    CHECK(mean_r == doctest::Approx(expect).epsilon(0.02));
}

TEST_CASE("truncation rate, drift compensation and atom bookkeeping") {
    LevyTriple T = brownian(1, 0.25);
    T.rho = power_law(1.0, 1.5, 0.0, 1.0);
    T.atoms.push_back({{0.5}, 2.0});  // inside the unit ball
    T.atoms.push_back({{-3.0}, 1.0}); // outside
    SimScheme S = truncate_triple(T, 4);
    CHECK(S.trunc_r == doctest::Approx(0.25));
    CHECK(S.c_n == doctest::Approx(28.0 / 3.0).epsilon(1e-13));
    CHECK(S.eps == doctest::Approx(1.0 / 16.0));
    CHECK(S.A_n[0] == doctest::Approx(0.25 + 1.0 / 16.0));
    // radial density contributes no first moment; only the inside atom shifts b
    CHECK(S.b_n[0] == doctest::Approx(-2.0 * 0.5));
    CHECK(S.atom_rate == doctest::Approx(3.0));
}

TEST_CASE("levy exponent of Brownian motion with drift") {
    LevyTriple T = brownian(1, 2.0);
    T.b = {0.7};
    double xi = 1.3;
    std::complex<double> psi = levy_exponent(T, &xi);
    CHECK(psi.real() == doctest::Approx(0.5 * 2.0 * xi * xi));
    CHECK(psi.imag() == doctest::Approx(-0.7 * xi));
    std::complex<double> cf = char_fn(T, &xi, 0.5);
    CHECK(std::abs(cf) == doctest::Approx(std::exp(-0.5 * psi.real())));
}

TEST_CASE("atom exponent closed form") {
    LevyTriple T = brownian(1, 0.0);
    T.A[0] = 0.0;
    T.atoms.push_back({{2.0}, 1.5}); // outside unit ball: no compensator
    double xi = 0.9;
    std::complex<double> psi = levy_exponent(T, &xi);
    CHECK(psi.real() == doctest::Approx(1.5 * (1.0 - std::cos(2.0 * xi))));
    CHECK(psi.imag() == doctest::Approx(-1.5 * std::sin(2.0 * xi)));
}

TEST_CASE("radial and line quadratures agree on nearly identical densities") {
    JumpSpec centered;
    centered.family = JumpFamily::UniformBall;
    centered.ub_mass = 2.0;
    centered.ub_radius = 0.8;
    centered.ub_center = {0.0};
    JumpSpec shifted = centered;
    shifted.ub_center = {1e-9}; // forces the non-radial path
    LevyTriple a = brownian(1, 0.0), b = a;
    a.rho = centered;
    b.rho = shifted;
    for (double xi : {0.4, 1.7, 5.0}) {
        std::complex<double> pa = levy_exponent(a, &xi);
        std::complex<double> pb = levy_exponent(b, &xi);
        CHECK(pa.real() == doctest::Approx(pb.real()).epsilon(1e-6));
        CHECK(std::abs(pb.imag()) < 1e-6);
    }
}

TEST_CASE("sampler matches the characteristic function of the scheme") {
    LevyTriple T = brownian(1, 0.5);
    T.b = {0.2};
    T.rho = power_law(0.4, 1.5, 0.0, 1.0);
    T.atoms.push_back({{1.5}, 0.8});
    SimScheme S = truncate_triple(T, 4);
    std::vector<double> times = {0.0, 0.5, 1.0};
    PathEnsemble e = sample_paths(S, times, 30000, 99);
    LevyTriple ST = scheme_as_triple(S);
    for (double xi : {0.3, 1.0, 2.0}) {
        for (std::size_t ti : {std::size_t(1), std::size_t(2)}) {
            double se = 0.0;
            std::complex<double> emp = empirical_cf(e, &xi, ti, &se);
            std::complex<double> exact = char_fn(ST, &xi, times[ti]);
            CHECK(std::abs(emp - exact) < 5.0 * se + 1e-12);
        }
    }
}

TEST_CASE("path generation is deterministic and worker independent") {
    LevyTriple T = brownian(2, 1.0);
    T.rho.family = JumpFamily::UniformBall;
    T.rho.ub_mass = 1.0;
    T.rho.ub_radius = 0.5;
    T.rho.ub_center = {0.0, 0.0};
    SimScheme S = truncate_triple(T, 4);
    std::vector<double> times = {0.0, 0.25, 0.5, 0.75, 1.0};
    PathEnsemble a = sample_paths(S, times, 500, 7, 1);
    PathEnsemble b = sample_paths(S, times, 500, 7, 8);
    CHECK(a.pos == b.pos);
    PathEnsemble c = sample_paths(S, times, 500, 8, 1);
    CHECK(a.pos != c.pos);
}

TEST_CASE("rearranged triple") {
    LevyTriple T = brownian(2);
    T.A = {2.0, 0.5, 0.5, 1.0}; // det = 1.75
    T.b = {1.0, -2.0};
    T.atoms.push_back({{1.0, 0.0}, 3.0});
    T.rho.family = JumpFamily::UniformBall;
    T.rho.ub_mass = 1.0;
    T.rho.ub_radius = 0.5;
    T.rho.ub_center = {0.0, 0.0};
    LevyTriple R = rearrange_triple(T);
    CHECK(R.b[0] == 0.0);
    CHECK(R.b[1] == 0.0);
    CHECK(R.A[0] == doctest::Approx(std::sqrt(1.75)));
    CHECK(R.A[3] == doctest::Approx(std::sqrt(1.75)));
    CHECK(R.A[1] == 0.0);
    CHECK(R.atoms.empty());
    CHECK(R.rho.family == JumpFamily::UniformBall); // already symmetric
}

TEST_CASE("asymmetric density rearranges onto a grid with the same mass") {
    JumpSpec g;
    g.family = JumpFamily::GaussianMixture;
    g.gauss.push_back({1.0, {2.0}, 0.5});
    g.gauss.push_back({0.5, {-1.0}, 0.25});
    JumpSpec r = jump_rearranged(g, 1);
    CHECK(r.family == JumpFamily::Grid);
    CHECK(jump_mass_above(r, 1, 0.0) == doctest::Approx(1.5).epsilon(1e-9));
    // symmetric decreasing: mass concentrates near 0
    CHECK(jump_mass_above(r, 1, 0.5) < jump_mass_above(g, 1, 0.5));
}

TEST_CASE("rearrangement of a symmetric power law is itself") {
    JumpSpec j = power_law(1.0, 1.5, 0.0, 1.0);
    JumpSpec r = jump_rearranged(j, 1);
    CHECK(r.family == JumpFamily::PowerLaw);
    CHECK(r.plaw_c == j.plaw_c);
}

TEST_CASE("triple json round trip") {
    LevyTriple T = brownian(1, 0.5);
    T.b = {0.25};
    T.rho = power_law(0.4, 1.5, 0.0, 1.0);
    T.atoms.push_back({{1.5}, 0.8});
    T.transient = true;
    LevyTriple back = triple_from_json(triple_to_json(T));
    CHECK(back.dim == T.dim);
    CHECK(back.b == T.b);
    CHECK(back.A == T.A);
    CHECK(back.rho.family == JumpFamily::PowerLaw);
    CHECK(back.rho.plaw_alpha == T.rho.plaw_alpha);
    REQUIRE(back.atoms.size() == 1);
    CHECK(back.atoms[0].y == T.atoms[0].y);
    CHECK(back.transient);
}

TEST_CASE("ensemble cache key and binary round trip") {
    LevyTriple T = brownian(1);
    SimScheme S = truncate_triple(T, 2);
    std::vector<double> times = {0.0, 1.0};
    std::string k1 = ensemble_cache_key(S, times, 100, 5);
    std::string k2 = ensemble_cache_key(S, times, 100, 5);
    std::string k3 = ensemble_cache_key(S, times, 100, 6);
    CHECK(k1 == k2);
    CHECK(k1 != k3);

    PathEnsemble e = sample_paths(S, times, 50, 5);
    auto path = std::filesystem::temp_directory_path() / ("ens-" + k1 + ".bin");
    save_ensemble(e, path.string());
    PathEnsemble back = load_ensemble(path.string());
    CHECK(back.times == e.times);
    CHECK(back.pos == e.pos);
    CHECK(back.seed == e.seed);
    std::filesystem::remove(path);
}
