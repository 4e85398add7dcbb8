#include "doctest.h"

#include "levysym/grid.hpp"
#include "levysym/rearrange.hpp"
#include "levysym/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

using namespace levysym;

namespace {

GridField random_field(const Grid& g, Rng& rng) {
    GridField f = make_field(g);
    for (double& v : f.values) v = rng.uniform();
    return f;
}

double dist2(const Grid& g, std::size_t k) {
    double c[3], s = 0.0;
    g.cell_center(k, c);
    for (int a = 0; a < g.dim; ++a) s += c[a] * c[a];
    return s;
}

} // namespace

TEST_CASE("ball radius closed forms") {
    CHECK(ball_radius(2.0, 1) == doctest::Approx(1.0));
    CHECK(ball_radius(std::numbers::pi, 2) == doctest::Approx(1.0));
    CHECK(ball_radius(4.0 * std::numbers::pi / 3.0, 3) == doctest::Approx(1.0));
}

TEST_CASE("distance order is nondecreasing with lexicographic ties") {
    Grid g = make_grid(2, 1.0, 8);
    const auto& order = distance_order(g);
    REQUIRE(order.size() == g.cell_count());
    for (std::size_t i = 1; i < order.size(); ++i) {
        double a = dist2(g, order[i - 1]);
        double b = dist2(g, order[i]);
        CHECK(a <= b);
        if (a == b) CHECK(order[i - 1] < order[i]);
    }
}

TEST_CASE("rearrangement is an exact permutation and radially nonincreasing") {
    Rng rng(5, 0);
    for (int dim = 1; dim <= 2; ++dim) {
        Grid g = make_grid(dim, 1.0, dim == 1 ? 64 : 16);
        GridField f = random_field(g, rng);
        GridField r = rearrange_fn(f);
        std::vector<double> a = f.values, b = r.values;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b); // exact multiset equality
        const auto& order = distance_order(g);
        for (std::size_t i = 1; i < order.size(); ++i)
            CHECK(r.values[order[i - 1]] >= r.values[order[i]]);
    }
}

TEST_CASE("rearrangement is idempotent") {
    Rng rng(7, 0);
    Grid g = make_grid(2, 1.0, 10);
    GridField r = rearrange_fn(random_field(g, rng));
    GridField rr = rearrange_fn(r);
    CHECK(rr.values == r.values);
}

TEST_CASE("Hardy-Littlewood inequality") {
    Rng rng(9, 0);
    for (int trial = 0; trial < 50; ++trial) {
        Grid g = make_grid(trial % 2 + 1, 1.0, trial % 2 ? 12 : 40);
        GridField f = random_field(g, rng);
        GridField h = random_field(g, rng);
        GridField fr = rearrange_fn(f);
        GridField hr = rearrange_fn(h);
        double raw = 0.0, re = 0.0;
        for (std::size_t k = 0; k < f.values.size(); ++k) {
            raw += f.values[k] * h.values[k];
            re += fr.values[k] * hr.values[k];
        }
        CHECK(raw <= re + 1e-12 * re);
    }
}

TEST_CASE("set rearrangement preserves volume and indicator structure") {
    Rng rng(13, 0);
    Grid g = make_grid(2, 1.0, 12);
    GridField A = make_field(g);
    for (double& v : A.values) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
    GridField Ar = rearrange_set(A);
    CHECK(integrate(Ar) == integrate(A));
    for (double v : Ar.values) CHECK((v == 0.0 || v == 1.0));
    GridField bad = make_field(g, 0.5);
    CHECK_THROWS(rearrange_set(bad));
}

TEST_CASE("increasing rearrangement") {
    Rng rng(15, 0);
    Grid g = make_grid(1, 1.0, 32);
    GridField phi = make_field(g, 0.0, 1.0);
    for (double& v : phi.values) v = rng.uniform();
    GridField up = increasing_rearrange(phi, 1.0);
    CHECK(up.background == 1.0);
    // deficit multiset is preserved
    std::vector<double> a, b;
    for (double v : phi.values) a.push_back(1.0 - v);
    for (double v : up.values) b.push_back(1.0 - v);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15));
    // radially nondecreasing
    const auto& order = distance_order(g);
    for (std::size_t i = 1; i < order.size(); ++i)
        CHECK(up.values[order[i - 1]] <= up.values[order[i]]);
}

namespace {

// Literal domination check: for every volume k, compare the deficit of
// varphi outside the k nearest cells with the minimum over all k-subsets of
// the deficit of phi outside the subset.
bool brute_dominates(const GridField& varphi, const GridField& phi, double sigma) {
    const std::size_t n = varphi.values.size();
    REQUIRE(n <= 16);
    const auto& order = distance_order(varphi.grid);
    std::vector<double> dv(n), dp(n);
    double tv = 0.0, tp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dv[i] = sigma - varphi.values[i];
        dp[i] = sigma - phi.values[i];
        tv += dv[i];
        tp += dp[i];
    }
    double tol = 1e-12 * std::max(tv, tp);
    for (std::size_t k = 0; k <= n; ++k) {
        double lhs = tv;
        for (std::size_t i = 0; i < k; ++i) lhs -= dv[order[i]];
        double best = std::numeric_limits<double>::infinity();
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
            double outside = tp;
            for (std::size_t i = 0; i < n; ++i)
                if (mask & (1u << i)) outside -= dp[i];
            best = std::min(best, outside);
        }
        if (lhs > best + tol) return false;
    }
    return true;
}

} // namespace

TEST_CASE("domination agrees with the exhaustive subset check") {
    Rng rng(21, 0);
    int agree = 0, positive = 0, negative = 0;
    for (int trial = 0; trial < 60; ++trial) {
        Grid g = make_grid(1, 1.0, 12);
        GridField phi = make_field(g, 0.0, 1.0);
        for (double& v : phi.values) v = rng.uniform();
        GridField varphi;
        if (trial % 2 == 0) {
            varphi = increasing_rearrange(phi, 1.0); // dominates by construction
        } else {
            varphi = make_field(g, 0.0, 1.0);
            for (double& v : varphi.values) v = rng.uniform();
        }
        bool expect = brute_dominates(varphi, phi, 1.0);
        DominationReport rep = dominates(varphi, phi, 1.0);
        CHECK(rep.holds == expect);
        agree += rep.holds == expect;
        (expect ? positive : negative)++;
    }
    CHECK(agree == 60);
    CHECK(positive > 0); // both outcomes must actually occur
    CHECK(negative > 0);
}

TEST_CASE("increasing rearrangement dominates the original") {
    Rng rng(27, 0);
    for (int trial = 0; trial < 20; ++trial) {
        Grid g = make_grid(trial % 2 + 1, 1.0, trial % 2 ? 10 : 48);
        GridField phi = make_field(g, 0.0, 1.0);
        for (double& v : phi.values) v = rng.uniform();
        GridField up = increasing_rearrange(phi, 1.0);
        CHECK(dominates(up, phi, 1.0).holds);
    }
}

TEST_CASE("convolution of 1d symmetric decreasing fields stays symmetric decreasing") {
    Rng rng(33, 0);
    Grid g = make_grid(1, 2.0, 64);
    GridField f = rearrange_fn(random_field(g, rng));
    GridField h = rearrange_fn(random_field(g, rng));
    GridField conv = convolve(f, h);
    GridField conv_r = rearrange_fn(conv);
    for (std::size_t k = 0; k < conv.values.size(); ++k)
        CHECK(conv.values[k] == doctest::Approx(conv_r.values[k]).epsilon(1e-12));
}
