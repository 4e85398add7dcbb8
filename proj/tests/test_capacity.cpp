#include "doctest.h"

#include "levysym/capacity.hpp"
#include "levysym/experiment.hpp"

#include <cmath>
#include <vector>

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

GridField interval(const Grid& g, double lo, double hi) {
    GridField f = make_field(g);
    for (std::size_t k = 0; k < f.values.size(); ++k) {
        double c[1];
        g.cell_center(k, c);
        if (c[0] > lo && c[0] < hi) f.values[k] = 1.0;
    }
    return f;
}

} // namespace

TEST_CASE("hitting time of a drifting point") {
    Grid g = make_grid(1, 4.0, 64);
    GridField A = interval(g, 2.0, 3.0);
    std::vector<double> times = uniform_times(4.0, 40); // dt = 0.1
    std::vector<double> pos(times.begin(), times.end()); // unit drift path
    double x[1] = {0.0};
    auto hit = hitting_time(times, pos.data(), 1, A, x);
    REQUIRE(hit.has_value());
    // first grid time with position inside (2, 3)
    CHECK(times[*hit] == doctest::Approx(2.1).epsilon(0.06));
    double far[1] = {-7.0};
    CHECK(!hitting_time(times, pos.data(), 1, A, far).has_value());
    double inside[1] = {2.5};
    auto now = hitting_time(times, pos.data(), 1, A, inside);
    REQUIRE(now.has_value());
    CHECK(*now == 0);
}

TEST_CASE("empty target has zero capacity") {
    Grid g = make_grid(1, 2.0, 32);
    McParams mc;
    mc.paths = 50;
    mc.steps = 20;
    mc.seed = 1;
    mc.trunc_n = 4;
    mc.horizon = 8.0;
    CapacityEstimate est = qcapacity(brownian(1), make_field(g), 1.0, mc);
    CHECK(est.value == 0.0);
    CHECK(est.std_error == 0.0);
}

TEST_CASE("capacity is monotone in the target set") {
    Grid g = make_grid(1, 4.0, 64);
    GridField A = interval(g, -0.5, 0.5);
    GridField B = interval(g, -1.0, 1.0);
    McParams mc;
    mc.paths = 400;
    mc.steps = 60;
    mc.seed = 11;
    mc.trunc_n = 4;
    mc.horizon = 6.0;
    CapacityEstimate ca = qcapacity(brownian(1), A, 1.0, mc);
    CapacityEstimate cb = qcapacity(brownian(1), B, 1.0, mc);
    // same paths: coverage of A is dominated by coverage of B path by path
    CHECK(ca.value <= cb.value + 1e-12);
}

TEST_CASE("capacity is deterministic and worker independent") {
    Grid g = make_grid(1, 2.0, 32);
    GridField A = interval(g, -0.5, 0.5);
    McParams mc;
    mc.paths = 128;
    mc.steps = 30;
    mc.seed = 13;
    mc.trunc_n = 4;
    mc.horizon = 6.0;
    mc.workers = 1;
    CapacityEstimate a = qcapacity(brownian(1), A, 1.0, mc);
    mc.workers = 4;
    CapacityEstimate b = qcapacity(brownian(1), A, 1.0, mc);
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);
}

TEST_CASE("capacity decreases along the q ladder") {
    Grid g = make_grid(1, 2.0, 32);
    GridField A = interval(g, -0.5, 0.5);
    McParams mc;
    mc.paths = 500;
    mc.steps = 80;
    mc.seed = 17;
    mc.trunc_n = 4;
    mc.horizon = 8.0;
    CoverageProfile cov = coverage_profile(brownian(1), A, mc);
    double prev = qcapacity_from(cov, 2.0).value;
    for (double q : {1.0, 0.5}) {
        double cur = qcapacity_from(cov, q).value;
        CHECK(cur <= prev + 1e-12);
        prev = cur;
    }
}

TEST_CASE("bridge identity: capacity equals the scaled sausage growth") {
    // For q > 0, q int E_x[e^{-q T_A}] dx can also be read off the expected
    // discounted growth of the covered volume; compare against a direct
    // trap-style survival computation on the same target.
    Grid g = make_grid(1, 4.0, 64);
    GridField A = interval(g, -1.0, 1.0);
    McParams mc;
    mc.paths = 1500;
    mc.steps = 100;
    mc.seed = 19;
    mc.trunc_n = 4;
    mc.horizon = 8.0;
    CapacityEstimate est = qcapacity(brownian(1), A, 1.0, mc);
    // Brownian motion, q = 1, A = [-1,1]: C^q = q|A| + 2 sqrt(q/2) * 2... the
    // half-line formula gives 2 + sqrt(2) ~ 3.4142
    double expect = 2.0 + std::numbers::sqrt2;
    CHECK(std::abs(est.value - expect) <=
          4.0 * est.std_error + est.spatial_truncation_bias_bound + 0.1);
}

TEST_CASE("zero capacity requires a transient process") {
    Grid g = make_grid(1, 2.0, 32);
    GridField A = interval(g, -0.5, 0.5);
    McParams mc;
    mc.paths = 50;
    mc.steps = 20;
    mc.seed = 1;
    mc.horizon = 4.0;
    CHECK_THROWS(zero_capacity(brownian(1), A, mc));
}

TEST_CASE("too-short horizons are rejected") {
    Grid g = make_grid(1, 2.0, 32);
    GridField A = interval(g, -0.5, 0.5);
    McParams mc;
    mc.paths = 50;
    mc.steps = 20;
    mc.seed = 1;
    mc.horizon = 0.5; // e^{-q t} far above the cutoff at q = 1
    CHECK_THROWS(qcapacity(brownian(1), A, 1.0, mc));
}

TEST_CASE("shifted target has the same capacity within error") {
    Grid g = make_grid(1, 4.0, 64);
    McParams mc;
    mc.paths = 800;
    mc.steps = 80;
    mc.seed = 23;
    mc.trunc_n = 4;
    mc.horizon = 8.0;
    ComparisonReport rep = verify_cap(brownian(1), interval(g, 0.0, 1.0), 1.0, mc);
    CHECK(rep.holds);
    ComparisonReport ctrl = verify_cap(brownian(1), interval(g, -0.5, 0.5), 1.0, mc);
    CHECK(ctrl.holds);
    CHECK(ctrl.margin == 0.0);
}
