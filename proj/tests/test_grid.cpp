#include "doctest.h"

#include "levysym/grid.hpp"
#include "levysym/rng.hpp"

#include <cmath>

using namespace levysym;

namespace {

GridField random_field(const Grid& g, Rng& rng) {
    GridField f = make_field(g);
    for (double& v : f.values) v = rng.uniform();
    return f;
}

std::size_t mirror_index(const Grid& g, std::size_t k) {
    int idx[3];
    g.unflatten(k, idx);
    for (int a = 0; a < g.dim; ++a) idx[a] = g.points_per_axis - 1 - idx[a];
    return g.flatten(idx);
}

void symmetrize(GridField& f) {
    for (std::size_t k = 0; k < f.values.size(); ++k) {
        std::size_t mk = mirror_index(f.grid, k);
        double v = 0.5 * (f.values[k] + f.values[mk]);
        f.values[k] = f.values[mk] = v;
    }
}

} // namespace

TEST_CASE("grid geometry") {
    Grid g = make_grid(2, 1.5, 6);
    CHECK(g.spacing == doctest::Approx(0.5));
    CHECK(g.cell_count() == 36);
    // centers come in +/- pairs
    for (int k = 0; k < 6; ++k)
        CHECK(g.center(k) == doctest::Approx(-g.center(5 - k)));
    int idx[3];
    for (std::size_t f = 0; f < g.cell_count(); ++f) {
        g.unflatten(f, idx);
        CHECK(g.flatten(idx) == f);
    }
    CHECK_THROWS(make_grid(4, 1.0, 2));
    CHECK_THROWS(make_grid(1, 1.0, 5)); // odd
    CHECK_THROWS(make_grid(1, -1.0, 2));
}

TEST_CASE("integrate and deficit") {
    Grid g = make_grid(1, 2.0, 8);
    GridField f = make_field(g, 0.25);
    CHECK(integrate(f) == doctest::Approx(0.25 * 4.0));
    GridField bg = make_field(g, 0.5, 1.0);
    CHECK_THROWS(integrate(bg));
    CHECK(integrate_deficit(bg, 1.0) == doctest::Approx(0.5 * 4.0));
    f.values[3] = std::numeric_limits<double>::infinity();
    CHECK(std::isinf(integrate(f)));
    CHECK(f.has_hard_part());
}

TEST_CASE("convolution of interval indicators matches the hat function") {
    // 1_{(-a,a)} conv 1_{(-a,a)} = (2a - |x|)_+
    Grid g = make_grid(1, 4.0, 256);
    double a = 0.75;
    GridField f = make_field(g);
    for (std::size_t k = 0; k < f.values.size(); ++k) {
        double c[1];
        g.cell_center(k, c);
        if (std::abs(c[0]) < a) f.values[k] = 1.0;
    }
    GridField conv = convolve(f, f);
    for (std::size_t k = 0; k < conv.values.size(); ++k) {
        double c[1];
        g.cell_center(k, c);
        double expect = std::max(0.0, 2.0 * a - std::abs(c[0]));
        CHECK(std::abs(conv.values[k] - expect) <= 2.0 * g.spacing);
    }
    CHECK(integrate(conv) == doctest::Approx(integrate(f) * integrate(f)).epsilon(1e-10));
}

TEST_CASE("direct and transform paths agree") {
    Rng rng(11, 0);
    for (int dim = 1; dim <= 3; ++dim) {
        Grid g = make_grid(dim, 1.0, dim == 1 ? 64 : (dim == 2 ? 12 : 6));
        GridField f = random_field(g, rng);
        GridField h = random_field(g, rng);
        GridField a = convolve(f, h, ConvolvePath::Direct);
        GridField b = convolve(f, h, ConvolvePath::Transform);
        for (std::size_t k = 0; k < a.values.size(); ++k)
            CHECK(a.values[k] == doctest::Approx(b.values[k]).epsilon(1e-11));
    }
}

TEST_CASE("convolution is commutative bit for bit") {
    Rng rng(17, 0);
    Grid g = make_grid(2, 1.0, 10);
    GridField f = random_field(g, rng);
    GridField h = random_field(g, rng);
    GridField a = convolve(f, h, ConvolvePath::Direct);
    GridField b = convolve(h, f, ConvolvePath::Direct);
    for (std::size_t k = 0; k < a.values.size(); ++k)
        CHECK(a.values[k] == b.values[k]);
}

TEST_CASE("convolution of symmetric fields is symmetric") {
    Rng rng(23, 0);
    for (int dim = 1; dim <= 2; ++dim) {
        Grid g = make_grid(dim, 1.0, dim == 1 ? 32 : 8);
        GridField f = random_field(g, rng);
        GridField h = random_field(g, rng);
        symmetrize(f);
        symmetrize(h);
        GridField conv = convolve(f, h);
        for (std::size_t k = 0; k < conv.values.size(); ++k)
            CHECK(conv.values[k] ==
                  doctest::Approx(conv.values[mirror_index(g, k)]).epsilon(1e-13));
    }
}

TEST_CASE("convolution mass is preserved for confined supports") {
    Rng rng(29, 0);
    Grid g = make_grid(1, 4.0, 64);
    GridField f = make_field(g);
    GridField h = make_field(g);
    for (std::size_t k = 0; k < g.cell_count(); ++k) {
        double c[1];
        g.cell_center(k, c);
        if (std::abs(c[0]) < 1.5) {
            f.values[k] = rng.uniform();
            h.values[k] = rng.uniform();
        }
    }
    GridField conv = convolve(f, h);
    CHECK(integrate(conv) == doctest::Approx(integrate(f) * integrate(h)).epsilon(1e-12));
}

TEST_CASE("pointwise combine") {
    Grid g = make_grid(1, 1.0, 4);
    GridField f = make_field(g, 0.5, 1.0);
    GridField h = make_field(g, 0.25, 0.5);
    GridField prod = combine(f, h, PointwiseOp::Product);
    CHECK(prod.values[0] == 0.125);
    CHECK(prod.background == 0.5);
    GridField mn = combine(f, h, PointwiseOp::Min);
    CHECK(mn.values[0] == 0.25);
    GridField comp = combine(f, PointwiseOp::ComplementTo, 1.0);
    CHECK(comp.values[0] == 0.5);
    CHECK(comp.background == 0.0);
    GridField sc = combine(f, PointwiseOp::Scale, 4.0);
    CHECK(sc.values[0] == 2.0);
}

TEST_CASE("json round trip keeps infinities and exact doubles") {
    Rng rng(31, 0);
    Grid g = make_grid(2, 2.5, 6);
    GridField f = random_field(g, rng);
    f.background = 1.0;
    f.values[7] = std::numeric_limits<double>::infinity();
    GridField back = field_from_json(field_to_json(f));
    CHECK(back.grid == f.grid);
    CHECK(back.background == f.background);
    REQUIRE(back.values.size() == f.values.size());
    for (std::size_t k = 0; k < f.values.size(); ++k)
        CHECK(back.values[k] == f.values[k]);
}
