#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace levysym {

// Uniform centered grid on [-L,L]^d, d in {1,2,3}. Cell centers at
// -L + (k+1/2)h per axis, h = 2L/m, m even so centers come in +/- pairs.
struct Grid {
    int dim = 1;
    double half_extent = 1.0;
    int points_per_axis = 2;
    double spacing = 1.0;

    std::size_t cell_count() const;
    double center(int axis_index) const {
        return -half_extent + (axis_index + 0.5) * spacing;
    }
    // Lexicographic flattening, axis 0 slowest.
    void unflatten(std::size_t flat, int* idx) const;
    std::size_t flatten(const int* idx) const;
    void cell_center(std::size_t flat, double* out) const;
    double cell_volume() const;

    bool operator==(const Grid& o) const {
        return dim == o.dim && half_extent == o.half_extent &&
               points_per_axis == o.points_per_axis;
    }
};

Grid make_grid(int dim, double half_extent, int points_per_axis);

// Nonnegative function sampled on a Grid plus a constant background value
// attributed to everything outside [-L,L]^d. Infinite cell values mark
// hard-trap regions and never enter arithmetic.
struct GridField {
    Grid grid;
    std::vector<double> values;
    double background = 0.0;

    bool has_hard_part() const;
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    std::size_t size() const { return values.size(); }
};

GridField make_field(const Grid& g, double fill = 0.0, double background = 0.0);

// Midpoint-rule integral h^d * sum(values). Rejects background > 0; returns
// +inf if any cell is infinite.
double integrate(const GridField& f);

// h^d * sum(sigma - value) for fields with background == sigma.
double integrate_deficit(const GridField& f, double sigma);

enum class ConvolvePath { Auto, Direct, Transform };

// Zero-padded convolution sampled back onto the same grid. Values outside
// the box are treated as 0; both backgrounds must be 0. The exact lattice
// convolution lives on a half-cell-shifted lattice, so the result is
// resampled by averaging the 2^d adjacent lattice points; this keeps the
// operation commutative and maps symmetric operands to symmetric output.
GridField convolve(const GridField& f, const GridField& g,
                   ConvolvePath path = ConvolvePath::Auto);

enum class PointwiseOp { Product, Min, ComplementTo, Scale };

// Pointwise combination; backgrounds combine by the same rule. For
// ComplementTo/Scale the parameter is sigma / the scale factor and g is
// ignored.
GridField combine(const GridField& f, const GridField& g, PointwiseOp op,
                  double param = 0.0);
GridField combine(const GridField& f, PointwiseOp op, double param);

std::string field_to_json(const GridField& f);
GridField field_from_json(const std::string& text);

} // namespace levysym
