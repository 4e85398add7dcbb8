#include "levysym/grid.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>

#include <fftw3.h>
#include <json.hpp>

namespace levysym {

std::size_t Grid::cell_count() const {
    std::size_t n = 1;
    for (int a = 0; a < dim; ++a) n *= static_cast<std::size_t>(points_per_axis);
    return n;
}

void Grid::unflatten(std::size_t flat, int* idx) const {
    for (int a = dim - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(flat % points_per_axis);
        flat /= points_per_axis;
    }
}

std::size_t Grid::flatten(const int* idx) const {
    std::size_t flat = 0;
    for (int a = 0; a < dim; ++a)
        flat = flat * points_per_axis + static_cast<std::size_t>(idx[a]);
    return flat;
}

void Grid::cell_center(std::size_t flat, double* out) const {
    int idx[3];
    unflatten(flat, idx);
    for (int a = 0; a < dim; ++a) out[a] = center(idx[a]);
}

double Grid::cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= spacing;
    return v;
}

Grid make_grid(int dim, double half_extent, int points_per_axis) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("make_grid: dim must be 1, 2 or 3");
    if (!(half_extent > 0)) throw std::invalid_argument("make_grid: half_extent must be > 0");
    if (points_per_axis < 2 || points_per_axis % 2 != 0)
        throw std::invalid_argument("make_grid: points_per_axis must be even and >= 2");
    Grid g;
    g.dim = dim;
    g.half_extent = half_extent;
    g.points_per_axis = points_per_axis;
    g.spacing = 2.0 * half_extent / points_per_axis;
    return g;
}

GridField make_field(const Grid& g, double fill, double background) {
    GridField f;
    f.grid = g;
    f.values.assign(g.cell_count(), fill);
    f.background = background;
    return f;
}

bool GridField::has_hard_part() const {
    for (double v : values)
        if (std::isinf(v)) return true;
    return false;
}

double integrate(const GridField& f) {
    if (f.background != 0.0)
        throw std::invalid_argument("integrate: background > 0, use integrate_deficit");
    double s = 0.0;
    for (double v : f.values) {
        if (std::isinf(v)) return std::numeric_limits<double>::infinity();
        s += v;
    }
    return s * f.grid.cell_volume();
}

double integrate_deficit(const GridField& f, double sigma) {
    if (f.background != sigma)
        throw std::invalid_argument("integrate_deficit: background != sigma");
    double s = 0.0;
    for (double v : f.values) {
        if (v > sigma) throw std::invalid_argument("integrate_deficit: value above sigma");
        s += sigma - v;
    }
    return s * f.grid.cell_volume();
}

namespace {

void check_convolvable(const GridField& f, const GridField& g) {
    if (!(f.grid == g.grid)) throw std::invalid_argument("convolve: grid mismatch");
    if (f.background != 0.0 || g.background != 0.0)
        throw std::invalid_argument("convolve: backgrounds must be 0");
    if (f.has_hard_part() || g.has_hard_part())
        throw std::invalid_argument("convolve: infinite values not allowed");
}

// Full lattice convolution S[l] = sum_{i+j=l} f[i]g[j] on the (2m-1)^d
// lattice. Terms are accumulated as symmetric pairs so the result is
// bit-identical under operand swap.
std::vector<double> lattice_convolve_direct(const GridField& f, const GridField& g) {
    const int d = f.grid.dim;
    const int m = f.grid.points_per_axis;
    const int mm = 2 * m - 1;
    std::size_t out_n = 1;
    for (int a = 0; a < d; ++a) out_n *= static_cast<std::size_t>(mm);
    std::vector<double> S(out_n, 0.0);

    int l[3] = {0, 0, 0};
    for (std::size_t lf = 0; lf < out_n; ++lf) {
        double acc = 0.0;
        // iterate i over the valid hyper-rectangle in lexicographic order
        int lo[3], hi[3], i[3];
        for (int a = 0; a < d; ++a) {
            lo[a] = std::max(0, l[a] - (m - 1));
            hi[a] = std::min(m - 1, l[a]);
            i[a] = lo[a];
        }
        bool done = false;
        while (!done) {
            int j[3];
            int cmp = 0; // lexicographic compare of i vs j = l - i
            for (int a = 0; a < d; ++a) {
                j[a] = l[a] - i[a];
                if (cmp == 0) cmp = (i[a] < j[a]) ? -1 : (i[a] > j[a] ? 1 : 0);
            }
            if (cmp <= 0) {
                std::size_t fi = f.grid.flatten(i);
                std::size_t fj = f.grid.flatten(j);
                if (cmp == 0)
                    acc += f.values[fi] * g.values[fi];
                else
                    acc += f.values[fi] * g.values[fj] + f.values[fj] * g.values[fi];
            }
            // advance i
            done = true;
            for (int a = d - 1; a >= 0; --a) {
                if (++i[a] <= hi[a]) { done = false; break; }
                i[a] = lo[a];
            }
        }
        S[lf] = acc;
        for (int a = d - 1; a >= 0; --a) {
            if (++l[a] < mm) break;
            l[a] = 0;
        }
    }
    return S;
}

std::mutex fftw_plan_mutex;

std::vector<double> lattice_convolve_fft(const GridField& f, const GridField& g) {
    const int d = f.grid.dim;
    const int m = f.grid.points_per_axis;
    const int mm = 2 * m - 1;
    int P = 1;
    while (P < mm) P <<= 1;
    std::size_t pn = 1;
    for (int a = 0; a < d; ++a) pn *= static_cast<std::size_t>(P);

    std::vector<std::complex<double>> Fa(pn, 0.0), Fb(pn, 0.0);
    auto scatter = [&](const GridField& x, std::vector<std::complex<double>>& dst) {
        int idx[3];
        for (std::size_t k = 0; k < x.values.size(); ++k) {
            x.grid.unflatten(k, idx);
            std::size_t p = 0;
            for (int a = 0; a < d; ++a) p = p * P + static_cast<std::size_t>(idx[a]);
            dst[p] = x.values[k];
        }
    };
    scatter(f, Fa);
    scatter(g, Fb);

    int dims[3] = {P, P, P};
    fftw_plan fwd_a, fwd_b, bwd;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex);
        fwd_a = fftw_plan_dft(d, dims, reinterpret_cast<fftw_complex*>(Fa.data()),
                              reinterpret_cast<fftw_complex*>(Fa.data()),
                              FFTW_FORWARD, FFTW_ESTIMATE);
        fwd_b = fftw_plan_dft(d, dims, reinterpret_cast<fftw_complex*>(Fb.data()),
                              reinterpret_cast<fftw_complex*>(Fb.data()),
                              FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(fwd_a);
    fftw_execute(fwd_b);
    for (std::size_t k = 0; k < pn; ++k) Fa[k] *= Fb[k];
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex);
        bwd = fftw_plan_dft(d, dims, reinterpret_cast<fftw_complex*>(Fa.data()),
                            reinterpret_cast<fftw_complex*>(Fa.data()),
                            FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(bwd);
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex);
        fftw_destroy_plan(fwd_a);
        fftw_destroy_plan(fwd_b);
        fftw_destroy_plan(bwd);
    }

    std::size_t out_n = 1;
    for (int a = 0; a < d; ++a) out_n *= static_cast<std::size_t>(mm);
    std::vector<double> S(out_n);
    const double scale = 1.0 / static_cast<double>(pn);
    int l[3] = {0, 0, 0};
    for (std::size_t lf = 0; lf < out_n; ++lf) {
        std::size_t p = 0;
        for (int a = 0; a < d; ++a) p = p * P + static_cast<std::size_t>(l[a]);
        S[lf] = Fa[p].real() * scale;
        for (int a = d - 1; a >= 0; --a) {
            if (++l[a] < mm) break;
            l[a] = 0;
        }
    }
    return S;
}

} // namespace

GridField convolve(const GridField& f, const GridField& g, ConvolvePath path) {
    check_convolvable(f, g);
    const int d = f.grid.dim;
    const int m = f.grid.points_per_axis;

    if (path == ConvolvePath::Auto) {
        // direct cost ~ (2m)^d * m^d
        double cost = 1.0;
        for (int a = 0; a < d; ++a) cost *= 2.0 * m;
        cost *= static_cast<double>(f.grid.cell_count());
        path = cost > 4.0e6 ? ConvolvePath::Transform : ConvolvePath::Direct;
    }
    std::vector<double> S = (path == ConvolvePath::Direct)
                                ? lattice_convolve_direct(f, g)
                                : lattice_convolve_fft(f, g);

    // Lattice point l sits at (l+1-m)h per axis; cell k is centered at
    // (k+1/2-m/2)h. Average the 2^d neighbors l = k+m/2-1+delta.
    const int mm = 2 * m - 1;
    GridField out = make_field(f.grid);
    const double w = std::ldexp(f.grid.cell_volume(), -d); // h^d / 2^d
    int k[3] = {0, 0, 0};
    for (std::size_t kf = 0; kf < out.values.size(); ++kf) {
        double acc = 0.0;
        for (int delta = 0; delta < (1 << d); ++delta) {
            std::size_t p = 0;
            bool ok = true;
            for (int a = 0; a < d; ++a) {
                int la = k[a] + m / 2 - 1 + ((delta >> a) & 1);
                if (la < 0 || la >= mm) { ok = false; break; }
                p = p * mm + static_cast<std::size_t>(la);
            }
            if (ok) acc += S[p];
        }
        out.values[kf] = acc * w;
        for (int a = d - 1; a >= 0; --a) {
            if (++k[a] < m) break;
            k[a] = 0;
        }
    }
    return out;
}

GridField combine(const GridField& f, const GridField& g, PointwiseOp op, double param) {
    if (op == PointwiseOp::ComplementTo || op == PointwiseOp::Scale)
        return combine(f, op, param);
    if (!(f.grid == g.grid)) throw std::invalid_argument("combine: grid mismatch");
    GridField out = make_field(f.grid);
    switch (op) {
        case PointwiseOp::Product:
            for (std::size_t i = 0; i < f.values.size(); ++i)
                out.values[i] = f.values[i] * g.values[i];
            out.background = f.background * g.background;
            break;
        case PointwiseOp::Min:
            for (std::size_t i = 0; i < f.values.size(); ++i)
                out.values[i] = std::min(f.values[i], g.values[i]);
            out.background = std::min(f.background, g.background);
            break;
        default:
            throw std::logic_error("combine: unreachable");
    }
    return out;
}

GridField combine(const GridField& f, PointwiseOp op, double param) {
    GridField out = make_field(f.grid);
    switch (op) {
        case PointwiseOp::ComplementTo:
            for (std::size_t i = 0; i < f.values.size(); ++i)
                out.values[i] = param - f.values[i];
            out.background = param - f.background;
            break;
        case PointwiseOp::Scale:
            for (std::size_t i = 0; i < f.values.size(); ++i)
                out.values[i] = param * f.values[i];
            out.background = param * f.background;
            break;
        default:
            throw std::invalid_argument("combine: op needs two fields");
    }
    return out;
}

std::string field_to_json(const GridField& f) {
    nlohmann::json j;
    j["dim"] = f.grid.dim;
    j["L"] = f.grid.half_extent;
    j["m"] = f.grid.points_per_axis;
    j["background"] = f.background;
    nlohmann::json vals = nlohmann::json::array();
    for (double v : f.values) {
        if (std::isinf(v))
            vals.push_back("inf");
        else
            vals.push_back(v);
    }
    j["values"] = std::move(vals);
    return j.dump();
}

GridField field_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Grid g = make_grid(j.at("dim").get<int>(), j.at("L").get<double>(),
                       j.at("m").get<int>());
    GridField f = make_field(g, 0.0, j.at("background").get<double>());
    const auto& vals = j.at("values");
    if (vals.size() != f.values.size())
        throw std::invalid_argument("field_from_json: value count mismatch");
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        if (vals[i].is_string())
            f.values[i] = std::numeric_limits<double>::infinity();
        else
            f.values[i] = vals[i].get<double>();
    }
    return f;
}

} // namespace levysym
