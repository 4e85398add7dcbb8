#include "levysym/levy.hpp"

#include "levysym/parallel.hpp"
#include "levysym/rearrange.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace levysym {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double vec_norm(int d, const double* y) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += y[i] * y[i];
    return std::sqrt(s);
}

double vnorm(const std::vector<double>& y) {
    return vec_norm(static_cast<int>(y.size()), y.data());
}

double dot(int d, const double* a, const double* b) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += a[i] * b[i];
    return s;
}

double sphere_area(int d) {
    switch (d) {
        case 1: return 2.0;
        case 2: return 2.0 * std::numbers::pi;
        case 3: return 4.0 * std::numbers::pi;
    }
    throw std::invalid_argument("dim must be 1, 2 or 3");
}

double ball_volume(int d) { return sphere_area(d) / d; }

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// P(|Y| <= r) for an isotropic centered Gaussian with scale sigma.
double gauss_radial_cdf(int d, double sigma, double r) {
    if (r <= 0.0) return 0.0;
    double x = r / sigma;
    switch (d) {
        case 1: return std::erf(x / std::numbers::sqrt2);
        case 2: return 1.0 - std::exp(-0.5 * x * x);
        case 3:
            return std::erf(x / std::numbers::sqrt2) -
                   std::sqrt(2.0 / std::numbers::pi) * x * std::exp(-0.5 * x * x);
    }
    throw std::invalid_argument("dim must be 1, 2 or 3");
}

// Lower Cholesky with a PSD tolerance; returns false when the matrix has a
// negative direction.
bool cholesky_psd(int d, const std::vector<double>& A, std::vector<double>& L) {
    L.assign(static_cast<std::size_t>(d) * d, 0.0);
    double scale = 1e-300;
    for (int i = 0; i < d; ++i) scale = std::max(scale, std::abs(A[i * d + i]));
    const double tol = 1e-11 * scale;
    for (int j = 0; j < d; ++j) {
        double s = A[j * d + j];
        for (int k = 0; k < j; ++k) s -= L[j * d + k] * L[j * d + k];
        if (s < -tol) return false;
        double ljj = std::sqrt(std::max(s, 0.0));
        L[j * d + j] = ljj;
        for (int i = j + 1; i < d; ++i) {
            double v = A[i * d + j];
            for (int k = 0; k < j; ++k) v -= L[i * d + k] * L[j * d + k];
            if (ljj > 0.0) {
                L[i * d + j] = v / ljj;
            } else {
                if (std::abs(v) > tol) return false;
                L[i * d + j] = 0.0;
            }
        }
    }
    return true;
}

double det_sym(int d, const std::vector<double>& A) {
    switch (d) {
        case 1: return A[0];
        case 2: return A[0] * A[3] - A[1] * A[2];
        case 3:
            return A[0] * (A[4] * A[8] - A[5] * A[7]) -
                   A[1] * (A[3] * A[8] - A[5] * A[6]) +
                   A[2] * (A[3] * A[7] - A[4] * A[6]);
    }
    throw std::invalid_argument("dim must be 1, 2 or 3");
}

double gauss_support_radius(const JumpSpec& rho) {
    double r = 0.0;
    for (const auto& c : rho.gauss)
        r = std::max(r, vnorm(c.mean) + 12.0 * c.sigma);
    return r;
}

// Outer radius beyond which the density is (numerically) zero.
double support_radius(const JumpSpec& rho, int dim) {
    switch (rho.family) {
        case JumpFamily::None: return 0.0;
        case JumpFamily::GaussianMixture: return gauss_support_radius(rho);
        case JumpFamily::PowerLaw: return rho.plaw_r1;
        case JumpFamily::UniformBall:
            return vnorm(rho.ub_center) + rho.ub_radius;
        case JumpFamily::Grid:
            return rho.grid_density.grid.half_extent * std::sqrt(static_cast<double>(dim));
    }
    return 0.0;
}

void validate_jump(const JumpSpec& rho, int dim) {
    if (rho.trunc_r < 0.0) throw std::invalid_argument("jump spec: negative truncation radius");
    switch (rho.family) {
        case JumpFamily::None:
            return;
        case JumpFamily::GaussianMixture:
            if (rho.gauss.empty()) throw std::invalid_argument("gaussian mixture: no components");
            for (const auto& c : rho.gauss) {
                if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
                    throw std::invalid_argument("gaussian mixture: bad weight");
                if (!(c.sigma > 0.0)) throw std::invalid_argument("gaussian mixture: sigma must be positive");
                if (static_cast<int>(c.mean.size()) != dim)
                    throw std::invalid_argument("gaussian mixture: mean dimension mismatch");
                if (dim > 1 && vnorm(c.mean) != 0.0)
                    throw std::invalid_argument("gaussian mixture: offset means supported in dimension 1 only");
            }
            return;
        case JumpFamily::PowerLaw:
            if (!(rho.plaw_c > 0.0)) throw std::invalid_argument("power law: c must be positive");
            if (!(rho.plaw_alpha > 0.0)) throw std::invalid_argument("power law: alpha must be positive");
            if (rho.plaw_r0 < 0.0 || !(rho.plaw_r1 > rho.plaw_r0) || !std::isfinite(rho.plaw_r1))
                throw std::invalid_argument("power law: need 0 <= r0 < r1 < inf");
            if (rho.plaw_r0 == 0.0 && rho.plaw_alpha >= 2.0)
                throw std::invalid_argument("power law: alpha >= 2 needs r0 > 0");
            return;
        case JumpFamily::UniformBall:
            if (!(rho.ub_mass >= 0.0)) throw std::invalid_argument("uniform ball: negative mass");
            if (!(rho.ub_radius > 0.0)) throw std::invalid_argument("uniform ball: radius must be positive");
            if (static_cast<int>(rho.ub_center.size()) != dim)
                throw std::invalid_argument("uniform ball: center dimension mismatch");
            if (dim > 1 && vnorm(rho.ub_center) != 0.0)
                throw std::invalid_argument("uniform ball: offset centers supported in dimension 1 only");
            return;
        case JumpFamily::Grid:
            if (rho.grid_density.grid.dim != dim)
                throw std::invalid_argument("grid density: dimension mismatch");
            if (rho.grid_density.background != 0.0)
                throw std::invalid_argument("grid density: background must be 0");
            for (double v : rho.grid_density.values)
                if (!(v >= 0.0) || !std::isfinite(v))
                    throw std::invalid_argument("grid density: values must be finite and nonnegative");
            return;
    }
    throw std::invalid_argument("jump spec: unknown family");
}

} // namespace

void validate_triple(const LevyTriple& T) {
    const int d = T.dim;
    if (d < 1 || d > 3) throw std::invalid_argument("triple: dim must be 1, 2 or 3");
    if (static_cast<int>(T.b.size()) != d) throw std::invalid_argument("triple: b has wrong size");
    if (static_cast<int>(T.A.size()) != d * d) throw std::invalid_argument("triple: A has wrong size");
    double scale = 1e-300;
    for (double a : T.A) {
        if (!std::isfinite(a)) throw std::invalid_argument("triple: A not finite");
        scale = std::max(scale, std::abs(a));
    }
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            if (std::abs(T.A[i * d + j] - T.A[j * d + i]) > 1e-12 * scale)
                throw std::invalid_argument("triple: A not symmetric");
    std::vector<double> L;
    if (!cholesky_psd(d, T.A, L))
        throw std::invalid_argument("triple: A not positive semidefinite");
    for (double bi : T.b)
        if (!std::isfinite(bi)) throw std::invalid_argument("triple: b not finite");
    validate_jump(T.rho, d);
    for (const auto& a : T.atoms) {
        if (static_cast<int>(a.y.size()) != d)
            throw std::invalid_argument("triple: atom dimension mismatch");
        if (!(a.rate >= 0.0) || !std::isfinite(a.rate))
            throw std::invalid_argument("triple: atom rate must be finite and nonnegative");
        if (vnorm(a.y) == 0.0)
            throw std::invalid_argument("triple: atom at the origin");
    }
}

double jump_mass_above(const JumpSpec& rho, int dim, double r) {
    const double rl = std::max(r, rho.trunc_r);
    switch (rho.family) {
        case JumpFamily::None:
            return 0.0;
        case JumpFamily::GaussianMixture: {
            double total = 0.0;
            for (const auto& c : rho.gauss) {
                double inside;
                if (dim == 1) {
                    double mu = c.mean[0];
                    inside = rl <= 0.0 ? 0.0
                                       : std_normal_cdf((rl - mu) / c.sigma) -
                                             std_normal_cdf((-rl - mu) / c.sigma);
                } else {
                    inside = gauss_radial_cdf(dim, c.sigma, rl);
                }
                total += c.weight * (1.0 - inside);
            }
            return total;
        }
        case JumpFamily::PowerLaw: {
            double rlo = std::max(rl, rho.plaw_r0);
            if (rlo >= rho.plaw_r1) return 0.0;
            if (rlo == 0.0) return kInf;
            double a = rho.plaw_alpha;
            return rho.plaw_c * sphere_area(dim) *
                   (std::pow(rlo, -a) - std::pow(rho.plaw_r1, -a)) / a;
        }
        case JumpFamily::UniformBall: {
            double R = rho.ub_radius;
            if (dim == 1 && vnorm(rho.ub_center) != 0.0) {
                double c = rho.ub_center[0];
                double lo = c - R, hi = c + R;
                double cut = std::max(0.0, std::min(hi, rl) - std::max(lo, -rl));
                return rho.ub_mass * (2.0 * R - cut) / (2.0 * R);
            }
            if (rl >= R) return 0.0;
            double frac = 1.0 - std::pow(std::max(rl, 0.0) / R, dim);
            return rho.ub_mass * frac;
        }
        case JumpFamily::Grid: {
            const GridField& f = rho.grid_density;
            double hv = f.grid.cell_volume();
            double total = 0.0;
            double c[3];
            for (std::size_t k = 0; k < f.values.size(); ++k) {
                f.grid.cell_center(k, c);
                if (vec_norm(dim, c) > rl) total += f.values[k];
            }
            return total * hv;
        }
    }
    throw std::invalid_argument("jump spec: unknown family");
}

double jump_eval(const JumpSpec& rho, int dim, const double* y) {
    const double ny = vec_norm(dim, y);
    if (ny <= rho.trunc_r) return 0.0;
    switch (rho.family) {
        case JumpFamily::None:
            return 0.0;
        case JumpFamily::GaussianMixture: {
            double v = 0.0;
            for (const auto& c : rho.gauss) {
                double q = 0.0;
                for (int i = 0; i < dim; ++i) {
                    double t = y[i] - c.mean[i];
                    q += t * t;
                }
                double norm = std::pow(2.0 * std::numbers::pi * c.sigma * c.sigma,
                                       -0.5 * dim);
                v += c.weight * norm * std::exp(-0.5 * q / (c.sigma * c.sigma));
            }
            return v;
        }
        case JumpFamily::PowerLaw:
            if (ny <= rho.plaw_r0 || ny >= rho.plaw_r1) return 0.0;
            return rho.plaw_c * std::pow(ny, -static_cast<double>(dim) - rho.plaw_alpha);
        case JumpFamily::UniformBall: {
            double q = 0.0;
            for (int i = 0; i < dim; ++i) {
                double t = y[i] - rho.ub_center[i];
                q += t * t;
            }
            if (q >= rho.ub_radius * rho.ub_radius) return 0.0;
            return rho.ub_mass /
                   (ball_volume(dim) * std::pow(rho.ub_radius, dim));
        }
        case JumpFamily::Grid: {
            const Grid& g = rho.grid_density.grid;
            int idx[3];
            for (int a = 0; a < dim; ++a) {
                double t = (y[a] + g.half_extent) / g.spacing;
                if (t < 0.0 || t >= g.points_per_axis) return 0.0;
                idx[a] = static_cast<int>(t);
            }
            return rho.grid_density.values[g.flatten(idx)];
        }
    }
    throw std::invalid_argument("jump spec: unknown family");
}

bool jump_is_radial(const JumpSpec& rho, int dim) {
    (void)dim;
    switch (rho.family) {
        case JumpFamily::None: return true;
        case JumpFamily::GaussianMixture:
            for (const auto& c : rho.gauss)
                if (vnorm(c.mean) != 0.0) return false;
            return true;
        case JumpFamily::PowerLaw: return true;
        case JumpFamily::UniformBall: return vnorm(rho.ub_center) == 0.0;
        case JumpFamily::Grid: return false;
    }
    return false;
}

namespace {

// Integral of x * normal(x; mu, sigma) over (a, b).
double gauss_first_moment(double mu, double sigma, double a, double b) {
    auto pdf = [&](double x) {
        return std::isfinite(x) ? std_normal_pdf((x - mu) / sigma) / sigma : 0.0;
    };
    auto cdf = [&](double x) {
        if (x == kInf) return 1.0;
        if (x == -kInf) return 0.0;
        return std_normal_cdf((x - mu) / sigma);
    };
    return sigma * sigma * (pdf(a) - pdf(b)) + mu * (cdf(b) - cdf(a));
}

} // namespace

void jump_first_moment_band(const JumpSpec& rho, int dim, double r_lo,
                            double r_hi, double* out) {
    for (int i = 0; i < dim; ++i) out[i] = 0.0;
    const double lo = std::max(r_lo, rho.trunc_r);
    if (!(r_hi > lo)) return;
    if (jump_is_radial(rho, dim)) return;
    switch (rho.family) {
        case JumpFamily::GaussianMixture: {
            // dimension 1 only (validated)
            for (const auto& c : rho.gauss) {
                double m = gauss_first_moment(c.mean[0], c.sigma, lo, r_hi) +
                           gauss_first_moment(c.mean[0], c.sigma, -r_hi, -lo);
                out[0] += c.weight * m;
            }
            return;
        }
        case JumpFamily::UniformBall: {
            double cen = rho.ub_center[0], R = rho.ub_radius;
            double dens = rho.ub_mass / (2.0 * R);
            auto piece = [&](double a, double b) {
                double x0 = std::max(a, cen - R);
                double x1 = std::min(b, cen + R);
                if (x1 <= x0) return 0.0;
                return dens * 0.5 * (x1 * x1 - x0 * x0);
            };
            out[0] = piece(lo, r_hi) + piece(-r_hi, -lo);
            return;
        }
        case JumpFamily::Grid: {
            const GridField& f = rho.grid_density;
            double hv = f.grid.cell_volume();
            double c[3];
            for (std::size_t k = 0; k < f.values.size(); ++k) {
                if (f.values[k] == 0.0) continue;
                f.grid.cell_center(k, c);
                double r = vec_norm(dim, c);
                if (r <= lo || r >= r_hi) continue;
                for (int a = 0; a < dim; ++a) out[a] += c[a] * f.values[k] * hv;
            }
            return;
        }
        default:
            return;
    }
}

void jump_sample_above(const JumpSpec& rho, int dim, double r, Rng& rng,
                       double* out) {
    const double rl = std::max(r, rho.trunc_r);
    switch (rho.family) {
        case JumpFamily::GaussianMixture: {
            // component masses above the cutoff
            double cum[64];
            double total = 0.0;
            if (rho.gauss.size() > 64)
                throw std::invalid_argument("gaussian mixture: too many components");
            for (std::size_t i = 0; i < rho.gauss.size(); ++i) {
                JumpSpec one = rho;
                one.gauss.assign(1, rho.gauss[i]);
                total += jump_mass_above(one, dim, rl);
                cum[i] = total;
            }
            if (!(total > 0.0))
                throw std::runtime_error("jump sample: no mass above the cutoff");
            double u = rng.uniform() * total;
            std::size_t ci = 0;
            while (ci + 1 < rho.gauss.size() && u >= cum[ci]) ++ci;
            const auto& c = rho.gauss[ci];
            for (long tries = 0; tries < 100000000L; ++tries) {
                for (int a = 0; a < dim; ++a)
                    out[a] = c.mean[a] + c.sigma * rng.normal();
                if (vec_norm(dim, out) > rl) return;
            }
            throw std::runtime_error("jump sample: rejection did not terminate");
        }
        case JumpFamily::PowerLaw: {
            double rlo = std::max(rl, rho.plaw_r0);
            if (rlo >= rho.plaw_r1)
                throw std::runtime_error("jump sample: no mass above the cutoff");
            if (rlo == 0.0)
                throw std::runtime_error("jump sample: infinite total mass");
            double a = rho.plaw_alpha;
            double u = rng.uniform();
            double s = std::pow(u * std::pow(rlo, -a) + (1.0 - u) * std::pow(rho.plaw_r1, -a),
                                -1.0 / a);
            rng.unit_vector(dim, out);
            for (int i = 0; i < dim; ++i) out[i] *= s;
            return;
        }
        case JumpFamily::UniformBall: {
            double R = rho.ub_radius;
            if (dim == 1 && vnorm(rho.ub_center) != 0.0) {
                double cen = rho.ub_center[0];
                for (long tries = 0; tries < 100000000L; ++tries) {
                    double y = rng.uniform_range(cen - R, cen + R);
                    if (std::abs(y) > rl) { out[0] = y; return; }
                }
                throw std::runtime_error("jump sample: rejection did not terminate");
            }
            if (rl >= R) throw std::runtime_error("jump sample: no mass above the cutoff");
            double lo_d = std::pow(std::max(rl, 0.0), dim);
            double s = std::pow(lo_d + rng.uniform() * (std::pow(R, dim) - lo_d),
                                1.0 / dim);
            rng.unit_vector(dim, out);
            for (int i = 0; i < dim; ++i) out[i] *= s;
            return;
        }
        case JumpFamily::Grid: {
            const GridField& f = rho.grid_density;
            double hv = f.grid.cell_volume();
            double total = jump_mass_above(rho, dim, rl);
            if (!(total > 0.0))
                throw std::runtime_error("jump sample: no mass above the cutoff");
            double target = rng.uniform() * total;
            double acc = 0.0;
            double c[3];
            std::size_t chosen = f.values.size();
            for (std::size_t k = 0; k < f.values.size(); ++k) {
                if (f.values[k] == 0.0) continue;
                f.grid.cell_center(k, c);
                if (vec_norm(dim, c) <= rl) continue;
                acc += f.values[k] * hv;
                if (acc > target) { chosen = k; break; }
            }
            if (chosen == f.values.size()) {
                // fall back to the last eligible cell (rounding at the top end)
                for (std::size_t k = f.values.size(); k-- > 0;) {
                    if (f.values[k] == 0.0) continue;
                    f.grid.cell_center(k, c);
                    if (vec_norm(dim, c) > rl) { chosen = k; break; }
                }
            }
            f.grid.cell_center(chosen, out);
            for (int a = 0; a < dim; ++a)
                out[a] += (rng.uniform() - 0.5) * f.grid.spacing;
            return;
        }
        default:
            throw std::runtime_error("jump sample: empty density");
    }
}

namespace {

// Rearrange by sampling onto an internal grid, rearranging the sampled
// field and renormalizing to the exact total rate.
JumpSpec grid_fallback_rearrange(const JumpSpec& rho, int dim) {
    double L = support_radius(rho, dim);
    if (!(L > 0.0)) return JumpSpec{};
    int m = dim == 1 ? 2048 : (dim == 2 ? 256 : 64);
    Grid g = make_grid(dim, L, m);
    GridField f = make_field(g);
    double c[3];
    for (std::size_t k = 0; k < f.values.size(); ++k) {
        g.cell_center(k, c);
        f.values[k] = jump_eval(rho, dim, c);
    }
    GridField r = rearrange_fn(f);
    double exact = jump_mass_above(rho, dim, 0.0);
    double got = integrate(r);
    if (std::isfinite(exact) && got > 0.0)
        r = combine(r, PointwiseOp::Scale, exact / got);
    JumpSpec out;
    out.family = JumpFamily::Grid;
    out.grid_density = std::move(r);
    return out;
}

} // namespace

JumpSpec jump_rearranged(const JumpSpec& rho, int dim) {
    validate_jump(rho, dim);
    if (rho.family == JumpFamily::None) return rho;
    if (rho.family == JumpFamily::Grid) {
        JumpSpec out = rho;
        if (out.trunc_r > 0.0) {
            // apply the truncation before rearranging
            double c[3];
            GridField& f = out.grid_density;
            for (std::size_t k = 0; k < f.values.size(); ++k) {
                f.grid.cell_center(k, c);
                if (vec_norm(dim, c) <= out.trunc_r) f.values[k] = 0.0;
            }
            out.trunc_r = 0.0;
        }
        out.grid_density = rearrange_fn(out.grid_density);
        return out;
    }
    if (rho.trunc_r > 0.0) return grid_fallback_rearrange(rho, dim);
    switch (rho.family) {
        case JumpFamily::GaussianMixture:
            if (rho.gauss.size() == 1 && vnorm(rho.gauss[0].mean) == 0.0)
                return rho; // already symmetric decreasing
            return grid_fallback_rearrange(rho, dim);
        case JumpFamily::PowerLaw:
            if (rho.plaw_r0 == 0.0) return rho;
            return grid_fallback_rearrange(rho, dim);
        case JumpFamily::UniformBall:
            if (vnorm(rho.ub_center) == 0.0) return rho;
            return grid_fallback_rearrange(rho, dim);
        default:
            return rho;
    }
}

LevyTriple rearrange_triple(const LevyTriple& T) {
    validate_triple(T);
    const int d = T.dim;
    LevyTriple out;
    out.dim = d;
    out.b.assign(d, 0.0);
    out.A.assign(static_cast<std::size_t>(d) * d, 0.0);
    double det = det_sym(d, T.A);
    double a = det <= 0.0 ? 0.0 : std::pow(det, 1.0 / d);
    for (int i = 0; i < d; ++i) out.A[i * d + i] = a;
    out.rho = jump_rearranged(T.rho, d);
    out.transient = T.transient;
    // atoms carry no absolutely continuous mass and are dropped
    return out;
}

SimScheme truncate_triple(const LevyTriple& T, int n, double eps_n) {
    validate_triple(T);
    if (n < 1) throw std::invalid_argument("truncate: n must be >= 1");
    SimScheme S;
    S.base = T;
    S.n = n;
    S.eps = eps_n < 0.0 ? 1.0 / (static_cast<double>(n) * n) : eps_n;
    S.trunc_r = std::max(1.0 / n, T.rho.trunc_r);
    S.rho_n = T.rho;
    S.rho_n.trunc_r = S.trunc_r;
    S.c_n = jump_mass_above(S.rho_n, T.dim, 0.0);
    if (!std::isfinite(S.c_n))
        throw std::runtime_error("truncate: truncated rate not finite");

    const int d = T.dim;
    // drift correction: remove the small-jump compensator of everything the
    // scheme now generates explicitly inside the unit ball
    double comp[3] = {0, 0, 0};
    jump_first_moment_band(S.rho_n, d, 0.0, 1.0, comp);
    S.b_n = T.b;
    for (int i = 0; i < d; ++i) S.b_n[i] -= comp[i];
    for (const auto& atom : T.atoms)
        if (vnorm(atom.y) < 1.0)
            for (int i = 0; i < d; ++i) S.b_n[i] -= atom.rate * atom.y[i];

    S.A_n = T.A;
    for (int i = 0; i < d; ++i) S.A_n[i * d + i] += S.eps;
    if (!cholesky_psd(d, S.A_n, S.chol))
        throw std::runtime_error("truncate: padded covariance not positive semidefinite");

    S.atom_rate = 0.0;
    S.atom_cum.clear();
    for (const auto& atom : T.atoms) {
        S.atom_rate += atom.rate;
        S.atom_cum.push_back(S.atom_rate);
    }
    return S;
}

void generate_path(const SimScheme& S, const std::vector<double>& times,
                   std::uint64_t seed, std::uint64_t path_index, double* out) {
    const int d = S.base.dim;
    if (times.size() < 2 || times[0] != 0.0)
        throw std::invalid_argument("generate_path: times must start at 0");
    Rng rng(seed, path_index);
    double x[3] = {0, 0, 0};
    for (int a = 0; a < d; ++a) out[a] = 0.0;
    const double total_rate = S.c_n + S.atom_rate;
    double z[3], jump[3];
    for (std::size_t i = 1; i < times.size(); ++i) {
        double dt = times[i] - times[i - 1];
        if (!(dt > 0.0)) throw std::invalid_argument("generate_path: times not increasing");
        double sdt = std::sqrt(dt);
        for (int a = 0; a < d; ++a) z[a] = rng.normal();
        for (int a = 0; a < d; ++a) {
            double g = 0.0;
            for (int k = 0; k <= a; ++k) g += S.chol[a * d + k] * z[k];
            x[a] += S.b_n[a] * dt + sdt * g;
        }
        std::uint64_t nj = rng.poisson(total_rate * dt);
        for (std::uint64_t j = 0; j < nj; ++j) {
            double u = rng.uniform() * total_rate;
            if (u < S.c_n || S.atom_rate == 0.0) {
                jump_sample_above(S.rho_n, d, S.trunc_r, rng, jump);
            } else {
                double v = u - S.c_n;
                std::size_t k = 0;
                while (k + 1 < S.atom_cum.size() && v >= S.atom_cum[k]) ++k;
                for (int a = 0; a < d; ++a) jump[a] = S.base.atoms[k].y[a];
            }
            for (int a = 0; a < d; ++a) x[a] += jump[a];
        }
        for (int a = 0; a < d; ++a) out[i * d + a] = x[a];
    }
}

PathEnsemble sample_paths(const SimScheme& S, const std::vector<double>& times,
                          std::size_t paths, std::uint64_t seed, int workers) {
    PathEnsemble e;
    e.times = times;
    e.dim = S.base.dim;
    e.paths = paths;
    e.seed = seed;
    e.pos.assign(paths * times.size() * S.base.dim, 0.0);
    const std::size_t stride = times.size() * S.base.dim;
    parallel_blocks(paths, 64, workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p)
            generate_path(S, times, seed, p, e.pos.data() + p * stride);
    });
    return e;
}

namespace {

// 1 - kappa_d(x) where kappa_d is the radial Fourier kernel: cos (d=1),
// J_0 (d=2), sin(x)/x (d=3). Evaluated stably near 0.
double one_minus_kappa(int d, double x) {
    double ax = std::abs(x);
    if (ax < 1e-4) {
        double x2 = x * x;
        switch (d) {
            case 1: return x2 / 2.0 - x2 * x2 / 24.0;
            case 2: return x2 / 4.0 - x2 * x2 / 64.0;
            case 3: return x2 / 6.0 - x2 * x2 / 120.0;
        }
    }
    switch (d) {
        case 1: return 1.0 - std::cos(x);
        case 2: return 1.0 - std::cyl_bessel_j(0.0, ax);
        case 3: return 1.0 - std::sin(ax) / ax;
    }
    throw std::invalid_argument("dim must be 1, 2 or 3");
}

// Composite Simpson over [a, b] with n even subintervals. The endpoint
// samples are nudged inward: intervals are split exactly at density
// discontinuities, where the strict-inequality evaluation would otherwise
// see the wrong one-sided limit.
template <typename F>
double simpson(F&& f, double a, double b, int n) {
    double h = (b - a) / n;
    double nudge = 1e-9 * h;
    double s = f(a + nudge) + f(b - nudge);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

template <typename F>
std::complex<double> simpson_c(F&& f, double a, double b, int n) {
    double h = (b - a) / n;
    double nudge = 1e-9 * h;
    std::complex<double> s = f(a + nudge) + f(b - nudge);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * (h / 3.0);
}

// Piecewise quadrature with a convergence check at doubled resolution.
template <typename Eval>
auto converged_quadrature(Eval&& eval) {
    auto coarse = eval(1);
    auto fine = eval(2);
    double scale = 1.0 + std::abs(fine);
    if (std::abs(fine - coarse) > 1e-7 * scale)
        throw std::runtime_error("levy exponent: jump quadrature did not converge");
    return fine;
}

std::complex<double> jump_exponent(const JumpSpec& rho, int dim, const double* xi) {
    if (rho.family == JumpFamily::None) return {0.0, 0.0};
    if (rho.family == JumpFamily::Grid) {
        const GridField& f = rho.grid_density;
        double hv = f.grid.cell_volume();
        double re = 0.0, im = 0.0;
        double c[3];
        for (std::size_t k = 0; k < f.values.size(); ++k) {
            if (f.values[k] == 0.0) continue;
            f.grid.cell_center(k, c);
            double r = vec_norm(dim, c);
            if (r <= rho.trunc_r) continue;
            double th = dot(dim, xi, c);
            re += f.values[k] * (1.0 - std::cos(th));
            im += f.values[k] * (-std::sin(th) + (r < 1.0 ? th : 0.0));
        }
        return {re * hv, im * hv};
    }

    const double xin = vec_norm(dim, xi);
    if (jump_is_radial(rho, dim)) {
        // real radial integral: S_d * int (1 - kappa(|xi| r)) rho(r) r^{d-1} dr
        double hi = support_radius(rho, dim);
        double lo = rho.trunc_r;
        if (rho.family == JumpFamily::PowerLaw) lo = std::max(lo, rho.plaw_r0);
        if (rho.family == JumpFamily::GaussianMixture && rho.gauss.size() > 1)
            hi = gauss_support_radius(rho);
        if (!(hi > lo)) return {0.0, 0.0};
        double y[3] = {0, 0, 0};
        auto radial = [&](double r) {
            y[0] = r;
            return one_minus_kappa(dim, xin * r) * jump_eval(rho, dim, y) *
                   sphere_area(dim) * std::pow(r, dim - 1);
        };
        double head = 0.0;
        if (lo <= 0.0) {
            if (rho.family == JumpFamily::PowerLaw) {
                // singular at the origin: quadratic kernel expansion on [0,e]
                double e = std::min(hi, 0.01 / std::max(xin, 1.0));
                double a = rho.plaw_alpha;
                head = rho.plaw_c * sphere_area(dim) * xin * xin / (2.0 * dim) *
                       std::pow(e, 2.0 - a) / (2.0 - a);
                lo = e;
            } else {
                // bounded density: the integrand is O(r^{d+1}) near 0
                lo = std::min(hi / 2.0, 1e-6);
            }
        }
        double val = converged_quadrature([&](int mult) {
            const int panels = 160 * mult;
            double total = 0.0;
            double la = std::log(lo), lb = std::log(hi);
            for (int p = 0; p < panels; ++p) {
                double a = std::exp(la + (lb - la) * p / panels);
                double b = std::exp(la + (lb - la) * (p + 1) / panels);
                total += simpson(radial, a, b, 8);
            }
            return total;
        });
        return {head + val, 0.0};
    }

    // non-radial, dimension 1 (validated): complex line integral with
    // breakpoints at density edges, the truncation and the unit ball
    double R = support_radius(rho, dim);
    std::vector<double> brk = {-R, R, -1.0, 1.0};
    if (rho.trunc_r > 0.0) {
        brk.push_back(-rho.trunc_r);
        brk.push_back(rho.trunc_r);
    }
    if (rho.family == JumpFamily::UniformBall) {
        brk.push_back(rho.ub_center[0] - rho.ub_radius);
        brk.push_back(rho.ub_center[0] + rho.ub_radius);
    }
    std::sort(brk.begin(), brk.end());
    brk.erase(std::remove_if(brk.begin(), brk.end(),
                             [&](double v) { return v < -R || v > R; }),
              brk.end());
    brk.insert(brk.begin(), -R);
    brk.push_back(R);
    auto integrand = [&](double yv) {
        double rhov = jump_eval(rho, 1, &yv);
        double th = xi[0] * yv;
        return std::complex<double>((1.0 - std::cos(th)) * rhov,
                                    (-std::sin(th) + (std::abs(yv) < 1.0 ? th : 0.0)) * rhov);
    };
    return converged_quadrature([&](int mult) {
        std::complex<double> total{0.0, 0.0};
        for (std::size_t i = 0; i + 1 < brk.size(); ++i) {
            double a = brk[i], b = brk[i + 1];
            if (!(b > a)) continue;
            double density = 16.0 + 4.0 * std::abs(xi[0]) + 2.0 * xi[0] * xi[0];
            int n = std::max(32, static_cast<int>((b - a) * density));
            n = 2 * n * mult;
            total += simpson_c(integrand, a, b, n);
        }
        return total;
    });
}

} // namespace

std::complex<double> levy_exponent(const LevyTriple& T, const double* xi) {
    validate_triple(T);
    const int d = T.dim;
    std::complex<double> psi(0.0, -dot(d, T.b.data(), xi));
    double quad = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) quad += xi[i] * T.A[i * d + j] * xi[j];
    psi += 0.5 * quad;
    for (const auto& a : T.atoms) {
        double th = dot(d, xi, a.y.data());
        double r = vnorm(a.y);
        psi += a.rate * std::complex<double>(1.0 - std::cos(th),
                                             -std::sin(th) + (r < 1.0 ? th : 0.0));
    }
    psi += jump_exponent(T.rho, d, xi);
    return psi;
}

std::complex<double> char_fn(const LevyTriple& T, const double* xi, double t) {
    return std::exp(-t * levy_exponent(T, xi));
}

LevyTriple scheme_as_triple(const SimScheme& S) {
    LevyTriple T;
    T.dim = S.base.dim;
    T.b = S.b_n;
    T.A = S.A_n;
    T.rho = S.rho_n;
    T.atoms = S.base.atoms;
    T.transient = S.base.transient;
    // undo the compensator baked into b_n: as a standalone triple the
    // scheme's small jumps are compensated again by the exponent formula
    double comp[3] = {0, 0, 0};
    jump_first_moment_band(S.rho_n, T.dim, 0.0, 1.0, comp);
    for (int i = 0; i < T.dim; ++i) T.b[i] += comp[i];
    for (const auto& atom : S.base.atoms)
        if (vnorm(atom.y) < 1.0)
            for (int i = 0; i < T.dim; ++i) T.b[i] += atom.rate * atom.y[i];
    return T;
}

std::complex<double> empirical_cf(const PathEnsemble& e, const double* xi,
                                  std::size_t time_index, double* se) {
    if (time_index >= e.times.size())
        throw std::invalid_argument("empirical_cf: time index out of range");
    double sre = 0.0, sim = 0.0, sre2 = 0.0, sim2 = 0.0;
    const std::size_t stride = e.times.size() * e.dim;
    for (std::size_t p = 0; p < e.paths; ++p) {
        const double* x = e.pos.data() + p * stride + time_index * e.dim;
        double th = dot(e.dim, xi, x);
        double c = std::cos(th), s = std::sin(th);
        sre += c; sim += s; sre2 += c * c; sim2 += s * s;
    }
    double n = static_cast<double>(e.paths);
    double mre = sre / n, mim = sim / n;
    if (se) {
        double vre = std::max(0.0, sre2 / n - mre * mre);
        double vim = std::max(0.0, sim2 / n - mim * mim);
        *se = std::sqrt((vre + vim) / n);
    }
    return {mre, mim};
}

// ---- serialization ----

namespace {

using nlohmann::json;

json jump_to_json(const JumpSpec& rho) {
    json j;
    switch (rho.family) {
        case JumpFamily::None: j["family"] = "none"; break;
        case JumpFamily::GaussianMixture: {
            j["family"] = "gaussian_mixture";
            json comps = json::array();
            for (const auto& c : rho.gauss)
                comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"sigma", c.sigma}});
            j["components"] = std::move(comps);
            break;
        }
        case JumpFamily::PowerLaw:
            j["family"] = "power_law";
            j["c"] = rho.plaw_c;
            j["alpha"] = rho.plaw_alpha;
            j["r0"] = rho.plaw_r0;
            j["r1"] = rho.plaw_r1;
            break;
        case JumpFamily::UniformBall:
            j["family"] = "uniform_ball";
            j["mass"] = rho.ub_mass;
            j["center"] = rho.ub_center;
            j["radius"] = rho.ub_radius;
            break;
        case JumpFamily::Grid:
            j["family"] = "grid";
            j["density"] = json::parse(field_to_json(rho.grid_density));
            break;
    }
    if (rho.trunc_r > 0.0) j["trunc_r"] = rho.trunc_r;
    return j;
}

JumpSpec jump_from_json(const json& j) {
    JumpSpec rho;
    std::string fam = j.value("family", "none");
    if (fam == "none") {
        rho.family = JumpFamily::None;
    } else if (fam == "gaussian_mixture") {
        rho.family = JumpFamily::GaussianMixture;
        for (const auto& c : j.at("components")) {
            GaussComponent gc;
            gc.weight = c.at("weight").get<double>();
            gc.mean = c.at("mean").get<std::vector<double>>();
            gc.sigma = c.at("sigma").get<double>();
            rho.gauss.push_back(std::move(gc));
        }
    } else if (fam == "power_law") {
        rho.family = JumpFamily::PowerLaw;
        rho.plaw_c = j.at("c").get<double>();
        rho.plaw_alpha = j.at("alpha").get<double>();
        rho.plaw_r0 = j.value("r0", 0.0);
        rho.plaw_r1 = j.at("r1").get<double>();
    } else if (fam == "uniform_ball") {
        rho.family = JumpFamily::UniformBall;
        rho.ub_mass = j.at("mass").get<double>();
        rho.ub_center = j.at("center").get<std::vector<double>>();
        rho.ub_radius = j.at("radius").get<double>();
    } else if (fam == "grid") {
        rho.family = JumpFamily::Grid;
        rho.grid_density = field_from_json(j.at("density").dump());
    } else {
        throw std::invalid_argument("jump spec: unknown family '" + fam + "'");
    }
    rho.trunc_r = j.value("trunc_r", 0.0);
    return rho;
}

} // namespace

std::string triple_to_json(const LevyTriple& T) {
    json j;
    j["dim"] = T.dim;
    j["b"] = T.b;
    j["A"] = T.A;
    j["rho"] = jump_to_json(T.rho);
    json atoms = json::array();
    for (const auto& a : T.atoms)
        atoms.push_back({{"y", a.y}, {"rate", a.rate}});
    j["atoms"] = std::move(atoms);
    j["transient"] = T.transient;
    return j.dump(2);
}

LevyTriple triple_from_json(const std::string& text) {
    json j = json::parse(text);
    LevyTriple T;
    T.dim = j.at("dim").get<int>();
    T.b = j.at("b").get<std::vector<double>>();
    T.A = j.at("A").get<std::vector<double>>();
    if (j.contains("rho")) T.rho = jump_from_json(j["rho"]);
    if (j.contains("atoms"))
        for (const auto& a : j["atoms"]) {
            Atom atom;
            atom.y = a.at("y").get<std::vector<double>>();
            atom.rate = a.at("rate").get<double>();
            T.atoms.push_back(std::move(atom));
        }
    T.transient = j.value("transient", false);
    validate_triple(T);
    return T;
}

std::string ensemble_cache_key(const SimScheme& S, const std::vector<double>& times,
                               std::size_t paths, std::uint64_t seed) {
    std::ostringstream desc;
    desc.precision(17);
    desc << triple_to_json(S.base) << '|' << S.n << '|' << S.eps << '|';
    for (double t : times) desc << t << ',';
    desc << '|' << paths << '|' << seed;
    std::string s = desc.str();
    std::uint64_t h = 1469598103934665603ull; // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void save_ensemble(const PathEnsemble& e, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_ensemble: cannot open " + path);
    const char magic[8] = {'L', 'S', 'E', 'N', 'S', '0', '0', '1'};
    out.write(magic, 8);
    std::uint64_t dim = e.dim, paths = e.paths, k = e.times.size(), seed = e.seed;
    out.write(reinterpret_cast<const char*>(&dim), 8);
    out.write(reinterpret_cast<const char*>(&paths), 8);
    out.write(reinterpret_cast<const char*>(&k), 8);
    out.write(reinterpret_cast<const char*>(&seed), 8);
    out.write(reinterpret_cast<const char*>(e.times.data()),
              static_cast<std::streamsize>(e.times.size() * 8));
    out.write(reinterpret_cast<const char*>(e.pos.data()),
              static_cast<std::streamsize>(e.pos.size() * 8));
    if (!out) throw std::runtime_error("save_ensemble: write failed");
}

PathEnsemble load_ensemble(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_ensemble: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "LSENS001", 8) != 0)
        throw std::runtime_error("load_ensemble: bad file format");
    std::uint64_t dim, paths, k, seed;
    in.read(reinterpret_cast<char*>(&dim), 8);
    in.read(reinterpret_cast<char*>(&paths), 8);
    in.read(reinterpret_cast<char*>(&k), 8);
    in.read(reinterpret_cast<char*>(&seed), 8);
    if (!in || dim < 1 || dim > 3 || k < 2)
        throw std::runtime_error("load_ensemble: bad header");
    PathEnsemble e;
    e.dim = static_cast<int>(dim);
    e.paths = paths;
    e.seed = seed;
    e.times.resize(k);
    e.pos.resize(paths * k * dim);
    in.read(reinterpret_cast<char*>(e.times.data()),
            static_cast<std::streamsize>(k * 8));
    in.read(reinterpret_cast<char*>(e.pos.data()),
            static_cast<std::streamsize>(e.pos.size() * 8));
    if (!in) throw std::runtime_error("load_ensemble: truncated file");
    return e;
}

} // namespace levysym
