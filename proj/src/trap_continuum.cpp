#include "levysym/trap_continuum.hpp"

#include "levysym/parallel.hpp"
#include "levysym/rearrange.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace levysym {

namespace {

// Offset lattice: the grid box extended by `pad` cells per side. Offsets and
// coverage live here so mass leaving the box is still accounted for.
struct ExtLattice {
    int dim;
    int m;    // box cells per axis
    int pad;
    int me;   // extended cells per axis

    ExtLattice(const Grid& g, int pad_cells)
        : dim(g.dim), m(g.points_per_axis),
          pad(pad_cells < 0 ? g.points_per_axis / 2 : pad_cells),
          me(m + 2 * pad) {}

    std::size_t size() const {
        std::size_t s = 1;
        for (int a = 0; a < dim; ++a) s *= static_cast<std::size_t>(me);
        return s;
    }
    // coords are box-cell coordinates; valid range is [-pad, m + pad)
    bool contains(const int* c) const {
        for (int a = 0; a < dim; ++a)
            if (c[a] < -pad || c[a] >= m + pad) return false;
        return true;
    }
    std::size_t flatten(const int* c) const {
        std::size_t f = 0;
        for (int a = 0; a < dim; ++a)
            f = f * me + static_cast<std::size_t>(c[a] + pad);
        return f;
    }
    bool in_box(const int* c) const {
        for (int a = 0; a < dim; ++a)
            if (c[a] < 0 || c[a] >= m) return false;
        return true;
    }
};

struct SliceCells {
    // nonzero soft cells and hard cells, as axis coordinates
    std::vector<int> soft_coords; // dim entries per cell
    std::vector<double> soft_vals;
    std::vector<int> hard_coords;
};

std::vector<SliceCells> collect_slices(const TrapSchedule& sched) {
    std::vector<SliceCells> out(sched.slices.size());
    const Grid& g = sched.grid();
    int c[3];
    for (std::size_t j = 0; j < sched.slices.size(); ++j) {
        const auto& sl = sched.slices[j];
        for (std::size_t k = 0; k < sl.soft.values.size(); ++k) {
            double v = sl.soft.values[k];
            if (v == 0.0) continue;
            g.unflatten(k, c);
            if (std::isinf(v)) {
                for (int a = 0; a < g.dim; ++a) out[j].hard_coords.push_back(c[a]);
                continue;
            }
            for (int a = 0; a < g.dim; ++a) out[j].soft_coords.push_back(c[a]);
            out[j].soft_vals.push_back(v);
        }
        for (std::size_t k = 0; k < sl.hard.values.size(); ++k) {
            if (sl.hard.values[k] == 0.0) continue;
            g.unflatten(k, c);
            for (int a = 0; a < g.dim; ++a) out[j].hard_coords.push_back(c[a]);
        }
    }
    return out;
}

std::size_t slice_of(const TrapSchedule& sched, double s) {
    const auto& st = sched.slice_times;
    std::size_t j = static_cast<std::size_t>(
        std::upper_bound(st.begin(), st.end(), s) - st.begin());
    if (j == 0) return 0;
    return std::min(j - 1, sched.slices.size() - 1);
}

void check_alignment(const TrapSchedule& sched, const std::vector<double>& times) {
    for (std::size_t j = 1; j + 1 < sched.slice_times.size(); ++j) {
        double b = sched.slice_times[j];
        if (b >= times.back()) continue;
        bool found = false;
        for (double s : times)
            if (std::abs(s - b) < 1e-9) { found = true; break; }
        if (!found)
            throw std::invalid_argument("trap schedule: slice boundary not on the time grid");
    }
}

double field_at_point(const GridField& f, const double* y) {
    const Grid& g = f.grid;
    int idx[3];
    for (int a = 0; a < g.dim; ++a) {
        double t = (y[a] + g.half_extent) / g.spacing;
        if (t < 0.0 || t >= g.points_per_axis) return f.background;
        idx[a] = static_cast<int>(t);
    }
    return f.values[g.flatten(idx)];
}

std::vector<double> resolve_times(const McParams& mc, double t) {
    if (!mc.times.empty()) {
        if (std::abs(mc.times.back() - t) > 1e-12)
            throw std::invalid_argument("mc params: time grid does not end at the horizon");
        if (mc.times.front() != 0.0)
            throw std::invalid_argument("mc params: time grid must start at 0");
        return mc.times;
    }
    return uniform_times(t, mc.steps);
}

void mean_se(const std::vector<double>& y, double* mean, double* se) {
    double n = static_cast<double>(y.size());
    double s = 0.0;
    for (double v : y) s += v;
    double m = s / n;
    double v2 = 0.0;
    for (double v : y) v2 += (v - m) * (v - m);
    *mean = m;
    *se = y.size() > 1 ? std::sqrt(v2 / (n * (n - 1.0))) : 0.0;
}

} // namespace

std::vector<double> uniform_times(double t, std::size_t steps) {
    if (!(t > 0.0) || steps == 0)
        throw std::invalid_argument("uniform_times: need t > 0 and steps > 0");
    std::vector<double> times(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i)
        times[i] = t * static_cast<double>(i) / static_cast<double>(steps);
    return times;
}

TrapSchedule single_slice(double t, GridField soft, GridField hard) {
    TrapSchedule s;
    s.slice_times = {0.0, t};
    s.slices.push_back({std::move(soft), std::move(hard)});
    validate_schedule(s);
    return s;
}

void validate_schedule(const TrapSchedule& sched) {
    if (sched.slices.empty() || sched.slice_times.size() != sched.slices.size() + 1)
        throw std::invalid_argument("trap schedule: need J slices and J+1 times");
    if (sched.slice_times.front() != 0.0)
        throw std::invalid_argument("trap schedule: times must start at 0");
    for (std::size_t j = 1; j < sched.slice_times.size(); ++j)
        if (!(sched.slice_times[j] > sched.slice_times[j - 1]))
            throw std::invalid_argument("trap schedule: times not increasing");
    const Grid& g = sched.grid();
    for (const auto& sl : sched.slices) {
        if (!(sl.soft.grid == g) || !(sl.hard.grid == g))
            throw std::invalid_argument("trap schedule: slice grid mismatch");
        if (sl.soft.background != 0.0 || sl.hard.background != 0.0)
            throw std::invalid_argument("trap schedule: slice backgrounds must be 0");
        for (double v : sl.soft.values)
            if (!(v >= 0.0))
                throw std::invalid_argument("trap schedule: negative soft potential");
        for (double v : sl.hard.values)
            if (v != 0.0 && v != 1.0)
                throw std::invalid_argument("trap schedule: hard set must be an indicator");
    }
}

double kill_weight(const std::vector<double>& times, const double* positions,
                   const TrapSchedule& sched, const double* x) {
    validate_schedule(sched);
    check_alignment(sched, times);
    const int d = sched.grid().dim;
    double integral = 0.0;
    double y[3];
    for (std::size_t i = 0; i < times.size(); ++i) {
        const auto& sl = sched.slices[slice_of(sched, times[i])];
        for (int a = 0; a < d; ++a) y[a] = -x[a] - positions[i * d + a];
        double u = field_at_point(sl.soft, y);
        if (std::isinf(u) || field_at_point(sl.hard, y) != 0.0) return 1.0;
        if (i > 0) integral += (times[i] - times[i - 1]) * u;
    }
    return 1.0 - std::exp(-integral);
}

namespace {

// Per-path trap accounting on the extended offset lattice. The containing
// cell of -c_k - X is the reflected index (m-1-k) shifted by
// floor(1/2 - X/h), so translating the slice cells by the per-time shift
// rasterizes the kill field for every offset at once.
struct TrapAccumulator {
    const ExtLattice& lat;
    std::vector<double> integral;   // soft kill integral per offset
    std::vector<std::uint8_t> dead; // hard-killed offsets
    std::size_t overflow = 0;

    explicit TrapAccumulator(const ExtLattice& l)
        : lat(l), integral(l.size(), 0.0), dead(l.size(), 0) {}

    void reset() {
        std::fill(integral.begin(), integral.end(), 0.0);
        std::fill(dead.begin(), dead.end(), 0);
        overflow = 0;
    }

    void apply_hard(const SliceCells& sc, const int* delta) {
        const int d = lat.dim;
        int c[3];
        for (std::size_t i = 0; i < sc.hard_coords.size(); i += d) {
            for (int a = 0; a < d; ++a)
                c[a] = lat.m - 1 - sc.hard_coords[i + a] + delta[a];
            if (!lat.contains(c)) { ++overflow; continue; }
            dead[lat.flatten(c)] = 1;
        }
    }

    void apply_soft(const SliceCells& sc, const int* delta, double weight) {
        if (weight == 0.0) return;
        const int d = lat.dim;
        int c[3];
        for (std::size_t i = 0, v = 0; i < sc.soft_coords.size(); i += d, ++v) {
            for (int a = 0; a < d; ++a)
                c[a] = lat.m - 1 - sc.soft_coords[i + a] + delta[a];
            if (!lat.contains(c)) { ++overflow; continue; }
            integral[lat.flatten(c)] += weight * sc.soft_vals[v];
        }
    }
};

} // namespace

Estimate trap_mass(const LevyTriple& T, const TrapSchedule& sched,
                   const GridField& phi, double t, const McParams& mc) {
    validate_schedule(sched);
    const Grid& g = sched.grid();
    if (!(phi.grid == g))
        throw std::invalid_argument("trap_mass: phi grid mismatch");
    if (sched.horizon() < t - 1e-12)
        throw std::invalid_argument("trap_mass: schedule horizon shorter than t");
    std::vector<double> times = resolve_times(mc, t);
    check_alignment(sched, times);
    SimScheme S = truncate_triple(T, mc.trunc_n, mc.eps_n);
    if (S.base.dim != g.dim)
        throw std::invalid_argument("trap_mass: process/grid dimension mismatch");

    const ExtLattice lat(g, mc.pad);
    const std::vector<SliceCells> cells = collect_slices(sched);
    std::vector<std::size_t> time_slice(times.size());
    for (std::size_t i = 0; i < times.size(); ++i)
        time_slice[i] = slice_of(sched, times[i]);

    const int d = g.dim;
    const double h = g.spacing;
    const double hv = g.cell_volume();
    const std::size_t K = times.size();
    double phi_max = phi.background;
    for (double v : phi.values) phi_max = std::max(phi_max, v);

    std::vector<double> Y(mc.paths, 0.0);
    std::vector<double> over(mc.paths, 0.0);

    parallel_blocks(mc.paths, 16, mc.workers, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> pos(K * d);
        TrapAccumulator acc(lat);
        for (std::size_t p = lo; p < hi; ++p) {
            generate_path(S, times, mc.seed, p, pos.data());
            acc.reset();
            int delta[3] = {0, 0, 0}, prev[3] = {0, 0, 0};
            std::size_t prev_slice = SIZE_MAX;
            double pending = 0.0;
            for (std::size_t i = 0; i < K; ++i) {
                for (int a = 0; a < d; ++a)
                    delta[a] = static_cast<int>(std::floor(0.5 - pos[i * d + a] / h));
                std::size_t sl = time_slice[i];
                bool same = i > 0 && sl == prev_slice &&
                            std::equal(delta, delta + d, prev);
                if (!same) {
                    if (pending > 0.0)
                        acc.apply_soft(cells[prev_slice], prev, pending);
                    pending = 0.0;
                    acc.apply_hard(cells[sl], delta);
                    std::copy(delta, delta + d, prev);
                    prev_slice = sl;
                }
                if (i > 0) pending += times[i] - times[i - 1];
            }
            if (pending > 0.0) acc.apply_soft(cells[prev_slice], prev, pending);

            // integrate the kill weight against phi over the extended lattice
            double sum = 0.0;
            int c[3];
            for (int a = 0; a < d; ++a) c[a] = -lat.pad;
            for (std::size_t k = 0; k < lat.size(); ++k) {
                double pv = lat.in_box(c) ? phi.values[g.flatten(c)] : phi.background;
                if (pv > 0.0) {
                    double w = acc.dead[k] ? 1.0
                               : acc.integral[k] > 0.0 ? -std::expm1(-acc.integral[k])
                                                       : 0.0;
                    sum += pv * w;
                }
                for (int a = d; a-- > 0;) {
                    if (++c[a] < lat.m + lat.pad) break;
                    c[a] = -lat.pad;
                }
            }
            Y[p] = sum * hv;
            over[p] = static_cast<double>(acc.overflow);
        }
    });

    Estimate est;
    mean_se(Y, &est.value, &est.std_error);
    double mean_over = 0.0;
    for (double v : over) mean_over += v;
    mean_over /= static_cast<double>(mc.paths);
    // raster events landing outside the extended lattice mark the only
    // offsets whose (<= 1) kill weight went unobserved
    est.bias_bound = mean_over * hv * std::min(1.0, phi_max);
    return est;
}

Estimate poisson_field_oracle(const LevyTriple& T, const TrapSchedule& sched,
                              const GridField& intensity, double t,
                              const McParams& mc) {
    validate_schedule(sched);
    const Grid& g = sched.grid();
    if (!(intensity.grid == g))
        throw std::invalid_argument("poisson_field_oracle: intensity grid mismatch");
    if (intensity.background != 0.0)
        throw std::invalid_argument("poisson_field_oracle: intensity background must be 0");
    std::vector<double> times = resolve_times(mc, t);
    check_alignment(sched, times);
    SimScheme S = truncate_triple(T, mc.trunc_n, mc.eps_n);

    const int d = g.dim;
    const double hv = g.cell_volume();
    double total = 0.0;
    std::vector<double> cum(intensity.values.size());
    for (std::size_t k = 0; k < intensity.values.size(); ++k) {
        total += intensity.values[k] * hv;
        cum[k] = total;
    }

    constexpr std::uint64_t kPointSalt = 0x7f4a7c15u;
    constexpr std::uint64_t kPathsPerReplicate = 1024;
    const std::size_t K = times.size();

    std::vector<double> Y(mc.paths, 0.0);
    parallel_blocks(mc.paths, 16, mc.workers, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> pos(K * d);
        for (std::size_t r = lo; r < hi; ++r) {
            Rng rng(mc.seed ^ kPointSalt, r);
            std::uint64_t n = rng.poisson(total);
            if (n >= kPathsPerReplicate)
                throw std::runtime_error("poisson_field_oracle: intensity mass too large");
            double log_survival = 0.0;
            for (std::uint64_t q = 0; q < n && std::isfinite(log_survival); ++q) {
                // trap center from the normalized intensity
                double target = rng.uniform() * total;
                std::size_t cell = static_cast<std::size_t>(
                    std::upper_bound(cum.begin(), cum.end(), target) - cum.begin());
                if (cell >= cum.size()) cell = cum.size() - 1;
                double z[3];
                g.cell_center(cell, z);
                for (int a = 0; a < d; ++a)
                    z[a] += (rng.uniform() - 0.5) * g.spacing;

                generate_path(S, times, mc.seed, r * kPathsPerReplicate + q, pos.data());
                double y[3];
                for (std::size_t i = 0; i < K; ++i) {
                    const auto& sl = sched.slices[slice_of(sched, times[i])];
                    for (int a = 0; a < d; ++a) y[a] = -z[a] - pos[i * d + a];
                    double u = field_at_point(sl.soft, y);
                    if (std::isinf(u) || field_at_point(sl.hard, y) != 0.0) {
                        log_survival = -std::numeric_limits<double>::infinity();
                        break;
                    }
                    if (i > 0) log_survival -= (times[i] - times[i - 1]) * u;
                }
            }
            Y[r] = std::exp(log_survival);
        }
    });

    Estimate est;
    mean_se(Y, &est.value, &est.std_error);
    return est;
}

Estimate sausage_volume(const LevyTriple& T, const GridField& D,
                        const std::vector<double>& g_drift, double t,
                        const McParams& mc) {
    const Grid& g = D.grid;
    if (D.background != 0.0)
        throw std::invalid_argument("sausage_volume: D background must be 0");
    for (double v : D.values)
        if (v != 0.0 && v != 1.0)
            throw std::invalid_argument("sausage_volume: D must be an indicator");
    std::vector<double> times = resolve_times(mc, t);
    SimScheme S = truncate_triple(T, mc.trunc_n, mc.eps_n);
    if (S.base.dim != g.dim)
        throw std::invalid_argument("sausage_volume: process/grid dimension mismatch");

    const int d = g.dim;
    const std::size_t K = times.size();
    if (!g_drift.empty() && g_drift.size() != K * static_cast<std::size_t>(d))
        throw std::invalid_argument("sausage_volume: drift samples must match the time grid");

    const ExtLattice lat(g, mc.pad);
    std::vector<int> dcells;
    {
        int c[3];
        for (std::size_t k = 0; k < D.values.size(); ++k) {
            if (D.values[k] == 0.0) continue;
            g.unflatten(k, c);
            for (int a = 0; a < d; ++a) dcells.push_back(c[a]);
        }
    }
    const double h = g.spacing;
    const double hv = g.cell_volume();

    std::vector<double> Y(mc.paths, 0.0);
    std::vector<double> over(mc.paths, 0.0);
    parallel_blocks(mc.paths, 16, mc.workers, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> pos(K * d);
        std::vector<std::uint8_t> seen(lat.size());
        for (std::size_t p = lo; p < hi; ++p) {
            generate_path(S, times, mc.seed, p, pos.data());
            std::fill(seen.begin(), seen.end(), 0);
            std::size_t count = 0, overflow = 0;
            int delta[3], prev[3] = {0, 0, 0};
            bool have_prev = false;
            int c[3];
            for (std::size_t i = 0; i < K; ++i) {
                for (int a = 0; a < d; ++a) {
                    double s = pos[i * d + a] +
                               (g_drift.empty() ? 0.0 : g_drift[i * d + a]);
                    delta[a] = static_cast<int>(std::floor(0.5 + s / h));
                }
                if (have_prev && std::equal(delta, delta + d, prev)) continue;
                std::copy(delta, delta + d, prev);
                have_prev = true;
                for (std::size_t j = 0; j < dcells.size(); j += d) {
                    for (int a = 0; a < d; ++a) c[a] = dcells[j + a] + delta[a];
                    if (!lat.contains(c)) { ++overflow; continue; }
                    std::size_t f = lat.flatten(c);
                    if (!seen[f]) { seen[f] = 1; ++count; }
                }
            }
            Y[p] = static_cast<double>(count) * hv;
            over[p] = static_cast<double>(overflow);
        }
    });

    Estimate est;
    mean_se(Y, &est.value, &est.std_error);
    double mean_over = 0.0;
    for (double v : over) mean_over += v;
    est.bias_bound = mean_over / static_cast<double>(mc.paths) * hv;
    return est;
}

TrapSchedule rearrange_schedule(const TrapSchedule& sched) {
    validate_schedule(sched);
    TrapSchedule out;
    out.slice_times = sched.slice_times;
    out.slices.reserve(sched.slices.size());
    for (const auto& sl : sched.slices) {
        TrapSlice r;
        r.soft = rearrange_fn(sl.soft);
        r.hard = rearrange_set(sl.hard);
        out.slices.push_back(std::move(r));
    }
    return out;
}

namespace {

double default_allowance(double h, double dt, double lhs, double rhs) {
    double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
    return (h + dt) * scale;
}

} // namespace

ComparisonReport verify_trap(const LevyTriple& T, const TrapSchedule& sched,
                             const GridField& phi, double sigma, double t,
                             const McParams& mc, double allowance) {
    GridField clipped = phi;
    for (double& v : clipped.values) v = std::min(v, sigma);
    GridField phi_r = increasing_rearrange(clipped, sigma);
    TrapSchedule sched_r = rearrange_schedule(sched);
    LevyTriple T_r = rearrange_triple(T);

    Estimate raw = trap_mass(T, sched, clipped, t, mc);
    Estimate re = trap_mass(T_r, sched_r, phi_r, t, mc);

    ComparisonReport rep;
    rep.label = "trap";
    rep.seed = mc.seed;
    rep.lhs = raw.value;
    rep.lhs_se = raw.std_error;
    rep.rhs = re.value;
    rep.rhs_se = re.std_error;
    rep.margin = rep.lhs - rep.rhs;
    double se = std::sqrt(raw.std_error * raw.std_error + re.std_error * re.std_error);
    double dt = t / static_cast<double>(mc.times.empty() ? mc.steps : mc.times.size() - 1);
    if (allowance < 0.0)
        allowance = default_allowance(sched.grid().spacing, dt, rep.lhs, rep.rhs);
    rep.tolerance = 3.0 * se + allowance + raw.bias_bound + re.bias_bound;
    rep.holds = rep.margin >= -rep.tolerance;
    return rep;
}

ComparisonReport verify_sausage(const LevyTriple& T, const GridField& D,
                                const std::vector<double>& g, double t,
                                const McParams& mc, double allowance) {
    LevyTriple T_r = rearrange_triple(T);
    GridField D_r = rearrange_set(D);

    Estimate raw = sausage_volume(T, D, g, t, mc);
    Estimate re = sausage_volume(T_r, D_r, {}, t, mc);

    ComparisonReport rep;
    rep.label = "sausage";
    rep.seed = mc.seed;
    rep.lhs = raw.value;
    rep.lhs_se = raw.std_error;
    rep.rhs = re.value;
    rep.rhs_se = re.std_error;
    rep.margin = rep.lhs - rep.rhs;
    double se = std::sqrt(raw.std_error * raw.std_error + re.std_error * re.std_error);
    double dt = t / static_cast<double>(mc.times.empty() ? mc.steps : mc.times.size() - 1);
    if (allowance < 0.0)
        allowance = default_allowance(D.grid.spacing, dt, rep.lhs, rep.rhs);
    rep.tolerance = 3.0 * se + allowance + raw.bias_bound + re.bias_bound;
    rep.holds = rep.margin >= -rep.tolerance;
    return rep;
}

} // namespace levysym
