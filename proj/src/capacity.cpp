#include "levysym/capacity.hpp"

#include "levysym/parallel.hpp"
#include "levysym/rearrange.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace levysym {

namespace {

void check_indicator(const GridField& A, const char* who) {
    if (A.background != 0.0)
        throw std::invalid_argument(std::string(who) + ": set background must be 0");
    for (double v : A.values)
        if (v != 0.0 && v != 1.0)
            throw std::invalid_argument(std::string(who) + ": set must be an indicator");
}

std::vector<double> resolve_times(const McParams& mc) {
    if (!mc.times.empty()) {
        if (mc.times.front() != 0.0 || mc.times.size() < 2)
            throw std::invalid_argument("mc params: bad time grid");
        return mc.times;
    }
    if (!(mc.horizon > 0.0))
        throw std::invalid_argument("mc params: horizon must be positive");
    std::vector<double> times(mc.steps + 1);
    for (std::size_t i = 0; i <= mc.steps; ++i)
        times[i] = mc.horizon * static_cast<double>(i) / static_cast<double>(mc.steps);
    return times;
}

} // namespace

std::optional<std::size_t> hitting_time(const std::vector<double>& times,
                                        const double* positions, int dim,
                                        const GridField& A, const double* x) {
    check_indicator(A, "hitting_time");
    const Grid& g = A.grid;
    for (std::size_t i = 0; i < times.size(); ++i) {
        int idx[3];
        bool in = true;
        for (int a = 0; a < dim; ++a) {
            double t = (x[a] + positions[i * dim + a] + g.half_extent) / g.spacing;
            if (t < 0.0 || t >= g.points_per_axis) { in = false; break; }
            idx[a] = static_cast<int>(t);
        }
        if (in && A.values[g.flatten(idx)] != 0.0) return i;
    }
    return std::nullopt;
}

CoverageProfile coverage_profile(const LevyTriple& T, const GridField& A,
                                 const McParams& mc) {
    check_indicator(A, "coverage_profile");
    const Grid& g = A.grid;
    std::vector<double> times = resolve_times(mc);
    SimScheme S = truncate_triple(T, mc.trunc_n, mc.eps_n);
    if (S.base.dim != g.dim)
        throw std::invalid_argument("coverage_profile: process/grid dimension mismatch");

    const int d = g.dim;
    const int m = g.points_per_axis;
    const int pad = mc.pad < 0 ? m / 2 : mc.pad;
    const int me = m + 2 * pad;
    std::size_t lat_size = 1;
    for (int a = 0; a < d; ++a) lat_size *= static_cast<std::size_t>(me);

    std::vector<int> acells;
    {
        int c[3];
        for (std::size_t k = 0; k < A.values.size(); ++k) {
            if (A.values[k] == 0.0) continue;
            g.unflatten(k, c);
            for (int a = 0; a < d; ++a) acells.push_back(c[a]);
        }
    }

    const double h = g.spacing;
    const std::size_t K = times.size();
    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> per_path(mc.paths);
    std::vector<double> over(mc.paths, 0.0);

    parallel_blocks(mc.paths, 16, mc.workers, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> pos(K * d);
        std::vector<std::uint8_t> seen(lat_size);
        for (std::size_t p = lo; p < hi; ++p) {
            generate_path(S, times, mc.seed, p, pos.data());
            std::fill(seen.begin(), seen.end(), 0);
            std::size_t overflow = 0;
            int delta[3], prev[3] = {0, 0, 0};
            bool have_prev = false;
            int c[3];
            for (std::size_t i = 0; i < K; ++i) {
                // offsets x with x + X in A form the translated set A - X
                for (int a = 0; a < d; ++a)
                    delta[a] = static_cast<int>(std::floor(0.5 - pos[i * d + a] / h));
                if (have_prev && std::equal(delta, delta + d, prev)) continue;
                std::copy(delta, delta + d, prev);
                have_prev = true;
                std::uint32_t fresh = 0;
                for (std::size_t j = 0; j < acells.size(); j += d) {
                    bool in = true;
                    std::size_t f = 0;
                    for (int a = 0; a < d; ++a) {
                        c[a] = acells[j + a] + delta[a];
                        if (c[a] < -pad || c[a] >= m + pad) { in = false; break; }
                        f = f * me + static_cast<std::size_t>(c[a] + pad);
                    }
                    if (!in) { ++overflow; continue; }
                    if (!seen[f]) { seen[f] = 1; ++fresh; }
                }
                if (fresh > 0)
                    per_path[p].emplace_back(static_cast<std::uint32_t>(i), fresh);
            }
            over[p] = static_cast<double>(overflow);
        }
    });

    CoverageProfile cov;
    cov.times = std::move(times);
    cov.cell_volume = g.cell_volume();
    cov.paths = mc.paths;
    cov.path_begin.resize(mc.paths + 1, 0);
    for (std::size_t p = 0; p < mc.paths; ++p)
        cov.path_begin[p + 1] = cov.path_begin[p] + per_path[p].size();
    cov.pair_time.resize(cov.path_begin.back());
    cov.pair_count.resize(cov.path_begin.back());
    for (std::size_t p = 0; p < mc.paths; ++p)
        for (std::size_t i = 0; i < per_path[p].size(); ++i) {
            cov.pair_time[cov.path_begin[p] + i] = per_path[p][i].first;
            cov.pair_count[cov.path_begin[p] + i] = per_path[p][i].second;
        }
    double s = 0.0;
    for (double v : over) s += v;
    cov.mean_overflow = s / static_cast<double>(mc.paths);
    return cov;
}

CapacityEstimate qcapacity_from(const CoverageProfile& cov, double q) {
    if (!(q > 0.0)) throw std::invalid_argument("qcapacity: q must be positive");
    const double hv = cov.cell_volume;
    const double t_end = cov.times.back();
    const std::size_t K = cov.times.size();

    // mean coverage at the horizon and at its midpoint, for the tail slope
    std::size_t i_half = 0;
    while (i_half + 1 < K && cov.times[i_half + 1] <= 0.5 * t_end) ++i_half;

    std::vector<double> Y(cov.paths, 0.0);
    double cum_half = 0.0, cum_end = 0.0;
    for (std::size_t p = 0; p < cov.paths; ++p) {
        double y = 0.0;
        for (std::size_t i = cov.path_begin[p]; i < cov.path_begin[p + 1]; ++i) {
            double s = cov.times[cov.pair_time[i]];
            double dv = static_cast<double>(cov.pair_count[i]) * hv;
            y += std::exp(-q * s) * dv;
            cum_end += dv;
            if (cov.pair_time[i] <= i_half) cum_half += dv;
        }
        Y[p] = q * y;
    }
    double n = static_cast<double>(cov.paths);
    double mean = 0.0;
    for (double y : Y) mean += y;
    mean /= n;
    double var = 0.0;
    for (double y : Y) var += (y - mean) * (y - mean);
    double se = cov.paths > 1 ? std::sqrt(var / (n * (n - 1.0))) : 0.0;

    // coverage keeps growing past the horizon; extrapolate the late slope
    double slope = 0.0;
    double span = t_end - cov.times[i_half];
    if (span > 0.0) slope = std::max(0.0, (cum_end - cum_half) / n / span);
    double tail = slope * std::exp(-q * t_end);

    CapacityEstimate est;
    est.q = q;
    est.value = mean + tail;
    est.std_error = se;
    est.spatial_truncation_bias_bound = q * cov.mean_overflow * hv + tail;
    est.time_step = K > 1 ? cov.times[1] - cov.times[0] : 0.0;
    est.paths = cov.paths;
    return est;
}

CapacityEstimate qcapacity(const LevyTriple& T, const GridField& A, double q,
                           const McParams& mc) {
    std::vector<double> times = resolve_times(mc);
    if (std::exp(-q * times.back()) > 0.25)
        throw std::invalid_argument("qcapacity: horizon too short for this q");
    CoverageProfile cov = coverage_profile(T, A, mc);
    return qcapacity_from(cov, q);
}

CapacityEstimate zero_capacity(const LevyTriple& T, const GridField& A,
                               const McParams& mc, double q0) {
    if (!T.transient)
        throw std::invalid_argument("zero_capacity: triple not asserted transient");
    CoverageProfile cov = coverage_profile(T, A, mc);

    CapacityEstimate out;
    for (int j = 0; j < 5; ++j) {
        double q = q0 / static_cast<double>(1 << j);
        CapacityEstimate e = qcapacity_from(cov, q);
        out.ladder_q.push_back(q);
        out.ladder_value.push_back(e.value);
        out.ladder_se.push_back(e.std_error);
        out.spatial_truncation_bias_bound =
            std::max(out.spatial_truncation_bias_bound, e.spatial_truncation_bias_bound);
        out.time_step = e.time_step;
        out.paths = e.paths;
    }
    // C^q is nondecreasing in q; a decreasing ladder beyond noise flags
    // recurrence or a too-short horizon
    for (std::size_t j = 0; j + 1 < out.ladder_q.size(); ++j) {
        double se = std::hypot(out.ladder_se[j], out.ladder_se[j + 1]);
        if (out.ladder_value[j] < out.ladder_value[j + 1] - 4.0 * se - 1e-9)
            throw std::runtime_error("zero_capacity: ladder not monotone in q");
    }

    // least squares fit value(q) = a + b sqrt(q) + c q; the intercept is the
    // q -> 0 limit (C^q of a transient process has a sqrt(q) leading term,
    // so a purely linear extrapolation overshoots)
    const std::size_t n = out.ladder_q.size();
    double M[3][3] = {{0}}, rhs[3] = {0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        double x[3] = {1.0, std::sqrt(out.ladder_q[i]), out.ladder_q[i]};
        for (int r = 0; r < 3; ++r) {
            rhs[r] += x[r] * out.ladder_value[i];
            for (int cc = 0; cc < 3; ++cc) M[r][cc] += x[r] * x[cc];
        }
    }
    auto det3 = [](double A0[3][3]) {
        return A0[0][0] * (A0[1][1] * A0[2][2] - A0[1][2] * A0[2][1]) -
               A0[0][1] * (A0[1][0] * A0[2][2] - A0[1][2] * A0[2][0]) +
               A0[0][2] * (A0[1][0] * A0[2][1] - A0[1][1] * A0[2][0]);
    };
    double D = det3(M);
    double coef[3] = {0, 0, 0};
    if (std::abs(D) > 1e-14) {
        for (int k = 0; k < 3; ++k) {
            double Mk[3][3];
            for (int r = 0; r < 3; ++r)
                for (int cc = 0; cc < 3; ++cc)
                    Mk[r][cc] = cc == k ? rhs[r] : M[r][cc];
            coef[k] = det3(Mk) / D;
        }
    }
    double resid2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double fit = coef[0] + coef[1] * std::sqrt(out.ladder_q[i]) +
                     coef[2] * out.ladder_q[i];
        resid2 += (out.ladder_value[i] - fit) * (out.ladder_value[i] - fit);
    }
    out.q = 0.0;
    out.value = std::max(0.0, coef[0]);
    double max_se = 0.0;
    for (double s : out.ladder_se) max_se = std::max(max_se, s);
    out.std_error = std::sqrt(resid2 / static_cast<double>(n)) + max_se;
    return out;
}

ComparisonReport verify_cap(const LevyTriple& T, const GridField& A, double q,
                            const McParams& mc, double allowance) {
    LevyTriple T_r = rearrange_triple(T);
    GridField A_r = rearrange_set(A);

    CapacityEstimate raw = qcapacity(T, A, q, mc);
    CapacityEstimate re = qcapacity(T_r, A_r, q, mc);

    ComparisonReport rep;
    rep.label = "cap";
    rep.seed = mc.seed;
    rep.lhs = raw.value;
    rep.lhs_se = raw.std_error;
    rep.rhs = re.value;
    rep.rhs_se = re.std_error;
    rep.margin = rep.lhs - rep.rhs;
    double se = std::hypot(raw.std_error, re.std_error);
    if (allowance < 0.0) {
        double scale = std::max({1.0, std::abs(rep.lhs), std::abs(rep.rhs)});
        allowance = (A.grid.spacing + raw.time_step) * scale;
    }
    rep.tolerance = 3.0 * se + allowance + raw.spatial_truncation_bias_bound +
                    re.spatial_truncation_bias_bound;
    rep.holds = rep.margin >= -rep.tolerance;
    return rep;
}

} // namespace levysym
