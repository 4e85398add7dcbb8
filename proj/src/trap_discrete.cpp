#include "levysym/trap_discrete.hpp"

#include "levysym/rearrange.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace levysym {

namespace {

constexpr double kMassTolerance = 1e-10;

double field_mass(const GridField& f) { return integrate(f); }

} // namespace

void validate_instance(const DiscreteInstance& inst) {
    if (inst.sigma != 1.0)
        throw std::invalid_argument("DiscreteInstance: sigma must be 1 (rescale the caller)");
    if (inst.traps.empty()) throw std::invalid_argument("DiscreteInstance: no traps");
    if (inst.kernels.size() + 1 != inst.traps.size())
        throw std::invalid_argument("DiscreteInstance: need n kernels for n+1 traps");
    if (inst.phi.background != inst.sigma)
        throw std::invalid_argument("DiscreteInstance: phi background != sigma");
    for (double v : inst.phi.values)
        if (v < 0.0 || v > inst.sigma)
            throw std::invalid_argument("DiscreteInstance: phi values outside [0, sigma]");
    for (const auto& V : inst.traps) {
        if (!(V.grid == inst.phi.grid) || V.background != 0.0)
            throw std::invalid_argument("DiscreteInstance: bad trap field");
        for (double v : V.values)
            if (v < 0.0 || v > 1.0)
                throw std::invalid_argument("DiscreteInstance: trap values outside [0,1]");
    }
    for (const auto& p : inst.kernels) {
        if (!(p.grid == inst.phi.grid) || p.background != 0.0)
            throw std::invalid_argument("DiscreteInstance: bad kernel field");
        if (std::abs(field_mass(p) - 1.0) > kMassTolerance)
            throw std::invalid_argument("DiscreteInstance: kernel not normalized");
    }
}

namespace {

// Deficit recursion. With R_k the product of kernel masses up to step k,
// the survival density is phi_k = R_k - psi_k where
//   psi_0 = V_0 + (1 - V_0) * (1 - phi)
//   psi_k = V_k * R_k + (1 - V_k) * (p_k conv psi_{k-1})
// and every psi_k is compactly supported.
GridField deficit_at(const DiscreteInstance& inst, int upto, double* running_mass) {
    const Grid& g = inst.phi.grid;
    GridField psi = make_field(g);
    for (std::size_t i = 0; i < psi.values.size(); ++i) {
        double v0 = inst.traps[0].values[i];
        psi.values[i] = v0 + (1.0 - v0) * (inst.sigma - inst.phi.values[i]);
    }
    double mass = 1.0;
    for (int k = 1; k <= upto; ++k) {
        mass *= field_mass(inst.kernels[k - 1]);
        GridField conv = convolve(inst.kernels[k - 1], psi);
        for (std::size_t i = 0; i < psi.values.size(); ++i) {
            double vk = inst.traps[k].values[i];
            psi.values[i] = vk * mass + (1.0 - vk) * conv.values[i];
        }
    }
    if (running_mass) *running_mass = mass;
    return psi;
}

} // namespace

GridField survival_density(const DiscreteInstance& inst, int upto) {
    validate_instance(inst);
    if (upto < 0 || upto > inst.steps())
        throw std::invalid_argument("survival_density: upto out of range");
    double mass = 1.0;
    GridField psi = deficit_at(inst, upto, &mass);
    GridField out = make_field(inst.phi.grid, 0.0, mass);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = mass - psi.values[i];
    return out;
}

double wn_eval(const DiscreteInstance& inst) {
    validate_instance(inst);
    double mass = 1.0;
    GridField psi_n = deficit_at(inst, inst.steps(), &mass);
    return integrate(psi_n) - mass * integrate_deficit(inst.phi, inst.sigma);
}

namespace {

// Kernel value between two lattice sites: average of the 2^d grid cells
// adjacent to the half-cell-shifted difference. Matches convolve().
double lattice_kernel(const GridField& p, const int* delta) {
    const int d = p.grid.dim;
    const int m = p.grid.points_per_axis;
    double acc = 0.0;
    for (int bits = 0; bits < (1 << d); ++bits) {
        int idx[3];
        bool ok = true;
        for (int a = 0; a < d; ++a) {
            idx[a] = delta[a] + m / 2 - 1 + ((bits >> a) & 1);
            if (idx[a] < 0 || idx[a] >= m) { ok = false; break; }
        }
        if (ok) acc += p.values[p.grid.flatten(idx)];
    }
    return std::ldexp(acc, -d);
}

// Value of a box field at extended-lattice coordinates (0 outside the box).
double box_value(const GridField& f, const int* idx) {
    const int m = f.grid.points_per_axis;
    for (int a = 0; a < f.grid.dim; ++a)
        if (idx[a] < 0 || idx[a] >= m) return 0.0;
    return f.values[f.grid.flatten(idx)];
}

} // namespace

double brute_wn(const DiscreteInstance& inst) {
    validate_instance(inst);
    const int n = inst.steps();
    const Grid& g = inst.phi.grid;
    const int d = g.dim;
    const int m = g.points_per_axis;
    if (n > 2) throw std::invalid_argument("brute_wn: n > 2");
    if (g.cell_count() > 4096) throw std::invalid_argument("brute_wn: grid too large");

    const int pad = n * (m / 2 + 1); // kernel reach per hop is m/2 lattice sites
    const int lo = -pad, hi = m - 1 + pad;
    const int ext = hi - lo + 1;
    double tuple_count = 1.0;
    for (int i = 0; i < (n + 1) * d; ++i) tuple_count *= ext;
    if (tuple_count > 3.0e9) throw std::invalid_argument("brute_wn: instance too large");

    const double hv = g.cell_volume();
    double weight_all = hv;
    for (int i = 0; i < n; ++i) weight_all *= hv;

    // W = sum over tuples of (1 - psi(x0)) * (1 - prod(1 - V_i)) * prod p_i,
    // accumulated as A - B with the psi split keeping B compact.
    double term_a = 0.0, term_b = 0.0;

    std::vector<int> x((n + 1) * d, lo);
    const std::size_t coords = x.size();
    bool done = false;
    while (!done) {
        double surv = 1.0;
        for (int i = 0; i <= n; ++i)
            surv *= 1.0 - box_value(inst.traps[i], x.data() + i * d);
        if (surv != 1.0) {
            double kernel_prod = 1.0;
            for (int i = 1; i <= n && kernel_prod != 0.0; ++i) {
                int delta[3];
                for (int a = 0; a < d; ++a) delta[a] = x[i * d + a] - x[(i - 1) * d + a];
                kernel_prod *= lattice_kernel(inst.kernels[i - 1], delta);
            }
            if (kernel_prod != 0.0) {
                double kill = (1.0 - surv) * kernel_prod;
                term_a += kill;
                double psi0 = inst.sigma - box_value(inst.phi, x.data());
                // box_value(phi) is 0 outside the box where the true value is sigma
                bool inside = true;
                for (int a = 0; a < d; ++a)
                    if (x[a] < 0 || x[a] >= m) inside = false;
                if (inside) term_b += psi0 * kill;
            }
        }
        done = true;
        for (std::size_t c = coords; c-- > 0;) {
            if (++x[c] <= hi) { done = false; break; }
            x[c] = lo;
        }
    }
    return (term_a - term_b) * weight_all;
}

DiscreteInstance rearrange_instance(const DiscreteInstance& inst) {
    DiscreteInstance out;
    out.sigma = inst.sigma;
    GridField clipped = inst.phi;
    for (double& v : clipped.values) v = std::min(v, inst.sigma);
    out.phi = increasing_rearrange(clipped, inst.sigma);
    out.traps.reserve(inst.traps.size());
    for (const auto& V : inst.traps) out.traps.push_back(rearrange_fn(V));
    out.kernels.reserve(inst.kernels.size());
    for (const auto& p : inst.kernels) {
        GridField r = rearrange_fn(p);
        double mass = integrate(r);
        if (mass > 0.0) r = combine(r, PointwiseOp::Scale, 1.0 / mass);
        out.kernels.push_back(std::move(r));
    }
    return out;
}

ComparisonReport verify_ri(const DiscreteInstance& inst, double tol_factor) {
    ComparisonReport rep;
    rep.label = "ri";
    rep.lhs = wn_eval(inst);
    rep.rhs = wn_eval(rearrange_instance(inst));
    rep.margin = rep.lhs - rep.rhs;
    double scale = std::max({std::abs(rep.lhs), std::abs(rep.rhs),
                             rep.lhs + integrate_deficit(inst.phi, inst.sigma), 1e-30});
    rep.tolerance = tol_factor * inst.phi.grid.spacing * scale;
    rep.holds = rep.margin >= -rep.tolerance;
    return rep;
}

namespace {

double stay_inside_probability(const std::vector<GridField>& domains,
                               const std::vector<GridField>& kernels) {
    double mass0 = integrate(domains[0]);
    if (mass0 <= 0.0) throw std::invalid_argument("verify_bll: empty A_0");
    GridField f = combine(domains[0], PointwiseOp::Scale, 1.0 / mass0);
    for (std::size_t k = 0; k < kernels.size(); ++k) {
        GridField conv = convolve(kernels[k], f);
        f = combine(domains[k + 1], conv, PointwiseOp::Product);
    }
    return integrate(f);
}

} // namespace

ComparisonReport verify_bll(const std::vector<GridField>& domains,
                            const std::vector<GridField>& kernels,
                            double tol_factor) {
    if (domains.empty() || domains.size() != kernels.size() + 1)
        throw std::invalid_argument("verify_bll: need n+1 domains and n kernels");
    for (const auto& A : domains)
        for (double v : A.values)
            if (v != 0.0 && v != 1.0)
                throw std::invalid_argument("verify_bll: domains must be indicators");

    std::vector<GridField> dom_r, ker_r;
    dom_r.reserve(domains.size());
    for (const auto& A : domains) dom_r.push_back(rearrange_set(A));
    ker_r.reserve(kernels.size());
    for (const auto& p : kernels) {
        GridField r = rearrange_fn(p);
        double mass = integrate(r);
        if (mass > 0.0) r = combine(r, PointwiseOp::Scale, 1.0 / mass);
        ker_r.push_back(std::move(r));
    }

    ComparisonReport rep;
    rep.label = "bll";
    rep.lhs = stay_inside_probability(domains, kernels);
    rep.rhs = stay_inside_probability(dom_r, ker_r);
    rep.margin = rep.rhs - rep.lhs; // rearranged side is the upper bound
    double scale = std::max({rep.lhs, rep.rhs, 1e-30});
    rep.tolerance = tol_factor * domains[0].grid.spacing * scale;
    rep.holds = rep.margin >= -rep.tolerance;
    return rep;
}

} // namespace levysym
