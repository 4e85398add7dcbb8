#include "levysym/rearrange.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <tuple>

namespace levysym {

double ball_radius(double volume, int dim) {
    if (volume < 0) throw std::invalid_argument("ball_radius: negative volume");
    double omega;
    switch (dim) {
        case 1: omega = 2.0; break;
        case 2: omega = std::numbers::pi; break;
        case 3: omega = 4.0 * std::numbers::pi / 3.0; break;
        default: throw std::invalid_argument("ball_radius: dim must be 1, 2 or 3");
    }
    return std::pow(volume / omega, 1.0 / dim);
}

namespace {
std::mutex order_cache_mutex;
std::map<std::tuple<int, double, int>, std::vector<std::uint32_t>> order_cache;
} // namespace

const std::vector<std::uint32_t>& distance_order(const Grid& g) {
    std::lock_guard<std::mutex> lock(order_cache_mutex);
    auto key = std::make_tuple(g.dim, g.half_extent, g.points_per_axis);
    auto it = order_cache.find(key);
    if (it != order_cache.end()) return it->second;

    const std::size_t n = g.cell_count();
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::vector<double> dist2(n);
    double c[3];
    for (std::size_t i = 0; i < n; ++i) {
        g.cell_center(i, c);
        double s = 0.0;
        for (int a = 0; a < g.dim; ++a) s += c[a] * c[a];
        dist2[i] = s;
    }
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (dist2[a] != dist2[b]) return dist2[a] < dist2[b];
        return a < b;
    });
    return order_cache.emplace(key, std::move(order)).first->second;
}

GridField rearrange_fn(const GridField& f) {
    if (f.background != 0.0)
        throw std::invalid_argument("rearrange_fn: background > 0, use increasing_rearrange");
    std::vector<double> sorted = f.values;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    const auto& order = distance_order(f.grid);
    GridField out = make_field(f.grid);
    for (std::size_t k = 0; k < sorted.size(); ++k) out.values[order[k]] = sorted[k];
    return out;
}

GridField rearrange_set(const GridField& indicator) {
    for (double v : indicator.values)
        if (v != 0.0 && v != 1.0)
            throw std::invalid_argument("rearrange_set: values must be 0 or 1");
    return rearrange_fn(indicator);
}

GridField increasing_rearrange(const GridField& phi, double sigma) {
    if (!(sigma > 0)) throw std::invalid_argument("increasing_rearrange: sigma <= 0");
    if (phi.background != sigma)
        throw std::invalid_argument("increasing_rearrange: background != sigma");
    GridField deficit = make_field(phi.grid);
    for (std::size_t i = 0; i < phi.values.size(); ++i) {
        if (phi.values[i] > sigma)
            throw std::invalid_argument("increasing_rearrange: value above sigma");
        deficit.values[i] = sigma - phi.values[i];
    }
    GridField rearranged = rearrange_fn(deficit);
    GridField out = make_field(phi.grid, 0.0, sigma);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = sigma - rearranged.values[i];
    return out;
}

DominationReport dominates(const GridField& varphi, const GridField& phi,
                           double sigma, double tolerance) {
    if (!(varphi.grid == phi.grid)) throw std::invalid_argument("dominates: grid mismatch");
    if (varphi.background != sigma || phi.background != sigma)
        throw std::invalid_argument("dominates: background mismatch");

    const std::size_t n = varphi.values.size();
    const double hv = varphi.grid.cell_volume();

    std::vector<double> def_v(n), def_p(n);
    double total_v = 0.0, total_p = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        def_v[i] = (sigma - varphi.values[i]) * hv;
        def_p[i] = (sigma - phi.values[i]) * hv;
        total_v += def_v[i];
        total_p += def_p[i];
    }
    if (tolerance <= 0) tolerance = 1e-12 * std::max(total_v, total_p);

    // LHS_k: deficit of varphi outside the k cells nearest the origin.
    // RHS_k: minimum over |A| = k*h^d of the deficit of phi outside A,
    // attained at the k largest per-cell deficits (bathtub principle).
    const auto& order = distance_order(varphi.grid);
    std::vector<double> sorted_p = def_p;
    std::sort(sorted_p.begin(), sorted_p.end(), std::greater<double>());

    DominationReport rep;
    rep.tolerance = tolerance;
    double lhs = total_v, rhs = total_p;
    double worst = rhs - lhs;
    std::size_t worst_k = 0;
    for (std::size_t k = 0; k <= n; ++k) {
        if (k > 0) {
            lhs -= def_v[order[k - 1]];
            rhs -= sorted_p[k - 1];
        }
        if (rhs - lhs < worst) {
            worst = rhs - lhs;
            worst_k = k;
        }
    }
    rep.worst_margin = worst;
    rep.worst_volume = static_cast<double>(worst_k) * hv;
    rep.holds = worst >= -tolerance;
    return rep;
}

} // namespace levysym
