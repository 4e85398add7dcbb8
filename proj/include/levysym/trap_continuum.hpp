#pragma once

#include "levysym/grid.hpp"
#include "levysym/levy.hpp"
#include "levysym/report.hpp"

#include <cstdint>
#include <vector>

namespace levysym {

// Piecewise-constant-in-time trap configuration. Each slice holds a finite
// soft potential U (background 0) and a hard-trap indicator D; the slice is
// in force on [slice_times[j-1], slice_times[j]).
struct TrapSlice {
    GridField soft;
    GridField hard;
};

struct TrapSchedule {
    std::vector<double> slice_times; // 0 = s_0 < s_1 < ... < s_J = t
    std::vector<TrapSlice> slices;   // J entries

    const Grid& grid() const { return slices.at(0).soft.grid; }
    double horizon() const { return slice_times.back(); }
};

TrapSchedule single_slice(double t, GridField soft, GridField hard);
void validate_schedule(const TrapSchedule& sched);

// Monte Carlo controls shared by the trap and capacity estimators.
struct McParams {
    std::size_t paths = 1000;
    std::size_t steps = 100;     // uniform time steps when `times` is empty
    std::uint64_t seed = 1;
    int workers = 0;             // 0 = hardware concurrency
    int trunc_n = 8;             // jump truncation level of the scheme
    double eps_n = -1.0;         // <0 = default 1/n^2
    int pad = -1;                // offset-lattice padding in cells; <0 = m/2
    double horizon = 1.0;        // capacity horizon t_max
    std::vector<double> times;   // explicit time grid (overrides steps)
};

std::vector<double> uniform_times(double t, std::size_t steps);

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    double bias_bound = 0.0;
};

// 1 - exp(-sum_i dt_i U_{s_i}(-x - X_{s_i})); 1 if -x - X_{s_i} lands in a
// hard cell at any grid time. Interior slice boundaries must coincide with
// grid times.
double kill_weight(const std::vector<double>& times, const double* positions,
                   const TrapSchedule& sched, const double* x);

// Expected killed mass int w_t(x) phi(x) dx. One centered ensemble is shared
// by every offset x; offsets run over the grid box extended by `pad` cells,
// with phi equal to its background outside the box.
Estimate trap_mass(const LevyTriple& T, const TrapSchedule& sched,
                   const GridField& phi, double t, const McParams& mc);

inline double survival_probability(double W) { return std::exp(-W); }

// Independent estimate of the survival probability: trap centers thrown as a
// Poisson field with the given intensity, one path per trap.
Estimate poisson_field_oracle(const LevyTriple& T, const TrapSchedule& sched,
                              const GridField& intensity, double t,
                              const McParams& mc);

// Expected volume of union_i (D + X_{s_i} + g(s_i)); g is sampled on the time
// grid ((K+1) x d values) or empty for g = 0.
Estimate sausage_volume(const LevyTriple& T, const GridField& D,
                        const std::vector<double>& g, double t,
                        const McParams& mc);

// Rearranged schedule: soft parts by symmetric decreasing rearrangement,
// hard sets by set rearrangement, slice times kept.
TrapSchedule rearrange_schedule(const TrapSchedule& sched);

// margin = trap_mass(raw) - trap_mass(rearranged); holds when the margin is
// above -3 s.e. - allowance (allowance < 0 = (h + dt) * scale).
ComparisonReport verify_trap(const LevyTriple& T, const TrapSchedule& sched,
                             const GridField& phi, double sigma, double t,
                             const McParams& mc, double allowance = -1.0);

ComparisonReport verify_sausage(const LevyTriple& T, const GridField& D,
                                const std::vector<double>& g, double t,
                                const McParams& mc, double allowance = -1.0);

} // namespace levysym
