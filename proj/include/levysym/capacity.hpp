#pragma once

#include "levysym/levy.hpp"
#include "levysym/report.hpp"
#include "levysym/trap_continuum.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace levysym {

struct CapacityEstimate {
    double q = 0.0;
    double value = 0.0;
    double std_error = 0.0;
    double spatial_truncation_bias_bound = 0.0;
    double time_step = 0.0;
    std::size_t paths = 0;
    // populated by zero_capacity: the evaluated q-ladder
    std::vector<double> ladder_q;
    std::vector<double> ladder_value;
    std::vector<double> ladder_se;
};

// First time-grid index i with x + X_{s_i} in A (cell membership), if any.
std::optional<std::size_t> hitting_time(const std::vector<double>& times,
                                        const double* positions, int dim,
                                        const GridField& A, const double* x);

// Per-path coverage history of union_{s <= u} (A - X_s) on the extended
// offset lattice: how many new offsets first hit A at each grid time. Shared
// by every q of a ladder.
struct CoverageProfile {
    std::vector<double> times;
    double cell_volume = 0.0;
    std::size_t paths = 0;
    // sparse per path: (time index, newly covered cells) pairs
    std::vector<std::uint32_t> pair_time;
    std::vector<std::uint32_t> pair_count;
    std::vector<std::size_t> path_begin; // paths + 1 offsets
    double mean_overflow = 0.0;          // raster events beyond the lattice
};

CoverageProfile coverage_profile(const LevyTriple& T, const GridField& A,
                                 const McParams& mc);

// C^q from a coverage profile: per path q sum_i e^{-q s_i} dV_i, plus the
// horizon tail estimated from the late-time slope of the mean coverage.
CapacityEstimate qcapacity_from(const CoverageProfile& cov, double q);

// C^q = q int E_x[e^{-q T_A}] dx, horizon mc.horizon.
CapacityEstimate qcapacity(const LevyTriple& T, const GridField& A, double q,
                           const McParams& mc);

// q -> 0 extrapolation over the geometric ladder {q0, q0/2, ..., q0/16}
// for a transient process (caller-asserted via T.transient).
CapacityEstimate zero_capacity(const LevyTriple& T, const GridField& A,
                               const McParams& mc, double q0 = 1.0);

// margin = qcapacity(T, A, q) - qcapacity(T*, A*, q).
ComparisonReport verify_cap(const LevyTriple& T, const GridField& A, double q,
                            const McParams& mc, double allowance = -1.0);

} // namespace levysym
