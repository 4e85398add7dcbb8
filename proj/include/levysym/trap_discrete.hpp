#pragma once

#include "levysym/grid.hpp"
#include "levysym/report.hpp"

#include <vector>

namespace levysym {

// Inputs of the discrete killed-mass functional W_n: initial density phi
// (background sigma), trap probabilities V_0..V_n in [0,1], transition
// densities p_1..p_n (each normalized to unit mass on the grid).
struct DiscreteInstance {
    GridField phi;
    std::vector<GridField> traps;    // n+1 fields
    std::vector<GridField> kernels;  // n fields
    double sigma = 1.0;

    int steps() const { return static_cast<int>(traps.size()) - 1; }
};

void validate_instance(const DiscreteInstance& inst);

// Density of the walk at step `upto` upon survival (background 1 field).
// Internally the recursion tracks the compactly supported deficit
// 1 - phi_k, so every convolution stays finite.
GridField survival_density(const DiscreteInstance& inst, int upto);

// W_n = total measure killed by the traps = integral(1 - phi_n) - integral(1 - phi).
double wn_eval(const DiscreteInstance& inst);

// Independent oracle: literal nested Riemann sums over cell tuples on the
// lattice extended beyond the box. Legal only for n <= 2 and m^d <= 4096.
double brute_wn(const DiscreteInstance& inst);

// Instance with phi -> increasing rearrangement, V -> V*, p -> p*
// (renormalized to unit mass).
DiscreteInstance rearrange_instance(const DiscreteInstance& inst);

// Checks W_n(raw) >= W_n(rearranged) within tol = tol_factor * h * scale.
ComparisonReport verify_ri(const DiscreteInstance& inst, double tol_factor = 10.0);

// Stay-inside probability of a walk started uniformly on A[0] and required
// to be in A[i] at each step, vs its fully rearranged counterpart (the
// rearranged side is the upper bound). margin = rearranged - raw.
ComparisonReport verify_bll(const std::vector<GridField>& domains,
                            const std::vector<GridField>& kernels,
                            double tol_factor = 10.0);

} // namespace levysym
