#pragma once

#include "levysym/grid.hpp"

namespace levysym {

// Result of the symmetric-domination check (the partial order "varphi holds
// more deficit mass closer to infinity than phi").
struct DominationReport {
    bool holds = false;
    double worst_volume = 0.0; // |A| = k * h^d at the smallest margin
    double worst_margin = 0.0; // RHS - LHS at that volume
    double tolerance = 0.0;
};

// Radius of the centered open ball of volume v in dimension d.
double ball_radius(double volume, int dim);

// Cells ordered by distance of their center from the origin, ties broken
// lexicographically on the flat index. Shared by every rearrangement and by
// the domination checker so cross-module identities hold exactly.
const std::vector<std::uint32_t>& distance_order(const Grid& g);

// Symmetric decreasing rearrangement: values sorted descending, placed on
// cells nearest the origin. Exactly equimeasurable (a permutation).
GridField rearrange_fn(const GridField& f);

// Rearrangement of an indicator field (same placement rule).
GridField rearrange_set(const GridField& indicator);

// sigma - (sigma - phi)^* for fields with background sigma and values <= sigma.
GridField increasing_rearrange(const GridField& phi, double sigma);

// Exact discrete symmetric-domination check via the bathtub principle.
// tolerance <= 0 selects the default 1e-12 * total deficit scale.
DominationReport dominates(const GridField& varphi, const GridField& phi,
                           double sigma, double tolerance = -1.0);

} // namespace levysym
