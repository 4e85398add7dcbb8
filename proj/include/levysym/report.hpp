#pragma once

#include <cstdint>
#include <string>

namespace levysym {

// Paired raw-vs-rearranged estimate with the decision margin.
struct ComparisonReport {
    std::string label;
    double lhs = 0.0;      // raw side
    double lhs_se = 0.0;
    double rhs = 0.0;      // rearranged side
    double rhs_se = 0.0;
    double margin = 0.0;   // lhs - rhs (or rhs - lhs where rearranged is the bound)
    double tolerance = 0.0;
    bool holds = false;
    std::uint64_t seed = 0;
};

} // namespace levysym
