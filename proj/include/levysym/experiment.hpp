#pragma once

#include "levysym/capacity.hpp"
#include "levysym/trap_continuum.hpp"
#include "levysym/trap_discrete.hpp"

#include <string>
#include <vector>

namespace levysym {

// Random-instance generators shared by the batch driver and the test suite.
GridField random_field(const Grid& g, Rng& rng, double lo, double hi,
                       double background = 0.0);
GridField random_indicator(const Grid& g, Rng& rng, double fill_prob);
// Random discrete trap instance with n steps; kernel supports are kept
// within |x| <= L/(n+1) so nothing leaks past the box during the recursion.
DiscreteInstance random_instance(const Grid& g, int n, Rng& rng);

struct RunOverrides {
    bool has_seed = false;
    std::uint64_t seed = 0;
    int workers = -1;        // <0 = leave as configured
    std::string out_dir;     // empty = spec's own (or cwd)
};

// Executes the experiment described by the JSON text; writes report.json and
// report.csv under the output directory. Returns the process exit code:
// 0 = all holds, 1 = a verification failed, 2 = schema/usage error.
int run_experiment(const std::string& spec_text, const RunOverrides& ov);
int run_experiment_file(const std::string& spec_path, const RunOverrides& ov);

// One run per value of the swept parameter (m, K, P, n or q), plus a
// summary.csv of margin vs value.
int run_sweep(const std::string& spec_path, const std::string& parameter,
              const std::vector<double>& values, const RunOverrides& ov);

int cli_main(int argc, char** argv);

} // namespace levysym
