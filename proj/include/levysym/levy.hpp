#pragma once

#include "levysym/grid.hpp"
#include "levysym/rng.hpp"

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace levysym {

enum class JumpFamily { None, GaussianMixture, PowerLaw, UniformBall, Grid };

struct GaussComponent {
    double weight = 0.0; // integrated jump rate of the component
    std::vector<double> mean;
    double sigma = 1.0;  // isotropic
};

// Absolutely continuous jump density rho, optionally hard-truncated to
// |y| > trunc_r (the truncation used by the simulation scheme).
struct JumpSpec {
    JumpFamily family = JumpFamily::None;
    double trunc_r = 0.0;

    std::vector<GaussComponent> gauss;                    // GaussianMixture
    double plaw_c = 0, plaw_alpha = 0, plaw_r0 = 0, plaw_r1 = 0; // PowerLaw
    double ub_mass = 0, ub_radius = 0;                    // UniformBall
    std::vector<double> ub_center;
    GridField grid_density;                               // Grid
};

struct Atom {
    std::vector<double> y;
    double rate = 0.0;
};

// Levy characteristic (b, A, nu) with nu = rho dx + finite atom list.
struct LevyTriple {
    int dim = 1;
    std::vector<double> b;      // d entries
    std::vector<double> A;      // d*d row-major, symmetric PSD
    JumpSpec rho;
    std::vector<Atom> atoms;
    bool transient = false;     // caller-asserted, never inferred
};

void validate_triple(const LevyTriple& T);

// ---- jump density operations ----
double jump_mass_above(const JumpSpec& rho, int dim, double r);
double jump_eval(const JumpSpec& rho, int dim, const double* y);
bool jump_is_radial(const JumpSpec& rho, int dim);
// integral of y * rho(y) over r_lo < |y| < r_hi
void jump_first_moment_band(const JumpSpec& rho, int dim, double r_lo,
                            double r_hi, double* out);
// one sample from rho conditioned on |y| > r
void jump_sample_above(const JumpSpec& rho, int dim, double r, Rng& rng,
                       double* out);
JumpSpec jump_rearranged(const JumpSpec& rho, int dim);

// ---- rearrangement of the process ----
// (0, Det(A)^{1/d} I, rho*); atoms are dropped (only the absolutely
// continuous part is rearranged).
LevyTriple rearrange_triple(const LevyTriple& T);

// ---- truncated simulation scheme ----
struct SimScheme {
    LevyTriple base;
    int n = 1;
    double trunc_r = 1.0;   // = max(1/n, base truncation)
    double eps = 0.0;       // Gaussian padding eps_n
    double c_n = 0.0;       // total rate of the truncated density
    double atom_rate = 0.0;
    std::vector<double> b_n;
    std::vector<double> A_n;   // A + eps I
    std::vector<double> chol;  // lower Cholesky factor of A_n
    JumpSpec rho_n;
    // cumulative atom rates for jump-type selection
    std::vector<double> atom_cum;
};

// eps_n <= 0 selects the default 1/n^2. A degenerate A_n (eps = 0 with
// singular A) is accepted only when explicitly requested via eps = 0 and a
// diffusion-free triple; otherwise A_n is positive definite.
SimScheme truncate_triple(const LevyTriple& T, int n, double eps_n = -1.0);

struct PathEnsemble {
    std::vector<double> times; // t_0 = 0 < ... < t_K
    int dim = 1;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    std::vector<double> pos; // paths x (K+1) x dim, row-major

    const double* path(std::size_t p) const {
        return pos.data() + p * times.size() * dim;
    }
};

// Writes positions at every grid time for path `path_index` into `out`
// ((K+1) x dim doubles). Deterministic in (scheme, times, seed, path_index).
void generate_path(const SimScheme& S, const std::vector<double>& times,
                   std::uint64_t seed, std::uint64_t path_index, double* out);

PathEnsemble sample_paths(const SimScheme& S, const std::vector<double>& times,
                          std::size_t paths, std::uint64_t seed, int workers = 0);

// Levy-Khintchine exponent Psi(xi) and the characteristic function
// E[exp(i<xi,X_t>)] = exp(-t Psi(xi)).
std::complex<double> levy_exponent(const LevyTriple& T, const double* xi);
std::complex<double> char_fn(const LevyTriple& T, const double* xi, double t);

// The truncated scheme viewed as its own exact Levy triple (b, A_n,
// rho_n + atoms), for validating the sampler against char_fn.
LevyTriple scheme_as_triple(const SimScheme& S);

// Empirical characteristic function at time index ti; se is the standard
// error of the modulus of the deviation.
std::complex<double> empirical_cf(const PathEnsemble& e, const double* xi,
                                  std::size_t time_index, double* se = nullptr);

// JSON round-trip of a triple spec.
std::string triple_to_json(const LevyTriple& T);
LevyTriple triple_from_json(const std::string& text);

// Content key for ensemble caching.
std::string ensemble_cache_key(const SimScheme& S, const std::vector<double>& times,
                               std::size_t paths, std::uint64_t seed);
void save_ensemble(const PathEnsemble& e, const std::string& path);
PathEnsemble load_ensemble(const std::string& path);

} // namespace levysym
