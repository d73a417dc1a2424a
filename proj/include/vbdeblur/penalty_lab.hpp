#pragma once

// Direct evaluation of the coupled penalty
//   g_VB(x, rho) = min_{gamma >= 0} x^2/gamma + log(rho + gamma) + f(gamma)
// and of its gamma-space counterpart psi, together with the numerical
// machinery used to probe their concavity and sparsity behaviour.

#include "vbdeblur/grids.hpp"
#include "vbdeblur/priors.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace vbd::penalty {

using ScalarFn = std::function<double(double)>;

// Closed form for constant f. x = 0, rho = 0 gives -inf.
double gvb_closed(double x, double rho);
// Unique minimizer of the constant-f inner problem.
double gamma_opt_jeffreys(double x, double rho);

struct InnerMinimum {
    double value = 0.0;
    double gamma = 0.0;
    int iterations = 0;
};

// min_{gamma >= 0} x^2/gamma + log(rho + gamma) + f(gamma) for a caller
// supplied energy. Golden section on [1e-12, 1e3 x^2 + 1e3 rho + 1] followed
// by one Newton step; throws ConvergenceError if the bracket collapses to an
// endpoint that is not the minimum.
InnerMinimum variational_min(double x, double rho, const ScalarFn& f);
// Same for a PriorSpec whose f has a closed form (Jeffreys, Affine).
double gvb_numeric(double x, double rho, const priors::PriorSpec& prior);

// psi(gamma, rho) = log(rho + gamma) + f(gamma).
double psi_eval(double gamma, double rho, const priors::PriorSpec& prior);

struct ConcavityViolation {
    double x = 0.0;
    double y = 0.0;
    double amount = 0.0;
};

struct ConcavityReport {
    std::size_t pairs_checked = 0;
    std::size_t violation_count = 0;
    double max_violation = 0.0;
    std::vector<ConcavityViolation> worst;  // up to 8 largest

    bool holds() const { return violation_count == 0; }
};

inline constexpr double kConcavityTolerance = 1e-7;
inline constexpr double kDerivativeStep = 1e-5;

// Checks h1(y) <= h1(x) + h1'(x)/h2'(x) (h2(y) - h2(x)) for every ordered
// pair of grid points (h1 concave relative to h2). Derivatives by central
// differences. Throws InvalidArgument if h2 is not strictly increasing on
// the grid.
ConcavityReport relative_concavity_check(const ScalarFn& h1, const ScalarFn& h2,
                                         const std::vector<double>& grid,
                                         double tolerance = kConcavityTolerance);

std::vector<double> log_grid(double lo, double hi, std::size_t count);
std::vector<double> linear_grid(double lo, double hi, std::size_t count);

struct LpOptions {
    int restarts = 3;             // random starts besides x = H^T y
    int outer_iterations = 20;    // epsilon annealing steps
    double eps_start = 1e-1;
    double eps_end = 1e-8;
    int polish_sweeps = 200;      // exact coordinate-wise refinement
    std::uint64_t seed = 0;
};

struct LpFit {
    double cost = 0.0;
    double data_term = 0.0;
    double penalty_term = 0.0;
    grids::Vec x;
};

// min_x ||y - k * x||^2 + lambda sum |x_i|^p for fixed k (valid convolution).
LpFit lp_blur_cost(const grids::Image& y, const grids::Kernel& k, double p, double lambda,
                   const LpOptions& options = {});

// Derivative-domain 1D test slices for comparing k = k* against k = delta:
// "edge" (one step), "spike" (a 2-sample bar, i.e. two opposite steps) and
// "composite" (steps of several heights over a fine random texture).
// All are 64 samples long and share a 15-tap Gaussian blur of width 2.5.
struct DiscriminationSignal {
    std::string name;
    grids::GradientImage sharp;
    grids::Kernel kernel;
};
DiscriminationSignal discrimination_signal(const std::string& name);
const std::vector<std::string>& discrimination_signals();

struct DiscriminationRow {
    std::string signal;
    double p = 0.0;
    double cost_true = 0.0;   // optimal cost with the true kernel
    double cost_delta = 0.0;  // optimal cost with the no-blur kernel
    std::string error;        // non-empty if a fit failed; costs are NaN then

    bool favors_true() const { return error.empty() && cost_true < cost_delta; }
};

// lp_blur_cost for both kernels on every (signal, p) cell. Failures are
// recorded per cell instead of thrown.
std::vector<DiscriminationRow> discrimination_table(const std::vector<std::string>& signals,
                                                    const std::vector<double>& ps, double lambda,
                                                    const LpOptions& options = {});

// Scalar minimizer of a (t - u)^2 + lambda |t|^p, a > 0.
double lp_scalar_prox(double a, double u, double lambda, double p);

// Per-coefficient penalty used for patch scoring.
ScalarFn lp_penalty(double p);
ScalarFn gvb_penalty(double rho);

struct PreferenceMap {
    grids::Index tiles_x = 0;
    grids::Index tiles_y = 0;
    grids::Index patch = 0;
    std::vector<std::uint8_t> favored;  // tiles_y * tiles_x, row-major
    grids::Image pixels;                // favored flag expanded to pixel size (0/1)

    double favored_fraction() const;
};

// Tiles the region where sharp and blurred gradients align into
// non-overlapping patch x patch blocks and marks blocks where
// sum penalty(sharp) < sum penalty(k * sharp). Ties are 0.
PreferenceMap patch_preference_map(const grids::GradientImage& sharp, const grids::Kernel& k,
                                   const ScalarFn& penalty, grids::Index patch = 15);

// Fraction of tiles on which two maps agree.
double map_agreement(const PreferenceMap& a, const PreferenceMap& b);

// Sampled g_VB values for plotting.
struct ProbeRow {
    double x = 0.0;
    double rho = 0.0;
    double closed = 0.0;
    double numeric = 0.0;
};
std::vector<ProbeRow> probe_gvb(const std::vector<double>& xs, const std::vector<double>& rhos);

}  // namespace vbd::penalty
