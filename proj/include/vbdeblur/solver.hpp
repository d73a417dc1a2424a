#pragma once

// Coordinate-descent blind deconvolution on one or more derivative-domain
// observations that share a kernel and a noise variance lambda.
//
// Every sweep is a majorization-minimization step on
//   L = sum_c [ |y_c - k * mu_c|^2 / lambda
//               + sum_i mu_i^2/gamma_i + log(lambda + nbar_i gamma_i) + f(gamma_i) ]
// with gamma = 1/omega and nbar_i the effective kernel norm of pixel i.
// With a learned lambda the cost also carries (n - m) log lambda + d / lambda.

#include "vbdeblur/grids.hpp"
#include "vbdeblur/linalg.hpp"
#include "vbdeblur/priors.hpp"

#include <optional>
#include <variant>
#include <vector>

namespace vbd::solver {

using grids::Index;
using grids::Vec;

enum class Mode { vb, map };

// lambda <- max(lambda / beta, floor) after every sweep while above the floor.
struct Schedule {
    double beta = 1.15;
    double floor = 1e-4;
};

// Closed-form noise update with barrier d; unset means n * 1e-4.
struct Learned {
    std::optional<double> d;
};

using LambdaPolicy = std::variant<Schedule, Learned>;

struct SolverConfig {
    priors::PriorSpec prior = priors::Jeffreys{};
    Mode mode = Mode::vb;
    LambdaPolicy lambda = Learned{};
    int max_iters = 100;
    double kernel_tol = 1e-4;       // relative l2 change of k between sweeps
    bool renormalize = true;        // rescale k to unit sum after each kernel update
    double cg_tol = 1e-8;
    int cg_max_iters = 5000;
    double qp_tol = 1e-8;
    int qp_max_iters = 20000;

    // Throws InvalidArgument on out-of-range settings.
    void validate() const;
};

// Stacked observations (e.g. dx and dy) sharing one kernel support.
struct Problem {
    std::vector<grids::BlurredImage> observations;
    grids::Shape kernel;

    Index n() const;  // total observed pixels
    Index m() const;  // total latent pixels
    grids::Shape latent(std::size_t c) const;
};

struct ChannelState {
    grids::GradientImage mu;
    Vec C;      // diagonal covariance, A_ii^{-1}
    Vec omega;  // E[1/gamma]
};

struct TraceRow {
    int iteration = 0;
    double lambda = 0.0;
    double cost = 0.0;
    double kernel_change = 0.0;
};

struct SolverState {
    std::vector<ChannelState> channels;
    grids::Kernel k;
    double lambda = 1.0;
    std::vector<TraceRow> trace;
};

double default_lambda_init(const Problem& problem);
double default_d(const Problem& problem);
double barrier_d(const Problem& problem, const SolverConfig& config);

// omega_0 = 1 / max(mean(y^2), 1e-8) everywhere, then one x-update.
SolverState initial_state(const Problem& problem, const SolverConfig& config, const grids::Kernel& k_init,
                          double lambda_init);

// omega_i <- g'(sigma_i) / (2 sigma_i), sigma^2 = mu^2 + C (C ignored in MAP mode).
void update_omega(SolverState& state, const priors::PriorSpec& prior, Mode mode);

// mu <- (H^T H + lambda diag omega)^{-1} H^T y by preconditioned CG, and
// C_ii <- lambda / (nbar_i + lambda omega_i) (zero in MAP mode).
// Throws ConvergenceError if CG misses its tolerance.
linalg::CgReport update_x(SolverState& state, const Problem& problem, const SolverConfig& config);

// z_i = 1 / (nbar_i / lambda + omega_i) per channel.
std::vector<Vec> update_z(const SolverState& state, const Problem& problem);
// C <- z (VB) or 0 (MAP) without touching mu.
void refresh_covariance(SolverState& state, const Problem& problem, Mode mode);

// Kernel weights c_j = sum_c sum_i z_i Ibar_ji.
Vec kernel_weights(const SolverState& state, const Problem& problem);

// k <- argmin_{k >= 0} sum_c |y_c - W_c k|^2 + sum_j c_j k_j^2 (c = 0 in MAP mode).
// Throws ConvergenceError if the QP misses its KKT tolerance.
linalg::QpReport update_kernel(SolverState& state, const Problem& problem, const SolverConfig& config);

// Rescales k to unit sum with mu <- s mu, C <- s^2 C, omega <- omega / s^2,
// which leaves the cost unchanged for a constant f. Returns s.
double renormalize_kernel(SolverState& state);

// Residual, theta = sum nbar_i C_ii, n.
struct NoiseStats {
    double residual = 0.0;
    double theta = 0.0;
    Index n = 0;
};
NoiseStats noise_stats(const SolverState& state, const Problem& problem);

// lambda <- (|y - k * mu|^2 + theta + d) / n.
void update_lambda_learned(SolverState& state, const Problem& problem, double d);
void update_lambda_schedule(SolverState& state, double beta, double floor);

// The joint cost above evaluated at (mu, k, 1/omega). In MAP mode the
// log(lambda + nbar gamma) term is replaced by log(gamma), the bound whose
// minimum over gamma is the MAP penalty.
double cost_eval(const SolverState& state, const Problem& problem, const SolverConfig& config);

// One sweep of the loop inside run(). Returns the relative kernel change.
double sweep(SolverState& state, const Problem& problem, const SolverConfig& config);

struct RunResult {
    grids::Kernel k;
    std::vector<grids::GradientImage> mu;
    std::vector<TraceRow> trace;
    double lambda = 0.0;
    int iterations = 0;
    bool converged = false;
};

RunResult run(const Problem& problem, const SolverConfig& config, const grids::Kernel& k_init,
              double lambda_init);
// Continues from an existing state (used by the coarse-to-fine driver and tests).
RunResult run(const Problem& problem, const SolverConfig& config, SolverState state);

}  // namespace vbd::solver
