#pragma once

// Image priors in their variational (scaled-Gaussian) form. A prior is chosen
// through its hyperprior energy f(gamma); it induces the pixel penalty g_x and
// the sufficient-statistic updates for gamma and omega = E[1/gamma].

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace vbd::priors {

// f(gamma) = b. Induces p(x) ~ 1/|x|.
struct Jeffreys {
    double b = 0.0;
};

// f(gamma) = a * gamma + b, a >= 0.
struct Affine {
    double a = 0.0;
    double b = 0.0;
};

// p(x) ~ exp(-|x|^p), 0 < p <= 1. Handled through g_x = 2|x|^p directly.
struct GeneralizedGaussian {
    double p = 1.0;
};

// p(x) = sum_j pi_j N(x; 0, var_j).
struct FiniteGsm {
    std::vector<double> weights;
    std::vector<double> variances;
};

using PriorSpec = std::variant<Jeffreys, Affine, GeneralizedGaussian, FiniteGsm>;

// Floor applied to sigma^2 before any omega computation.
inline constexpr double kSigmaSqFloor = 1e-12;

// Throws InvalidArgument unless the parameters are in range.
void validate(const PriorSpec& prior);

std::string name(const PriorSpec& prior);
// "jeffreys", "affine:a,b", "gg:p", "gsm:w1/v1,w2/v2,..."
PriorSpec parse(const std::string& text);
std::string to_string(const PriorSpec& prior);

// Closed-form f(gamma) when the variant has one (Jeffreys, Affine).
std::optional<double> hyper_energy(const PriorSpec& prior, double gamma);
// f(gamma) for every variant. GeneralizedGaussian and FiniteGsm have no closed
// form; there f(gamma) = sup_x [g_x(x) - x^2/gamma] - log gamma, which is
// exact because g_x is concave in x^2. +inf where the supremum diverges.
double energy_value(const PriorSpec& prior, double gamma);

// g_x(x) = -2 log p(x) up to an additive constant. Jeffreys at x = 0 gives -inf.
double gx_eval(const PriorSpec& prior, double x);
// Derivative of g_x at sigma > 0.
double gx_derivative(const PriorSpec& prior, double sigma);

// gamma = 2 sigma / g_x'(sigma); 0 at sigma = 0.
double gamma_update(const PriorSpec& prior, double sigma);
// omega = g_x'(sigma) / (2 sigma), with sigma^2 floored at kSigmaSqFloor.
double omega_update(const PriorSpec& prior, double sigma);
// Posterior mean of 1/gamma under the mixture, computed from component
// responsibilities w_j ~ pi_j var_j^{-1/2} exp(-sigma^2 / (2 var_j)).
double finite_gsm_omega(const FiniteGsm& prior, double sigma);

}  // namespace vbd::priors
