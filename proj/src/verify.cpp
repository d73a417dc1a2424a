#include "vbdeblur/verify.hpp"

#include "vbdeblur/error.hpp"
#include "vbdeblur/grids.hpp"
#include "vbdeblur/penalty_lab.hpp"
#include "vbdeblur/priors.hpp"
#include "vbdeblur/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

namespace vbd::verify {

using grids::Index;
using grids::Kernel;
using grids::Shape;
using grids::Vec;
using penalty::log_grid;
using penalty::linear_grid;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// max - min of a sampled difference curve
double spread(const std::vector<double>& d) {
    const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
    return *hi - *lo;
}

// ---- priors ----

Outcome omega_gamma_reciprocal() {
    const std::vector<priors::PriorSpec> ps{priors::Jeffreys{}, priors::Affine{1.0, 0.0},
                                            priors::GeneralizedGaussian{0.8},
                                            priors::FiniteGsm{{0.3, 0.7}, {0.1, 4.0}}};
    double worst = 0.0;
    for (const auto& p : ps)
        for (double s : log_grid(0.1, 10.0, 25))
            worst = std::max(worst, std::abs(priors::omega_update(p, s) * priors::gamma_update(p, s) - 1.0));
    return {worst < 1e-12, fmt("max |omega gamma - 1| = %.2e", worst)};
}

Outcome gsm_matches_finite_difference() {
    const priors::FiniteGsm gsm{{0.3, 0.7}, {0.1, 4.0}};
    double worst = 0.0;
    for (double s : linear_grid(0.1, 10.0, 100)) {
        const double h = 1e-5 * std::max(1.0, s);
        const double fd = (priors::gx_eval(gsm, s + h) - priors::gx_eval(gsm, s - h)) / (2.0 * h);
        const double ref = fd / (2.0 * s);
        worst = std::max(worst, std::abs(priors::finite_gsm_omega(gsm, s) - ref) / std::abs(ref));
    }
    return {worst < 1e-5, fmt("max relative difference %.2e", worst)};
}

Outcome gamma_nondecreasing() {
    const std::vector<priors::PriorSpec> ps{priors::Jeffreys{}, priors::Affine{0.5, 1.0}, priors::Affine{3.0, 0.0}};
    for (const auto& p : ps) {
        double prev = priors::gamma_update(p, 0.0);
        for (double s : log_grid(1e-3, 1e3, 200)) {
            const double g = priors::gamma_update(p, s);
            if (g < prev) return {false, priors::to_string(p) + " decreases at sigma = " + fmt("%g", s)};
            prev = g;
        }
    }
    return {true, "Jeffreys and two affine energies"};
}

// ---- penalty ----

Outcome closed_numeric_offset() {
    double worst = 0.0;
    for (double rho : log_grid(1e-3, 10.0, 9))
        for (double x : linear_grid(0.0, 10.0, 101))
            worst = std::max(worst, std::abs(penalty::gvb_closed(x, rho) -
                                             penalty::gvb_numeric(x, rho, priors::Jeffreys{}) - std::log(2.0)));
    return {worst < 1e-6, fmt("max |closed - numeric - log 2| = %.2e", worst)};
}

Outcome zero_noise_limit() {
    std::string detail;
    bool ok = true;
    for (const priors::PriorSpec& p : {priors::PriorSpec{priors::Jeffreys{}}, priors::PriorSpec{priors::Affine{1.0, 0.0}}}) {
        std::vector<double> d;
        for (double x : linear_grid(0.1, 10.0, 100))
            d.push_back(penalty::gvb_numeric(x, 1e-12, p) - priors::gx_eval(p, x));
        const double s = spread(d);
        ok = ok && s < 1e-4;
        detail += priors::to_string(p) + fmt(" spread %.2e; ", s);
    }
    return {ok, detail};
}

const std::vector<std::pair<double, double>> kRhoPairs{{1e-3, 1e-2}, {1e-2, 0.1}, {0.1, 1.0}, {1.0, 10.0}, {1e-2, 10.0}};

Outcome large_magnitude_agreement() {
    double worst = 0.0;
    for (auto [r1, r2] : kRhoPairs) {
        const double small = std::abs(penalty::gvb_closed(0.1, r2) - penalty::gvb_closed(0.1, r1));
        const double large = std::abs(penalty::gvb_closed(1e3, r2) - penalty::gvb_closed(1e3, r1));
        worst = std::max(worst, large / small);
    }
    return {worst < 1e-2, fmt("worst |d(1e3)| / |d(0.1)| = %.2e", worst)};
}

Outcome zero_favoring_difference() {
    for (auto [r1, r2] : kRhoPairs) {
        double prev = std::numeric_limits<double>::infinity();
        for (double z : log_grid(1e-3, 1e3, 400)) {
            const double d = penalty::gvb_closed(z, r2) - penalty::gvb_closed(z, r1);
            if (!(d < prev)) return {false, fmt("not decreasing at z = %g for rho pair (%g, %g)", z, r1, r2)};
            prev = d;
        }
    }
    return {true, "5 rho pairs, 400 log-spaced points"};
}

Outcome penalty_concave() {
    double worst = -std::numeric_limits<double>::infinity();
    for (double rho : {0.01, 1.0, 100.0}) {
        const auto xs = linear_grid(0.0, 10.0, 2001);
        for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
            const double d2 = penalty::gvb_closed(xs[i + 1], rho) - 2.0 * penalty::gvb_closed(xs[i], rho) +
                              penalty::gvb_closed(xs[i - 1], rho);
            worst = std::max(worst, d2);
        }
    }
    return {worst <= 1e-9, fmt("largest second difference %.2e", worst)};
}

Outcome map_penalty_concave() {
    // f(z) = z - log z is convex, yet log z + f(z) = z is concave
    const penalty::ScalarFn f = [](double g) { return g - std::log(g); };
    const auto xs = linear_grid(0.1, 5.0, 200);
    std::vector<double> g;
    for (double x : xs) g.push_back(penalty::variational_min(x, 0.0, f).value);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < g.size(); ++i) worst = std::max(worst, g[i + 1] - 2.0 * g[i] + g[i - 1]);
    return {worst <= 1e-7, fmt("largest second difference %.2e", worst)};
}

// ---- concavity ----

Outcome lp_ordering() {
    const auto grid = log_grid(1e-2, 10.0, 60);
    const auto r = penalty::relative_concavity_check(penalty::lp_penalty(0.5), penalty::lp_penalty(1.0), grid);
    return {r.holds(), fmt("|x|^0.5 vs |x|: %g violations", static_cast<double>(r.violation_count))};
}

Outcome reflexive() {
    const auto grid = log_grid(1e-2, 10.0, 60);
    const auto g = penalty::gvb_penalty(0.1);
    const auto r = penalty::relative_concavity_check(g, g, grid);
    return {r.holds(), fmt("%g violations", static_cast<double>(r.violation_count))};
}

Outcome rho_ordering() {
    const auto grid = log_grid(1e-2, 10.0, 60);
    std::size_t forward = 0;
    for (auto [r1, r2] : kRhoPairs)
        forward += penalty::relative_concavity_check(penalty::gvb_penalty(r1), penalty::gvb_penalty(r2), grid)
                       .violation_count;
    const auto swapped =
        penalty::relative_concavity_check(penalty::gvb_penalty(1.0), penalty::gvb_penalty(0.1), grid);
    return {forward == 0 && !swapped.holds(),
            fmt("%g violations over 5 ordered pairs; swapped pair: %g violations", static_cast<double>(forward),
                static_cast<double>(swapped.violation_count))};
}

penalty::ScalarFn psi_fn(double rho, const penalty::ScalarFn& f) {
    return [rho, f](double g) { return std::log(rho + g) + f(g); };
}

Outcome psi_affine_only() {
    const auto grid = log_grid(1e-4, 1e4, 60);
    std::size_t affine = 0, sqrt_violations = 0;
    const penalty::ScalarFn lin = [](double g) { return 0.5 * g + 1.0; };
    const penalty::ScalarFn root = [](double g) { return std::sqrt(g); };
    for (auto [r1, r2] : kRhoPairs) {
        affine += penalty::relative_concavity_check(psi_fn(r1, lin), psi_fn(r2, lin), grid).violation_count;
        sqrt_violations +=
            penalty::relative_concavity_check(psi_fn(r1, root), psi_fn(r2, root), grid).violation_count;
    }
    return {affine == 0 && sqrt_violations > 0,
            fmt("affine f: %g violations; sqrt f: %g violations", static_cast<double>(affine),
                static_cast<double>(sqrt_violations))};
}

// ---- solver ----

struct Instance {
    solver::Problem problem;
    Vec x;
    Kernel k;
};

Instance random_instance(std::uint64_t seed, Index latent = 48, Index klen = 7, double noise = 1e-2) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Instance in;
    in.x = Vec::Zero(latent);
    for (int s = 0; s < 6; ++s) in.x[static_cast<Index>(unit(rng) * static_cast<double>(latent)) % latent] = normal(rng);
    in.k = Kernel(Shape{klen, 1});
    for (Index j = 0; j < klen; ++j) in.k.values[j] = 0.1 + unit(rng);
    in.k.normalize();
    grids::BlurredImage y = grids::convolve_valid(grids::Image(Shape{latent, 1}, in.x), in.k);
    for (Index i = 0; i < y.size(); ++i) y.values[i] += noise * normal(rng);
    in.problem.observations.push_back(y);
    in.problem.kernel = in.k.shape;
    return in;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

Outcome monotone_descent() {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto in = random_instance(seed);
        for (auto mode : {solver::Mode::vb, solver::Mode::map}) {
            solver::SolverConfig cfg;
            cfg.mode = mode;
            const double lam = 1e-2;
            cfg.lambda = solver::Schedule{1.15, lam};
            auto st = solver::initial_state(in.problem, cfg, Kernel::uniform(in.problem.kernel), lam);
            double prev = solver::cost_eval(st, in.problem, cfg);
            const auto step = [&] {
                const double c = solver::cost_eval(st, in.problem, cfg);
                worst = std::max(worst, (c - prev) / std::max(1.0, std::abs(prev)));
                prev = c;
            };
            for (int it = 0; it < 20; ++it) {
                solver::refresh_covariance(st, in.problem, mode);
                solver::update_omega(st, cfg.prior, mode);
                step();
                solver::update_x(st, in.problem, cfg);
                step();
                solver::update_kernel(st, in.problem, cfg);
                step();
                // unit-sum projection: cost-neutral only in VB mode with a constant f
                solver::renormalize_kernel(st);
                if (mode == solver::Mode::vb)
                    step();
                else
                    prev = solver::cost_eval(st, in.problem, cfg);
            }
        }
    }
    return {worst <= 1e-9, fmt("largest relative increase %.2e over 10 instances x 2 modes x 20 sweeps", worst)};
}

Outcome z_equals_covariance() {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto in = random_instance(seed);
        solver::SolverConfig cfg;
        auto st = solver::initial_state(in.problem, cfg, Kernel::uniform(in.problem.kernel), 0.05);
        solver::update_omega(st, cfg.prior, cfg.mode);
        solver::update_x(st, in.problem, cfg);
        const auto z = solver::update_z(st, in.problem);
        worst = std::max(worst, (z[0] - st.channels[0].C).cwiseAbs().maxCoeff());
    }
    return {worst <= 1e-10, fmt("max |z - C| = %.2e", worst)};
}

// State rescaled by (x / a, a k, gamma / a^2).
solver::SolverState rescaled(solver::SolverState st, double a) {
    st.k.values *= a;
    for (auto& ch : st.channels) {
        ch.mu.values /= a;
        ch.omega *= a * a;
    }
    return st;
}

Outcome scale_invariance() {
    double jeffreys = 0.0, gg = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto in = random_instance(seed);
        solver::SolverConfig cfg;
        auto st = solver::initial_state(in.problem, cfg, Kernel::uniform(in.problem.kernel), 0.05);
        for (int i = 0; i < 3; ++i) solver::sweep(st, in.problem, cfg);
        solver::SolverConfig gcfg = cfg;
        gcfg.prior = priors::GeneralizedGaussian{0.8};
        const double base = solver::cost_eval(st, in.problem, cfg);
        const double gbase = solver::cost_eval(st, in.problem, gcfg);
        for (double a : {0.5, 2.0, 10.0}) {
            const auto s = rescaled(st, a);
            jeffreys = std::max(jeffreys, rel(solver::cost_eval(s, in.problem, cfg), base));
            gg = std::max(gg, rel(solver::cost_eval(s, in.problem, gcfg), gbase));
        }
    }
    return {jeffreys <= 1e-8 && gg > 1e-3,
            fmt("Jeffreys max relative change %.2e; generalized Gaussian p = 0.8: %.2e", jeffreys, gg)};
}

Outcome learned_lambda_floor() {
    double min_ratio = std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto in = random_instance(seed, 48, 7, seed % 2 ? 1e-2 : 0.0);
        solver::SolverConfig cfg;
        cfg.max_iters = 30;
        const double floor = solver::default_d(in.problem) / static_cast<double>(in.problem.n());
        const auto res = solver::run(in.problem, cfg, Kernel::uniform(in.problem.kernel), 1.0);
        for (std::size_t i = 1; i < res.trace.size(); ++i) min_ratio = std::min(min_ratio, res.trace[i].lambda / floor);
    }
    // exact fit with zero covariance reaches the floor
    const auto in = random_instance(9, 48, 7, 0.0);
    solver::SolverConfig cfg;
    cfg.mode = solver::Mode::map;
    auto st = solver::initial_state(in.problem, cfg, in.k, 1.0);
    st.channels[0].mu.values = in.x;
    st.channels[0].C.setZero();
    const double d = solver::default_d(in.problem);
    solver::update_lambda_learned(st, in.problem, d);
    const double floor = d / static_cast<double>(in.problem.n());
    const double gap = std::abs(st.lambda / floor - 1.0);
    return {min_ratio >= 1.0 && gap < 1e-12,
            fmt("smallest lambda / (d/n) over runs %.4g; exact fit gives lambda / (d/n) - 1 = %.2e", min_ratio, gap)};
}

Outcome sparsity_bound() {
    Index worst_excess = std::numeric_limits<Index>::min();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto in = random_instance(seed, 64, 9, 1e-3);
        solver::SolverConfig cfg;
        cfg.lambda = solver::Schedule{1.15, 1e-6};
        cfg.max_iters = 300;
        const auto res = solver::run(in.problem, cfg, Kernel::uniform(in.problem.kernel), 1.0);
        const Vec& mu = res.mu[0].values;
        const double thr = 1e-4 * mu.cwiseAbs().maxCoeff();
        const Index active = (mu.array().abs() > thr).count();
        worst_excess = std::max(worst_excess, active - in.problem.n());
    }
    return {worst_excess <= 0, fmt("max (active - n) = %g", static_cast<double>(worst_excess))};
}

CheckResult timed(const std::string& name, const std::string& group, Outcome (*fn)()) {
    CheckResult r;
    r.name = name;
    r.group = group;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const Outcome o = fn();
        r.passed = o.passed;
        r.detail = o.detail;
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

Check make(const char* name, const char* group, Outcome (*fn)()) {
    return {name, group, [=] { return timed(name, group, fn); }};
}

}  // namespace

const std::vector<Check>& all_checks() {
    static const std::vector<Check> checks{
        make("omega-gamma-reciprocal", "priors", omega_gamma_reciprocal),
        make("gsm-finite-difference", "priors", gsm_matches_finite_difference),
        make("gamma-nondecreasing", "priors", gamma_nondecreasing),
        make("closed-numeric-offset", "penalty", closed_numeric_offset),
        make("zero-noise-limit", "penalty", zero_noise_limit),
        make("large-magnitude-agreement", "penalty", large_magnitude_agreement),
        make("zero-favoring-difference", "penalty", zero_favoring_difference),
        make("penalty-concave", "penalty", penalty_concave),
        make("map-penalty-concave", "penalty", map_penalty_concave),
        make("lp-ordering", "concavity", lp_ordering),
        make("reflexive", "concavity", reflexive),
        make("rho-ordering", "concavity", rho_ordering),
        make("psi-affine-only", "concavity", psi_affine_only),
        make("monotone-descent", "solver", monotone_descent),
        make("z-equals-covariance", "solver", z_equals_covariance),
        make("scale-invariance", "solver", scale_invariance),
        make("learned-lambda-floor", "solver", learned_lambda_floor),
        make("sparsity-bound", "solver", sparsity_bound),
    };
    return checks;
}

std::vector<CheckResult> run_checks(const std::string& filter) {
    std::vector<CheckResult> out;
    for (const auto& c : all_checks())
        if (filter.empty() || c.name.find(filter) != std::string::npos || c.group.find(filter) != std::string::npos)
            out.push_back(c.run());
    return out;
}

}  // namespace vbd::verify
