// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "vbdeblur/grids.hpp"
#include "vbdeblur/penalty_lab.hpp"
#include "vbdeblur/pipeline.hpp"
#include "vbdeblur/priors.hpp"
#include "vbdeblur/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

using namespace vbd;
using grids::Index;
using grids::Kernel;
using grids::Shape;
using grids::Vec;
using penalty::linear_grid;
using penalty::log_grid;

namespace {

struct Verdict {
    bool passed = false;
    std::string detail;
};

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

const std::vector<std::pair<double, double>> kRhoPairs{{1e-3, 1e-2}, {1e-2, 0.1}, {0.1, 1.0}, {1.0, 10.0}, {1e-2, 10.0}};

// ---- penalty ----

Verdict closed_vs_numeric() {
    double worst = 0.0;
    std::size_t points = 0;
    for (double rho : {0.01, 0.1, 1.0, 10.0})
        for (double x : linear_grid(0.0, 10.0, 1000)) {
            const double d = penalty::gvb_closed(x, rho) - penalty::gvb_numeric(x, rho, priors::Jeffreys{});
            worst = std::max(worst, std::abs(d - std::log(2.0)));
            ++points;
        }
    return {worst < 1e-6, fmt("%g points, max |closed - numeric - log 2| = %.2e", double(points), worst)};
}

Verdict zero_rho_limit() {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double x : linear_grid(0.1, 10.0, 1000)) {
        const double d = penalty::gvb_numeric(x, 1e-12, priors::Jeffreys{}) - 2.0 * std::log(x);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    return {hi - lo < 1e-4, fmt("spread of g_VB(x, 1e-12) - 2 log|x| = %.2e", hi - lo)};
}

Verdict difference_curve() {
    bool decreasing = true;
    double worst_shrink = std::numeric_limits<double>::infinity();
    for (auto [r1, r2] : kRhoPairs) {
        double prev = std::numeric_limits<double>::infinity();
        for (double z : log_grid(0.1, 1e3, 1000)) {
            const double d = penalty::gvb_closed(z, r2) - penalty::gvb_closed(z, r1);
            decreasing = decreasing && d < prev;
            prev = d;
        }
        const double shrink = std::abs(penalty::gvb_closed(0.1, r2) - penalty::gvb_closed(0.1, r1)) /
                              std::abs(penalty::gvb_closed(1e3, r2) - penalty::gvb_closed(1e3, r1));
        worst_shrink = std::min(worst_shrink, shrink);
    }
    return {decreasing && worst_shrink >= 100.0,
            std::string(decreasing ? "strictly decreasing" : "NOT decreasing") +
                fmt(" on 5 rho pairs; smallest shrink factor %.3g", worst_shrink)};
}

Verdict relative_concavity() {
    const auto xgrid = log_grid(1e-2, 10.0, 60);
    const auto ggrid = log_grid(1e-4, 1e4, 60);
    const double tol = 1e-7;
    std::size_t gvb_viol = 0, affine_viol = 0, sqrt_pairs_flagged = 0;
    const penalty::ScalarFn constant = [](double) { return 0.0; };
    const penalty::ScalarFn lin = [](double g) { return 0.5 * g + 1.0; };
    const penalty::ScalarFn root = [](double g) { return std::sqrt(g); };
    const auto psi = [](double rho, penalty::ScalarFn f) -> penalty::ScalarFn {
        return [rho, f](double g) { return std::log(rho + g) + f(g); };
    };
    for (auto [r1, r2] : kRhoPairs) {
        gvb_viol += penalty::relative_concavity_check(penalty::gvb_penalty(r1), penalty::gvb_penalty(r2), xgrid, tol)
                        .violation_count;
        for (const auto& f : {constant, lin})
            affine_viol += penalty::relative_concavity_check(psi(r1, f), psi(r2, f), ggrid, tol).violation_count;
        sqrt_pairs_flagged += !penalty::relative_concavity_check(psi(r1, root), psi(r2, root), ggrid, tol).holds();
    }
    // every sqrt pair must be flagged; anything else is a false outcome
    const std::size_t false_outcomes = gvb_viol + affine_viol + (kRhoPairs.size() - sqrt_pairs_flagged);
    return {false_outcomes == 0,
            fmt("g_VB violations %g, affine psi violations %g, sqrt psi pairs flagged %g/5", double(gvb_viol),
                double(affine_viol), double(sqrt_pairs_flagged))};
}

// ---- solver ----

struct Instance {
    solver::Problem problem;
    Vec x;
    Kernel k;
};

Instance random_instance(std::uint64_t seed, Index latent, Index klen, double noise) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Instance in;
    in.x = Vec::Zero(latent);
    for (int s = 0; s < 6; ++s) in.x[static_cast<Index>(unit(rng) * double(latent)) % latent] = normal(rng);
    in.k = Kernel(Shape{klen, 1});
    for (Index j = 0; j < klen; ++j) in.k.values[j] = 0.1 + unit(rng);
    in.k.normalize();
    auto y = grids::convolve_valid(grids::Image(Shape{latent, 1}, in.x), in.k);
    for (Index i = 0; i < y.size(); ++i) y.values[i] += noise * normal(rng);
    in.problem.observations.push_back(y);
    in.problem.kernel = in.k.shape;
    return in;
}

Verdict monotone_descent() {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto in = random_instance(1000 + seed, 48 + Index(seed % 5) * 8, 5 + 2 * Index(seed % 3), 1e-2);
        solver::SolverConfig cfg;
        const double lam = 0.01 + 0.01 * double(seed % 4);
        cfg.lambda = solver::Schedule{1.15, lam};
        auto st = solver::initial_state(in.problem, cfg, Kernel::uniform(in.problem.kernel), lam);
        double prev = solver::cost_eval(st, in.problem, cfg);
        for (int it = 0; it < 50; ++it) {
            solver::sweep(st, in.problem, cfg);
            const double c = solver::cost_eval(st, in.problem, cfg);
            worst = std::max(worst, (c - prev) / std::abs(prev));
            prev = c;
        }
    }
    return {worst <= 1e-9, fmt("largest relative increase %.2e (20 instances x 50 sweeps)", worst)};
}

Verdict scale_invariance() {
    double jeffreys = 0.0, gg = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto in = random_instance(seed, 48, 7, 1e-2);
        solver::SolverConfig cfg;
        auto st = solver::initial_state(in.problem, cfg, Kernel::uniform(in.problem.kernel), 0.05);
        for (int i = 0; i < 3; ++i) solver::sweep(st, in.problem, cfg);
        solver::SolverConfig gcfg = cfg;
        gcfg.prior = priors::GeneralizedGaussian{0.8};
        const double base = solver::cost_eval(st, in.problem, cfg);
        const double gbase = solver::cost_eval(st, in.problem, gcfg);
        for (double a : {0.5, 2.0, 10.0}) {
            auto s = st;
            s.k.values *= a;
            for (auto& ch : s.channels) {
                ch.mu.values /= a;
                ch.omega *= a * a;
            }
            jeffreys = std::max(jeffreys, std::abs(solver::cost_eval(s, in.problem, cfg) - base) / std::abs(base));
            gg = std::max(gg, std::abs(solver::cost_eval(s, in.problem, gcfg) - gbase) / std::abs(gbase));
        }
    }
    return {jeffreys <= 1e-8 && gg > 1e-3,
            fmt("Jeffreys max relative change %.2e, generalized Gaussian p=0.8 %.2e", jeffreys, gg)};
}

Verdict learned_lambda_floor() {
    double min_ratio = std::numeric_limits<double>::infinity();
    std::size_t runs = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
        for (auto mode : {solver::Mode::vb, solver::Mode::map}) {
            const auto in = random_instance(seed, 48, 7, seed % 2 ? 1e-2 : 0.0);
            solver::SolverConfig cfg;
            cfg.mode = mode;
            cfg.max_iters = 50;
            const double floor = solver::default_d(in.problem) / double(in.problem.n());
            const auto res = solver::run(in.problem, cfg, Kernel::uniform(in.problem.kernel), 1.0);
            for (std::size_t i = 1; i < res.trace.size(); ++i)
                min_ratio = std::min(min_ratio, res.trace[i].lambda / floor);
            ++runs;
        }
    // a noiseless instance fitted exactly, with zero covariance
    const auto in = random_instance(99, 48, 7, 0.0);
    solver::SolverConfig cfg;
    cfg.mode = solver::Mode::map;
    auto st = solver::initial_state(in.problem, cfg, in.k, 1.0);
    st.channels[0].mu.values = in.x;
    st.channels[0].C.setZero();
    const double d = solver::default_d(in.problem);
    solver::update_lambda_learned(st, in.problem, d);
    const double gap = std::abs(st.lambda * double(in.problem.n()) / d - 1.0);
    return {min_ratio >= 1.0 && gap < 1e-12,
            fmt("%g runs, min lambda/(d/n) = %.6g; perfect fit lambda/(d/n) - 1 = %.1e", double(runs), min_ratio, gap)};
}

Verdict sparsity_bound() {
    Index worst = std::numeric_limits<Index>::min();
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto in = random_instance(500 + seed, 64, 9, 1e-3);
        solver::SolverConfig cfg;
        cfg.lambda = solver::Schedule{1.15, 1e-6};
        cfg.max_iters = 300;
        const auto res = solver::run(in.problem, cfg, Kernel::uniform(in.problem.kernel), 1e-6);
        const Index active = pipeline::count_above(res.mu[0].values, 1e-3);
        worst = std::max(worst, active - in.problem.n());
    }
    return {worst <= 0, fmt("max (active - n) = %g over 10 instances (m - n = 8)", double(worst))};
}

// ---- reproductions ----

Verdict spike_benchmark() {
    solver::SolverConfig vb;
    vb.lambda = solver::Schedule{1.15, 1e-4};
    solver::SolverConfig map = vb;
    map.mode = solver::Mode::map;
    struct Run {
        pipeline::SpikeCase spike;
        pipeline::SpikeRun vb, map;
    };
    std::vector<Run> runs(20);
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto [u, r] = pipeline::spike_benchmark_1d(s);
        runs[2 * s].spike = std::move(u);
        runs[2 * s + 1].spike = std::move(r);
    }
    pipeline::parallel_for(runs.size(), [&](std::size_t i) {
        runs[i].vb = pipeline::run_spike_case(runs[i].spike, vb, 1.0);
        runs[i].map = pipeline::run_spike_case(runs[i].spike, map, 1.0);
    });
    int kernel_wins = 0, support_wins = 0;
    for (const auto& r : runs) {
        kernel_wins += r.vb.kernel_error < r.map.kernel_error;
        support_wins += r.vb.support <= r.map.support;
    }
    return {kernel_wins >= 16 && support_wins >= 16,
            fmt("VB kernel error below MAP %g/20, VB support no larger than MAP %g/20", kernel_wins, support_wins)};
}

Verdict discrimination() {
    std::vector<double> ps;
    for (int i = 1; i <= 20; ++i) ps.push_back(0.05 * i);
    penalty::LpOptions opt;
    opt.restarts = 3;
    const auto rows = penalty::discrimination_table({"edge", "composite"}, ps, 0.01, opt);
    bool edge_ok = true, comp_low = false, comp_high = true;
    std::string edge_fail;
    for (const auto& r : rows) {
        if (r.signal == "edge" && !r.favors_true()) {
            edge_ok = false;
            edge_fail += fmt(" p=%.2f", r.p);
        }
        if (r.signal == "composite" && std::abs(r.p - 0.1) < 1e-9) comp_low = r.favors_true();
        if (r.signal == "composite" && std::abs(r.p - 1.0) < 1e-9) comp_high = r.favors_true();
    }
    std::string detail = edge_ok ? "edge favors true kernel at every p" : "edge favors delta at" + edge_fail;
    detail += std::string("; composite true kernel at p=0.1: ") + (comp_low ? "yes" : "no") +
              ", at p=1.0: " + (comp_high ? "yes" : "no");
    return {edge_ok && comp_low && !comp_high, detail};
}

Verdict patch_maps() {
    const auto sharp = pipeline::synthetic_image("leaves", 255, 1);
    const Kernel k = pipeline::make_kernel(pipeline::parse_kernel_spec("shake:15"), 3);
    const auto x = grids::gradient_filters(sharp).dx;
    std::vector<penalty::PreferenceMap> lp;
    for (double p : {0.5, 0.3, 0.1}) lp.push_back(penalty::patch_preference_map(x, k, penalty::lp_penalty(p), 15));
    const auto gvb = penalty::patch_preference_map(x, k, penalty::gvb_penalty(1e-4), 15);
    const double f5 = lp[0].favored_fraction(), f3 = lp[1].favored_fraction(), f1 = lp[2].favored_fraction();
    const double agree = penalty::map_agreement(gvb, lp[2]);
    return {f5 < f3 && f3 < f1 && agree >= 0.85,
            fmt("favored fraction p=0.5 %.3f, p=0.3 %.3f, p=0.1 %.3f; g_VB vs l_0.1 agreement %.4f", f5, f3, f1,
                agree)};
}

Verdict image_benchmark() {
    std::vector<pipeline::BenchmarkCase> cases;
    std::size_t idx = 0;
    for (const char* scene : {"shapes", "bars", "blocks"})
        for (const char* ks : {"line:7,30", "shake:7"})
            for (double db : {40.0, 30.0}) {
                const auto sharp = pipeline::synthetic_image(scene, 64, 100 + idx);
                const Kernel k = pipeline::make_kernel(pipeline::parse_kernel_spec(ks), 200 + idx);
                cases.push_back(pipeline::synth_case(sharp, k, db, 300 + idx));
                ++idx;
            }
    std::vector<double> vb(cases.size()), map(cases.size());
    pipeline::parallel_for(2 * cases.size(), [&](std::size_t i) {
        pipeline::DeblurConfig cfg;
        cfg.solver.mode = i % 2 ? solver::Mode::map : solver::Mode::vb;
        (i % 2 ? map : vb)[i / 2] = pipeline::evaluate_case(cases[i / 2], cfg).error_ratio;
    });
    const auto below2 = std::count_if(vb.begin(), vb.end(), [](double r) { return r < 2.0; });
    const double mv = median(vb), mm = median(map);
    return {mv <= mm && 4 * below2 >= 3 * long(vb.size()),
            fmt("median error ratio VB %.3f, MAP %.3f; VB below 2 on %g/%g", mv, mm, double(below2),
                double(vb.size()))};
}

struct Criterion {
    int id;
    const char* name;
    double time_limit;  // seconds, 0 for none
    std::function<Verdict()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "closed-form and numeric penalty differ by log 2", 5.0, closed_vs_numeric},
        {2, "vanishing rho recovers the log prior", 0.0, zero_rho_limit},
        {3, "penalty difference curve decreasing and shrinking", 5.0, difference_curve},
        {4, "relative concavity outcomes", 0.0, relative_concavity},
        {5, "monotone cost descent at fixed noise", 0.0, monotone_descent},
        {6, "scale invariance only for Jeffreys", 0.0, scale_invariance},
        {7, "learned noise bounded by d/n", 0.0, learned_lambda_floor},
        {8, "1D spike benchmark, VB vs MAP", 120.0, spike_benchmark},
        {9, "true-kernel preference under l_p costs", 0.0, discrimination},
        {10, "patch preference maps", 0.0, patch_maps},
        {11, "synthetic 64x64 deblurring benchmark", 600.0, image_benchmark},
        {12, "at most n active coefficients", 0.0, sparsity_bound},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.time_limit > 0.0 && secs >= c.time_limit) {
            v.passed = false;
            v.detail += fmt("; over the %gs limit", c.time_limit);
        }
        failed += !v.passed;
        std::printf("%s criterion %2d: %s (%.1fs) %s\n", v.passed ? "PASS" : "FAIL", c.id, c.name, secs,
                    v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
