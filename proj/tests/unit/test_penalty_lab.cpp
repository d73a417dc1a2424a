#include "oracles.hpp"

#include "vbdeblur/error.hpp"
#include "vbdeblur/penalty_lab.hpp"

#include <doctest.h>

#include <cmath>

using namespace vbd;
using namespace vbd::penalty;
using grids::Index;
using grids::Kernel;
using grids::Shape;
using grids::Vec;

TEST_CASE("closed-form coupled penalty") {
    CHECK(gvb_closed(1.0, 0.0) == doctest::Approx(1.0 + std::log(2.0)));
    CHECK(gvb_closed(0.0, 1.0) == doctest::Approx(std::log(2.0)));
    CHECK(gvb_closed(-3.0, 0.5) == gvb_closed(3.0, 0.5));
    const double z = gvb_closed(0.0, 0.0);
    CHECK(std::isinf(z));
    CHECK(z < 0.0);
}

TEST_CASE("optimal gamma for a constant energy") {
    CHECK(gamma_opt_jeffreys(1.0, 0.0) == doctest::Approx(1.0));
    CHECK(gamma_opt_jeffreys(0.0, 2.5) == 0.0);
    CHECK(gamma_opt_jeffreys(2.0, 3.0) == doctest::Approx(6.0));
    // agrees with a direct search of the inner problem
    for (double x : {0.2, 1.0, 4.0})
        for (double rho : {0.01, 1.0}) {
            const auto inner = [&](double lg) {
                const double g = std::exp(lg);
                return x * x / g + std::log(rho + g);
            };
            CHECK(gamma_opt_jeffreys(x, rho) ==
                  doctest::Approx(std::exp(oracle::golden_min(inner, -20.0, 10.0))).epsilon(1e-6));
        }
}

TEST_CASE("numerical coupled penalty") {
    CHECK(gvb_numeric(1.0, 0.0, priors::Jeffreys{}) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(gvb_numeric(0.0, 0.3, priors::Jeffreys{}) == doctest::Approx(std::log(0.3)));
    CHECK(gvb_numeric(0.0, 1.0, priors::Affine{1.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(gvb_closed(1.0, 0.0) - gvb_numeric(1.0, 0.0, priors::Jeffreys{}) == doctest::Approx(std::log(2.0)));
    for (double x : {0.0, 0.5, 3.0, 10.0})
        for (double rho : {1e-3, 0.2, 10.0})
            CHECK(gvb_closed(x, rho) - gvb_numeric(x, rho, priors::Jeffreys{}) ==
                  doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK_THROWS_AS(gvb_numeric(1.0, 0.1, priors::GeneralizedGaussian{0.5}), InvalidArgument);
}

TEST_CASE("gamma-space penalty") {
    CHECK(psi_eval(0.0, 1.0, priors::Jeffreys{}) == doctest::Approx(0.0));
    CHECK(psi_eval(1.0, 1.0, priors::Affine{2.0, 1.0}) == doctest::Approx(std::log(2.0) + 3.0));
    CHECK(psi_eval(std::exp(1.0) - 1.0, 1.0, priors::Jeffreys{}) == doctest::Approx(1.0));
}

TEST_CASE("relative concavity check") {
    const auto grid = log_grid(1e-2, 10.0, 40);
    CHECK(relative_concavity_check(lp_penalty(0.5), lp_penalty(1.0), grid).holds());
    CHECK(relative_concavity_check(lp_penalty(0.7), lp_penalty(0.7), grid).holds());

    const auto swapped = relative_concavity_check(gvb_penalty(1.0), gvb_penalty(0.1), grid);
    CHECK_FALSE(swapped.holds());
    CHECK(swapped.max_violation > 0.0);
    CHECK(swapped.worst.size() <= 8);
    CHECK(relative_concavity_check(gvb_penalty(0.1), gvb_penalty(1.0), grid).holds());

    // the convex |x|^2 is not concave relative to |x|
    CHECK_FALSE(relative_concavity_check(lp_penalty(2.0), lp_penalty(1.0), grid).holds());

    const ScalarFn bump = [](double x) { return std::sin(x); };
    CHECK_THROWS_AS(relative_concavity_check(lp_penalty(1.0), bump, linear_grid(0.1, 6.0, 30)), InvalidArgument);
}

TEST_CASE("grids for probing") {
    const auto g = log_grid(1e-3, 10.0, 5);
    REQUIRE(g.size() == 5);
    CHECK(g.front() == doctest::Approx(1e-3));
    CHECK(g[2] == doctest::Approx(0.1));
    CHECK(g.back() == doctest::Approx(10.0));
    const auto l = linear_grid(-1.0, 1.0, 3);
    CHECK(l == std::vector<double>{-1.0, 0.0, 1.0});
}

TEST_CASE("scalar l_p proximal step matches a dense search") {
    for (double p : {0.1, 0.5, 0.8, 1.0, 1.5})
        for (double u : {-2.0, -0.3, 0.05, 0.4, 1.7}) {
            const double a = 1.3, lambda = 0.4;
            const auto phi = [&](double t) { return a * (t - u) * (t - u) + lambda * std::pow(std::abs(t), p); };
            double best = phi(0.0);
            for (int i = -40000; i <= 40000; ++i) best = std::min(best, phi(i * 1e-4));
            CHECK(phi(lp_scalar_prox(a, u, lambda, p)) <= best + 1e-7);
        }
}

TEST_CASE("l_p blur cost") {
    // k = delta and p = 2: separable ridge problem, cost -> 0 as lambda -> 0
    grids::Image y(Shape{6, 1});
    y.values << 0.3, -1.0, 0.5, 0.0, 2.0, -0.2;
    const auto fit = lp_blur_cost(y, Kernel::delta({1, 1}), 2.0, 1e-9);
    CHECK(fit.cost < 1e-8);
    CHECK((fit.x - y.values).norm() < 1e-6);

    // separable l_1: soft thresholding in closed form
    const double lam = 0.5;
    const auto l1 = lp_blur_cost(y, Kernel::delta({1, 1}), 1.0, lam);
    double expected = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
        const double v = std::abs(y.values[i]);
        expected += v > lam / 2 ? lam * v - lam * lam / 4 : v * v;
    }
    CHECK(l1.cost == doctest::Approx(expected).epsilon(1e-9));
    CHECK(l1.cost == doctest::Approx(l1.data_term + l1.penalty_term));

    // small blurred instance: no random point does better
    std::mt19937_64 rng(4);
    const Kernel k = oracle::random_kernel(rng, {3, 1});
    grids::Image z(Shape{4, 1}, oracle::random_vec(rng, 4));
    for (double p : {0.3, 0.8}) {
        const auto f = lp_blur_cost(z, k, p, 0.05);
        const Eigen::MatrixXd H = oracle::conv_matrix(k, Shape{6, 1});
        const auto cost = [&](const Vec& x) {
            return (z.values - H * x).squaredNorm() + 0.05 * x.array().abs().pow(p).sum();
        };
        CHECK(cost(f.x) == doctest::Approx(f.cost).epsilon(1e-10));
        for (int t = 0; t < 20000; ++t) CHECK(cost(oracle::random_vec(rng, 6, -2.0, 2.0)) >= f.cost - 1e-12);
    }
    CHECK_THROWS_AS(lp_blur_cost(y, Kernel::delta({1, 1}), 0.0, 1.0), InvalidArgument);
    CHECK_THROWS_AS(lp_blur_cost(y, Kernel::delta({1, 1}), 0.5, 0.0), InvalidArgument);
}

TEST_CASE("discrimination signals") {
    for (const auto& name : discrimination_signals()) {
        const auto s = discrimination_signal(name);
        CHECK(s.sharp.size() == 64);
        CHECK(s.kernel.shape == Shape{15, 1});
        CHECK(s.kernel.is_normalized());
        // symmetric Gaussian taps
        CHECK(s.kernel.values[0] == doctest::Approx(s.kernel.values[14]));
        CHECK(s.kernel.values[7] == s.kernel.values.maxCoeff());
    }
    CHECK((discrimination_signal("edge").sharp.values.array() != 0.0).count() == 1);
    CHECK(discrimination_signal("spike").sharp.values.sum() == doctest::Approx(0.0));
    CHECK_THROWS_AS(discrimination_signal("ramp"), InvalidArgument);

    const auto rows = discrimination_table({"edge"}, {0.5, 1.0}, 0.01);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].error.empty());
    CHECK(rows[0].p == 0.5);
    CHECK(std::isfinite(rows[1].cost_delta));
}

TEST_CASE("patch preference maps") {
    // zero gradients everywhere: every patch is a tie and marked 0
    grids::GradientImage flat(Shape{45, 45});
    const Kernel k = Kernel::uniform({5, 5});
    const auto m = patch_preference_map(flat, k, lp_penalty(0.5), 15);
    CHECK(m.tiles_x >= 2);
    CHECK(m.favored_fraction() == 0.0);
    CHECK(m.pixels.values.maxCoeff() == 0.0);

    // a single sharp step is cheaper than its blurred version under l_0.5
    grids::GradientImage edge(Shape{45, 45});
    for (Index r = 0; r < 45; ++r) edge.at(r, 22) = 1.0;
    const auto e = patch_preference_map(edge, k, lp_penalty(0.5), 15);
    CHECK(e.favored_fraction() > 0.0);
    CHECK(map_agreement(e, e) == 1.0);
    CHECK(map_agreement(e, m) < 1.0);
    CHECK_THROWS_AS(patch_preference_map(edge, k, lp_penalty(0.5), 14), InvalidArgument);
}

TEST_CASE("probe rows") {
    const auto rows = probe_gvb({-1.0, 0.0, 1.0}, {0.1, 1.0});
    REQUIRE(rows.size() == 6);
    for (const auto& r : rows) CHECK(r.closed - r.numeric == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}
