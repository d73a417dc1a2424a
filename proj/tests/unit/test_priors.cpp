#include "oracles.hpp"

#include "vbdeblur/error.hpp"
#include "vbdeblur/priors.hpp"

#include <doctest.h>

#include <cmath>

using namespace vbd::priors;

TEST_CASE("pixel penalties") {
    CHECK(gx_eval(Jeffreys{}, 1.0) == doctest::Approx(0.0));
    CHECK(gx_eval(Jeffreys{}, std::exp(1.5)) == doctest::Approx(3.0));
    CHECK(gx_eval(GeneralizedGaussian{1.0}, 2.0) == doctest::Approx(4.0));
    CHECK(gx_eval(GeneralizedGaussian{0.5}, -4.0) == doctest::Approx(4.0));
    CHECK(gx_eval(FiniteGsm{{1.0}, {1.0}}, 0.0) == doctest::Approx(std::log(2.0 * M_PI)));

    const double j0 = gx_eval(Jeffreys{}, 0.0);
    CHECK(std::isinf(j0));
    CHECK(j0 < 0.0);
}

TEST_CASE("gamma and omega updates") {
    CHECK(gamma_update(Jeffreys{}, 2.0) == doctest::Approx(4.0));
    // sigma^(2-p) / p with p = 1
    CHECK(gamma_update(GeneralizedGaussian{1.0}, 3.0) == doctest::Approx(3.0));
    CHECK(gamma_update(GeneralizedGaussian{0.5}, 4.0) == doctest::Approx(std::pow(4.0, 1.5) / 0.5));
    for (const PriorSpec& p : {PriorSpec{Jeffreys{}}, PriorSpec{Affine{1.0, 0.0}}, PriorSpec{GeneralizedGaussian{0.7}}})
        CHECK(gamma_update(p, 0.0) == 0.0);
    // a finite mixture has g_x'(0) = 0, so the update tends to the posterior mean at x = 0
    const FiniteGsm mix{{0.5, 0.5}, {1.0, 4.0}};
    CHECK(gamma_update(mix, 0.0) == doctest::Approx(1.0 / finite_gsm_omega(mix, 0.0)));
    CHECK(gamma_update(mix, 1e-6) == doctest::Approx(gamma_update(mix, 0.0)));

    CHECK(omega_update(Jeffreys{}, 0.5) == doctest::Approx(4.0));
    CHECK(omega_update(GeneralizedGaussian{1.0}, 1.0) == doctest::Approx(1.0));
    CHECK(std::isfinite(omega_update(Jeffreys{}, 0.0)));
    CHECK(omega_update(Jeffreys{}, 0.0) == doctest::Approx(1.0 / kSigmaSqFloor));
}

TEST_CASE("affine energy: gamma from the stationarity condition") {
    // x^2/gamma + log gamma + a gamma is stationary at a gamma^2 + gamma - x^2 = 0
    const Affine f{2.0, 0.3};
    for (double s : {0.1, 0.7, 3.0}) {
        const double g = (-1.0 + std::sqrt(1.0 + 4.0 * f.a * s * s)) / (2.0 * f.a);
        CHECK(gamma_update(f, s) == doctest::Approx(g).epsilon(1e-10));
    }
}

TEST_CASE("omega and gamma are reciprocal") {
    for (const PriorSpec& p : {PriorSpec{Jeffreys{}}, PriorSpec{Affine{0.5, 1.0}}, PriorSpec{GeneralizedGaussian{0.8}},
                               PriorSpec{FiniteGsm{{0.2, 0.8}, {0.5, 3.0}}}})
        for (double s : {0.05, 0.5, 1.0, 4.0, 20.0})
            CHECK(omega_update(p, s) * gamma_update(p, s) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("finite mixture posterior mean of 1/gamma") {
    const FiniteGsm one{{1.0}, {2.0}};
    for (double s : {0.0, 0.3, 5.0}) CHECK(finite_gsm_omega(one, s) == doctest::Approx(0.5));

    const FiniteGsm two{{0.5, 0.5}, {1.0, 4.0}};
    CHECK(finite_gsm_omega(two, 30.0) == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(omega_update(two, 1.3) == doctest::Approx(finite_gsm_omega(two, 1.3)));

    // g_x'(s) / (2 s) by central differences
    for (double s = 0.1; s <= 10.0; s += 0.1) {
        const double h = 1e-5 * std::max(1.0, s);
        const double d = (gx_eval(two, s + h) - gx_eval(two, s - h)) / (2.0 * h);
        CHECK(finite_gsm_omega(two, s) == doctest::Approx(d / (2.0 * s)).epsilon(1e-5));
    }
}

TEST_CASE("gamma is nondecreasing for concave nondecreasing energies") {
    for (const PriorSpec& p : {PriorSpec{Jeffreys{}}, PriorSpec{Affine{0.5, 0.0}}}) {
        double prev = 0.0;
        for (double s = 0.01; s < 50.0; s *= 1.1) {
            const double g = gamma_update(p, s);
            CHECK(g >= prev);
            prev = g;
        }
    }
    CHECK(gamma_update(Jeffreys{}, 0.37) == 0.37 * 0.37);
}

TEST_CASE("energy values reproduce the pixel penalty by minimizing over gamma") {
    // g_x(x) = min_gamma x^2/gamma + log gamma + f(gamma), up to one constant per prior
    for (const PriorSpec& p : {PriorSpec{GeneralizedGaussian{0.8}}, PriorSpec{GeneralizedGaussian{0.5}},
                               PriorSpec{FiniteGsm{{0.3, 0.7}, {0.2, 3.0}}}, PriorSpec{Affine{1.0, 0.0}}}) {
        std::vector<double> offsets;
        for (double x : {0.3, 0.8, 1.5, 2.5}) {
            const auto inner = [&](double lg) {
                const double g = std::exp(lg);
                return x * x / g + lg + energy_value(p, g);
            };
            const double lg = oracle::golden_min(inner, -12.0, 6.0);
            offsets.push_back(inner(lg) - gx_eval(p, x));
        }
        for (double o : offsets) CHECK(o == doctest::Approx(offsets.front()).epsilon(1e-6));
    }
    CHECK(energy_value(Jeffreys{0.0}, 3.0) == 0.0);
    CHECK(energy_value(Affine{2.0, 1.0}, 3.0) == doctest::Approx(7.0));
}

TEST_CASE("prior specs parse and validate") {
    CHECK(std::holds_alternative<Jeffreys>(parse("jeffreys")));
    const auto a = std::get<Affine>(parse("affine:2,1"));
    CHECK(a.a == 2.0);
    CHECK(a.b == 1.0);
    CHECK(std::get<GeneralizedGaussian>(parse("gg:0.8")).p == 0.8);
    const auto g = std::get<FiniteGsm>(parse("gsm:0.5/1,0.5/4"));
    CHECK(g.variances == std::vector<double>{1.0, 4.0});
    for (const char* s : {"jeffreys", "affine:2,1", "gg:0.8", "gsm:0.5/1,0.5/4"}) CHECK(to_string(parse(s)) == s);

    CHECK_THROWS_AS(parse("laplace"), vbd::InvalidArgument);
    CHECK_THROWS_AS(parse("gg:1.5"), vbd::InvalidArgument);
    CHECK_THROWS_AS(parse("affine:-1,0"), vbd::InvalidArgument);
    CHECK_THROWS_AS(validate(FiniteGsm{{0.5, 0.4}, {1.0, 2.0}}), vbd::InvalidArgument);
    CHECK_THROWS_AS(validate(FiniteGsm{{1.0}, {0.0}}), vbd::InvalidArgument);
}
