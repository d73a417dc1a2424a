#include "vbdeblur/priors.hpp"

#include "vbdeblur/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace vbd::priors {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Minimizer of x^2/gamma + log gamma + a gamma, written to stay accurate as a -> 0.
double affine_gamma(double a, double x) {
    const double x2 = x * x;
    return 2.0 * x2 / (1.0 + std::sqrt(1.0 + 4.0 * a * x2));
}

// log of each weighted component density pi_j N(x; 0, v_j), shifted by the max.
struct GsmTerms {
    std::vector<double> log_terms;
    double max_log = -std::numeric_limits<double>::infinity();
};

GsmTerms gsm_terms(const FiniteGsm& g, double x) {
    GsmTerms t;
    t.log_terms.resize(g.weights.size());
    for (std::size_t j = 0; j < g.weights.size(); ++j) {
        const double v = g.variances[j];
        t.log_terms[j] = std::log(g.weights[j]) - 0.5 * std::log(2.0 * std::numbers::pi * v) -
                         0.5 * x * x / v;
        t.max_log = std::max(t.max_log, t.log_terms[j]);
    }
    return t;
}

}  // namespace

void validate(const PriorSpec& prior) {
    std::visit(overloaded{
                   [](const Jeffreys& j) {
                       if (!std::isfinite(j.b)) throw InvalidArgument("jeffreys: b must be finite");
                   },
                   [](const Affine& a) {
                       if (!(a.a >= 0.0) || !std::isfinite(a.a) || !std::isfinite(a.b))
                           throw InvalidArgument("affine: slope must be finite and >= 0");
                   },
                   [](const GeneralizedGaussian& g) {
                       if (!(g.p > 0.0 && g.p <= 1.0))
                           throw InvalidArgument("generalized gaussian: p must lie in (0, 1]");
                   },
                   [](const FiniteGsm& g) {
                       if (g.weights.empty() || g.weights.size() != g.variances.size())
                           throw InvalidArgument("gsm: weights and variances must be non-empty and paired");
                       double total = 0.0;
                       for (std::size_t j = 0; j < g.weights.size(); ++j) {
                           if (!(g.weights[j] >= 0.0)) throw InvalidArgument("gsm: negative weight");
                           if (!(g.variances[j] > 0.0)) throw InvalidArgument("gsm: variance must be > 0");
                           total += g.weights[j];
                       }
                       if (std::abs(total - 1.0) > 1e-9)
                           throw InvalidArgument("gsm: weights must sum to 1");
                   },
               },
               prior);
}

std::string name(const PriorSpec& prior) {
    return std::visit(overloaded{
                          [](const Jeffreys&) { return std::string("jeffreys"); },
                          [](const Affine&) { return std::string("affine"); },
                          [](const GeneralizedGaussian&) { return std::string("gg"); },
                          [](const FiniteGsm&) { return std::string("gsm"); },
                      },
                      prior);
}

namespace {

std::vector<double> split_numbers(const std::string& s, char sep) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw InvalidArgument("bad number '" + item + "'");
        }
        if (used != item.size()) throw InvalidArgument("bad number '" + item + "'");
        out.push_back(v);
    }
    return out;
}

}  // namespace

PriorSpec parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
    PriorSpec spec;
    if (kind == "jeffreys") {
        Jeffreys j;
        if (!args.empty()) {
            auto v = split_numbers(args, ',');
            if (v.size() != 1) throw InvalidArgument("jeffreys takes at most one parameter");
            j.b = v[0];
        }
        spec = j;
    } else if (kind == "affine") {
        auto v = split_numbers(args, ',');
        if (v.size() != 2) throw InvalidArgument("affine expects 'affine:a,b'");
        spec = Affine{v[0], v[1]};
    } else if (kind == "gg") {
        auto v = split_numbers(args, ',');
        if (v.size() != 1) throw InvalidArgument("gg expects 'gg:p'");
        spec = GeneralizedGaussian{v[0]};
    } else if (kind == "gsm") {
        FiniteGsm g;
        std::stringstream ss(args);
        std::string comp;
        while (std::getline(ss, comp, ',')) {
            auto v = split_numbers(comp, '/');
            if (v.size() != 2) throw InvalidArgument("gsm expects 'gsm:w/v,w/v,...'");
            g.weights.push_back(v[0]);
            g.variances.push_back(v[1]);
        }
        spec = g;
    } else {
        throw InvalidArgument("unknown prior '" + kind + "'");
    }
    validate(spec);
    return spec;
}

namespace {

// Shortest text that parses back to the same double.
std::string num(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::string to_string(const PriorSpec& prior) {
    return std::visit(overloaded{
                          [](const Jeffreys& j) { return j.b != 0.0 ? "jeffreys:" + num(j.b) : std::string("jeffreys"); },
                          [](const Affine& a) { return "affine:" + num(a.a) + "," + num(a.b); },
                          [](const GeneralizedGaussian& g) { return "gg:" + num(g.p); },
                          [](const FiniteGsm& g) {
                              std::string s = "gsm:";
                              for (std::size_t j = 0; j < g.weights.size(); ++j)
                                  s += (j ? "," : "") + num(g.weights[j]) + "/" + num(g.variances[j]);
                              return s;
                          },
                      },
                      prior);
}

std::optional<double> hyper_energy(const PriorSpec& prior, double gamma) {
    if (const auto* j = std::get_if<Jeffreys>(&prior)) return j->b;
    if (const auto* a = std::get_if<Affine>(&prior)) return a->a * gamma + a->b;
    return std::nullopt;
}

double energy_value(const PriorSpec& prior, double gamma) {
    if (auto f = hyper_energy(prior, gamma)) return *f;
    if (!(gamma > 0.0)) return std::numeric_limits<double>::infinity();
    if (const auto* g = std::get_if<GeneralizedGaussian>(&prior)) {
        const double p = g->p;
        const double u = std::pow(p * gamma, 2.0 / (2.0 - p));
        return 2.0 * std::pow(u, 0.5 * p) - u / gamma - std::log(gamma);
    }
    const auto& gsm = std::get<FiniteGsm>(prior);
    // d g_x / d(x^2) = finite_gsm_omega, decreasing in x^2; solve it = 1/gamma
    const double target = 1.0 / gamma;
    auto slope = [&](double u) { return finite_gsm_omega(gsm, std::sqrt(u)); };
    double u = 0.0;
    if (slope(0.0) > target) {
        const double vmax = *std::max_element(gsm.variances.begin(), gsm.variances.end());
        if (target <= 1.0 / vmax) return std::numeric_limits<double>::infinity();
        double lo = 0.0, hi = 1.0;
        while (slope(hi) > target) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e300) return std::numeric_limits<double>::infinity();
        }
        for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
            const double mid = 0.5 * (lo + hi);
            (slope(mid) > target ? lo : hi) = mid;
        }
        u = 0.5 * (lo + hi);
    }
    return gx_eval(prior, std::sqrt(u)) - u / gamma - std::log(gamma);
}

double gx_eval(const PriorSpec& prior, double x) {
    const double ax = std::abs(x);
    return std::visit(
        overloaded{
            [&](const Jeffreys& j) {
                if (ax == 0.0) return -std::numeric_limits<double>::infinity();
                return 2.0 * std::log(ax) + j.b;
            },
            [&](const Affine& a) {
                if (ax == 0.0) return -std::numeric_limits<double>::infinity();
                const double g = affine_gamma(a.a, ax);
                return ax * ax / g + std::log(g) + a.a * g + a.b;
            },
            [&](const GeneralizedGaussian& g) { return 2.0 * std::pow(ax, g.p); },
            [&](const FiniteGsm& g) {
                const GsmTerms t = gsm_terms(g, ax);
                double s = 0.0;
                for (double lt : t.log_terms) s += std::exp(lt - t.max_log);
                return -2.0 * (t.max_log + std::log(s));
            },
        },
        prior);
}

double gx_derivative(const PriorSpec& prior, double sigma) {
    return std::visit(overloaded{
                          [&](const Jeffreys&) { return 2.0 / sigma; },
                          [&](const Affine& a) { return 2.0 * sigma / affine_gamma(a.a, sigma); },
                          [&](const GeneralizedGaussian& g) {
                              return 2.0 * g.p * std::pow(sigma, g.p - 1.0);
                          },
                          [&](const FiniteGsm& g) {
                              // -2 p'(x)/p(x) with p' = -x sum_j pi_j N_j / v_j
                              const GsmTerms t = gsm_terms(g, sigma);
                              double p = 0.0, dp = 0.0;
                              for (std::size_t j = 0; j < t.log_terms.size(); ++j) {
                                  const double e = std::exp(t.log_terms[j] - t.max_log);
                                  p += e;
                                  dp += e / g.variances[j];
                              }
                              return 2.0 * sigma * dp / p;
                          },
                      },
                      prior);
}

double gamma_update(const PriorSpec& prior, double sigma) {
    if (sigma < 0.0) throw InvalidArgument("gamma_update: sigma must be >= 0");
    if (const auto* g = std::get_if<FiniteGsm>(&prior)) return 1.0 / finite_gsm_omega(*g, sigma);
    if (sigma == 0.0) return 0.0;
    return std::visit(overloaded{
                          [&](const Jeffreys&) { return sigma * sigma; },
                          [&](const Affine& a) { return affine_gamma(a.a, sigma); },
                          [&](const GeneralizedGaussian& g) {
                              return std::pow(sigma, 2.0 - g.p) / g.p;
                          },
                          [&](const FiniteGsm&) { return 0.0; },
                      },
                      prior);
}

double omega_update(const PriorSpec& prior, double sigma) {
    const double s2 = std::max(sigma * sigma, kSigmaSqFloor);
    const double s = std::sqrt(s2);
    return std::visit(overloaded{
                          [&](const Jeffreys&) { return 1.0 / s2; },
                          [&](const Affine& a) { return 1.0 / affine_gamma(a.a, s); },
                          [&](const GeneralizedGaussian& g) { return g.p * std::pow(s, g.p - 2.0); },
                          [&](const FiniteGsm&) { return gx_derivative(prior, s) / (2.0 * s); },
                      },
                      prior);
}

double finite_gsm_omega(const FiniteGsm& prior, double sigma) {
    // responsibilities w_j ~ pi_j v_j^{-1/2} exp(-sigma^2/(2 v_j))
    std::vector<double> logw(prior.weights.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < logw.size(); ++j) {
        logw[j] = std::log(prior.weights[j]) - 0.5 * std::log(prior.variances[j]) -
                  sigma * sigma / (2.0 * prior.variances[j]);
        mx = std::max(mx, logw[j]);
    }
    double norm = 0.0, acc = 0.0;
    for (std::size_t j = 0; j < logw.size(); ++j) {
        const double w = std::exp(logw[j] - mx);
        norm += w;
        acc += w / prior.variances[j];
    }
    return acc / norm;
}

}  // namespace vbd::priors
