#include "vbdeblur/penalty_lab.hpp"

#include "vbdeblur/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace vbd::penalty {

using grids::Index;
using grids::Vec;

double gvb_closed(double x, double rho) {
    if (rho < 0.0) throw InvalidArgument("gvb_closed: rho must be >= 0");
    const double ax = std::abs(x);
    if (ax == 0.0 && rho == 0.0) return -std::numeric_limits<double>::infinity();
    const double s = std::sqrt(x * x + 4.0 * rho);
    return 2.0 * ax / (ax + s) + std::log(2.0 * rho + x * x + ax * s);
}

double gamma_opt_jeffreys(double x, double rho) {
    if (rho < 0.0) throw InvalidArgument("gamma_opt_jeffreys: rho must be >= 0");
    const double ax = std::abs(x);
    return 0.5 * (x * x + ax * std::sqrt(x * x + 4.0 * rho));
}

InnerMinimum variational_min(double x, double rho, const ScalarFn& f) {
    if (rho < 0.0) throw InvalidArgument("variational_min: rho must be >= 0");
    const double x2 = x * x;
    auto phi = [&](double g) { return x2 / g + std::log(rho + g) + f(g); };

    const double lo0 = 1e-12;
    const double hi0 = x2 * 1e3 + 1e3 * rho + 1.0;
    constexpr double invphi = 0.6180339887498949;
    double a = lo0, b = hi0;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = phi(c), fd = phi(d);
    int it = 0;
    while (b - a > 1e-10 * std::max(1.0, a) && it < 400) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = phi(d);
        }
        ++it;
    }
    double g = 0.5 * (a + b);
    double val = phi(g);

    // one Newton step on phi'(gamma), derivatives of f by central differences
    {
        const double h = 1e-6 * std::max(g, 1e-9);
        const double fp = (f(g + h) - f(g - h)) / (2 * h);
        const double fpp = (f(g + h) - 2 * f(g) + f(g - h)) / (h * h);
        const double d1 = -x2 / (g * g) + 1.0 / (rho + g) + fp;
        const double d2 = 2 * x2 / (g * g * g) - 1.0 / ((rho + g) * (rho + g)) + fpp;
        if (d2 > 0.0 && std::isfinite(d1)) {
            const double gn = g - d1 / d2;
            if (gn > lo0 && gn < hi0) {
                const double vn = phi(gn);
                if (vn < val) {
                    g = gn;
                    val = vn;
                }
            }
        }
    }

    if (hi0 - g < 1e-6 * hi0)
        throw ConvergenceError("variational_min: minimum not bracketed (x=" + std::to_string(x) +
                                   ", rho=" + std::to_string(rho) + ")",
                               it, g);

    // gamma = 0 is admissible when x = 0
    if (x2 == 0.0) {
        const double f0 = f(0.0);
        if (std::isfinite(f0) || f0 < 0) {
            const double v0 = (rho == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(rho)) + f0;
            if (v0 <= val) return {v0, 0.0, it};
        }
    }
    return {val, g, it};
}

namespace {

ScalarFn energy_of(const priors::PriorSpec& prior) {
    if (!priors::hyper_energy(prior, 1.0))
        throw InvalidArgument("prior '" + priors::name(prior) + "' has no closed-form hyperprior energy");
    return [prior](double g) { return *priors::hyper_energy(prior, g); };
}

}  // namespace

double gvb_numeric(double x, double rho, const priors::PriorSpec& prior) {
    return variational_min(x, rho, energy_of(prior)).value;
}

double psi_eval(double gamma, double rho, const priors::PriorSpec& prior) {
    if (gamma < 0.0) throw InvalidArgument("psi_eval: gamma must be >= 0");
    return std::log(rho + gamma) + energy_of(prior)(gamma);
}

ConcavityReport relative_concavity_check(const ScalarFn& h1, const ScalarFn& h2,
                                         const std::vector<double>& grid, double tolerance) {
    const std::size_t n = grid.size();
    std::vector<double> v1(n), v2(n), d1(n), d2(n);
    const double h = kDerivativeStep;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = grid[i];
        v1[i] = h1(t);
        v2[i] = h2(t);
        d1[i] = (h1(t + h) - h1(t - h)) / (2 * h);
        d2[i] = (h2(t + h) - h2(t - h)) / (2 * h);
        if (!(d2[i] > 0.0))
            throw InvalidArgument("relative_concavity_check: reference function not strictly increasing at " +
                                  std::to_string(t));
        if (i > 0 && !(v2[i] > v2[i - 1]))
            throw InvalidArgument("relative_concavity_check: reference function not strictly increasing on grid");
    }

    ConcavityReport rep;
    for (std::size_t i = 0; i < n; ++i) {
        const double ratio = d1[i] / d2[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            ++rep.pairs_checked;
            const double bound = v1[i] + ratio * (v2[j] - v2[i]);
            const double excess = v1[j] - bound;
            if (excess > tolerance * (1.0 + std::abs(v1[j]))) {
                ++rep.violation_count;
                rep.max_violation = std::max(rep.max_violation, excess);
                rep.worst.push_back({grid[i], grid[j], excess});
                std::sort(rep.worst.begin(), rep.worst.end(),
                          [](const auto& a, const auto& b) { return a.amount > b.amount; });
                if (rep.worst.size() > 8) rep.worst.pop_back();
            }
        }
    }
    return rep;
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        g[i] = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
    }
    return g;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t count) {
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        g[i] = lo + t * (hi - lo);
    }
    return g;
}

double lp_scalar_prox(double a, double u, double lambda, double p) {
    if (u == 0.0 || lambda < 0.0) return lambda < 0.0 ? u : 0.0;
    if (!(a > 0.0)) return 0.0;
    const double v = std::abs(u);
    auto dphi = [&](double t) { return 2 * a * (t - v) + lambda * p * std::pow(t, p - 1.0); };
    auto phi = [&](double t) { return a * (t - v) * (t - v) + lambda * std::pow(t, p); };

    double left = 0.0;
    if (p >= 1.0) {
        const double d0 = -2 * a * v + (p == 1.0 ? lambda : 0.0);
        if (d0 >= 0.0) return 0.0;
    } else {
        const double t0 = std::pow(lambda * p * (1.0 - p) / (2 * a), 1.0 / (2.0 - p));
        if (t0 >= v || dphi(t0) >= 0.0) return 0.0;
        left = t0;
    }
    double lo = left, hi = v;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, v); ++i) {
        const double mid = 0.5 * (lo + hi);
        if (dphi(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    const double t = 0.5 * (lo + hi);
    if (p < 1.0 && !(phi(t) < phi(0.0))) return 0.0;
    return std::copysign(t, u);
}

namespace {

Eigen::MatrixXd dense_conv_matrix(const grids::Kernel& k, grids::Shape latent) {
    const grids::Shape out = grids::valid_shape(latent, k.shape);
    Eigen::MatrixXd H(out.size(), latent.size());
    grids::Image e(latent);
    for (Index i = 0; i < latent.size(); ++i) {
        e.values.setZero();
        e.values[i] = 1.0;
        H.col(i) = grids::convolve_valid(e, k).values;
    }
    return H;
}

double lp_objective(const Eigen::MatrixXd& H, const Vec& y, const Vec& x, double p, double lambda,
                    double* data, double* pen) {
    const double d = (y - H * x).squaredNorm();
    double s = 0.0;
    for (Index i = 0; i < x.size(); ++i) s += std::pow(std::abs(x[i]), p);
    if (data) *data = d;
    if (pen) *pen = lambda * s;
    return d + lambda * s;
}

}  // namespace

LpFit lp_blur_cost(const grids::Image& y, const grids::Kernel& k, double p, double lambda,
                   const LpOptions& options) {
    if (!(p > 0.0)) throw InvalidArgument("lp_blur_cost: p must be > 0");
    if (!(lambda > 0.0)) throw InvalidArgument("lp_blur_cost: lambda must be > 0");
    const grids::Shape latent = grids::latent_shape(y.shape, k.shape);
    if (latent.size() > 4096) throw DimensionError("lp_blur_cost: dense solver limited to 4096 unknowns");

    const Eigen::MatrixXd H = dense_conv_matrix(k, latent);
    const Eigen::MatrixXd Q = H.transpose() * H;
    const Vec hty = H.transpose() * y.values;
    const Index m = latent.size();

    std::vector<Vec> starts{hty};
    std::mt19937_64 rng(options.seed);
    const double scale = std::max(1e-3, std::sqrt(hty.squaredNorm() / static_cast<double>(m)));
    std::normal_distribution<double> normal(0.0, scale);
    for (int r = 0; r < options.restarts; ++r) {
        Vec s(m);
        for (Index i = 0; i < m; ++i) s[i] = normal(rng);
        starts.push_back(std::move(s));
    }

    LpFit best;
    best.cost = std::numeric_limits<double>::infinity();
    for (const Vec& start : starts) {
        Vec x = start;
        for (int t = 0; t < options.outer_iterations; ++t) {
            const double frac = options.outer_iterations == 1
                                    ? 1.0
                                    : static_cast<double>(t) / (options.outer_iterations - 1);
            const double eps = options.eps_start * std::pow(options.eps_end / options.eps_start, frac);
            Eigen::MatrixXd A = Q;
            for (Index i = 0; i < m; ++i)
                A(i, i) += 0.5 * lambda * p * std::pow(x[i] * x[i] + eps, 0.5 * (p - 2.0));
            Eigen::LLT<Eigen::MatrixXd> llt(A);
            if (llt.info() != Eigen::Success)
                throw ConvergenceError("lp_blur_cost: IRLS system not positive definite", t, eps);
            x = llt.solve(hty);
            if (!x.allFinite()) throw ConvergenceError("lp_blur_cost: IRLS diverged", t, eps);
        }

        // exact coordinate descent on the true objective
        Vec g = Q * x - hty;
        for (int sweep = 0; sweep < options.polish_sweeps; ++sweep) {
            double change = 0.0;
            for (Index i = 0; i < m; ++i) {
                const double a = Q(i, i);
                if (!(a > 0.0)) {
                    if (x[i] != 0.0) {
                        g -= x[i] * Q.col(i);
                        x[i] = 0.0;
                    }
                    continue;
                }
                const double u = x[i] - g[i] / a;
                const double t = lp_scalar_prox(a, u, lambda, p);
                const double delta = t - x[i];
                if (delta != 0.0) {
                    g += delta * Q.col(i);
                    x[i] = t;
                    change = std::max(change, std::abs(delta));
                }
            }
            if (change < 1e-13) break;
        }

        LpFit fit;
        fit.cost = lp_objective(H, y.values, x, p, lambda, &fit.data_term, &fit.penalty_term);
        if (!std::isfinite(fit.cost)) throw ConvergenceError("lp_blur_cost: non-finite objective", 0, 0.0);
        fit.x = std::move(x);
        if (fit.cost < best.cost) best = std::move(fit);
    }
    return best;
}

const std::vector<std::string>& discrimination_signals() {
    static const std::vector<std::string> names{"edge", "spike", "composite"};
    return names;
}

DiscriminationSignal discrimination_signal(const std::string& name) {
    constexpr Index L = 64;
    DiscriminationSignal sig;
    sig.name = name;
    sig.kernel = grids::Kernel({15, 1});
    for (Index i = 0; i < 15; ++i) {
        const double t = static_cast<double>(i) - 7.0;
        sig.kernel.values[i] = std::exp(-t * t / (2.0 * 2.5 * 2.5));
    }
    sig.kernel.normalize();
    sig.sharp = grids::GradientImage({L, 1});
    if (name == "edge") {
        sig.sharp.values[L / 2] = 1.0;
    } else if (name == "spike") {
        sig.sharp.values[L / 2] = 1.0;
        sig.sharp.values[L / 2 + 2] = -1.0;
    } else if (name == "composite") {
        std::mt19937_64 rng(7);
        std::normal_distribution<double> texture(0.0, 1.0);
        Vec px(L + 1);
        double level = 0.2;
        for (Index i = 0; i <= L; ++i) {
            if (i == 20) level += 0.6;
            if (i == 40) level -= 0.25;
            if (i == 50) level += 0.15;
            px[i] = level + 0.03 * texture(rng);
        }
        for (Index i = 0; i < L; ++i) sig.sharp.values[i] = px[i + 1] - px[i];
    } else {
        throw InvalidArgument("unknown discrimination signal '" + name + "'");
    }
    return sig;
}

std::vector<DiscriminationRow> discrimination_table(const std::vector<std::string>& signals,
                                                    const std::vector<double>& ps, double lambda,
                                                    const LpOptions& options) {
    std::vector<DiscriminationRow> rows;
    for (const auto& name : signals) {
        const DiscriminationSignal sig = discrimination_signal(name);
        const grids::BlurredImage y = grids::convolve_valid(sig.sharp, sig.kernel);
        const grids::Kernel delta = grids::Kernel::delta(sig.kernel.shape);
        for (double p : ps) {
            DiscriminationRow row;
            row.signal = name;
            row.p = p;
            try {
                row.cost_true = lp_blur_cost(y, sig.kernel, p, lambda, options).cost;
                row.cost_delta = lp_blur_cost(y, delta, p, lambda, options).cost;
            } catch (const Error& e) {
                row.error = e.what();
                row.cost_true = row.cost_delta = std::numeric_limits<double>::quiet_NaN();
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

ScalarFn lp_penalty(double p) {
    return [p](double v) { return std::pow(std::abs(v), p); };
}

ScalarFn gvb_penalty(double rho) {
    return [rho](double v) { return gvb_closed(v, rho); };
}

double PreferenceMap::favored_fraction() const {
    if (favored.empty()) return 0.0;
    std::size_t n = 0;
    for (auto f : favored) n += f;
    return static_cast<double>(n) / static_cast<double>(favored.size());
}

PreferenceMap patch_preference_map(const grids::GradientImage& sharp, const grids::Kernel& k,
                                   const ScalarFn& penalty, Index patch) {
    if (patch < 1 || patch % 2 == 0) throw InvalidArgument("patch size must be odd and positive");
    const grids::BlurredImage blurred = grids::convolve_valid(sharp, k);
    const Index off_r = (k.height() - 1) / 2, off_c = (k.width() - 1) / 2;

    PreferenceMap map;
    map.patch = patch;
    map.tiles_x = blurred.width() / patch;
    map.tiles_y = blurred.height() / patch;
    map.favored.assign(static_cast<std::size_t>(map.tiles_x * map.tiles_y), 0);
    map.pixels = grids::Image(blurred.shape);

    for (Index ty = 0; ty < map.tiles_y; ++ty) {
        for (Index tx = 0; tx < map.tiles_x; ++tx) {
            double s_sharp = 0.0, s_blur = 0.0;
            for (Index r = ty * patch; r < (ty + 1) * patch; ++r) {
                for (Index c = tx * patch; c < (tx + 1) * patch; ++c) {
                    s_sharp += penalty(sharp.at(r + off_r, c + off_c));
                    s_blur += penalty(blurred.at(r, c));
                }
            }
            const bool fav = s_sharp < s_blur;
            map.favored[static_cast<std::size_t>(ty * map.tiles_x + tx)] = fav ? 1 : 0;
            if (fav) {
                for (Index r = ty * patch; r < (ty + 1) * patch; ++r)
                    for (Index c = tx * patch; c < (tx + 1) * patch; ++c) map.pixels.at(r, c) = 1.0;
            }
        }
    }
    return map;
}

double map_agreement(const PreferenceMap& a, const PreferenceMap& b) {
    if (a.favored.size() != b.favored.size() || a.favored.empty())
        throw DimensionError("preference maps have different tilings");
    std::size_t same = 0;
    for (std::size_t i = 0; i < a.favored.size(); ++i) same += a.favored[i] == b.favored[i];
    return static_cast<double>(same) / static_cast<double>(a.favored.size());
}

std::vector<ProbeRow> probe_gvb(const std::vector<double>& xs, const std::vector<double>& rhos) {
    std::vector<ProbeRow> rows;
    rows.reserve(xs.size() * rhos.size());
    const priors::PriorSpec jeff = priors::Jeffreys{};
    for (double rho : rhos)
        for (double x : xs) rows.push_back({x, rho, gvb_closed(x, rho), gvb_numeric(x, rho, jeff)});
    return rows;
}

}  // namespace vbd::penalty
