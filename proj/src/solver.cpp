#include "vbdeblur/solver.hpp"

#include "vbdeblur/error.hpp"

#include <cmath>
#include <string>

namespace vbd::solver {

using grids::BlurredImage;
using grids::GradientImage;
using grids::Kernel;
using grids::Shape;

void SolverConfig::validate() const {
    priors::validate(prior);
    if (const auto* s = std::get_if<Schedule>(&lambda)) {
        if (!(s->beta > 1.0)) throw InvalidArgument("schedule beta must be > 1");
        if (!(s->floor > 0.0)) throw InvalidArgument("schedule floor must be > 0");
    } else {
        const auto& l = std::get<Learned>(lambda);
        if (l.d && !(*l.d >= 0.0)) throw InvalidArgument("learned-lambda d must be >= 0");
    }
    if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
    if (!(kernel_tol >= 0.0)) throw InvalidArgument("kernel tolerance must be >= 0");
    if (!(cg_tol > 0.0) || cg_max_iters < 1) throw InvalidArgument("bad CG settings");
    if (!(qp_tol > 0.0) || qp_max_iters < 1) throw InvalidArgument("bad QP settings");
}

Index Problem::n() const {
    Index s = 0;
    for (const auto& y : observations) s += y.size();
    return s;
}

Index Problem::m() const {
    Index s = 0;
    for (std::size_t c = 0; c < observations.size(); ++c) s += latent(c).size();
    return s;
}

Shape Problem::latent(std::size_t c) const { return grids::latent_shape(observations.at(c).shape, kernel); }

double default_lambda_init(const Problem& problem) {
    double sum = 0.0, sq = 0.0;
    const double n = static_cast<double>(problem.n());
    for (const auto& y : problem.observations) {
        sum += y.values.sum();
        sq += y.values.squaredNorm();
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    return std::max(var * 0.1, 1.0);
}

double default_d(const Problem& problem) { return static_cast<double>(problem.n()) * 1e-4; }

double barrier_d(const Problem& problem, const SolverConfig& config) {
    if (const auto* l = std::get_if<Learned>(&config.lambda)) return l->d.value_or(default_d(problem));
    return 0.0;
}

namespace {

Vec norms_for(const SolverState& state, const Problem& problem, std::size_t c) {
    return grids::effective_norms(state.k, problem.latent(c)).values;
}

}  // namespace

SolverState initial_state(const Problem& problem, const SolverConfig& config, const Kernel& k_init,
                          double lambda_init) {
    config.validate();
    if (problem.observations.empty()) throw InvalidArgument("problem has no observations");
    if (!(k_init.shape == problem.kernel)) throw DimensionError("initial kernel does not match problem support");
    k_init.validate();
    if (!(lambda_init > 0.0)) throw InvalidArgument("initial lambda must be > 0");

    SolverState st;
    st.k = k_init;
    st.lambda = lambda_init;
    for (std::size_t c = 0; c < problem.observations.size(); ++c) {
        const auto& y = problem.observations[c];
        const Shape L = problem.latent(c);
        ChannelState ch;
        ch.mu = GradientImage(L);
        ch.C = Vec::Zero(L.size());
        const double power = y.values.squaredNorm() / static_cast<double>(std::max<Index>(y.size(), 1));
        ch.omega = Vec::Constant(L.size(), 1.0 / std::max(power, 1e-8));
        st.channels.push_back(std::move(ch));
    }
    update_x(st, problem, config);
    return st;
}

void update_omega(SolverState& state, const priors::PriorSpec& prior, Mode mode) {
    for (auto& ch : state.channels) {
        for (Index i = 0; i < ch.omega.size(); ++i) {
            const double mu = ch.mu.values[i];
            const double s2 = mu * mu + (mode == Mode::vb ? ch.C[i] : 0.0);
            ch.omega[i] = priors::omega_update(prior, std::sqrt(s2));
        }
    }
}

linalg::CgReport update_x(SolverState& state, const Problem& problem, const SolverConfig& config) {
    linalg::CgReport worst;
    worst.converged = true;
    const double lam = state.lambda;
    for (std::size_t c = 0; c < problem.observations.size(); ++c) {
        auto& ch = state.channels[c];
        const auto& y = problem.observations[c];
        const Shape L = problem.latent(c);
        const Vec nbar = norms_for(state, problem, c);
        const Vec diag = nbar + lam * ch.omega;
        const Vec rhs = grids::conv_adjoint(y, state.k, L).values;
        auto apply = [&](const Vec& v) -> Vec {
            const grids::Image img(L, v);
            const BlurredImage hv = grids::convolve_valid(img, state.k);
            Vec out = grids::conv_adjoint(hv, state.k, L).values;
            out += lam * ch.omega.cwiseProduct(v);
            return out;
        };
        Vec x = ch.mu.values.size() == L.size() ? ch.mu.values : Vec::Zero(L.size());
        const auto rep = linalg::pcg(apply, rhs, diag, x, config.cg_tol, config.cg_max_iters);
        if (!rep.converged)
            throw ConvergenceError("x-update: conjugate gradients did not reach tolerance", rep.iterations,
                                   rep.relative_residual);
        ch.mu = GradientImage(L, std::move(x), ch.mu.filter);
        if (config.mode == Mode::vb)
            ch.C = lam * diag.cwiseInverse();
        else
            ch.C = Vec::Zero(L.size());
        worst.iterations = std::max(worst.iterations, rep.iterations);
        worst.relative_residual = std::max(worst.relative_residual, rep.relative_residual);
    }
    return worst;
}

std::vector<Vec> update_z(const SolverState& state, const Problem& problem) {
    std::vector<Vec> z;
    for (std::size_t c = 0; c < state.channels.size(); ++c) {
        const Vec nbar = norms_for(state, problem, c);
        const Vec a = nbar / state.lambda + state.channels[c].omega;
        z.push_back(a.cwiseInverse());
    }
    return z;
}

void refresh_covariance(SolverState& state, const Problem& problem, Mode mode) {
    if (mode == Mode::map) {
        for (auto& ch : state.channels) ch.C.setZero();
        return;
    }
    auto z = update_z(state, problem);
    for (std::size_t c = 0; c < z.size(); ++c) state.channels[c].C = std::move(z[c]);
}

Vec kernel_weights(const SolverState& state, const Problem& problem) {
    Vec c = Vec::Zero(problem.kernel.size());
    const auto z = update_z(state, problem);
    for (std::size_t ch = 0; ch < z.size(); ++ch) {
        const grids::BoundaryMask mask(problem.kernel, problem.latent(ch));
        c += mask.weighted_row_sums(z[ch]);
    }
    return c;
}

linalg::QpReport update_kernel(SolverState& state, const Problem& problem, const SolverConfig& config) {
    const Index l = problem.kernel.size();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(l, l);
    Vec b = Vec::Zero(l);
    for (std::size_t c = 0; c < problem.observations.size(); ++c) {
        const auto& mu = state.channels[c].mu;
        G += grids::image_gram(mu, problem.kernel);
        b += grids::image_adjoint(mu, problem.observations[c], problem.kernel);
    }
    if (config.mode == Mode::vb) G.diagonal() += kernel_weights(state, problem);

    Vec k = state.k.values;
    const auto rep = linalg::nonneg_qp(G, b, k, config.qp_tol, config.qp_max_iters);
    if (!rep.converged)
        throw ConvergenceError("kernel update: QP did not reach KKT tolerance", rep.iterations, rep.kkt_residual);
    state.k = Kernel(problem.kernel, std::move(k));
    return rep;
}

double renormalize_kernel(SolverState& state) {
    const double s = state.k.sum();
    if (!(s > 0.0) || !std::isfinite(s))
        throw ConvergenceError("kernel collapsed to zero", 0, s);
    state.k.values /= s;
    for (auto& ch : state.channels) {
        ch.mu.values *= s;
        ch.C *= s * s;
        ch.omega /= s * s;
    }
    return s;
}

NoiseStats noise_stats(const SolverState& state, const Problem& problem) {
    NoiseStats ns;
    ns.n = problem.n();
    for (std::size_t c = 0; c < problem.observations.size(); ++c) {
        const auto& ch = state.channels[c];
        const BlurredImage pred = grids::convolve_valid(ch.mu, state.k);
        ns.residual += (problem.observations[c].values - pred.values).squaredNorm();
        ns.theta += norms_for(state, problem, c).dot(ch.C);
    }
    return ns;
}

void update_lambda_learned(SolverState& state, const Problem& problem, double d) {
    if (!(d >= 0.0)) throw InvalidArgument("d must be >= 0");
    const NoiseStats ns = noise_stats(state, problem);
    const double lam = (ns.residual + ns.theta + d) / static_cast<double>(ns.n);
    if (!(lam > 0.0))
        throw ConvergenceError("learned lambda is zero; use d > 0 for a noiseless fit", 0, lam);
    state.lambda = lam;
}

void update_lambda_schedule(SolverState& state, double beta, double floor) {
    if (state.lambda > floor) state.lambda = std::max(state.lambda / beta, floor);
}

double cost_eval(const SolverState& state, const Problem& problem, const SolverConfig& config) {
    const double lam = state.lambda;
    double total = 0.0;
    for (std::size_t c = 0; c < problem.observations.size(); ++c) {
        const auto& ch = state.channels[c];
        const BlurredImage pred = grids::convolve_valid(ch.mu, state.k);
        total += (problem.observations[c].values - pred.values).squaredNorm() / lam;
        const Vec nbar = norms_for(state, problem, c);
        for (Index i = 0; i < ch.omega.size(); ++i) {
            const double w = ch.omega[i];
            const double gamma = 1.0 / w;
            const double mu = ch.mu.values[i];
            const double coupling =
                config.mode == Mode::vb ? std::log(lam + nbar[i] * gamma) : std::log(gamma);
            total += mu * mu * w + coupling + priors::energy_value(config.prior, gamma);
        }
    }
    if (std::holds_alternative<Learned>(config.lambda)) {
        const double d = barrier_d(problem, config);
        total += static_cast<double>(problem.n() - problem.m()) * std::log(lam) + d / lam;
    }
    return total;
}

double sweep(SolverState& state, const Problem& problem, const SolverConfig& config) {
    refresh_covariance(state, problem, config.mode);
    update_omega(state, config.prior, config.mode);
    update_x(state, problem, config);

    const Kernel before = state.k;
    update_kernel(state, problem, config);
    if (config.renormalize) renormalize_kernel(state);
    refresh_covariance(state, problem, config.mode);

    if (const auto* s = std::get_if<Schedule>(&config.lambda))
        update_lambda_schedule(state, s->beta, s->floor);
    else
        update_lambda_learned(state, problem, barrier_d(problem, config));

    const double ref = before.values.norm();
    return (state.k.values - before.values).norm() / (ref > 0.0 ? ref : 1.0);
}

RunResult run(const Problem& problem, const SolverConfig& config, const Kernel& k_init, double lambda_init) {
    return run(problem, config, initial_state(problem, config, k_init, lambda_init));
}

RunResult run(const Problem& problem, const SolverConfig& config, SolverState state) {
    config.validate();
    if (state.trace.empty()) state.trace.push_back({0, state.lambda, cost_eval(state, problem, config), 0.0});
    const int start = state.trace.back().iteration;

    RunResult res;
    for (int it = 1; it <= config.max_iters; ++it) {
        const double change = sweep(state, problem, config);
        state.trace.push_back({start + it, state.lambda, cost_eval(state, problem, config), change});
        res.iterations = it;
        bool at_floor = true;
        if (const auto* s = std::get_if<Schedule>(&config.lambda)) at_floor = state.lambda <= s->floor;
        if (change < config.kernel_tol && at_floor) {
            res.converged = true;
            break;
        }
    }
    res.k = state.k;
    res.lambda = state.lambda;
    for (auto& ch : state.channels) res.mu.push_back(ch.mu);
    res.trace = std::move(state.trace);
    return res;
}

}  // namespace vbd::solver
