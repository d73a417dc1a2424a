#include "vbdeblur/pipeline.hpp"

#include "vbdeblur/error.hpp"
#include "vbdeblur/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

namespace vbd::pipeline {

using grids::BlurredImage;
using grids::Shape;
using grids::Vec;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Adds `w` at fractional position (r, c) with bilinear weights, dropping
// contributions that fall outside.
void splat(Image& img, double r, double c, double w) {
    const auto r0 = static_cast<Index>(std::floor(r)), c0 = static_cast<Index>(std::floor(c));
    const double fr = r - static_cast<double>(r0), fc = c - static_cast<double>(c0);
    const double ws[4] = {(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc), fr * fc};
    const Index rs[4] = {r0, r0, r0 + 1, r0 + 1}, cs[4] = {c0, c0 + 1, c0, c0 + 1};
    for (int i = 0; i < 4; ++i) {
        if (rs[i] >= 0 && rs[i] < img.height() && cs[i] >= 0 && cs[i] < img.width())
            img.at(rs[i], cs[i]) += w * ws[i];
    }
}

Kernel finish(Image img) {
    Kernel k(img.shape, img.values.cwiseMax(0.0));
    if (!(k.sum() > 0.0)) return Kernel::uniform(k.shape);
    k.normalize();
    return k;
}

}  // namespace

KernelSpec parse_kernel_spec(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw InvalidArgument("kernel spec needs 'kind:size', got '" + text + "'");
    const std::string kind = text.substr(0, colon);
    std::string rest = text.substr(colon + 1);
    KernelSpec spec;
    if (kind == "box")
        spec.kind = KernelKind::box;
    else if (kind == "line")
        spec.kind = KernelKind::line;
    else if (kind == "random")
        spec.kind = KernelKind::random;
    else if (kind == "shake")
        spec.kind = KernelKind::shake;
    else
        throw InvalidArgument("unknown kernel kind '" + kind + "'");

    std::string size_part = rest;
    if (const auto comma = rest.find(','); comma != std::string::npos) {
        if (spec.kind != KernelKind::line) throw InvalidArgument("only line kernels take an angle");
        size_part = rest.substr(0, comma);
        try {
            spec.angle_deg = std::stod(rest.substr(comma + 1));
        } catch (const std::exception&) {
            throw InvalidArgument("bad kernel angle in '" + text + "'");
        }
    }
    try {
        std::size_t used = 0;
        if (const auto x = size_part.find('x'); x != std::string::npos) {
            spec.shape.width = std::stol(size_part.substr(0, x), &used);
            spec.shape.height = std::stol(size_part.substr(x + 1));
        } else {
            spec.shape.width = spec.shape.height = std::stol(size_part, &used);
            if (used != size_part.size()) throw InvalidArgument("");
        }
    } catch (const std::exception&) {
        throw InvalidArgument("bad kernel size in '" + text + "'");
    }
    if (spec.shape.width < 1 || spec.shape.height < 1 || spec.shape.width % 2 == 0 ||
        (spec.shape.height % 2 == 0))
        throw InvalidArgument("kernel sides must be odd and positive in '" + text + "'");
    return spec;
}

std::string to_string(const KernelSpec& spec) {
    std::ostringstream os;
    switch (spec.kind) {
        case KernelKind::box: os << "box"; break;
        case KernelKind::line: os << "line"; break;
        case KernelKind::random: os << "random"; break;
        case KernelKind::shake: os << "shake"; break;
    }
    os << ':';
    if (spec.shape.width == spec.shape.height)
        os << spec.shape.width;
    else
        os << spec.shape.width << 'x' << spec.shape.height;
    if (spec.kind == KernelKind::line) os << ',' << spec.angle_deg;
    return os.str();
}

Kernel make_kernel(const KernelSpec& spec, std::uint64_t seed) {
    const Shape s = spec.shape;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    switch (spec.kind) {
        case KernelKind::box:
            return Kernel::uniform(s);
        case KernelKind::random: {
            Image img(s);
            for (Index i = 0; i < img.size(); ++i) img.values[i] = unif(rng);
            return finish(std::move(img));
        }
        case KernelKind::line: {
            Image img(s);
            const double a = spec.angle_deg * std::numbers::pi / 180.0;
            const double cr = 0.5 * static_cast<double>(s.height - 1), cc = 0.5 * static_cast<double>(s.width - 1);
            const double half = 0.5 * static_cast<double>(std::max(s.width, s.height) - 1);
            const int samples = static_cast<int>(40 * std::max(s.width, s.height));
            for (int i = 0; i <= samples; ++i) {
                const double t = -half + 2.0 * half * i / samples;
                splat(img, cr - t * std::sin(a), cc + t * std::cos(a), 1.0);
            }
            return finish(std::move(img));
        }
        case KernelKind::shake: {
            // random walk with smoothly turning heading, fitted into the support
            std::normal_distribution<double> turn(0.0, 0.6);
            const int steps = static_cast<int>(60 * std::max(s.width, s.height));
            std::vector<double> xs{0.0}, ys{0.0};
            double heading = 2.0 * std::numbers::pi * unif(rng);
            for (int i = 0; i < steps; ++i) {
                if (i % 20 == 0) heading += turn(rng);
                xs.push_back(xs.back() + 0.05 * std::cos(heading));
                ys.push_back(s.height == 1 ? 0.0 : ys.back() + 0.05 * std::sin(heading));
            }
            const auto [xmin, xmax] = std::minmax_element(xs.begin(), xs.end());
            const auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
            const double ex = *xmax - *xmin, ey = *ymax - *ymin;
            const double fit = std::min(ex > 0 ? (s.width - 1) / ex : 1e300, ey > 0 ? (s.height - 1) / ey : 1e300);
            const double scale = std::isfinite(fit) && fit < 1e299 ? fit : 0.0;
            const double ox = 0.5 * (s.width - 1) - scale * 0.5 * (*xmax + *xmin);
            const double oy = 0.5 * (s.height - 1) - scale * 0.5 * (*ymax + *ymin);
            Image img(s);
            for (std::size_t i = 0; i < xs.size(); ++i) splat(img, oy + scale * ys[i], ox + scale * xs[i], 1.0);
            return finish(std::move(img));
        }
    }
    throw InvalidArgument("unhandled kernel kind");
}

const std::vector<std::string>& synthetic_scenes() {
    static const std::vector<std::string> names{"shapes", "bars", "blocks", "leaves"};
    return names;
}

Image synthetic_image(const std::string& scene, Index side, std::uint64_t seed) {
    if (side < 8) throw DimensionError("synthetic images need a side of at least 8");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto uniform_int = [&](Index lo, Index hi) {
        return std::uniform_int_distribution<Index>(lo, hi)(rng);
    };
    Image img({side, side});
    const double s = static_cast<double>(side);

    if (scene == "shapes") {
        img.values.setConstant(0.15 + 0.2 * unif(rng));
        for (int i = 0; i < 7; ++i) {
            const Index w = uniform_int(side / 8, side / 3), h = uniform_int(side / 8, side / 3);
            const Index r0 = uniform_int(0, side - h), c0 = uniform_int(0, side - w);
            const double v = unif(rng);
            for (Index r = r0; r < r0 + h; ++r)
                for (Index c = c0; c < c0 + w; ++c) img.at(r, c) = v;
        }
        for (int i = 0; i < 5; ++i) {
            const double rad = s * (0.06 + 0.12 * unif(rng));
            const double cr = s * unif(rng), cc = s * unif(rng);
            const double v = unif(rng);
            for (Index r = 0; r < side; ++r)
                for (Index c = 0; c < side; ++c)
                    if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= rad * rad) img.at(r, c) = v;
        }
    } else if (scene == "bars") {
        img.values.setConstant(0.5);
        // vertical bars of widths 1..4 in the top half, horizontal in the bottom
        const Index half = side / 2;
        Index c = uniform_int(0, 3);
        bool on = true;
        while (c < side) {
            const Index w = uniform_int(1, 4);
            for (Index r = 0; r < half; ++r)
                for (Index cc = c; cc < std::min(c + w, side); ++cc) img.at(r, cc) = on ? 0.9 : 0.1;
            c += w;
            on = !on;
        }
        Index r = half + uniform_int(0, 3);
        on = unif(rng) < 0.5;
        while (r < side) {
            const Index h = uniform_int(1, 5);
            const double v = on ? 0.8 : 0.2;
            for (Index rr = r; rr < std::min(r + h, side); ++rr)
                for (Index cc = 0; cc < side; ++cc) img.at(rr, cc) = v;
            r += h;
            on = !on;
        }
        // a bright square straddling both halves
        const Index q = side / 4, r0 = half - q / 2, c0 = uniform_int(0, side - q);
        for (Index rr = r0; rr < r0 + q; ++rr)
            for (Index cc = c0; cc < c0 + q; ++cc) img.at(rr, cc) = 1.0;
    } else if (scene == "blocks") {
        // recursive splits into flat rectangles, plus a few isolated dots
        struct Rect {
            Index r0, c0, h, w;
        };
        std::vector<Rect> todo{{0, 0, side, side}}, done;
        while (!todo.empty()) {
            Rect rc = todo.back();
            todo.pop_back();
            const bool split = (rc.h > side / 6 || rc.w > side / 6) && (rc.h * rc.w > side * side / 64 || unif(rng) < 0.5);
            if (!split || rc.h < 4 || rc.w < 4) {
                done.push_back(rc);
                continue;
            }
            if (rc.w >= rc.h) {
                const Index cut = uniform_int(rc.w / 4, 3 * rc.w / 4);
                todo.push_back({rc.r0, rc.c0, rc.h, cut});
                todo.push_back({rc.r0, rc.c0 + cut, rc.h, rc.w - cut});
            } else {
                const Index cut = uniform_int(rc.h / 4, 3 * rc.h / 4);
                todo.push_back({rc.r0, rc.c0, cut, rc.w});
                todo.push_back({rc.r0 + cut, rc.c0, rc.h - cut, rc.w});
            }
        }
        for (const Rect& rc : done) {
            const double v = unif(rng);
            for (Index r = rc.r0; r < rc.r0 + rc.h; ++r)
                for (Index c = rc.c0; c < rc.c0 + rc.w; ++c) img.at(r, c) = v;
        }
        for (int i = 0; i < side / 4; ++i) {
            const Index r = uniform_int(1, side - 3), c = uniform_int(1, side - 3);
            const double v = unif(rng) < 0.5 ? 0.0 : 1.0;
            img.at(r, c) = img.at(r + 1, c) = img.at(r, c + 1) = img.at(r + 1, c + 1) = v;
        }
    } else if (scene == "leaves") {
        // dead-leaves occlusion model: disks with radius density ~ r^-3 on
        // [2, 40] px stacked front to back until the plane is covered, plus
        // a fine grain of standard deviation 0.01
        std::vector<char> covered(static_cast<std::size_t>(side * side), 0);
        Index left = side * side;
        const double a = 1.0 / (2.0 * 2.0), b = 1.0 / (40.0 * 40.0);
        for (int n = 0; n < 200000 && left > 0; ++n) {
            const double rad = 1.0 / std::sqrt(a + unif(rng) * (b - a));
            const double cy = s * unif(rng), cx = s * unif(rng), v = unif(rng);
            const Index r0 = std::max<Index>(0, static_cast<Index>(cy - rad));
            const Index r1 = std::min<Index>(side, static_cast<Index>(cy + rad) + 1);
            const Index c0 = std::max<Index>(0, static_cast<Index>(cx - rad));
            const Index c1 = std::min<Index>(side, static_cast<Index>(cx + rad) + 1);
            for (Index r = r0; r < r1; ++r)
                for (Index c = c0; c < c1; ++c) {
                    auto& done = covered[static_cast<std::size_t>(r * side + c)];
                    if (!done && (r - cy) * (r - cy) + (c - cx) * (c - cx) <= rad * rad) {
                        done = 1;
                        img.at(r, c) = v;
                        --left;
                    }
                }
        }
        std::normal_distribution<double> grain(0.0, 0.01);
        for (Index i = 0; i < img.size(); ++i) img.values[i] += grain(rng);
    } else {
        throw InvalidArgument("unknown synthetic scene '" + scene + "'");
    }
    return img;
}

BenchmarkCase synth_case(const Image& sharp, const Kernel& kernel, double noise_db, std::uint64_t seed) {
    kernel.validate();
    BenchmarkCase bc;
    bc.sharp = sharp;
    bc.kernel = kernel;
    bc.noise_db = noise_db;
    bc.seed = seed;
    bc.blurry = grids::convolve_valid(sharp, kernel);
    if (std::isfinite(noise_db)) {
        const double n = static_cast<double>(bc.blurry.size());
        const double mean = bc.blurry.values.sum() / n;
        const double var = (bc.blurry.values.array() - mean).square().sum() / n;
        bc.noise_variance = var * std::pow(10.0, -noise_db / 10.0);
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, std::sqrt(bc.noise_variance));
        for (Index i = 0; i < bc.blurry.size(); ++i) bc.blurry.values[i] += noise(rng);
    }
    return bc;
}

std::pair<SpikeCase, SpikeCase> spike_benchmark_1d(std::uint64_t seed, const SpikeOptions& options) {
    if (options.spikes > options.length) throw InvalidArgument("more spikes than samples");
    if (options.kernel_length < 1 || options.kernel_length % 2 == 0 || options.kernel_length > options.length)
        throw InvalidArgument("spike kernel length must be odd and fit the signal");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<Index> pos(static_cast<std::size_t>(options.length));
    for (Index i = 0; i < options.length; ++i) pos[static_cast<std::size_t>(i)] = i;
    std::shuffle(pos.begin(), pos.end(), rng);
    grids::GradientImage x({options.length, 1});
    for (Index s = 0; s < options.spikes; ++s) {
        const double mag = 0.5 + unif(rng);
        x.values[pos[static_cast<std::size_t>(s)]] = unif(rng) < 0.5 ? -mag : mag;
    }

    const Shape ks{options.kernel_length, 1};
    Image rk(ks);
    for (Index i = 0; i < rk.size(); ++i) rk.values[i] = unif(rng);

    auto make = [&](std::string name, Kernel k, std::uint64_t noise_seed) {
        SpikeCase c;
        c.kernel_name = std::move(name);
        c.signal = x;
        c.kernel = std::move(k);
        c.observation = grids::convolve_valid(x, c.kernel);
        if (std::isfinite(options.noise_db)) {
            const auto bc = synth_case(x, c.kernel, options.noise_db, noise_seed);
            c.observation = bc.blurry;
        }
        return c;
    };
    return {make("uniform", Kernel::uniform(ks), seed ^ 0x9e3779b97f4a7c15ULL),
            make("random", finish(std::move(rk)), seed ^ 0x7f4a7c159e3779b9ULL)};
}

SpikeRun run_spike_case(const SpikeCase& spike, const solver::SolverConfig& config, double lambda_init) {
    solver::Problem problem;
    problem.observations.push_back(spike.observation);
    problem.kernel = spike.kernel.shape;
    const auto res = solver::run(problem, config, Kernel::uniform(problem.kernel), lambda_init);

    SpikeRun out;
    out.kernel = res.k;
    out.signal = res.mu.front();
    out.iterations = res.iterations;
    out.converged = res.converged;
    out.kernel_error = kernel_l2_distance(res.k, spike.kernel);
    out.support = count_above(out.signal.values, 1e-3);

    const Vec& x = spike.signal.values;
    const Vec& mu = out.signal.values;
    const Index m = x.size();
    double best = std::numeric_limits<double>::infinity();
    for (Index s = -2; s <= 2; ++s) {
        double acc = 0.0;
        for (Index i = 0; i < m; ++i) {
            const Index j = i + s;
            const double v = j >= 0 && j < m ? mu[j] : 0.0;
            acc += (v - x[i]) * (v - x[i]);
        }
        best = std::min(best, acc);
    }
    out.signal_error = std::sqrt(best) / x.norm();
    return out;
}

solver::Problem gradient_problem(const Image& pixels, Shape kernel) {
    const auto g = grids::gradient_filters(pixels);
    solver::Problem p;
    p.kernel = kernel;
    p.observations.push_back(grids::BlurredImage(g.dx.shape, g.dx.values));
    p.observations.push_back(grids::BlurredImage(g.dy.shape, g.dy.values));
    return p;
}

DeblurResult blind_deblur(const Image& blurry, const DeblurConfig& config) {
    config.solver.validate();
    const Index ks = config.kernel_size;
    if (ks < 1 || ks % 2 == 0) throw InvalidArgument("kernel size must be odd and positive");
    if (blurry.width() < 32 || blurry.height() < 32) throw DimensionError("blind deblurring needs at least 32x32");
    if (3 * ks > std::min(blurry.width(), blurry.height()))
        throw DimensionError("kernel size must not exceed a third of the image side");
    {
        const auto g = grids::gradient_filters(blurry);
        if (g.dx.values.cwiseAbs().maxCoeff() == 0.0 && g.dy.values.cwiseAbs().maxCoeff() == 0.0)
            throw InvalidArgument("image has no gradients; nothing to estimate a kernel from");
    }

    DeblurResult out;
    const auto t0 = Clock::now();
    const auto pyramid = grids::build_pyramid(blurry, {ks, ks});
    Kernel k;
    for (std::size_t li = 0; li < pyramid.size(); ++li) {
        const auto& lv = pyramid[li];
        const solver::Problem problem = gradient_problem(lv.image, lv.kernel);
        k = li == 0 ? Kernel::uniform(lv.kernel) : grids::resize_kernel(k, lv.kernel);
        const auto res = solver::run(problem, config.solver, k, solver::default_lambda_init(problem));
        k = res.k;
        out.levels.push_back({lv.level, lv.kernel, res.trace, res.converged});
    }
    if (!k.is_normalized(1e-9)) k.normalize();
    out.kernel = k;
    out.estimate_seconds = seconds_since(t0);

    if (config.restore) {
        const auto t1 = Clock::now();
        out.restored = nonblind_deconv(blurry, k, config.nb_p, config.nb_lambda, config.nb_iterations);
        out.restore_seconds = seconds_since(t1);
    }
    return out;
}

CaseOutcome evaluate_case(const BenchmarkCase& bc, DeblurConfig config) {
    if (bc.kernel.width() != bc.kernel.height()) throw InvalidArgument("benchmark kernels must be square");
    config.kernel_size = bc.kernel.width();
    config.restore = true;
    const DeblurResult res = blind_deblur(bc.blurry, config);
    CaseOutcome out;
    out.kernel = res.kernel;
    out.restored = res.restored;
    out.estimate_seconds = res.estimate_seconds;
    out.restore_seconds = res.restore_seconds;
    for (const auto& lv : res.levels) out.iterations += lv.trace.empty() ? 0 : lv.trace.back().iteration;
    out.kernel_tv = kernel_tv_distance(res.kernel, bc.kernel);
    const Image with_truth = nonblind_deconv(bc.blurry, bc.kernel, config.nb_p, config.nb_lambda, config.nb_iterations);
    out.error_ratio = ssd_error_ratio(res.restored, with_truth, bc.sharp, bc.kernel.width());
    return out;
}

Image nonblind_deconv(const Image& blurry, const Kernel& k, double p, double lambda, int iterations) {
    if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("non-blind exponent p must lie in (0, 1]");
    if (!(lambda >= 0.0)) throw InvalidArgument("non-blind weight must be >= 0");
    k.validate();
    const Shape L = grids::latent_shape(blurry.shape, k.shape);
    const Index M = L.width, N = L.height;
    const Vec nbar = grids::effective_norms(k, L).values;
    const Vec rhs = grids::conv_adjoint(blurry, k, L).values;

    // gradient weights, one per horizontal / vertical difference
    Vec wx = Vec::Ones((M - 1) * N), wy = Vec::Ones(M * (N - 1));
    const double eps = 1e-4;
    Vec x = Vec::Zero(L.size());
    double reg = lambda;  // first pass is the quadratic (p = 2) solve

    for (int it = 0; it <= iterations; ++it) {
        auto apply = [&](const Vec& v) -> Vec {
            const Image img(L, v);
            Vec out = grids::conv_adjoint(grids::convolve_valid(img, k), k, L).values;
            for (Index r = 0; r < N; ++r) {
                for (Index c = 0; c + 1 < M; ++c) {
                    const double d = reg * wx[r * (M - 1) + c] * (v[r * M + c + 1] - v[r * M + c]);
                    out[r * M + c + 1] += d;
                    out[r * M + c] -= d;
                }
            }
            for (Index r = 0; r + 1 < N; ++r) {
                for (Index c = 0; c < M; ++c) {
                    const double d = reg * wy[r * M + c] * (v[(r + 1) * M + c] - v[r * M + c]);
                    out[(r + 1) * M + c] += d;
                    out[r * M + c] -= d;
                }
            }
            return out;
        };
        Vec diag = nbar;
        for (Index r = 0; r < N; ++r)
            for (Index c = 0; c + 1 < M; ++c) {
                diag[r * M + c] += reg * wx[r * (M - 1) + c];
                diag[r * M + c + 1] += reg * wx[r * (M - 1) + c];
            }
        for (Index r = 0; r + 1 < N; ++r)
            for (Index c = 0; c < M; ++c) {
                diag[r * M + c] += reg * wy[r * M + c];
                diag[(r + 1) * M + c] += reg * wy[r * M + c];
            }
        diag = diag.cwiseMax(1e-12);
        const auto rep = linalg::pcg(apply, rhs, diag, x, 1e-6, 4000);
        if (!rep.converged || !x.allFinite())
            throw ConvergenceError("non-blind restoration: IRLS inner solve failed", it, rep.relative_residual);

        // reweight: |t|^p <= (p/2) (t0^2 + eps)^{(p-2)/2} t^2 + const
        reg = lambda * 0.5 * p;
        for (Index r = 0; r < N; ++r)
            for (Index c = 0; c + 1 < M; ++c) {
                const double t = x[r * M + c + 1] - x[r * M + c];
                wx[r * (M - 1) + c] = std::pow(t * t + eps, 0.5 * (p - 2.0));
            }
        for (Index r = 0; r + 1 < N; ++r)
            for (Index c = 0; c < M; ++c) {
                const double t = x[(r + 1) * M + c] - x[r * M + c];
                wy[r * M + c] = std::pow(t * t + eps, 0.5 * (p - 2.0));
            }
    }
    return Image(L, std::move(x));
}

double aligned_ssd(const Image& estimate, const Image& truth, Index border, Index max_shift) {
    if (!(estimate.shape == truth.shape)) throw DimensionError("SSD needs images of the same shape");
    const Index N = truth.height(), M = truth.width();
    if (2 * border >= std::min(N, M)) throw DimensionError("SSD border leaves no pixels");
    const Index s = std::min(max_shift, border);
    double best = std::numeric_limits<double>::infinity();
    for (Index dr = -s; dr <= s; ++dr) {
        for (Index dc = -s; dc <= s; ++dc) {
            double acc = 0.0;
            for (Index r = border; r < N - border; ++r)
                for (Index c = border; c < M - border; ++c) {
                    const double d = estimate.at(r + dr, c + dc) - truth.at(r, c);
                    acc += d * d;
                }
            best = std::min(best, acc);
        }
    }
    return best;
}

double ssd_error_ratio(const Image& restored_est, const Image& restored_true, const Image& truth,
                       Index kernel_width) {
    if (!(restored_est.shape == truth.shape) || !(restored_true.shape == truth.shape))
        throw DimensionError("error ratio needs images of the same shape");
    const Index b = kernel_width / 2;
    const double den = aligned_ssd(restored_true, truth, b, b);
    if (!(den > 0.0)) throw InvalidArgument("error ratio undefined: true-kernel restoration is exact");
    return aligned_ssd(restored_est, truth, b, b) / den;
}

namespace {

template <class Dist>
double shifted_min(const Kernel& est, const Kernel& truth, Index max_shift, Dist dist) {
    if (!(est.shape == truth.shape)) throw DimensionError("kernel distance needs equal supports");
    const Index H = truth.height(), W = truth.width();
    const Index sr = std::min(max_shift, H - 1), sc = std::min(max_shift, W - 1);
    double best = std::numeric_limits<double>::infinity();
    Kernel shifted(truth.shape);
    for (Index dr = -sr; dr <= sr; ++dr) {
        for (Index dc = -sc; dc <= sc; ++dc) {
            shifted.values.setZero();
            for (Index r = 0; r < H; ++r)
                for (Index c = 0; c < W; ++c) {
                    const Index rr = r + dr, cc = c + dc;
                    if (rr >= 0 && rr < H && cc >= 0 && cc < W) shifted.at(rr, cc) = est.at(r, c);
                }
            best = std::min(best, dist(shifted.values - truth.values));
        }
    }
    return best;
}

}  // namespace

double kernel_tv_distance(const Kernel& estimate, const Kernel& truth, Index max_shift) {
    return shifted_min(estimate, truth, max_shift, [](const Vec& d) { return 0.5 * d.cwiseAbs().sum(); });
}

double kernel_l2_distance(const Kernel& estimate, const Kernel& truth, Index max_shift) {
    return shifted_min(estimate, truth, max_shift, [](const Vec& d) { return d.norm(); });
}

double psnr(const Image& estimate, const Image& truth, Index border) {
    const double ssd = aligned_ssd(estimate, truth, border, 0);
    const double count = static_cast<double>((truth.height() - 2 * border) * (truth.width() - 2 * border));
    const double mse = ssd / count;
    return mse > 0.0 ? 10.0 * std::log10(1.0 / mse) : std::numeric_limits<double>::infinity();
}

Index count_above(const Vec& v, double relative_threshold) {
    if (v.size() == 0) return 0;
    const double t = relative_threshold * v.cwiseAbs().maxCoeff();
    return static_cast<Index>((v.array().abs() > t).count());
}

RatioHistogram ratio_histogram(const std::vector<double>& ratios, const std::vector<double>& edges) {
    if (edges.empty() || !std::is_sorted(edges.begin(), edges.end()))
        throw InvalidArgument("histogram edges must be non-empty and sorted");
    RatioHistogram h;
    h.edges = edges;
    h.counts.assign(edges.size(), 0);
    for (double r : ratios) {
        const auto it = std::upper_bound(edges.begin(), edges.end(), r);
        const auto bin = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
        ++h.counts[bin];
    }
    const double n = static_cast<double>(ratios.size());
    std::size_t acc = 0;
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        acc += h.counts[i];
        h.cumulative.push_back(n > 0 ? static_cast<double>(acc) / n : 0.0);
    }
    return h;
}

unsigned worker_count() {
    if (const char* env = std::getenv("VBDEBLUR_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned workers) {
    std::vector<std::exception_ptr> errors(n);
    const auto threads = static_cast<std::size_t>(std::max(1u, workers));
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < std::min(threads, n); ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace vbd::pipeline
