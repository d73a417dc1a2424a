#include "commands.hpp"

#include "vbdeblur/error.hpp"
#include "vbdeblur/io.hpp"
#include "vbdeblur/penalty_lab.hpp"
#include "vbdeblur/pipeline.hpp"
#include "vbdeblur/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>

namespace vbd::cli {

using grids::Image;
using grids::Index;
using grids::Kernel;
using io::Csv;

json Command::start() {
    json m = rc_.resolve();
    write_json(rc_.out_path("run.json"), m);
    return m;
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::vector<double> stepped(double lo, double hi, double step, const std::string& what) {
    if (!(step > 0.0) || !(hi >= lo)) throw UsageError("bad " + what + " range");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
    return out;
}

pipeline::KernelSpec kernel_spec(const std::string& text) {
    try {
        return pipeline::parse_kernel_spec(text);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
}

// ---- deblur ----

class Deblur : public Command {
public:
    explicit Deblur(CLI::App& app) : Command(app, "deblur", "blind deblurring of one grayscale image") {
        rc_.add("input", input_, "blurry 8-bit PGM or PNG image");
        rc_.add("kernel_size", kernel_size_, "odd kernel side at full resolution");
        solver_.add_to(rc_);
        rc_.add("nb_p", nb_p_, "exponent of the non-blind gradient prior");
        rc_.add("nb_lambda", nb_lambda_, "weight of the non-blind gradient prior");
        rc_.add("nb_iterations", nb_iterations_, "non-blind reweighting passes");
        rc_.add("seed", seed_, "unused by the deterministic estimator; recorded for the manifest");
    }

    int run() override {
        start();
        pipeline::DeblurConfig cfg;
        cfg.solver = solver_.build();
        cfg.kernel_size = kernel_size_;
        cfg.nb_p = nb_p_;
        cfg.nb_lambda = nb_lambda_;
        cfg.nb_iterations = nb_iterations_;
        if (input_.empty()) throw UsageError("deblur needs --input");
        const Image blurry = io::read_image(input_);

        const auto res = pipeline::blind_deblur(blurry, cfg);
        io::write_kernel(rc_.out_path("kernel.txt"), res.kernel);
        io::write_image_normalized(rc_.out_path("kernel.png"), res.kernel);
        io::write_image(rc_.out_path("restored.png"), res.restored);
        Csv trace({"level", "width", "height", "iteration", "lambda", "cost", "kernel_change"});
        for (const auto& lv : res.levels)
            for (const auto& row : lv.trace)
                trace.row({Csv::num(static_cast<long long>(lv.level)), Csv::num(static_cast<long long>(lv.kernel.width)),
                           Csv::num(static_cast<long long>(lv.kernel.height)),
                           Csv::num(static_cast<long long>(row.iteration)), Csv::num(row.lambda), Csv::num(row.cost),
                           Csv::num(row.kernel_change)});
        trace.save(rc_.out_path("trace.csv"));
        write_json(rc_.out_path("timings.json"),
                   {{"estimate_seconds", res.estimate_seconds}, {"restore_seconds", res.restore_seconds}});
        std::cout << "kernel " << res.kernel.width() << "x" << res.kernel.height() << ", " << res.levels.size()
                  << " levels, estimate " << res.estimate_seconds << " s, restore " << res.restore_seconds << " s\n";
        return 0;
    }

private:
    std::string input_;
    int kernel_size_ = 7;
    SolverFlags solver_;
    double nb_p_ = 0.8;
    double nb_lambda_ = 2e-3;
    int nb_iterations_ = 15;
};

// ---- bench-1d ----

class Bench1d : public Command {
public:
    explicit Bench1d(CLI::App& app)
        : Command(app, "bench-1d", "VB vs MAP on 1D spike trains (uniform and random kernels)") {
        solver_.lambda = "schedule:1.15,1e-4";
        rc_.add("seeds", seeds_, "number of seeds, starting at --seed");
        rc_.add("seed", seed_, "first seed");
        rc_.add("length", length_, "signal length");
        rc_.add("spikes", spikes_, "nonzero samples");
        rc_.add("kernel_length", kernel_length_, "odd kernel length");
        rc_.add("noise_db", noise_db_, "observation SNR in dB (inf for none)");
        solver_.add_to(rc_, false);
        rc_.add("lambda_init", lambda_init_, "initial noise variance");
    }

    int run() override {
        start();
        if (seeds_ < 1) throw UsageError("--seeds must be >= 1");
        solver::SolverConfig vb = solver_.build();
        solver::SolverConfig map = vb;
        vb.mode = solver::Mode::vb;
        map.mode = solver::Mode::map;
        if (!(lambda_init_ > 0.0)) throw UsageError("--lambda-init must be > 0");
        pipeline::SpikeOptions opts;
        opts.length = length_;
        opts.spikes = spikes_;
        opts.kernel_length = kernel_length_;
        opts.noise_db = noise_db_;

        struct Pair {
            pipeline::SpikeCase spike;
            pipeline::SpikeRun vb, map;
        };
        std::vector<Pair> runs(2 * static_cast<std::size_t>(seeds_));
        try {
            for (int s = 0; s < seeds_; ++s) {
                auto [u, r] = pipeline::spike_benchmark_1d(seed_ + static_cast<std::uint64_t>(s), opts);
                runs[2 * s].spike = std::move(u);
                runs[2 * s + 1].spike = std::move(r);
            }
        } catch (const InvalidArgument& e) {
            throw UsageError(e.what());
        }
        pipeline::parallel_for(runs.size(), [&](std::size_t i) {
            runs[i].vb = pipeline::run_spike_case(runs[i].spike, vb, lambda_init_);
            runs[i].map = pipeline::run_spike_case(runs[i].spike, map, lambda_init_);
        });

        Csv table({"seed", "kernel", "mode", "kernel_error", "signal_error", "support", "iterations", "converged"});
        int kernel_wins = 0, support_wins = 0;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto& p = runs[i];
            const auto seed = static_cast<long long>(seed_ + i / 2);
            for (const auto* r : {&p.vb, &p.map})
                table.row({Csv::num(seed), p.spike.kernel_name, r == &p.vb ? "vb" : "map", Csv::num(r->kernel_error),
                           Csv::num(r->signal_error), Csv::num(static_cast<long long>(r->support)),
                           Csv::num(static_cast<long long>(r->iterations)), r->converged ? "1" : "0"});
            kernel_wins += p.vb.kernel_error < p.map.kernel_error;
            support_wins += p.vb.support <= p.map.support;
        }
        table.save(rc_.out_path("bench1d.csv"));

        // first seed, for plotting signals and kernels side by side
        Csv signals({"kernel", "index", "truth", "observation", "vb", "map"});
        Csv kernels({"kernel", "tap", "truth", "vb", "map"});
        for (std::size_t i = 0; i < 2; ++i) {
            const auto& p = runs[i];
            const Index m = p.spike.signal.size();
            const Index off = (p.spike.kernel.size() - 1) / 2;
            for (Index j = 0; j < m; ++j) {
                const Index o = j - off;
                const bool in = o >= 0 && o < p.spike.observation.size();
                signals.row({p.spike.kernel_name, Csv::num(static_cast<long long>(j)), Csv::num(p.spike.signal.values[j]),
                             in ? Csv::num(p.spike.observation.values[o]) : "", Csv::num(p.vb.signal.values[j]),
                             Csv::num(p.map.signal.values[j])});
            }
            for (Index j = 0; j < p.spike.kernel.size(); ++j)
                kernels.row({p.spike.kernel_name, Csv::num(static_cast<long long>(j)), Csv::num(p.spike.kernel.values[j]),
                             Csv::num(p.vb.kernel.values[j]), Csv::num(p.map.kernel.values[j])});
        }
        signals.save(rc_.out_path("signals.csv"));
        kernels.save(rc_.out_path("kernels.csv"));

        std::vector<double> ke_vb, ke_map;
        for (const auto& p : runs) {
            ke_vb.push_back(p.vb.kernel_error);
            ke_map.push_back(p.map.kernel_error);
        }
        const int cases = static_cast<int>(runs.size());
        write_json(rc_.out_path("summary.json"), {{"cases", cases},
                                                  {"vb_kernel_wins", kernel_wins},
                                                  {"vb_support_not_larger", support_wins},
                                                  {"median_kernel_error_vb", median(ke_vb)},
                                                  {"median_kernel_error_map", median(ke_map)}});
        std::printf("VB kernel error below MAP: %d/%d\nVB support no larger than MAP: %d/%d\n", kernel_wins, cases,
                    support_wins, cases);
        return 0;
    }

private:
    int seeds_ = 10;
    Index length_ = 256, spikes_ = 12, kernel_length_ = 15;
    double noise_db_ = std::numeric_limits<double>::infinity();
    double lambda_init_ = 1.0;
    SolverFlags solver_;
};

// ---- penalty ----

class Penalty : public Command {
public:
    explicit Penalty(CLI::App& app) : Command(app, "penalty", "sample the coupled penalty over (x, rho)") {
        rc_.add("x_min", x_min_, "first x");
        rc_.add("x_max", x_max_, "last x");
        rc_.add("x_step", x_step_, "x spacing");
        rc_.add("rhos", rhos_, "comma-separated rho values");
        rc_.add("seed", seed_, "unused (deterministic); recorded for the manifest");
    }

    int run() override {
        start();
        const auto xs = stepped(x_min_, x_max_, x_step_, "x");
        for (double r : rhos_)
            if (!(r >= 0.0)) throw UsageError("rho must be >= 0");
        const auto rows = penalty::probe_gvb(xs, rhos_);
        std::map<double, double> floor;
        for (const auto& r : rows) {
            auto [it, fresh] = floor.try_emplace(r.rho, r.closed);
            if (!fresh) it->second = std::min(it->second, r.closed);
        }
        Csv csv({"x", "rho", "closed", "numeric", "delta", "normalized", "l1"});
        double worst = 0.0;
        for (const auto& r : rows) {
            const double delta = r.closed - r.numeric;
            if (std::isfinite(delta)) worst = std::max(worst, std::abs(delta - std::log(2.0)));
            csv.row({Csv::num(r.x), Csv::num(r.rho), Csv::num(r.closed), Csv::num(r.numeric), Csv::num(delta),
                     Csv::num(r.closed - floor[r.rho]), Csv::num(std::abs(r.x))});
        }
        csv.save(rc_.out_path("penalty.csv"));
        write_json(rc_.out_path("summary.json"),
                   {{"points", rows.size()}, {"max_abs_delta_minus_log2", worst}});
        std::printf("%zu points, max |closed - numeric - log 2| = %.3e\n", rows.size(), worst);
        return 0;
    }

private:
    double x_min_ = -5.0, x_max_ = 5.0, x_step_ = 0.01;
    std::vector<double> rhos_{0.01, 0.1, 1.0, 10.0};
};

// ---- discriminate ----

class Discriminate : public Command {
public:
    explicit Discriminate(CLI::App& app)
        : Command(app, "discriminate", "l_p blur cost of true vs no-blur kernel on 1D test signals") {
        rc_.add("signals", signals_, "comma-separated subset of edge,spike,composite");
        rc_.add("p_min", p_min_, "smallest exponent");
        rc_.add("p_max", p_max_, "largest exponent");
        rc_.add("p_step", p_step_, "exponent spacing");
        rc_.add("weight", weight_, "penalty weight lambda");
        rc_.add("restarts", restarts_, "random restarts per fit");
        rc_.add("seed", seed_, "seed of the random restarts");
    }

    int run() override {
        start();
        const auto ps = stepped(p_min_, p_max_, p_step_, "p");
        for (double p : ps)
            if (!(p > 0.0 && p <= 2.0)) throw UsageError("p must lie in (0, 2]");
        if (!(weight_ > 0.0)) throw UsageError("--weight must be > 0");
        for (const auto& s : signals_) {
            const auto& known = penalty::discrimination_signals();
            if (std::find(known.begin(), known.end(), s) == known.end()) throw UsageError("unknown signal '" + s + "'");
        }
        penalty::LpOptions opts;
        opts.restarts = restarts_;
        opts.seed = seed_;

        std::vector<std::vector<penalty::DiscriminationRow>> parts(signals_.size() * ps.size());
        pipeline::parallel_for(parts.size(), [&](std::size_t i) {
            parts[i] = penalty::discrimination_table({signals_[i / ps.size()]}, {ps[i % ps.size()]}, weight_, opts);
        });
        Csv csv({"signal", "p", "cost_true", "cost_delta", "favors_true", "error"});
        json summary = json::object();
        for (const auto& part : parts)
            for (const auto& r : part) {
                csv.row({r.signal, Csv::num(r.p), Csv::num(r.cost_true), Csv::num(r.cost_delta),
                         r.favors_true() ? "1" : "0", r.error});
                if (!summary.contains(r.signal)) summary[r.signal] = json::array();
                if (r.favors_true()) summary[r.signal].push_back(r.p);
            }
        csv.save(rc_.out_path("discriminate.csv"));

        Csv sig({"signal", "index", "sharp", "blurred"});
        for (const auto& s : signals_) {
            const auto d = penalty::discrimination_signal(s);
            const auto y = grids::convolve_valid(d.sharp, d.kernel);
            const Index off = (d.kernel.size() - 1) / 2;
            for (Index j = 0; j < d.sharp.size(); ++j) {
                const Index o = j - off;
                sig.row({s, Csv::num(static_cast<long long>(j)), Csv::num(d.sharp.values[j]),
                         o >= 0 && o < y.size() ? Csv::num(y.values[o]) : ""});
            }
        }
        sig.save(rc_.out_path("signals.csv"));
        write_json(rc_.out_path("summary.json"), {{"p_favoring_true_kernel", summary}});
        for (const auto& [name, list] : summary.items()) std::cout << name << ": true kernel favoured at p in " << list.dump() << "\n";
        return 0;
    }

private:
    std::vector<std::string> signals_{"edge", "spike", "composite"};
    double p_min_ = 0.05, p_max_ = 1.0, p_step_ = 0.05;
    double weight_ = 0.01;
    int restarts_ = 3;
};

// ---- patchmap ----

class Patchmap : public Command {
public:
    explicit Patchmap(CLI::App& app)
        : Command(app, "patchmap", "per-patch preference for the sharp over the blurred gradients") {
        seed_ = 1;
        rc_.add("input", input_, "sharp image (PGM/PNG); empty for a synthetic scene");
        rc_.add("scene", scene_, "synthetic scene when no input is given");
        rc_.add("size", size_, "synthetic scene side");
        rc_.add("seed", seed_, "scene seed");
        rc_.add("kernel", kernel_, "blur kernel spec, e.g. shake:15 or line:15,30");
        rc_.add("kernel_seed", kernel_seed_, "kernel seed");
        rc_.add("patch", patch_, "odd patch side");
        rc_.add("ps", ps_, "comma-separated l_p exponents");
        rc_.add("rho", rho_, "rho of the coupled penalty map");
        rc_.add("filter", filter_, "dx or dy");
    }

    int run() override {
        start();
        if (patch_ < 1 || patch_ % 2 == 0) throw UsageError("--patch must be odd");
        if (filter_ != "dx" && filter_ != "dy") throw UsageError("--filter must be dx or dy");
        if (!(rho_ > 0.0)) throw UsageError("--rho must be > 0");
        const Kernel k = pipeline::make_kernel(kernel_spec(kernel_), kernel_seed_);
        Image sharp;
        if (input_.empty()) {
            try {
                sharp = pipeline::synthetic_image(scene_, size_, seed_);
            } catch (const InvalidArgument& e) {
                throw UsageError(e.what());
            }
        } else {
            sharp = io::read_image(input_);
        }
        const auto g = grids::gradient_filters(sharp);
        const grids::GradientImage& x = filter_ == "dx" ? g.dx : g.dy;

        std::vector<std::string> names;
        std::vector<penalty::ScalarFn> fns;
        for (double p : ps_) {
            if (!(p > 0.0)) throw UsageError("exponents must be > 0");
            names.push_back("lp:" + Csv::num(p));
            fns.push_back(penalty::lp_penalty(p));
        }
        names.push_back("gvb:" + Csv::num(rho_));
        fns.push_back(penalty::gvb_penalty(rho_));
        std::vector<penalty::PreferenceMap> maps(fns.size());
        pipeline::parallel_for(fns.size(), [&](std::size_t i) { maps[i] = penalty::patch_preference_map(x, k, fns[i], patch_); });

        // reference for the agreement column: the smallest exponent
        std::size_t ref = 0;
        for (std::size_t i = 0; i < ps_.size(); ++i)
            if (ps_[i] < ps_[ref]) ref = i;
        Csv csv({"penalty", "favored_fraction", "agreement_with_smallest_p"});
        json summary = json::object();
        for (std::size_t i = 0; i < maps.size(); ++i) {
            const double agree = ps_.empty() ? std::numeric_limits<double>::quiet_NaN() : penalty::map_agreement(maps[i], maps[ref]);
            csv.row({names[i], Csv::num(maps[i].favored_fraction()), Csv::num(agree)});
            summary[names[i]] = {{"favored_fraction", maps[i].favored_fraction()}, {"agreement_with_smallest_p", agree}};
            std::string file = "map_" + names[i] + ".pgm";
            std::replace(file.begin(), file.end(), ':', '_');
            io::write_image(rc_.out_path(file), maps[i].pixels);
            std::printf("%-12s favored %.4f  agreement %.4f\n", names[i].c_str(), maps[i].favored_fraction(), agree);
        }
        csv.save(rc_.out_path("patchmap.csv"));
        io::write_image(rc_.out_path("sharp.pgm"), sharp);
        write_json(rc_.out_path("summary.json"), summary);
        return 0;
    }

private:
    std::string input_;
    std::string scene_ = "leaves";
    Index size_ = 255;
    std::string kernel_ = "shake:15";
    std::uint64_t kernel_seed_ = 3;
    Index patch_ = 15;
    std::vector<double> ps_{0.5, 0.3, 0.1};
    double rho_ = 1e-4;
    std::string filter_ = "dx";
};

// ---- verify ----

class Verify : public Command {
public:
    explicit Verify(CLI::App& app) : Command(app, "verify", "run the penalty and solver property checks") {
        rc_.add("only", only_, "run checks whose name or group contains this text");
        rc_.add("json", json_, "also write verify.json");
        rc_.add("seed", seed_, "unused (fixed instances); recorded for the manifest");
    }

    int run() override {
        start();
        const auto results = verify::run_checks(only_);
        if (results.empty()) throw UsageError("no check matches '" + only_ + "'");
        int failed = 0;
        json report = json::array();
        for (const auto& r : results) {
            std::printf("%-28s %-10s %s  %s\n", r.name.c_str(), r.group.c_str(), r.passed ? "PASS" : "FAIL",
                        r.detail.c_str());
            failed += !r.passed;
            report.push_back({{"name", r.name}, {"group", r.group}, {"passed", r.passed}, {"detail", r.detail}});
        }
        std::printf("%zu checks, %d failed\n", results.size(), failed);
        if (json_) write_json(rc_.out_path("verify.json"), report);
        return failed ? 1 : 0;
    }

private:
    std::string only_;
    bool json_ = false;
};

// ---- bench ----

class Bench : public Command {
public:
    explicit Bench(CLI::App& app)
        : Command(app, "bench", "blind deblurring benchmark, VB against the MAP baseline") {
        rc_.add("cases", cases_, "benchmark manifest: JSON list of {image, kernel, noise_db, seed}; empty for synthetic");
        rc_.add("scenes", scenes_, "synthetic scenes");
        rc_.add("kernels", kernels_, "kernel specs");
        rc_.add("noise_db", noise_db_, "SNR levels in dB");
        rc_.add("size", size_, "synthetic image side");
        rc_.add("seed", seed_, "base seed: scene, kernel and noise seeds are offset from it per case");
        solver_.add_to(rc_, false);
        rc_.add("nb_p", nb_p_, "exponent of the non-blind gradient prior");
        rc_.add("nb_lambda", nb_lambda_, "weight of the non-blind gradient prior");
    }

    int run() override {
        start();
        pipeline::DeblurConfig base;
        base.solver = solver_.build();
        base.nb_p = nb_p_;
        base.nb_lambda = nb_lambda_;

        const auto cases = build_cases();
        struct Job {
            std::size_t c;
            solver::Mode mode;
            pipeline::CaseOutcome out;
        };
        std::vector<Job> jobs;
        for (std::size_t c = 0; c < cases.size(); ++c)
            for (auto m : {solver::Mode::vb, solver::Mode::map}) jobs.push_back({c, m, {}});
        pipeline::parallel_for(jobs.size(), [&](std::size_t i) {
            auto cfg = base;
            cfg.solver.mode = jobs[i].mode;
            jobs[i].out = pipeline::evaluate_case(cases[jobs[i].c], cfg);
        });

        Csv csv({"case", "mode", "error_ratio", "kernel_tv", "iterations"});
        json results = json::array(), timings = json::array();
        std::vector<double> ratios[2];
        for (const auto& j : jobs) {
            const auto& name = cases[j.c].name;
            const std::string mode = to_string(j.mode);
            csv.row({name, mode, Csv::num(j.out.error_ratio), Csv::num(j.out.kernel_tv),
                     Csv::num(static_cast<long long>(j.out.iterations))});
            results.push_back({{"case", name}, {"mode", mode}, {"error_ratio", j.out.error_ratio},
                               {"kernel_tv", j.out.kernel_tv}, {"iterations", j.out.iterations}});
            timings.push_back({{"case", name}, {"mode", mode}, {"estimate_seconds", j.out.estimate_seconds},
                               {"restore_seconds", j.out.restore_seconds}});
            ratios[j.mode == solver::Mode::vb ? 0 : 1].push_back(j.out.error_ratio);
            std::string stem = name + "_" + mode;
            std::replace(stem.begin(), stem.end(), ':', '_');
            std::replace(stem.begin(), stem.end(), ',', '_');
            io::write_kernel(rc_.out_path("kernels/" + stem + ".txt"), j.out.kernel);
        }
        csv.save(rc_.out_path("bench.csv"));
        write_json(rc_.out_path("cases.json"), results);
        write_json(rc_.out_path("timings.json"), timings);

        const std::vector<double> edges{1.0, 1.5, 2.0, 2.5, 3.0, 4.0};
        Csv hist({"mode", "bin_low", "bin_high", "count", "cumulative"});
        json summary;
        for (int m = 0; m < 2; ++m) {
            const std::string mode = m == 0 ? "vb" : "map";
            const auto h = pipeline::ratio_histogram(ratios[m], edges);
            for (std::size_t b = 0; b < h.counts.size(); ++b)
                hist.row({mode, Csv::num(b == 0 ? 0.0 : h.edges[b]),
                          b + 1 < h.edges.size() ? Csv::num(h.edges[b + 1]) : "inf",
                          Csv::num(static_cast<long long>(h.counts[b])), Csv::num(h.cumulative[b])});
            const auto below2 = std::count_if(ratios[m].begin(), ratios[m].end(), [](double r) { return r < 2.0; });
            summary[mode] = {{"median_error_ratio", median(ratios[m])},
                             {"below_2", below2},
                             {"cases", ratios[m].size()}};
            std::printf("%-4s median error ratio %.3f, below 2 on %ld/%zu\n", mode.c_str(), median(ratios[m]),
                        static_cast<long>(below2), ratios[m].size());
        }
        hist.save(rc_.out_path("histogram.csv"));
        write_json(rc_.out_path("summary.json"), summary);
        return 0;
    }

private:
    std::vector<pipeline::BenchmarkCase> build_cases() const {
        std::vector<pipeline::BenchmarkCase> out;
        if (!cases_.empty()) {
            json list;
            try {
                list = json::parse(io::read_text(cases_));
            } catch (const json::exception& e) {
                throw UsageError("cases '" + cases_ + "': " + e.what());
            }
            if (!list.is_array()) throw UsageError("cases file must hold a JSON list");
            for (std::size_t i = 0; i < list.size(); ++i) {
                const auto& c = list[i];
                for (const auto& [key, v] : c.items())
                    if (key != "image" && key != "kernel" && key != "noise_db" && key != "seed")
                        throw UsageError("cases entry " + std::to_string(i) + ": unknown key '" + key + "'");
                std::string image, kernel;
                double db = std::numeric_limits<double>::infinity();
                std::uint64_t seed = seed_ + i;
                try {
                    from_json_value(c.at("image"), image);
                    from_json_value(c.at("kernel"), kernel);
                    if (c.contains("noise_db")) from_json_value(c["noise_db"], db);
                    if (c.contains("seed")) from_json_value(c["seed"], seed);
                } catch (const std::exception& e) {
                    throw UsageError("cases entry " + std::to_string(i) + ": " + e.what());
                }
                fs::path path = image;
                if (path.is_relative()) path = fs::path(cases_).parent_path() / path;
                const Image sharp = io::read_image(path);
                auto bc = pipeline::synth_case(sharp, pipeline::make_kernel(kernel_spec(kernel), seed), db, seed);
                bc.name = fs::path(image).stem().string() + "/" + kernel + "/" + Csv::num(db);
                out.push_back(std::move(bc));
            }
            return out;
        }
        std::size_t idx = 0;
        for (const auto& scene : scenes_)
            for (const auto& kspec : kernels_)
                for (double db : noise_db_) {
                    Image sharp;
                    try {
                        sharp = pipeline::synthetic_image(scene, size_, seed_ + 100 + idx);
                    } catch (const InvalidArgument& e) {
                        throw UsageError(e.what());
                    }
                    const Kernel k = pipeline::make_kernel(kernel_spec(kspec), seed_ + 200 + idx);
                    auto bc = pipeline::synth_case(sharp, k, db, seed_ + 300 + idx);
                    bc.name = scene + "/" + kspec + "/" + Csv::num(db);
                    out.push_back(std::move(bc));
                    ++idx;
                }
        return out;
    }

    std::string cases_;
    std::vector<std::string> scenes_{"shapes", "bars", "blocks"};
    std::vector<std::string> kernels_{"line:7,30", "shake:7"};
    std::vector<double> noise_db_{40.0, 30.0};
    Index size_ = 64;
    SolverFlags solver_;
    double nb_p_ = 0.8, nb_lambda_ = 2e-3;
};

}  // namespace

std::vector<std::unique_ptr<Command>> make_commands(CLI::App& app) {
    std::vector<std::unique_ptr<Command>> cmds;
    cmds.push_back(std::make_unique<Deblur>(app));
    cmds.push_back(std::make_unique<Bench1d>(app));
    cmds.push_back(std::make_unique<Penalty>(app));
    cmds.push_back(std::make_unique<Discriminate>(app));
    cmds.push_back(std::make_unique<Patchmap>(app));
    cmds.push_back(std::make_unique<Verify>(app));
    cmds.push_back(std::make_unique<Bench>(app));
    return cmds;
}

}  // namespace vbd::cli
