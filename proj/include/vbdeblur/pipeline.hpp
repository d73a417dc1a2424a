#pragma once

// End-to-end blind deblurring: coarse-to-fine kernel estimation on image
// gradients, non-blind restoration in the pixel domain, synthetic test data
// and the error metrics used to compare estimates.

#include "vbdeblur/grids.hpp"
#include "vbdeblur/solver.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace vbd::pipeline {

using grids::Image;
using grids::Index;
using grids::Kernel;

// ---- synthetic data -------------------------------------------------------

enum class KernelKind { box, line, random, shake };

// "box:7", "line:9,30" (size, angle in degrees), "random:7", "shake:9".
// 1D kernels use a height of 1: "box:15x1", "random:15x1".
struct KernelSpec {
    KernelKind kind = KernelKind::box;
    grids::Shape shape{7, 7};
    double angle_deg = 0.0;
};

KernelSpec parse_kernel_spec(const std::string& text);
std::string to_string(const KernelSpec& spec);
// Nonnegative, unit-sum kernel. `random` draws i.i.d. uniform taps, `shake`
// rasterizes a seeded random-walk trajectory, `line` a centred segment.
Kernel make_kernel(const KernelSpec& spec, std::uint64_t seed);

// Test scenes, roughly in [0, 1]: piecewise-constant "shapes", "bars" and
// "blocks", and "leaves", a dead-leaves occlusion image with fine grain whose
// gradient statistics resemble a photograph.
Image synthetic_image(const std::string& scene, Index side, std::uint64_t seed);
const std::vector<std::string>& synthetic_scenes();

struct BenchmarkCase {
    std::string name;
    Image sharp;
    Kernel kernel;
    double noise_db = 0.0;         // +inf for a noiseless observation
    std::uint64_t seed = 0;
    double noise_variance = 0.0;   // var(k * x) 10^(-dB/10)
    grids::BlurredImage blurry;    // valid region of k * x plus noise
};

// Adds i.i.d. Gaussian noise of the stated SNR to the valid convolution.
BenchmarkCase synth_case(const Image& sharp, const Kernel& kernel, double noise_db, std::uint64_t seed);

struct SpikeOptions {
    Index length = 256;
    Index spikes = 12;
    Index kernel_length = 15;
    double noise_db = std::numeric_limits<double>::infinity();
};

struct SpikeCase {
    std::string kernel_name;  // "uniform" or "random"
    grids::GradientImage signal;
    Kernel kernel;
    grids::BlurredImage observation;
};

// Same spike train blurred by a uniform and by a seeded random kernel.
std::pair<SpikeCase, SpikeCase> spike_benchmark_1d(std::uint64_t seed, const SpikeOptions& options = {});

// Blind run from a uniform kernel on one spike case, with errors against the
// truth. Kernel and signal errors are l2 (signal error relative to |x|),
// both minimized over integer shifts up to 2; `support` counts
// |mu_i| > 1e-3 max |mu|.
struct SpikeRun {
    Kernel kernel;
    grids::GradientImage signal;
    double kernel_error = 0.0;
    double signal_error = 0.0;
    Index support = 0;
    int iterations = 0;
    bool converged = false;
};
SpikeRun run_spike_case(const SpikeCase& spike, const solver::SolverConfig& config, double lambda_init = 1.0);

// ---- estimation and restoration ----------------------------------------------

struct DeblurConfig {
    solver::SolverConfig solver;
    Index kernel_size = 7;       // odd
    double nb_p = 0.8;
    double nb_lambda = 2e-3;
    int nb_iterations = 15;
    bool restore = true;
};

struct LevelTrace {
    int level = 0;
    grids::Shape kernel;
    std::vector<solver::TraceRow> trace;
    bool converged = false;
};

struct DeblurResult {
    Kernel kernel;
    Image restored;                  // latent-size image, empty if restore = false
    std::vector<LevelTrace> levels;  // coarsest first
    double estimate_seconds = 0.0;
    double restore_seconds = 0.0;
};

// Solver problem for one pyramid level: horizontal and vertical gradients
// of the observation sharing one kernel support.
solver::Problem gradient_problem(const Image& pixels, grids::Shape kernel);

// Coarse-to-fine kernel estimate followed by non-blind restoration.
DeblurResult blind_deblur(const Image& blurry, const DeblurConfig& config);

// min_x |y - k * x|^2 + lambda sum |grad x|^p by IRLS, returning the latent
// (observation + kernel - 1) sized image.
Image nonblind_deconv(const Image& blurry, const Kernel& k, double p, double lambda, int iterations = 15);

// Blind estimate on a synthetic case, then restoration with the estimated
// and with the true kernel. kernel_size follows the true kernel.
struct CaseOutcome {
    Kernel kernel;
    Image restored;
    double error_ratio = 0.0;
    double kernel_tv = 0.0;
    double estimate_seconds = 0.0;
    double restore_seconds = 0.0;
    int iterations = 0;  // summed over pyramid levels
};
CaseOutcome evaluate_case(const BenchmarkCase& bc, DeblurConfig config);

// ---- metrics -------------------------------------------------------------------

// Sum of squared differences over the region [border, size - border) of
// `truth`, minimized over integer shifts of `estimate` up to max_shift.
double aligned_ssd(const Image& estimate, const Image& truth, Index border, Index max_shift);

// SSD(restored with estimate) / SSD(restored with true kernel) after cropping
// half the kernel width, each aligned to the truth by integer shifts up to
// that same margin. Throws InvalidArgument on a zero denominator.
double ssd_error_ratio(const Image& restored_est, const Image& restored_true, const Image& truth,
                       Index kernel_width);

// Kernel distances minimized over integer shifts up to max_shift (zero fill).
double kernel_tv_distance(const Kernel& estimate, const Kernel& truth, Index max_shift = 2);
double kernel_l2_distance(const Kernel& estimate, const Kernel& truth, Index max_shift = 2);

double psnr(const Image& estimate, const Image& truth, Index border = 0);

// Number of entries with |v| > threshold * max |v|.
Index count_above(const grids::Vec& v, double relative_threshold);

struct RatioHistogram {
    std::vector<double> edges;       // bin i is [edges[i], edges[i+1]), last bin open
    std::vector<std::size_t> counts;
    std::vector<double> cumulative;  // fraction of ratios < edges[i+1] (the last entry is 1)
};
RatioHistogram ratio_histogram(const std::vector<double>& ratios, const std::vector<double>& edges);

// ---- parallel execution --------------------------------------------------------

// Worker count: VBDEBLUR_THREADS if set and positive, else hardware concurrency.
unsigned worker_count();

// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions are
// rethrown (first by index) after all work stops.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned workers = worker_count());

}  // namespace vbd::pipeline
