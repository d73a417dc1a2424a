#include "oracles.hpp"

#include "vbdeblur/error.hpp"
#include "vbdeblur/pipeline.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

using namespace vbd;
using namespace vbd::pipeline;
using grids::Shape;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("kernel specs") {
    const auto line = parse_kernel_spec("line:9,30");
    CHECK(line.kind == KernelKind::line);
    CHECK(line.shape == Shape{9, 9});
    CHECK(line.angle_deg == 30.0);
    CHECK(parse_kernel_spec("random:15x1").shape == Shape{15, 1});
    CHECK(to_string(parse_kernel_spec("shake:7")) == "shake:7");
    CHECK(parse_kernel_spec(to_string(line)).angle_deg == 30.0);
    for (const char* bad : {"box", "blob:7", "box:6", "box:7,10", "line:7,x", "box:0", "box:7y"})
        CHECK_THROWS_AS(parse_kernel_spec(bad), InvalidArgument);

    for (const char* s : {"box:5", "line:9,30", "line:7,0", "random:7", "shake:9", "shake:15", "random:15x1"}) {
        const Kernel k = make_kernel(parse_kernel_spec(s), 3);
        CHECK(k.values.minCoeff() >= 0.0);
        CHECK(k.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(k.values == make_kernel(parse_kernel_spec(s), 3).values);
    }
    const Kernel box = make_kernel(parse_kernel_spec("box:3"), 0);
    for (double v : box.values) CHECK(v == doctest::Approx(1.0 / 9.0));
    CHECK(make_kernel(parse_kernel_spec("shake:9"), 1).values != make_kernel(parse_kernel_spec("shake:9"), 2).values);
}

TEST_CASE("synthetic scenes") {
    for (const auto& scene : synthetic_scenes()) {
        const auto img = synthetic_image(scene, 48, 5);
        CHECK(img.shape == Shape{48, 48});
        CHECK(img.values.allFinite());
        CHECK(img.values.maxCoeff() > img.values.minCoeff());
        CHECK(img.values == synthetic_image(scene, 48, 5).values);
    }
    CHECK_THROWS_AS(synthetic_image("nothing", 48, 0), InvalidArgument);
    CHECK_THROWS_AS(synthetic_image("shapes", 4, 0), DimensionError);
}

TEST_CASE("synthetic blur and noise") {
    const auto sharp = synthetic_image("shapes", 64, 1);
    const Kernel k = make_kernel(parse_kernel_spec("box:7"), 0);
    const auto clean = synth_case(sharp, k, kInf, 9);
    CHECK(clean.noise_variance == 0.0);
    CHECK(clean.blurry.values == grids::convolve_valid(sharp, k).values);
    CHECK(clean.blurry.shape == Shape{58, 58});

    const auto noisy = synth_case(sharp, k, 40.0, 9);
    CHECK(noisy.blurry.values == synth_case(sharp, k, 40.0, 9).blurry.values);
    CHECK(noisy.blurry.values != synth_case(sharp, k, 40.0, 10).blurry.values);
    const grids::Vec e = noisy.blurry.values - clean.blurry.values;
    const double n = static_cast<double>(e.size());
    const double var = e.squaredNorm() / n - std::pow(e.sum() / n, 2);
    const grids::Vec& b = clean.blurry.values;
    const double signal = b.squaredNorm() / n - std::pow(b.sum() / n, 2);
    CHECK(noisy.noise_variance == doctest::Approx(signal * 1e-4));
    CHECK(var == doctest::Approx(noisy.noise_variance).epsilon(0.05));
}

TEST_CASE("1D spike benchmark") {
    const auto [uni, rnd] = spike_benchmark_1d(4);
    CHECK(uni.kernel_name == "uniform");
    CHECK(rnd.kernel_name == "random");
    CHECK(uni.signal.values == rnd.signal.values);
    CHECK(uni.signal.shape == Shape{256, 1});
    CHECK(uni.kernel.shape == Shape{15, 1});
    for (double v : uni.kernel.values) CHECK(v == doctest::Approx(1.0 / 15.0));
    CHECK(rnd.kernel.sum() == doctest::Approx(1.0));
    CHECK(count_above(uni.signal.values, 0.0) == 12);
    CHECK(count_above(uni.signal.values, 0.0) <= 256 / 10);
    CHECK(uni.observation.values == grids::convolve_valid(uni.signal, uni.kernel).values);

    const auto again = spike_benchmark_1d(4);
    CHECK(again.second.kernel.values == rnd.kernel.values);
    CHECK(again.first.signal.values == uni.signal.values);
    CHECK(spike_benchmark_1d(5).first.signal.values != uni.signal.values);

    SpikeOptions bad;
    bad.kernel_length = 14;
    CHECK_THROWS_AS(spike_benchmark_1d(0, bad), InvalidArgument);
    bad = SpikeOptions{};
    bad.spikes = 300;
    CHECK_THROWS_AS(spike_benchmark_1d(0, bad), InvalidArgument);
}

TEST_CASE("kernel distances and counts") {
    Kernel a(Shape{5, 1}), b(Shape{5, 1});
    a.values << 0, 0, 1, 0, 0;
    b.values << 0, 0, 0, 1, 0;
    CHECK(kernel_tv_distance(a, b) == 0.0);
    CHECK(kernel_tv_distance(a, b, 0) == doctest::Approx(1.0));
    CHECK(kernel_l2_distance(a, b, 0) == doctest::Approx(std::sqrt(2.0)));
    CHECK_THROWS_AS(kernel_tv_distance(a, Kernel(Shape{3, 1})), DimensionError);

    grids::Vec v(5);
    v << 1.0, -0.5, 1e-4, 0.0, -2.0;
    CHECK(count_above(v, 1e-3) == 3);
    CHECK(count_above(grids::Vec(), 0.1) == 0);
}

TEST_CASE("SSD error ratio") {
    const auto truth = synthetic_image("blocks", 32, 2);
    Image est = truth;
    est.values.array() += 0.1;
    Image tru = truth;
    tru.values.array() += 0.05;
    CHECK(ssd_error_ratio(est, est, truth, 7) == doctest::Approx(1.0));
    CHECK(ssd_error_ratio(est, tru, truth, 7) == doctest::Approx(4.0));
    CHECK_THROWS_AS(ssd_error_ratio(est, truth, truth, 7), InvalidArgument);
    CHECK_THROWS_AS(ssd_error_ratio(est, Image(Shape{10, 10}), truth, 7), DimensionError);

    // a shifted restoration is aligned before comparison
    Image moved(truth.shape);
    for (Index r = 0; r < 32; ++r)
        for (Index c = 0; c < 32; ++c) moved.at(r, c) = truth.at(r, std::min<Index>(c + 1, 31)) + 0.05;
    CHECK(aligned_ssd(moved, truth, 3, 3) == doctest::Approx(aligned_ssd(tru, truth, 3, 0)));
}

TEST_CASE("ratio histogram") {
    const std::vector<double> edges{1, 1.5, 2, 2.5, 3, 4};
    const auto h = ratio_histogram({0.9, 1.2, 1.5, 2.7, 10.0}, edges);
    CHECK(h.counts == std::vector<std::size_t>{2, 1, 0, 1, 0, 1});
    const std::vector<double> cum{0.4, 0.6, 0.6, 0.8, 0.8, 1.0};
    for (std::size_t i = 0; i < cum.size(); ++i) CHECK(h.cumulative[i] == doctest::Approx(cum[i]));
    CHECK(ratio_histogram({}, edges).cumulative.back() == 0.0);
    CHECK_THROWS_AS(ratio_histogram({1.0}, {2.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(ratio_histogram({1.0}, {}), InvalidArgument);
}

TEST_CASE("non-blind restoration") {
    const auto sharp = synthetic_image("shapes", 40, 3);
    // delta kernel, vanishing weight: the input comes back
    const auto same = nonblind_deconv(sharp, Kernel::delta({1, 1}), 0.8, 1e-12, 3);
    CHECK((same.values - sharp.values).cwiseAbs().maxCoeff() < 1e-5);

    const Kernel k = make_kernel(parse_kernel_spec("box:5"), 0);
    const auto bc = synth_case(sharp, k, 40.0, 4);
    const auto restored = nonblind_deconv(bc.blurry, k, 0.8, 2e-3);
    CHECK(restored.shape == sharp.shape);
    // compare to the blurry image padded back to latent size by nearest edge
    Image padded(sharp.shape);
    for (Index r = 0; r < 40; ++r)
        for (Index c = 0; c < 40; ++c)
            padded.at(r, c) = bc.blurry.at(std::clamp<Index>(r - 2, 0, 35), std::clamp<Index>(c - 2, 0, 35));
    CHECK(psnr(restored, sharp, 2) > psnr(padded, sharp, 2));

    // more regularization never fits the data better
    const auto residual = [&](double lam) {
        const auto x = nonblind_deconv(bc.blurry, k, 1.0, lam, 0);
        return (grids::convolve_valid(x, k).values - bc.blurry.values).squaredNorm();
    };
    double prev = residual(1e-4);
    for (double lam : {2e-4, 4e-4, 8e-4, 1.6e-3}) {
        const double r = residual(lam);
        CHECK(r >= prev * (1.0 - 1e-6));
        prev = r;
    }
    CHECK_THROWS_AS(nonblind_deconv(bc.blurry, k, 0.0, 1e-3), InvalidArgument);
    CHECK_THROWS_AS(nonblind_deconv(bc.blurry, k, 1.5, 1e-3), InvalidArgument);
    CHECK_THROWS_AS(nonblind_deconv(bc.blurry, k, 0.8, -1.0), InvalidArgument);
}

TEST_CASE("blind deblurring input checks") {
    DeblurConfig cfg;
    cfg.kernel_size = 6;
    CHECK_THROWS_AS(blind_deblur(synthetic_image("shapes", 64, 0), cfg), InvalidArgument);
    cfg.kernel_size = 7;
    CHECK_THROWS_AS(blind_deblur(synthetic_image("shapes", 16, 0), cfg), DimensionError);
    cfg.kernel_size = 25;
    CHECK_THROWS_AS(blind_deblur(synthetic_image("shapes", 64, 0), cfg), DimensionError);
    cfg.kernel_size = 7;
    CHECK_THROWS_AS(blind_deblur(Image(Shape{64, 64}), cfg), InvalidArgument);
}

TEST_CASE("blind deblurring of an unblurred image finds a delta") {
    DeblurConfig cfg;
    cfg.restore = false;
    const auto res = blind_deblur(synthetic_image("shapes", 64, 6), cfg);
    CHECK(res.kernel.shape == Shape{7, 7});
    CHECK(res.kernel.values.maxCoeff() >= 0.9);
    CHECK(res.restored.size() == 0);
    CHECK_FALSE(res.levels.empty());
    CHECK(res.levels.back().kernel == Shape{7, 7});
}

TEST_CASE("blind deblurring of a blurred image") {
    const auto sharp = synthetic_image("shapes", 64, 7);
    const Kernel k = make_kernel(parse_kernel_spec("line:7,30"), 0);
    const auto bc = synth_case(sharp, k, 40.0, 8);
    DeblurConfig cfg;
    const auto res = blind_deblur(bc.blurry, cfg);
    const double tv = kernel_tv_distance(res.kernel, k);
    MESSAGE("kernel TV distance " << tv);
    CHECK(tv < 0.35);
    CHECK(res.restored.shape == sharp.shape);
    CHECK(res.kernel.is_normalized(1e-9));
    const auto again = blind_deblur(bc.blurry, cfg);
    CHECK(again.kernel.values == res.kernel.values);
}

TEST_CASE("parallel execution") {
    std::atomic<int> sum{0};
    parallel_for(100, [&](std::size_t i) { sum += static_cast<int>(i); }, 4);
    CHECK(sum == 4950);
    sum = 0;
    parallel_for(10, [&](std::size_t i) { sum += static_cast<int>(i); }, 1);
    CHECK(sum == 45);

    CHECK_THROWS_WITH(parallel_for(
                          20,
                          [](std::size_t i) {
                              if (i == 7 || i == 3) throw std::runtime_error("task " + std::to_string(i));
                          },
                          4),
                      "task 3");
    CHECK(worker_count() >= 1);
}
