#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "ghoststat/errors.hpp"
#include "ghoststat/forward_model.hpp"
#include "ghoststat/image.hpp"
#include "ghoststat/io.hpp"
#include "ghoststat/stochastic.hpp"

using namespace ghoststat;
namespace fs = std::filesystem;

namespace {

GrayImage tiny_image(std::vector<double> values, std::size_t w, std::size_t h) {
    GrayImage img;
    img.width = w;
    img.height = h;
    img.values = std::move(values);
    return img;
}

fs::path temp_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "ghoststat-test-fm" / name;
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE("forward-model") {

TEST_CASE("bucket signal arithmetic") {
    PatternFrame frame;

    GrayImage opaque = tiny_image({0.0, 0.0}, 2, 1);
    frame.values = {0.9, 0.4};
    CHECK(bucket_signal(opaque, frame, 1.0) == 0.0);

    GrayImage open = tiny_image({1.0, 1.0}, 2, 1);
    frame.values = {0.2, 0.3};
    CHECK(bucket_signal(open, frame, 2.0) == doctest::Approx(1.0).epsilon(1e-15));

    GrayImage two = tiny_image({0.4, 0.7}, 2, 1);
    frame.values = {1.0, 1.0};
    CHECK(bucket_signal(two, frame, 1.0) == doctest::Approx(1.1).epsilon(1e-15));

    frame.values = {1.0};
    CHECK_THROWS_AS(bucket_signal(two, frame, 1.0), ConfigError);
}

TEST_CASE("reference bucket sums the frame") {
    PatternFrame frame;
    frame.values.assign(37, 1.0);
    CHECK(reference_bucket(frame) == 37.0);
    frame.values = {0.1, 0.9};
    CHECK(reference_bucket(frame) == doctest::Approx(1.0).epsilon(1e-15));
    frame.values = {0.0, 0.0, 0.0};
    CHECK(reference_bucket(frame) == 0.0);
}

TEST_CASE("bucket signal is linear in the frame") {
    GrayImage img = make_test_card(8, 8, {0.0, 0.4, 0.7, 1.0}, CardLayout::NestedRects);
    SeedRecipe recipe{5};
    DistributionSpec dist = DistributionSpec::uniform(0.1, 1.0);
    PatternFrame f1 = sample_pattern(dist, img.pixel_count(), 0, recipe);
    PatternFrame f2 = sample_pattern(dist, img.pixel_count(), 1, recipe);

    const double a = 2.25, b = -0.5;
    PatternFrame combo;
    combo.values.resize(f1.values.size());
    for (std::size_t i = 0; i < combo.values.size(); ++i)
        combo.values[i] = a * f1.values[i] + b * f2.values[i];

    const double lhs = bucket_signal(img, combo, 1.7);
    const double rhs = a * bucket_signal(img, f1, 1.7) + b * bucket_signal(img, f2, 1.7);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
}

TEST_CASE("bucket decomposes into rest-of-image plus the pixel term") {
    GrayImage img = make_test_card(8, 8, {0.2, 0.5, 0.8, 1.0}, CardLayout::NestedRects);
    SeedRecipe recipe{6};
    DistributionSpec dist = DistributionSpec::uniform(0.1, 1.0);
    PatternFrame frame = sample_pattern(dist, img.pixel_count(), 3, recipe);
    const double gamma = 2.0;
    const double full = bucket_signal(img, frame, gamma);

    for (std::size_t n : {std::size_t{0}, std::size_t{31}, std::size_t{63}}) {
        GrayImage zeroed = img;
        zeroed.values[n] = 0.0;
        const double rest = bucket_signal(zeroed, frame, gamma);
        const double pixel_term = gamma * img.values[n] * frame.values[n];
        CHECK(full - pixel_term == doctest::Approx(rest).epsilon(1e-12));
    }
}

TEST_CASE("noiseless bucket mean approaches gamma * sum(d) * E_I") {
    GrayImage img = make_test_card(8, 8, {0.0, 0.4, 0.7, 1.0}, CardLayout::NestedRects);
    DistributionSpec dist = DistributionSpec::uniform(0.1, 1.0);
    SeedRecipe recipe{77};
    const std::size_t T = 20000;
    MeasurementRun run = simulate_run(img, dist, recipe, T, 1.0, NoiseModel::none());

    double s = 0;
    for (double b : run.buckets) {
        CHECK(b >= 0.0); // nonneg image, nonneg intensities, no noise
        s += b;
    }
    const double mean = s / double(T);
    const double want = img.sum() * 0.55;
    // Per-bucket variance = sum(d^2) * D_I; mean must land within 3 SE.
    const double bucket_var = img.sum_squares() * 0.0675;
    const double se = std::sqrt(bucket_var / double(T));
    CHECK(std::abs(mean - want) < 3.0 * se);
}

TEST_CASE("simulation is deterministic and thread-invariant") {
    GrayImage img = make_test_card(8, 8, {0.0, 1.0}, CardLayout::NestedRects);
    DistributionSpec dist = DistributionSpec::uniform(0.1, 1.0);
    SeedRecipe recipe{11};
    MeasurementRun a = simulate_run(img, dist, recipe, 500, 1.0, NoiseModel::none(), 1);
    MeasurementRun b = simulate_run(img, dist, recipe, 500, 1.0, NoiseModel::none(), 3);
    REQUIRE(a.buckets.size() == b.buckets.size());
    for (std::size_t t = 0; t < a.buckets.size(); ++t)
        CHECK(a.buckets[t] == b.buckets[t]);
}

TEST_CASE("zero-variance noise offsets every bucket by exactly its mean") {
    GrayImage img = make_test_card(4, 4, {0.0, 1.0}, CardLayout::NestedRects);
    DistributionSpec dist = DistributionSpec::uniform(0.1, 1.0);
    SeedRecipe recipe{12};
    const double c = 123.456;
    MeasurementRun clean = simulate_run(img, dist, recipe, 100, 1.0, NoiseModel::none());
    MeasurementRun offset =
        simulate_run(img, dist, recipe, 100, 1.0, NoiseModel::gaussian(c, 0.0));
    for (std::size_t t = 0; t < 100; ++t)
        CHECK(offset.buckets[t] == clean.buckets[t] + c); // bit-exact
}

TEST_CASE("gaussian noise sample moments match the model") {
    NoiseModel noise = NoiseModel::gaussian(2.0985e6, 1.2260e10);
    SeedRecipe recipe{314};
    const std::size_t n = 100000;
    std::vector<double> draws(n);
    for (std::size_t t = 0; t < n; ++t) draws[t] = noise.sample(recipe, t);

    const auto [mean, var] = estimate_noise_moments(draws);
    CHECK(std::abs(mean - 2.0985e6) / 2.0985e6 < 0.01);
    CHECK(std::abs(var - 1.2260e10) / 1.2260e10 < 0.03);
}

TEST_CASE("noise moment estimator basics") {
    CHECK(estimate_noise_moments({5.0, 5.0, 5.0}) ==
          std::pair<double, double>{5.0, 0.0});
    const auto [m, v] = estimate_noise_moments({0.0, 2.0});
    CHECK(m == 1.0);
    CHECK(v == 2.0); // unbiased: ((0-1)^2 + (2-1)^2) / (2-1)
    CHECK_THROWS_AS(estimate_noise_moments({1.0}), DegenerateError);
    CHECK_THROWS_AS(NoiseModel::gaussian(0.0, -1.0), ConfigError);
}

TEST_CASE("run save/load round-trip preserves everything") {
    GrayImage img = make_test_card(8, 4, {0.0, 0.5, 1.0}, CardLayout::Stripes);
    DistributionSpec dist = DistributionSpec::bernoulli(0.5, 0.0, 1.0);
    SeedRecipe recipe{2718};
    NoiseModel noise = NoiseModel::gaussian(10.0, 4.0);
    MeasurementRun run = simulate_run(img, dist, recipe, 64, 3.0, noise);

    const fs::path dir = temp_dir("roundtrip");
    save_run(dir.string(), run);
    MeasurementRun back = load_run(dir.string());

    CHECK(back.gamma == run.gamma);
    CHECK(back.T == run.T);
    CHECK(back.noise.kind == NoiseKind::Gaussian);
    CHECK(back.noise.mean_e == 10.0);
    CHECK(back.noise.var_e == 4.0);
    REQUIRE(back.buckets.size() == run.buckets.size());
    for (std::size_t t = 0; t < run.buckets.size(); ++t)
        CHECK(back.buckets[t] == run.buckets[t]); // bit-exact via raw f64 sidecar

    REQUIRE(back.image.has_value());
    CHECK(back.image->width == img.width);
    CHECK(back.image->height == img.height);
    for (std::size_t i = 0; i < img.values.size(); ++i)
        CHECK(back.image->values[i] == img.values[i]);

    // Pattern source survives: regenerated frames agree bit for bit.
    REQUIRE(back.patterns.has_distribution());
    CHECK(back.patterns.M == run.patterns.M);
    PatternFrame f0 = run.patterns.frame(7);
    PatternFrame g0 = back.patterns.frame(7);
    for (std::size_t i = 0; i < f0.values.size(); ++i)
        CHECK(f0.values[i] == g0.values[i]);

    // Loading the manifest path directly works too.
    MeasurementRun again = load_run((dir / "run.json").string());
    CHECK(again.T == run.T);
}

TEST_CASE("ingestion reads CSV buckets against a recorded stack") {
    const fs::path dir = temp_dir("ingest");

    PatternStack stack;
    stack.M = 4;
    stack.T = 3;
    stack.values = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2};
    const fs::path stack_path = dir / "patterns.gips";
    write_pattern_stack(stack_path.string(), stack);

    const fs::path csv = dir / "buckets.csv";
    {
        std::ofstream out(csv);
        out << "# dark-corrected buckets\n1.5\n\n2.5\n3.25\n";
    }

    MeasurementRun run = ingest_run(csv.string(), stack_path.string(), 2.0,
                                    NoiseModel::none());
    CHECK(run.T == 3);
    CHECK(run.gamma == 2.0);
    CHECK_FALSE(run.image.has_value());
    CHECK_FALSE(run.patterns.has_distribution());
    CHECK(run.buckets == std::vector<double>{1.5, 2.5, 3.25});
    PatternFrame f1 = run.patterns.frame(1);
    CHECK(f1.values == std::vector<double>{0.5, 0.6, 0.7, 0.8});

    // More buckets than recorded frames cannot be paired up.
    {
        std::ofstream out(csv);
        out << "1\n2\n3\n4\n";
    }
    CHECK_THROWS_AS(ingest_run(csv.string(), stack_path.string(), 1.0, NoiseModel::none()),
                    FormatError);
}

TEST_CASE("run validation catches inconsistencies") {
    GrayImage img = make_test_card(4, 4, {0.0, 1.0}, CardLayout::NestedRects);
    DistributionSpec dist = DistributionSpec::uniform(0.1, 1.0);
    SeedRecipe recipe{1};
    MeasurementRun run = simulate_run(img, dist, recipe, 16, 1.0, NoiseModel::none());
    CHECK_NOTHROW(run.validate());
    run.buckets.pop_back();
    CHECK_THROWS_AS(run.validate(), ConfigError);
}

} // TEST_SUITE
