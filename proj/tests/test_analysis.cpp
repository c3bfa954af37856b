#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ghoststat/analysis.hpp"
#include "ghoststat/errors.hpp"
#include "ghoststat/estimators.hpp"
#include "ghoststat/forward_model.hpp"
#include "ghoststat/image.hpp"
#include "ghoststat/theory.hpp"

using namespace ghoststat;
namespace fs = std::filesystem;

namespace {

double normal_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }

// Quantile by bisection, independent of everything in the library.
double normal_quantile(double p) {
    double lo = -10.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Box-Muller over raw 64-bit draws: deterministic across standard library
// implementations, unlike std::normal_distribution.
double gaussian_draw(std::mt19937_64& rng) {
    const double u1 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

TheoryPrediction hand_theory(std::vector<LevelPrediction> levels, double C1, double C2,
                             double C3, double C4, std::size_t T) {
    TheoryPrediction th;
    th.estimator = Estimator::DeltaG2;
    th.constants.C1 = C1;
    th.constants.C2 = C2;
    th.constants.has_C3 = true;
    th.constants.C3_raw = C3;
    th.constants.C4 = C4;
    th.levels = std::move(levels);
    th.T = T;
    return th;
}

RegionStats stat_point(double level, double mean) {
    RegionStats st;
    st.level = level;
    st.N = 1;
    st.mean = mean;
    return st;
}

fs::path temp_dir() {
    fs::path dir = fs::temp_directory_path() / "ghoststat-test-analysis";
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE("analysis") {

TEST_CASE("KS distance of exact quantiles is half a step") {
    // Samples at the (i+1/2)/N quantiles leave the ECDF straddling the CDF
    // symmetrically, so the sup distance is exactly 0.5/N.
    const std::size_t N = 100;
    const double mu = 3.0, sigma = 2.0;
    std::vector<double> samples(N);
    for (std::size_t i = 0; i < N; ++i)
        samples[i] = mu + sigma * normal_quantile((double(i) + 0.5) / double(N));
    const double d = ks_statistic(samples, mu, sigma * sigma);
    CHECK(std::abs(d - 0.5 / double(N)) < 1e-6);
}

TEST_CASE("KS distance saturates for degenerate and shifted samples") {
    std::vector<double> equal(16, 1.0);
    CHECK(ks_statistic(equal, 1.0, 1.0) >= 0.5);

    // A one-sigma location error must exceed the 5% threshold at N = 1000.
    std::mt19937_64 rng(7);
    std::vector<double> shifted(1000);
    for (double& v : shifted) v = 1.0 + gaussian_draw(rng);
    CHECK(ks_statistic(shifted, 0.0, 1.0) > 1.36 / std::sqrt(1000.0));
}

TEST_CASE("KS statistic input validation") {
    std::vector<double> few(7, 0.0);
    CHECK_THROWS_AS(ks_statistic(few, 0.0, 1.0), ConfigError);
    std::vector<double> enough(8, 0.0);
    CHECK_THROWS_AS(ks_statistic(enough, 0.0, 0.0), DegenerateError);
    CHECK_THROWS_AS(ks_statistic(enough, 0.0, -1.0), DegenerateError);
}

TEST_CASE("KS threshold is calibrated near the five percent level") {
    // 200 independent correct-null trials at N = 10000; the deterministic
    // sample path yields a rejection count near 200 * 0.05 = 10.
    std::mt19937_64 rng(12345);
    const std::size_t trials = 200, N = 10000;
    const double threshold = 1.36 / std::sqrt(double(N));
    std::size_t rejected = 0;
    std::vector<double> samples(N);
    for (std::size_t t = 0; t < trials; ++t) {
        for (double& v : samples) v = gaussian_draw(rng);
        if (ks_statistic(samples, 0.0, 1.0) > threshold) ++rejected;
    }
    CHECK(rejected >= 1);
    CHECK(rejected <= 20);
}

TEST_CASE("region statistics match brute-force sums") {
    std::mt19937_64 rng(99);
    Reconstruction recon;
    recon.values.resize(60);
    for (double& v : recon.values) v = gaussian_draw(rng);

    GrayRegionIndex regions;
    regions.levels = {0.0, 0.5, 1.0};
    regions.members.resize(3);
    for (std::size_t n = 0; n < recon.values.size(); ++n)
        regions.members[n % 3].push_back(n);

    auto stats = region_statistics(recon, regions, nullptr);
    REQUIRE(stats.size() == 3);
    for (std::size_t r = 0; r < 3; ++r) {
        const auto& members = regions.members[r];
        double sum = 0.0;
        for (std::size_t n : members) sum += recon.values[n];
        const double mean = sum / double(members.size());
        double ss = 0.0;
        for (std::size_t n : members) ss += (recon.values[n] - mean) * (recon.values[n] - mean);
        const double var = ss / double(members.size() - 1);
        CHECK(stats[r].level == regions.levels[r]);
        CHECK(stats[r].N == members.size());
        CHECK(std::abs(stats[r].mean - mean) < 1e-12);
        REQUIRE(stats[r].variance.has_value());
        CHECK(std::abs(*stats[r].variance - var) < 1e-12);
        CHECK(!stats[r].theory_mu.has_value());
        CHECK(!stats[r].ks.has_value());
        CHECK(stats[r].ks_threshold ==
              doctest::Approx(1.36 / std::sqrt(double(members.size()))).epsilon(1e-12));
    }

    // A single-pixel region has no variance estimate.
    GrayRegionIndex solo;
    solo.levels = {0.0, 1.0};
    solo.members = {{0}, {}};
    for (std::size_t n = 1; n < recon.values.size(); ++n) solo.members[1].push_back(n);
    auto sstats = region_statistics(recon, solo, nullptr);
    CHECK(!sstats[0].variance.has_value());
    CHECK(sstats[1].variance.has_value());

    GrayRegionIndex short_index;
    short_index.levels = {0.0};
    short_index.members = {{0, 1, 2}};
    CHECK_THROWS_AS(region_statistics(recon, short_index, nullptr), ConfigError);
}

TEST_CASE("histogram covers five sigma with mass-preserving edge bins") {
    Reconstruction recon;
    recon.values = {-10.0, -1.0, -0.5, 0.0, 0.1, 0.2, 0.3, 0.5, 1.0, 10.0};
    GrayRegionIndex regions;
    regions.levels = {0.7};
    regions.members = {{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};

    TheoryPrediction th =
        hand_theory({LevelPrediction{0.7, 0.0, 1.0}}, 1.0, 0.0, 0.5, 0.25, 100);
    auto stats = region_statistics(recon, regions, &th);
    REQUIRE(stats.size() == 1);
    const RegionStats& st = stats[0];

    REQUIRE(st.bin_edges.size() == kHistogramBins + 1);
    CHECK(st.bin_edges.front() == doctest::Approx(-5.0).epsilon(1e-12));
    CHECK(st.bin_edges.back() == doctest::Approx(5.0).epsilon(1e-12));
    REQUIRE(st.probs.size() == kHistogramBins);
    double mass = 0.0;
    for (double p : st.probs) mass += p;
    CHECK(std::abs(mass - 1.0) < 1e-12);
    CHECK(st.clamped_low == 1);  // the -10 sample
    CHECK(st.clamped_high == 1); // the +10 sample
    CHECK(st.probs.front() >= 0.1);
    CHECK(st.probs.back() >= 0.1);
    CHECK(st.theory_mu.has_value());
    CHECK(st.theory_sigma2.has_value());
    REQUIRE(st.ks.has_value()); // N = 10 >= 8 with a full prediction
    CHECK(*st.ks > 0.0);
}

TEST_CASE("zero-spread region degenerates to a single bin") {
    Reconstruction recon;
    recon.values = {2.0, 2.0, 2.0};
    GrayRegionIndex regions;
    regions.levels = {1.0};
    regions.members = {{0, 1, 2}};
    auto stats = region_statistics(recon, regions, nullptr);
    CHECK(stats[0].probs == std::vector<double>{1.0});
    CHECK(stats[0].bin_edges.size() == 2);
    CHECK(!stats[0].ks.has_value());
}

TEST_CASE("perfect line fits exactly for every estimator mapping") {
    TheoryPrediction th = hand_theory({}, 2.0, 3.0, 0.5, 0.25, 100);
    std::vector<RegionStats> pts;
    for (double d : {0.0, 0.4, 0.7, 1.0}) pts.push_back(stat_point(d, 3.0 + 2.0 * d));

    LinearityReport g2 = linearity_fit(pts, Estimator::G2, th);
    CHECK(std::abs(g2.slope - 2.0) < 1e-12);
    CHECK(std::abs(g2.intercept - 3.0) < 1e-12);
    CHECK(g2.r2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g2.theory_slope == 2.0);
    CHECK(g2.theory_intercept == 3.0);
    CHECK(g2.slope_rel_err < 1e-12);
    CHECK(g2.intercept_abs_err < 1e-12);
    CHECK(!g2.degenerate);
    CHECK(g2.points.size() == 4);

    LinearityReport dg2 = linearity_fit(pts, Estimator::DeltaG2, th);
    CHECK(dg2.theory_slope == doctest::Approx(0.99 * 2.0).epsilon(1e-15));
    CHECK(dg2.theory_intercept == 0.0);

    LinearityReport ng2 = linearity_fit(pts, Estimator::NormalizedG2, th);
    CHECK(ng2.theory_slope == 0.5);
    CHECK(ng2.theory_intercept == 1.0);

    LinearityReport dgi = linearity_fit(pts, Estimator::DGI, th);
    CHECK(dgi.theory_slope == 2.0);
    CHECK(dgi.theory_intercept == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("noisy fit reproduces hand least squares") {
    TheoryPrediction th = hand_theory({}, 2.0, 3.0, 0.5, 0.25, 100);
    const std::vector<double> xs = {0.0, 0.4, 0.7, 1.0};
    const std::vector<double> ys = {3.1, 3.7, 4.5, 4.9};
    std::vector<RegionStats> pts;
    for (std::size_t i = 0; i < xs.size(); ++i) pts.push_back(stat_point(xs[i], ys[i]));

    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    const double n = double(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / n, my = sy / n;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    const double slope = sxy / sxx, intercept = my - slope * mx;
    double ss_res = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - intercept - slope * xs[i];
        ss_res += e * e;
    }
    LinearityReport fit = linearity_fit(pts, Estimator::G2, th);
    CHECK(std::abs(fit.slope - slope) < 1e-12);
    CHECK(std::abs(fit.intercept - intercept) < 1e-12);
    CHECK(std::abs(fit.r2 - (1.0 - ss_res / syy)) < 1e-12);
    CHECK(fit.r2 < 1.0);
}

TEST_CASE("degenerate fits are flagged or rejected") {
    TheoryPrediction th = hand_theory({}, 2.0, 3.0, 0.5, 0.25, 100);

    // One distinct gray level cannot support a line.
    std::vector<RegionStats> single = {stat_point(0.5, 1.0), stat_point(0.5, 1.2)};
    CHECK_THROWS_AS(linearity_fit(single, Estimator::G2, th), DegenerateError);

    // Identical means: slope 0 fits perfectly but carries no information.
    std::vector<RegionStats> flat;
    for (double d : {0.0, 0.5, 1.0}) flat.push_back(stat_point(d, 4.0));
    LinearityReport ffit = linearity_fit(flat, Estimator::G2, th);
    CHECK(ffit.degenerate);
    CHECK(ffit.slope == 0.0);
    CHECK(ffit.r2 == 1.0);

    // Zero predicted slope: relative error is undefined.
    TheoryPrediction zero = hand_theory({}, 0.0, 3.0, 0.5, 0.25, 100);
    std::vector<RegionStats> pts;
    for (double d : {0.0, 0.5, 1.0}) pts.push_back(stat_point(d, 3.0 + d));
    LinearityReport zfit = linearity_fit(pts, Estimator::DeltaG2, zero);
    CHECK(zfit.degenerate);
    CHECK(std::isnan(zfit.slope_rel_err));
}

TEST_CASE("CSV rows pair empirical and gaussian bin masses") {
    Reconstruction recon;
    std::mt19937_64 rng(5);
    recon.values.resize(64);
    for (double& v : recon.values) v = gaussian_draw(rng);
    GrayRegionIndex regions;
    regions.levels = {0.7};
    regions.members.resize(1);
    for (std::size_t n = 0; n < recon.values.size(); ++n) regions.members[0].push_back(n);
    TheoryPrediction th =
        hand_theory({LevelPrediction{0.7, 0.0, 1.0}}, 1.0, 0.0, 0.5, 0.25, 100);
    auto stats = region_statistics(recon, regions, &th);

    const std::string path = (temp_dir() / "bins.csv").string();
    write_region_stats_csv(path, stats);

    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "level,bin_center,empirical_prob,theoretical_prob");

    std::string line;
    std::size_t rows = 0;
    double emp_mass = 0.0, theo_mass = 0.0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        double cols[4];
        for (int c = 0; c < 4; ++c) {
            REQUIRE(std::getline(ss, field, ','));
            cols[c] = std::stod(field);
        }
        CHECK(cols[0] == 0.7);
        emp_mass += cols[2];
        theo_mass += cols[3];
        ++rows;
    }
    CHECK(rows == kHistogramBins);
    CHECK(std::abs(emp_mass - 1.0) < 1e-9);
    CHECK(std::abs(theo_mass - 1.0) < 1e-9); // edge bins absorb the tails
}

TEST_CASE("analysis JSON records stats, fits and null markers") {
    Reconstruction recon;
    recon.values = {1.0, 2.0, 3.0, 4.0};
    GrayRegionIndex regions;
    regions.levels = {0.0, 1.0};
    regions.members = {{0}, {1, 2, 3}};
    auto stats = region_statistics(recon, regions, nullptr);

    TheoryPrediction zero = hand_theory({}, 0.0, 3.0, 0.5, 0.25, 100);
    std::vector<RegionStats> pts;
    for (double d : {0.0, 0.5, 1.0}) pts.push_back(stat_point(d, 3.0 + d));
    std::vector<LinearityReport> fits = {linearity_fit(pts, Estimator::DeltaG2, zero)};

    const std::string path = (temp_dir() / "analysis.json").string();
    write_analysis_json(path, stats, fits);

    std::ifstream in(path);
    REQUIRE(in.good());
    nlohmann::json j = nlohmann::json::parse(in);
    CHECK(j["format"] == "ghoststat-analysis");
    REQUIRE(j["regions"].size() == 2);
    CHECK(j["regions"][0]["pixels"] == 1);
    CHECK(j["regions"][0]["variance"].is_null()); // N = 1
    CHECK(j["regions"][0]["theory_mu"].is_null());
    CHECK(j["regions"][0]["ks"].is_null());
    CHECK(j["regions"][1]["variance"].is_number());
    REQUIRE(j["linearity"].size() == 1);
    CHECK(j["linearity"][0]["estimator"] == "delta-g2");
    CHECK(j["linearity"][0]["slope_rel_err"].is_null()); // zero predicted slope
    CHECK(j["linearity"][0]["degenerate"] == true);
    CHECK(j["linearity"][0]["points"].size() == 3);
}

TEST_CASE("end-to-end region statistics on a simulated run") {
    GrayImage card = make_test_card(16, 16, {0.0, 0.4, 0.7, 1.0}, CardLayout::NestedRects);
    GrayRegionIndex regions = build_region_index(card);
    DistributionSpec dist = DistributionSpec::uniform(0.1, 1.0);
    SeedRecipe recipe{61};
    const std::size_t T = 4000;
    MeasurementRun run = simulate_run(card, dist, recipe, T, 1.0, NoiseModel::none());
    Reconstruction recon = reconstruct_delta_g2(run, TransformSpec::identity());

    MomentSet m = compute_moments(dist, TransformSpec::identity());
    TheoryPrediction th = predict(Estimator::DeltaG2, m, card, regions, 1.0, T,
                                  NoiseModel::none());
    auto stats = region_statistics(recon, regions, &th);
    REQUIRE(stats.size() == 4);
    for (const auto& st : stats) {
        REQUIRE(st.theory_mu.has_value());
        REQUIRE(st.theory_sigma2.has_value());
        // Region means sit within five standard errors of the prediction.
        const double se = std::sqrt(*st.theory_sigma2 / double(st.N));
        CHECK(std::abs(st.mean - *st.theory_mu) < 5.0 * se);
    }
    LinearityReport fit = linearity_fit(stats, Estimator::DeltaG2, th);
    CHECK(fit.r2 > 0.98);
    CHECK(fit.slope_rel_err < 0.2);
}

} // TEST_SUITE
