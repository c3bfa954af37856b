#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ghoststat/image.hpp"
#include "ghoststat/io.hpp"
#include "ghoststat/stochastic.hpp"

namespace ghoststat {

enum class NoiseKind { None, Gaussian };

// Additive detector noise e on the bucket: S' = S + e. Only the first two
// moments enter the theory; the sampling law here is gaussian.
struct NoiseModel {
    NoiseKind kind = NoiseKind::None;
    double mean_e = 0.0;
    double var_e = 0.0;

    static NoiseModel none() { return {}; }
    static NoiseModel gaussian(double mean_e, double var_e);

    void validate() const;
    bool enabled() const { return kind != NoiseKind::None; }

    // Deterministic draw for frame t (stream 1 of the recipe).
    double sample(const SeedRecipe& recipe, std::size_t frame_index) const;
};

// Where reference frames come from: regenerated on demand from a seed
// recipe, or read back from a recorded stack (ingested experiments).
struct PatternSource {
    enum class Kind { Recipe, Stack };
    Kind kind = Kind::Recipe;

    // Recipe source
    DistributionSpec dist;
    SeedRecipe recipe;

    // Stack source
    std::string stack_path;
    std::shared_ptr<const PatternStack> stack;

    std::size_t M = 0;

    static PatternSource from_recipe(DistributionSpec dist, SeedRecipe recipe, std::size_t M);
    static PatternSource from_stack(const std::string& path);

    bool has_distribution() const { return kind == Kind::Recipe; }
    // Frame t into out (length M).
    void frame_into(std::size_t t, double* out) const;
    PatternFrame frame(std::size_t t) const;
};

// One acquisition: T bucket readings plus everything needed to regenerate
// or reread the reference frames that produced them.
struct MeasurementRun {
    double gamma = 1.0;
    std::size_t T = 0;
    std::vector<double> buckets;
    PatternSource patterns;
    std::optional<GrayImage> image; // absent for ingested experimental data
    NoiseModel noise;

    void validate() const;
};

// gamma * sum_m d_m * I_m for one frame.
double bucket_signal(const GrayImage& image, const PatternFrame& frame, double gamma);

// Plain frame sum, the reference arm's own bucket.
double reference_bucket(const PatternFrame& frame);

// Synthesizes T frames from (dist, recipe) and records the noisy buckets.
// Bit-identical output for equal inputs whatever `threads` is.
MeasurementRun simulate_run(const GrayImage& image, const DistributionSpec& dist,
                            const SeedRecipe& recipe, std::size_t T, double gamma,
                            const NoiseModel& noise, int threads = 1);

// Sample mean and unbiased sample variance of dark readings.
std::pair<double, double> estimate_noise_moments(const std::vector<double>& dark_buckets);

// Persistence: <dir>/run.json manifest + <dir>/buckets.f64 sidecar; the
// object (when present) is stored exactly in <dir>/object.f64 with a
// viewable <dir>/object.pgm alongside.
void save_run(const std::string& dir, const MeasurementRun& run);
MeasurementRun load_run(const std::string& dir);

// Experimental ingestion: buckets from a one-column CSV, frames from a
// recorded pattern stack. No image, no distribution metadata.
MeasurementRun ingest_run(const std::string& bucket_csv, const std::string& stack_path,
                          double gamma, const NoiseModel& noise);

const char* to_string(NoiseKind kind);

} // namespace ghoststat
