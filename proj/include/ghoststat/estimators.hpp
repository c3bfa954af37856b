#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ghoststat/compensated.hpp"
#include "ghoststat/forward_model.hpp"
#include "ghoststat/stochastic.hpp"

namespace ghoststat {

enum class Estimator { G2, DeltaG2, NormalizedG2, DGI };

// Streaming sums for one (run, transform) pair. Everything the four
// estimators need is a function of these five sums plus the frame count,
// so one pass over the patterns serves all of them.
struct CorrAccumulator {
    std::size_t M = 0;
    std::size_t count = 0;
    CompensatedSum sum_S;  // sum_t S_t
    CompensatedSum sum_SR; // sum_t S_Rt
    std::vector<CompensatedSum> sum_F;   // per pixel: sum_t F_tn
    std::vector<CompensatedSum> sum_SF;  // per pixel: sum_t S_t F_tn
    std::vector<CompensatedSum> sum_SRF; // per pixel: sum_t S_Rt F_tn

    CorrAccumulator() = default;
    explicit CorrAccumulator(std::size_t pixels) { init(pixels); }
    void init(std::size_t pixels);

    void add_frame(double S, double SR, const double* F);

    // Other must cover a disjoint frame range of the same geometry.
    void merge(const CorrAccumulator& other);
};

struct Reconstruction {
    Estimator estimator = Estimator::G2;
    TransformSpec transform;
    std::vector<double> values;
    std::size_t T = 0;
};

// One pass over the run's frames, filling one accumulator per transform.
// Frames are regenerated from the recipe (or read from the stack); S_t
// comes from the recorded buckets. Workers own disjoint contiguous frame
// ranges and are merged in worker order, so a fixed thread count is
// bit-reproducible and different thread counts agree to ~1e-9 relative.
std::vector<CorrAccumulator> accumulate_run(const MeasurementRun& run,
                                            const std::vector<TransformSpec>& transforms,
                                            int threads = 1);

// Simulation and accumulation fused into one sweep: each frame is drawn
// once, its bucket recorded, and all transforms accumulated. Bit-identical
// to simulate_run followed by accumulate_run; repeated-run protocols use
// it to halve pattern generation.
MeasurementRun simulate_and_accumulate(const GrayImage& image, const DistributionSpec& dist,
                                       const SeedRecipe& recipe, std::size_t T, double gamma,
                                       const NoiseModel& noise,
                                       const std::vector<TransformSpec>& transforms,
                                       std::vector<CorrAccumulator>& accs_out,
                                       int threads = 1);

// Centered second pass for several transforms at once, reusing the means
// held by finished first-pass accumulators.
std::vector<Reconstruction> centered_delta_g2(const MeasurementRun& run,
                                              const std::vector<TransformSpec>& transforms,
                                              const std::vector<CorrAccumulator>& accs,
                                              int threads = 1);

// Estimator value per pixel from finished sums.
Reconstruction extract_reconstruction(Estimator est, const CorrAccumulator& acc,
                                      const TransformSpec& transform);

// values[n] = <S F_n>
Reconstruction reconstruct_g2(const MeasurementRun& run, const TransformSpec& transform,
                              int threads = 1);
// values[n] = <S F_n> - <S><F_n>
Reconstruction reconstruct_delta_g2(const MeasurementRun& run, const TransformSpec& transform,
                                    int threads = 1);
// Two-pass <(S - <S>)(F_n - <F_n>)>; algebraically equal to the one-pass
// form, kept as a cross-check of the accumulation.
Reconstruction reconstruct_delta_g2_centered(const MeasurementRun& run,
                                             const TransformSpec& transform, int threads = 1);
// values[n] = <S F_n> / (<S><F_n>)
Reconstruction reconstruct_normalized_g2(const MeasurementRun& run,
                                         const TransformSpec& transform, int threads = 1);
// values[n] = <S F_n> - (<S>/<S_R>) <S_R F_n>
Reconstruction reconstruct_dgi(const MeasurementRun& run, const TransformSpec& transform,
                               int threads = 1);

// prefix.pgm (min-max normalized, bounds recorded in a header comment)
// plus prefix.f64 sidecar holding the raw values as a one-frame stack.
void save_reconstruction(const std::string& prefix, const Reconstruction& recon,
                         std::size_t width, std::size_t height);

const char* to_string(Estimator est);
Estimator estimator_from_string(const std::string& name);

} // namespace ghoststat
