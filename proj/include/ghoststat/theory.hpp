#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ghoststat/estimators.hpp"
#include "ghoststat/forward_model.hpp"
#include "ghoststat/image.hpp"
#include "ghoststat/stochastic.hpp"

namespace ghoststat {

// The eight raw joint moments of (I, F) with F = f(I); everything the
// theoretical mean and variance formulas consume.
struct MomentSet {
    double E_I = 0.0;
    double E_I2 = 0.0;
    double E_F = 0.0;
    double E_F2 = 0.0;
    double E_IF = 0.0;
    double E_IF2 = 0.0;
    double E_I2F = 0.0;
    double E_I2F2 = 0.0;

    double D_I() const { return E_I2 - E_I * E_I; }
    double D_F() const { return E_F2 - E_F * E_F; }

    // Nonnegative variances and Cauchy-Schwarz, each with 1e-12 slack.
    void validate() const;
};

// Exact moments: closed form for uniform laws under identity, integer
// power, exp and log, finite sums for discrete laws; anything else goes
// through 64-node Gauss-Legendre quadrature over the support.
MomentSet compute_moments(const DistributionSpec& dist, const TransformSpec& transform);

struct TheoryConstants {
    double C1 = 0.0; // gamma * (E_IF - E_I E_F): the mean slope in d
    double C2 = 0.0; // gamma * (sum_m d_m) * E_I E_F: the mean offset
    double C4 = 0.0; // (sum_m d_m) / M: mean gray level

    bool has_C3 = false;
    double C3_raw = 0.0;
    // (E_IF - E_I E_F) / ((sum d) E_I E_F); undefined when sum d or
    // E_I E_F vanish.
    double C3() const;
};

TheoryConstants theoretical_constants(const MomentSet& moments, const GrayImage& image,
                                      double gamma);

// Mean reconstruction value at gray level d. The centered estimator's
// empirical average carries an exact (1 - 1/T) factor, applied here.
double theoretical_mean(Estimator est, double d, const TheoryConstants& constants,
                        std::size_t T);

// All intermediates of the variance assembly, reported for auditability
// and carried by the negative-variance diagnostic.
struct VarianceTerms {
    double E_Stilde = 0.0;  // mean of the bucket without pixel n (plus noise mean)
    double D_Stilde = 0.0;  // its variance (plus noise variance)
    double E_S = 0.0;
    double D_S = 0.0;
    double E_SF = 0.0;
    double E_SF2 = 0.0;
    double E_Stilde2 = 0.0;
    double E_S2F = 0.0;
    double E_S2F2 = 0.0;
    double D_SF = 0.0;
    double V = 0.0;      // D{[S - E(S)][F - E(F)]}
    double sigma2 = 0.0; // V / T

    std::string describe() const;
};

// Per-measurement variance of the centered product, assembled from the
// moment set over the bucket split S = S~ + gamma d I, then divided by T.
// Noise enters by replacing E(S~) with E(S~)+E(e) and D(S~) with
// D(S~)+D(e). Throws DegenerateError carrying the terms if cancellation
// drives the assembled variance negative.
VarianceTerms variance_terms_delta_g2(const MomentSet& moments, const GrayImage& image,
                                      double d, double gamma, std::size_t T,
                                      const NoiseModel& noise);
double theoretical_variance_delta_g2(const MomentSet& moments, const GrayImage& image,
                                     double d, double gamma, std::size_t T,
                                     const NoiseModel& noise);

struct LevelPrediction {
    double d = 0.0;
    double mu = 0.0;
    std::optional<double> sigma2; // provided for the centered estimator only
};

struct TheoryPrediction {
    Estimator estimator = Estimator::DeltaG2;
    TheoryConstants constants;
    std::vector<LevelPrediction> levels;
    std::size_t T = 0;
    double gamma = 1.0;
    double noise_mean = 0.0;
    double noise_var = 0.0;
};

// Predictions for every distinct gray level of the region index.
TheoryPrediction predict(Estimator est, const MomentSet& moments, const GrayImage& image,
                         const GrayRegionIndex& regions, double gamma, std::size_t T,
                         const NoiseModel& noise);

// JSON report: constants, per-level (d, mu, sigma2) and, for the centered
// estimator, every intermediate of the variance assembly.
void write_theory_report(const std::string& path, const TheoryPrediction& prediction,
                         const MomentSet& moments, const GrayImage& image,
                         const NoiseModel& noise);

} // namespace ghoststat
