#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ghoststat/estimators.hpp"
#include "ghoststat/image.hpp"
#include "ghoststat/theory.hpp"

namespace ghoststat {

// Statistics of one gray region's reconstruction values. Histogram covers
// mu +- 5 sigma in 51 bins; samples outside land in the edge bins so the
// probabilities always sum to 1.
struct RegionStats {
    double level = 0.0;
    std::size_t N = 0;
    double mean = 0.0;
    std::optional<double> variance; // unbiased; absent when N < 2

    std::vector<double> bin_edges; // bins + 1 entries
    std::vector<double> probs;     // per-bin occurrence probability
    std::size_t clamped_low = 0;   // samples below the range, folded into bin 0
    std::size_t clamped_high = 0;  // samples above, folded into the last bin

    std::optional<double> theory_mu;
    std::optional<double> theory_sigma2;
    std::optional<double> ks; // when a full Gaussian prediction is available
    double ks_threshold = 0.0; // 1.36 / sqrt(N), the alpha = 0.05 cut
};

inline constexpr std::size_t kHistogramBins = 51;

// Per-region stats of a reconstruction; pass theory = nullptr for
// stats-only mode (ingested runs without distribution metadata).
std::vector<RegionStats> region_statistics(const Reconstruction& recon,
                                           const GrayRegionIndex& regions,
                                           const TheoryPrediction* theory);

// Kolmogorov-Smirnov sup-distance between the sample ECDF and
// Gaussian(mu, sigma2). Needs >= 8 samples and sigma2 > 0.
double ks_statistic(std::vector<double> samples, double mu, double sigma2);

// Least-squares line through per-level reconstruction means, compared
// against the estimator's predicted slope and intercept.
struct LinearityReport {
    Estimator estimator = Estimator::DeltaG2;
    std::vector<std::pair<double, double>> points; // (d, empirical mean)
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double theory_slope = 0.0;
    double theory_intercept = 0.0;
    double slope_rel_err = 0.0;     // NaN when the predicted slope is 0
    double intercept_abs_err = 0.0;
    bool degenerate = false; // zero predicted slope or no spread in means
};

LinearityReport linearity_fit(const std::vector<RegionStats>& stats, Estimator est,
                              const TheoryPrediction& theory);

// Analysis outputs: JSON (stats + fits) and a CSV with one row per bin per
// region (level, bin_center, empirical_prob, theoretical_prob).
void write_region_stats_csv(const std::string& path, const std::vector<RegionStats>& stats);
void write_analysis_json(const std::string& path, const std::vector<RegionStats>& stats,
                         const std::vector<LinearityReport>& fits);

} // namespace ghoststat
