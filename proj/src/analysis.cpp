#include "ghoststat/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "ghoststat/compensated.hpp"
#include "ghoststat/errors.hpp"

using nlohmann::json;

namespace ghoststat {

namespace {

double gauss_cdf(double x, double mu, double sigma) {
    return 0.5 * (1.0 + std::erf((x - mu) / (sigma * 1.4142135623730950488)));
}

// Theory entry for a region level; prediction levels were built from the
// same region index, but match by value so reordered inputs still work.
const LevelPrediction* find_level(const TheoryPrediction& theory, double d) {
    const LevelPrediction* best = nullptr;
    double best_gap = std::numeric_limits<double>::infinity();
    for (const auto& lp : theory.levels) {
        const double gap = std::abs(lp.d - d);
        if (gap < best_gap) {
            best_gap = gap;
            best = &lp;
        }
    }
    if (!best || best_gap > 1e-6 * std::max(1.0, std::abs(d))) return nullptr;
    return best;
}

} // namespace

std::vector<RegionStats> region_statistics(const Reconstruction& recon,
                                           const GrayRegionIndex& regions,
                                           const TheoryPrediction* theory) {
    std::size_t covered = 0;
    for (const auto& members : regions.members) covered += members.size();
    if (covered != recon.values.size())
        throw ConfigError("region index does not match reconstruction length");

    std::vector<RegionStats> out;
    out.reserve(regions.region_count());

    for (std::size_t r = 0; r < regions.region_count(); ++r) {
        const auto& members = regions.members[r];
        RegionStats st;
        st.level = regions.levels[r];
        st.N = members.size();
        if (st.N == 0) throw ConfigError("empty region in index");
        st.ks_threshold = 1.36 / std::sqrt(static_cast<double>(st.N));

        CompensatedSum sum;
        for (std::size_t n : members) sum.add(recon.values[n]);
        st.mean = sum.value() / static_cast<double>(st.N);
        if (st.N >= 2) {
            CompensatedSum ss;
            for (std::size_t n : members) {
                const double dev = recon.values[n] - st.mean;
                ss.add(dev * dev);
            }
            st.variance = ss.value() / static_cast<double>(st.N - 1);
        }

        const LevelPrediction* lp = theory ? find_level(*theory, st.level) : nullptr;
        if (lp) {
            st.theory_mu = lp->mu;
            st.theory_sigma2 = lp->sigma2;
        }

        // Histogram centered on the best available mean and width.
        const double mu = st.theory_mu ? *st.theory_mu : st.mean;
        double sigma2 = 0.0;
        if (st.theory_sigma2)
            sigma2 = *st.theory_sigma2;
        else if (st.variance)
            sigma2 = *st.variance;
        const double sigma = std::sqrt(std::max(0.0, sigma2));

        if (sigma == 0.0) {
            // No spread to bin against: a single bin holds everything.
            st.bin_edges = {mu, mu};
            st.probs = {1.0};
        } else {
            const double lo = mu - 5.0 * sigma, hi = mu + 5.0 * sigma;
            const double width = (hi - lo) / static_cast<double>(kHistogramBins);
            st.bin_edges.resize(kHistogramBins + 1);
            for (std::size_t b = 0; b <= kHistogramBins; ++b)
                st.bin_edges[b] = lo + width * static_cast<double>(b);
            std::vector<std::size_t> counts(kHistogramBins, 0);
            for (std::size_t n : members) {
                const double v = recon.values[n];
                auto b = static_cast<long>(std::floor((v - lo) / width));
                if (b < 0) {
                    b = 0;
                    ++st.clamped_low;
                } else if (b >= static_cast<long>(kHistogramBins)) {
                    b = static_cast<long>(kHistogramBins) - 1;
                    if (v > hi) ++st.clamped_high;
                }
                ++counts[static_cast<std::size_t>(b)];
            }
            st.probs.resize(kHistogramBins);
            for (std::size_t b = 0; b < kHistogramBins; ++b)
                st.probs[b] = static_cast<double>(counts[b]) / static_cast<double>(st.N);
        }

        if (st.theory_mu && st.theory_sigma2 && *st.theory_sigma2 > 0.0 && st.N >= 8) {
            std::vector<double> samples;
            samples.reserve(st.N);
            for (std::size_t n : members) samples.push_back(recon.values[n]);
            st.ks = ks_statistic(std::move(samples), *st.theory_mu, *st.theory_sigma2);
        }
        out.push_back(std::move(st));
    }
    return out;
}

double ks_statistic(std::vector<double> samples, double mu, double sigma2) {
    if (samples.size() < 8)
        throw ConfigError("KS statistic needs at least 8 samples");
    if (!(sigma2 > 0.0))
        throw DegenerateError("KS statistic needs a positive reference variance");
    std::sort(samples.begin(), samples.end());
    const double sigma = std::sqrt(sigma2);
    const double N = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = gauss_cdf(samples[i], mu, sigma);
        const double upper = (static_cast<double>(i) + 1.0) / N - cdf;
        const double lower = cdf - static_cast<double>(i) / N;
        d = std::max({d, upper, lower});
    }
    return d;
}

LinearityReport linearity_fit(const std::vector<RegionStats>& stats, Estimator est,
                              const TheoryPrediction& theory) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& st : stats) pts.emplace_back(st.level, st.mean);
    std::sort(pts.begin(), pts.end());
    std::size_t distinct = pts.empty() ? 0 : 1;
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (pts[i].first != pts[i - 1].first) ++distinct;
    if (distinct < 2)
        throw DegenerateError("linear fit needs at least two distinct gray levels");

    LinearityReport rep;
    rep.estimator = est;
    rep.points = pts;

    const double n = static_cast<double>(pts.size());
    double sx = 0.0, sy = 0.0;
    for (const auto& [x, y] : pts) {
        sx += x;
        sy += y;
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    rep.slope = sxy / sxx;
    rep.intercept = my - rep.slope * mx;

    double ss_res = 0.0;
    for (const auto& [x, y] : pts) {
        const double e = y - (rep.intercept + rep.slope * x);
        ss_res += e * e;
    }
    if (syy > 0.0) {
        rep.r2 = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    } else {
        rep.r2 = ss_res == 0.0 ? 1.0 : 0.0;
        rep.degenerate = true;
    }

    const auto& c = theory.constants;
    switch (est) {
        case Estimator::G2:
            rep.theory_slope = c.C1;
            rep.theory_intercept = c.C2;
            break;
        case Estimator::DeltaG2: {
            const double bias = 1.0 - 1.0 / static_cast<double>(theory.T);
            rep.theory_slope = bias * c.C1;
            rep.theory_intercept = 0.0;
            break;
        }
        case Estimator::NormalizedG2:
            rep.theory_slope = c.C3();
            rep.theory_intercept = 1.0;
            break;
        case Estimator::DGI:
            rep.theory_slope = c.C1;
            rep.theory_intercept = -c.C1 * c.C4;
            break;
    }
    if (rep.theory_slope != 0.0) {
        rep.slope_rel_err = std::abs(rep.slope - rep.theory_slope) /
                            std::abs(rep.theory_slope);
    } else {
        rep.slope_rel_err = std::numeric_limits<double>::quiet_NaN();
        rep.degenerate = true;
    }
    rep.intercept_abs_err = std::abs(rep.intercept - rep.theory_intercept);
    return rep;
}

void write_region_stats_csv(const std::string& path,
                            const std::vector<RegionStats>& stats) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot create CSV report: " + path);
    out << "level,bin_center,empirical_prob,theoretical_prob\n";
    out.precision(12);
    for (const auto& st : stats) {
        const bool gaussian = st.theory_mu && st.theory_sigma2 && *st.theory_sigma2 > 0.0;
        const double sigma = gaussian ? std::sqrt(*st.theory_sigma2) : 0.0;
        for (std::size_t b = 0; b < st.probs.size(); ++b) {
            const double left = st.bin_edges[b], right = st.bin_edges[b + 1];
            const double center = 0.5 * (left + right);
            double theo = 0.0;
            if (gaussian) {
                // Edge bins absorb the tails, mirroring the sample clamping.
                const double lo_cdf = b == 0 ? 0.0 : gauss_cdf(left, *st.theory_mu, sigma);
                const double hi_cdf = b + 1 == st.probs.size()
                                          ? 1.0
                                          : gauss_cdf(right, *st.theory_mu, sigma);
                theo = hi_cdf - lo_cdf;
            }
            out << st.level << "," << center << "," << st.probs[b] << "," << theo << "\n";
        }
    }
    if (!out) throw FormatError("failed writing CSV report: " + path);
}

void write_analysis_json(const std::string& path, const std::vector<RegionStats>& stats,
                         const std::vector<LinearityReport>& fits) {
    json j;
    j["format"] = "ghoststat-analysis";
    j["regions"] = json::array();
    for (const auto& st : stats) {
        json region;
        region["level"] = st.level;
        region["pixels"] = st.N;
        region["mean"] = st.mean;
        region["variance"] = st.variance ? json(*st.variance) : json(nullptr);
        region["theory_mu"] = st.theory_mu ? json(*st.theory_mu) : json(nullptr);
        region["theory_sigma2"] =
            st.theory_sigma2 ? json(*st.theory_sigma2) : json(nullptr);
        region["ks"] = st.ks ? json(*st.ks) : json(nullptr);
        region["ks_threshold"] = st.ks_threshold;
        region["clamped_low"] = st.clamped_low;
        region["clamped_high"] = st.clamped_high;
        region["bin_edges"] = st.bin_edges;
        region["probs"] = st.probs;
        j["regions"].push_back(region);
    }
    j["linearity"] = json::array();
    for (const auto& fit : fits) {
        json f;
        f["estimator"] = to_string(fit.estimator);
        f["slope"] = fit.slope;
        f["intercept"] = fit.intercept;
        f["r2"] = fit.r2;
        f["theory_slope"] = fit.theory_slope;
        f["theory_intercept"] = fit.theory_intercept;
        f["slope_rel_err"] = std::isnan(fit.slope_rel_err) ? json(nullptr)
                                                           : json(fit.slope_rel_err);
        f["intercept_abs_err"] = fit.intercept_abs_err;
        f["degenerate"] = fit.degenerate;
        json pts = json::array();
        for (const auto& [d, mean] : fit.points) pts.push_back({{"d", d}, {"mean", mean}});
        f["points"] = pts;
        j["linearity"].push_back(f);
    }
    std::ofstream out(path);
    if (!out) throw FormatError("cannot create analysis report: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw FormatError("failed writing analysis report: " + path);
}

} // namespace ghoststat
