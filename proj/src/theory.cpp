#include "ghoststat/theory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ghoststat/errors.hpp"

using nlohmann::json;

namespace ghoststat {

void MomentSet::validate() const {
    constexpr double slack = 1e-12;
    for (double v : {E_I, E_I2, E_F, E_F2, E_IF, E_IF2, E_I2F, E_I2F2})
        if (!std::isfinite(v)) throw DegenerateError("non-finite moment");
    if (D_I() < -slack || D_F() < -slack)
        throw DegenerateError("moment set has negative variance");
    if (E_IF * E_IF > E_I2 * E_F2 + slack)
        throw DegenerateError("moment set violates the Cauchy-Schwarz bound");
}

namespace {

// ---- closed forms for uniform(a, b) --------------------------------------

// E[x^q] over uniform(a, b), q >= 0.
double uniform_poly_moment(double a, double b, double q) {
    return (std::pow(b, q + 1.0) - std::pow(a, q + 1.0)) / ((q + 1.0) * (b - a));
}

// Antiderivative of x^j e^{kx}, j in {0,1,2}.
double exp_antideriv(double x, int j, double k) {
    const double e = std::exp(k * x);
    switch (j) {
        case 0: return e / k;
        case 1: return e * (x / k - 1.0 / (k * k));
        case 2: return e * (x * x / k - 2.0 * x / (k * k) + 2.0 / (k * k * k));
    }
    throw ConfigError("unsupported exp moment order");
}

double uniform_exp_moment(double a, double b, int j, double k) {
    return (exp_antideriv(b, j, k) - exp_antideriv(a, j, k)) / (b - a);
}

// Antiderivative of x^j ln^p x, j in {0,1,2}, p in {1,2}; x > 0.
double log_antideriv(double x, int j, int p) {
    const double L = std::log(x);
    if (j == 0 && p == 1) return x * L - x;
    if (j == 0 && p == 2) return x * L * L - 2.0 * x * L + 2.0 * x;
    if (j == 1 && p == 1) return x * x / 2.0 * L - x * x / 4.0;
    if (j == 1 && p == 2) return x * x / 2.0 * L * L - x * x / 2.0 * L + x * x / 4.0;
    if (j == 2 && p == 1) return x * x * x / 3.0 * L - x * x * x / 9.0;
    if (j == 2 && p == 2)
        return x * x * x / 3.0 * L * L - 2.0 * x * x * x / 9.0 * L +
               2.0 * x * x * x / 27.0;
    throw ConfigError("unsupported log moment order");
}

double uniform_log_moment(double a, double b, int j, int p) {
    return (log_antideriv(b, j, p) - log_antideriv(a, j, p)) / (b - a);
}

// ---- 64-node Gauss-Legendre on [-1, 1] ------------------------------------

struct QuadratureRule {
    double nodes[64];
    double weights[64];
};

const QuadratureRule& gauss_legendre_64() {
    static const QuadratureRule rule = [] {
        QuadratureRule r{};
        constexpr int n = 64;
        constexpr double pi = 3.14159265358979323846;
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double x = std::cos(pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 1; j <= n; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p2) / j;
                }
                dp = n * (x * p0 - p1) / (x * x - 1.0);
                const double dx = p0 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            r.nodes[i] = -x;
            r.nodes[n - 1 - i] = x;
            r.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
            r.weights[n - 1 - i] = r.weights[i];
        }
        return r;
    }();
    return rule;
}

// E[g(x)] over uniform(a, b) by quadrature.
template <typename G>
double uniform_quadrature_moment(double a, double b, G&& g) {
    const auto& rule = gauss_legendre_64();
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (int i = 0; i < 64; ++i) acc += rule.weights[i] * g(mid + half * rule.nodes[i]);
    return acc / 2.0; // weights sum to 2; the 1/(b-a) density cancels the half-width
}

MomentSet discrete_moments(const std::vector<double>& values,
                           const std::vector<double>& probs,
                           const TransformSpec& transform) {
    MomentSet m;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double p = probs[i];
        if (p == 0.0) continue;
        const double x = values[i];
        const double f = transform(x);
        m.E_I += p * x;
        m.E_I2 += p * x * x;
        m.E_F += p * f;
        m.E_F2 += p * f * f;
        m.E_IF += p * x * f;
        m.E_IF2 += p * x * f * f;
        m.E_I2F += p * x * x * f;
        m.E_I2F2 += p * x * x * f * f;
    }
    return m;
}

} // namespace

MomentSet compute_moments(const DistributionSpec& dist, const TransformSpec& transform) {
    validate_pairing(dist, transform);

    MomentSet m;
    switch (dist.kind) {
        case DistKind::Bernoulli:
            m = discrete_moments({dist.value0, dist.value1}, {1.0 - dist.p, dist.p},
                                 transform);
            break;
        case DistKind::Discrete:
            m = discrete_moments(dist.values, dist.probs, transform);
            break;
        case DistKind::Uniform: {
            const double a = dist.lo, b = dist.hi;
            m.E_I = uniform_poly_moment(a, b, 1.0);
            m.E_I2 = uniform_poly_moment(a, b, 2.0);
            switch (transform.kind) {
                case TransformKind::Identity:
                    m.E_F = m.E_I;
                    m.E_F2 = m.E_I2;
                    m.E_IF = m.E_I2;
                    m.E_IF2 = uniform_poly_moment(a, b, 3.0);
                    m.E_I2F = m.E_IF2;
                    m.E_I2F2 = uniform_poly_moment(a, b, 4.0);
                    break;
                case TransformKind::Power: {
                    const double k = transform.k;
                    if (k == std::floor(k)) {
                        m.E_F = uniform_poly_moment(a, b, k);
                        m.E_F2 = uniform_poly_moment(a, b, 2.0 * k);
                        m.E_IF = uniform_poly_moment(a, b, k + 1.0);
                        m.E_IF2 = uniform_poly_moment(a, b, 2.0 * k + 1.0);
                        m.E_I2F = uniform_poly_moment(a, b, k + 2.0);
                        m.E_I2F2 = uniform_poly_moment(a, b, 2.0 * k + 2.0);
                    } else {
                        auto pw = [k](double x) { return std::pow(x, k); };
                        m.E_F = uniform_quadrature_moment(a, b, pw);
                        m.E_F2 = uniform_quadrature_moment(
                            a, b, [&](double x) { return pw(x) * pw(x); });
                        m.E_IF = uniform_quadrature_moment(
                            a, b, [&](double x) { return x * pw(x); });
                        m.E_IF2 = uniform_quadrature_moment(
                            a, b, [&](double x) { return x * pw(x) * pw(x); });
                        m.E_I2F = uniform_quadrature_moment(
                            a, b, [&](double x) { return x * x * pw(x); });
                        m.E_I2F2 = uniform_quadrature_moment(
                            a, b, [&](double x) { return x * x * pw(x) * pw(x); });
                    }
                    break;
                }
                case TransformKind::Exp:
                    m.E_F = uniform_exp_moment(a, b, 0, 1.0);
                    m.E_F2 = uniform_exp_moment(a, b, 0, 2.0);
                    m.E_IF = uniform_exp_moment(a, b, 1, 1.0);
                    m.E_IF2 = uniform_exp_moment(a, b, 1, 2.0);
                    m.E_I2F = uniform_exp_moment(a, b, 2, 1.0);
                    m.E_I2F2 = uniform_exp_moment(a, b, 2, 2.0);
                    break;
                case TransformKind::Log:
                    m.E_F = uniform_log_moment(a, b, 0, 1);
                    m.E_F2 = uniform_log_moment(a, b, 0, 2);
                    m.E_IF = uniform_log_moment(a, b, 1, 1);
                    m.E_IF2 = uniform_log_moment(a, b, 1, 2);
                    m.E_I2F = uniform_log_moment(a, b, 2, 1);
                    m.E_I2F2 = uniform_log_moment(a, b, 2, 2);
                    break;
            }
            break;
        }
    }
    m.validate();
    return m;
}

double TheoryConstants::C3() const {
    if (!has_C3)
        throw DegenerateError("C3 undefined: object has zero total transmission "
                              "or E(I)E(F) vanishes");
    return C3_raw;
}

TheoryConstants theoretical_constants(const MomentSet& moments, const GrayImage& image,
                                      double gamma) {
    moments.validate();
    image.validate();
    if (gamma <= 0.0 || !std::isfinite(gamma))
        throw ConfigError("gamma must be positive and finite");

    const double sum_d = image.sum();
    const double cov = moments.E_IF - moments.E_I * moments.E_F;

    TheoryConstants c;
    c.C1 = gamma * cov;
    c.C2 = gamma * sum_d * moments.E_I * moments.E_F;
    c.C4 = sum_d / static_cast<double>(image.pixel_count());
    const double denom = sum_d * moments.E_I * moments.E_F;
    if (denom != 0.0) {
        c.has_C3 = true;
        c.C3_raw = cov / denom;
    }
    return c;
}

double theoretical_mean(Estimator est, double d, const TheoryConstants& constants,
                        std::size_t T) {
    switch (est) {
        case Estimator::G2:
            return constants.C2 + constants.C1 * d;
        case Estimator::DeltaG2: {
            if (T < 2) throw ConfigError("mean prediction needs T >= 2");
            const double bias = 1.0 - 1.0 / static_cast<double>(T);
            return bias * constants.C1 * d;
        }
        case Estimator::NormalizedG2:
            return 1.0 + constants.C3() * d;
        case Estimator::DGI:
            return constants.C1 * (d - constants.C4);
    }
    throw ConfigError("unknown estimator");
}

std::string VarianceTerms::describe() const {
    std::ostringstream s;
    s.precision(17);
    s << "E(S~)=" << E_Stilde << " D(S~)=" << D_Stilde << " E(S)=" << E_S
      << " D(S)=" << D_S << " E(SF)=" << E_SF << " E(SF2)=" << E_SF2
      << " E(S~2)=" << E_Stilde2 << " E(S2F)=" << E_S2F << " E(S2F2)=" << E_S2F2
      << " D(SF)=" << D_SF << " V=" << V << " sigma2=" << sigma2;
    return s.str();
}

VarianceTerms variance_terms_delta_g2(const MomentSet& moments, const GrayImage& image,
                                      double d, double gamma, std::size_t T,
                                      const NoiseModel& noise) {
    moments.validate();
    image.validate();
    noise.validate();
    if (T < 2) throw ConfigError("variance prediction needs T >= 2");
    if (gamma <= 0.0 || !std::isfinite(gamma))
        throw ConfigError("gamma must be positive and finite");

    // The bucket splits into the pixel-n term and the rest; the assembly
    // is exact given the eight moments but cancels heavily when noise
    // means are large, hence extended precision throughout.
    const long double E_I = moments.E_I, E_F = moments.E_F;
    const long double E_F2 = moments.E_F2, E_IF = moments.E_IF;
    const long double E_IF2 = moments.E_IF2, E_I2F = moments.E_I2F;
    const long double E_I2F2 = moments.E_I2F2;
    const long double D_I = moments.E_I2 - E_I * E_I;
    const long double D_F = E_F2 - E_F * E_F;

    const long double g = gamma;
    const long double dd = d;
    const long double sum_d = image.sum();
    const long double sum_d2 = image.sum_squares();
    const long double E_e = noise.enabled() ? noise.mean_e : 0.0L;
    const long double D_e = noise.enabled() ? noise.var_e : 0.0L;

    const long double E_St = g * (sum_d - dd) * E_I + E_e;
    const long double D_St = g * g * (sum_d2 - dd * dd) * D_I + D_e;
    const long double E_S = E_St + g * dd * E_I;
    const long double E_SF = E_St * E_F + g * dd * E_IF;
    const long double E_SF2 = E_St * E_F2 + g * dd * E_IF2;
    const long double D_S = D_St + g * g * dd * dd * D_I;
    const long double E_St2 = E_St * E_St + D_St;
    const long double E_S2F = E_St2 * E_F + 2.0L * g * dd * E_St * E_IF +
                              g * g * dd * dd * E_I2F;
    const long double E_S2F2 = E_St2 * E_F2 + 2.0L * g * dd * E_St * E_IF2 +
                               g * g * dd * dd * E_I2F2;
    const long double D_SF = E_S2F2 - E_SF * E_SF;

    const long double V = E_S * (6.0L * E_SF * E_F - 2.0L * E_SF2) +
                          E_S * E_S * (D_F - 2.0L * E_F * E_F) + D_S * E_F * E_F -
                          2.0L * E_S2F * E_F + D_SF;

    VarianceTerms terms;
    terms.E_Stilde = static_cast<double>(E_St);
    terms.D_Stilde = static_cast<double>(D_St);
    terms.E_S = static_cast<double>(E_S);
    terms.D_S = static_cast<double>(D_S);
    terms.E_SF = static_cast<double>(E_SF);
    terms.E_SF2 = static_cast<double>(E_SF2);
    terms.E_Stilde2 = static_cast<double>(E_St2);
    terms.E_S2F = static_cast<double>(E_S2F);
    terms.E_S2F2 = static_cast<double>(E_S2F2);
    terms.D_SF = static_cast<double>(D_SF);
    terms.V = static_cast<double>(V);
    terms.sigma2 = static_cast<double>(V / static_cast<long double>(T));

    // Allow rounding-level negatives (point-mass laws assemble exact zeros
    // up to cancellation); anything larger is a real defect worth a report.
    const long double scale = std::max({1.0L, E_S2F2 < 0 ? -E_S2F2 : E_S2F2,
                                        E_SF * E_SF});
    if (V < 0.0L) {
        if (V > -1e-12L * scale) {
            terms.V = 0.0;
            terms.sigma2 = 0.0;
        } else {
            throw DegenerateError("assembled variance is negative; intermediates: " +
                                  terms.describe());
        }
    }
    return terms;
}

double theoretical_variance_delta_g2(const MomentSet& moments, const GrayImage& image,
                                     double d, double gamma, std::size_t T,
                                     const NoiseModel& noise) {
    return variance_terms_delta_g2(moments, image, d, gamma, T, noise).sigma2;
}

TheoryPrediction predict(Estimator est, const MomentSet& moments, const GrayImage& image,
                         const GrayRegionIndex& regions, double gamma, std::size_t T,
                         const NoiseModel& noise) {
    TheoryPrediction pred;
    pred.estimator = est;
    pred.constants = theoretical_constants(moments, image, gamma);
    pred.T = T;
    pred.gamma = gamma;
    pred.noise_mean = noise.enabled() ? noise.mean_e : 0.0;
    pred.noise_var = noise.enabled() ? noise.var_e : 0.0;
    for (double d : regions.levels) {
        LevelPrediction lp;
        lp.d = d;
        lp.mu = theoretical_mean(est, d, pred.constants, T);
        if (est == Estimator::DeltaG2)
            lp.sigma2 = theoretical_variance_delta_g2(moments, image, d, gamma, T, noise);
        pred.levels.push_back(lp);
    }
    return pred;
}

void write_theory_report(const std::string& path, const TheoryPrediction& prediction,
                         const MomentSet& moments, const GrayImage& image,
                         const NoiseModel& noise) {
    json j;
    j["format"] = "ghoststat-theory";
    j["estimator"] = to_string(prediction.estimator);
    j["T"] = prediction.T;
    j["gamma"] = prediction.gamma;
    j["noise"] = {{"mean", prediction.noise_mean}, {"variance", prediction.noise_var}};
    j["constants"]["C1"] = prediction.constants.C1;
    j["constants"]["C2"] = prediction.constants.C2;
    if (prediction.constants.has_C3)
        j["constants"]["C3"] = prediction.constants.C3_raw;
    else
        j["constants"]["C3"] = nullptr;
    j["constants"]["C4"] = prediction.constants.C4;
    j["moments"] = {{"E_I", moments.E_I},     {"E_I2", moments.E_I2},
                    {"E_F", moments.E_F},     {"E_F2", moments.E_F2},
                    {"E_IF", moments.E_IF},   {"E_IF2", moments.E_IF2},
                    {"E_I2F", moments.E_I2F}, {"E_I2F2", moments.E_I2F2},
                    {"D_I", moments.D_I()},   {"D_F", moments.D_F()}};

    j["levels"] = json::array();
    for (const auto& lp : prediction.levels) {
        json level;
        level["d"] = lp.d;
        level["mu"] = lp.mu;
        if (lp.sigma2) {
            level["sigma2"] = *lp.sigma2;
            const auto terms = variance_terms_delta_g2(moments, image, lp.d,
                                                       prediction.gamma, prediction.T,
                                                       noise);
            level["terms"] = {{"E_Stilde", terms.E_Stilde},
                              {"D_Stilde", terms.D_Stilde},
                              {"E_S", terms.E_S},
                              {"D_S", terms.D_S},
                              {"E_SF", terms.E_SF},
                              {"E_SF2", terms.E_SF2},
                              {"E_Stilde2", terms.E_Stilde2},
                              {"E_S2F", terms.E_S2F},
                              {"E_S2F2", terms.E_S2F2},
                              {"D_SF", terms.D_SF},
                              {"V", terms.V}};
        } else {
            level["sigma2"] = nullptr;
        }
        j["levels"].push_back(level);
    }

    std::ofstream out(path);
    if (!out) throw FormatError("cannot create theory report: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw FormatError("failed writing theory report: " + path);
}

} // namespace ghoststat
