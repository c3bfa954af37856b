#include "ghoststat/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ghoststat/errors.hpp"
#include "ghoststat/philox.hpp"

namespace ghoststat {

DistributionSpec DistributionSpec::uniform(double lo, double hi) {
    DistributionSpec d;
    d.kind = DistKind::Uniform;
    d.lo = lo;
    d.hi = hi;
    d.validate();
    return d;
}

DistributionSpec DistributionSpec::bernoulli(double p, double value0, double value1) {
    DistributionSpec d;
    d.kind = DistKind::Bernoulli;
    d.p = p;
    d.value0 = value0;
    d.value1 = value1;
    d.validate();
    return d;
}

DistributionSpec DistributionSpec::discrete(std::vector<double> values,
                                            std::vector<double> probs) {
    DistributionSpec d;
    d.kind = DistKind::Discrete;
    d.values = std::move(values);
    d.probs = std::move(probs);
    d.validate();
    return d;
}

void DistributionSpec::validate() const {
    switch (kind) {
        case DistKind::Uniform:
            if (!std::isfinite(lo) || !std::isfinite(hi) || lo < 0.0 || lo >= hi)
                throw ConfigError("uniform law requires 0 <= lo < hi");
            return;
        case DistKind::Bernoulli:
            if (!std::isfinite(p) || p <= 0.0 || p >= 1.0)
                throw ConfigError("bernoulli probability must lie in (0,1)");
            if (!std::isfinite(value0) || !std::isfinite(value1) ||
                value0 < 0.0 || value1 < 0.0)
                throw ConfigError("bernoulli levels must be nonnegative");
            if (value0 == value1)
                throw ConfigError("bernoulli levels must differ");
            return;
        case DistKind::Discrete: {
            if (values.empty() || values.size() != probs.size())
                throw ConfigError("discrete law needs matching value/probability lists");
            double total = 0.0;
            for (std::size_t i = 0; i < values.size(); ++i) {
                if (!std::isfinite(values[i]) || values[i] < 0.0)
                    throw ConfigError("discrete values must be nonnegative");
                if (!std::isfinite(probs[i]) || probs[i] < 0.0)
                    throw ConfigError("discrete probabilities must be nonnegative");
                total += probs[i];
            }
            if (std::abs(total - 1.0) > 1e-12)
                throw ConfigError("discrete probabilities must sum to 1");
            return;
        }
    }
    throw ConfigError("unknown distribution kind");
}

double DistributionSpec::support_min() const {
    switch (kind) {
        case DistKind::Uniform: return lo;
        case DistKind::Bernoulli: return std::min(value0, value1);
        case DistKind::Discrete: {
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < values.size(); ++i)
                if (probs[i] > 0.0) m = std::min(m, values[i]);
            return m;
        }
    }
    throw ConfigError("unknown distribution kind");
}

double DistributionSpec::support_max() const {
    switch (kind) {
        case DistKind::Uniform: return hi;
        case DistKind::Bernoulli: return std::max(value0, value1);
        case DistKind::Discrete: {
            double m = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < values.size(); ++i)
                if (probs[i] > 0.0) m = std::max(m, values[i]);
            return m;
        }
    }
    throw ConfigError("unknown distribution kind");
}

std::string DistributionSpec::describe() const {
    std::ostringstream s;
    switch (kind) {
        case DistKind::Uniform:
            s << "uniform(" << lo << "," << hi << ")";
            break;
        case DistKind::Bernoulli:
            s << "bernoulli(" << p << "," << value0 << "," << value1 << ")";
            break;
        case DistKind::Discrete:
            s << "discrete[" << values.size() << " atoms]";
            break;
    }
    return s.str();
}

TransformSpec TransformSpec::identity() { return TransformSpec{TransformKind::Identity, 1.0}; }

TransformSpec TransformSpec::power(double k) {
    TransformSpec t{TransformKind::Power, k};
    t.validate();
    return t;
}

TransformSpec TransformSpec::exponential() { return TransformSpec{TransformKind::Exp, 1.0}; }

TransformSpec TransformSpec::logarithm() { return TransformSpec{TransformKind::Log, 1.0}; }

void TransformSpec::validate() const {
    if (kind == TransformKind::Power && (!std::isfinite(k) || k <= 0.0))
        throw ConfigError("power transform requires a positive exponent");
}

double TransformSpec::operator()(double x) const {
    switch (kind) {
        case TransformKind::Identity: return x;
        case TransformKind::Power: return std::pow(x, k);
        case TransformKind::Exp: return std::exp(x);
        case TransformKind::Log: return std::log(x);
    }
    throw ConfigError("unknown transform kind");
}

std::string TransformSpec::describe() const {
    switch (kind) {
        case TransformKind::Identity: return "identity";
        case TransformKind::Power: {
            std::ostringstream s;
            s << "power(" << k << ")";
            return s.str();
        }
        case TransformKind::Exp: return "exp";
        case TransformKind::Log: return "log";
    }
    throw ConfigError("unknown transform kind");
}

void validate_pairing(const DistributionSpec& dist, const TransformSpec& transform) {
    dist.validate();
    transform.validate();
    if (transform.kind == TransformKind::Log && !dist.support_strictly_positive())
        throw DomainError("log transform needs a strictly positive intensity support "
                          "(log of a zero intensity does not exist)");
    if (transform.kind == TransformKind::Power) {
        const bool integer_k = (transform.k == std::floor(transform.k));
        if (!integer_k && !dist.support_strictly_positive())
            throw DomainError("non-integer power transform needs a strictly positive support");
    }
}

double SeedRecipe::pattern_draw(const DistributionSpec& dist, std::size_t M,
                                std::size_t frame_index, std::size_t pixel) const {
    const std::uint64_t counter =
        static_cast<std::uint64_t>(frame_index) * static_cast<std::uint64_t>(M) +
        static_cast<std::uint64_t>(pixel);
    const auto w = Philox4x32::words(master_seed, 0u, counter);
    const double u = uniform01(w[0]);
    switch (dist.kind) {
        case DistKind::Uniform:
            return dist.lo + u * (dist.hi - dist.lo);
        case DistKind::Bernoulli:
            return u < dist.p ? dist.value1 : dist.value0;
        case DistKind::Discrete: {
            double cdf = 0.0;
            for (std::size_t i = 0; i < dist.values.size(); ++i) {
                cdf += dist.probs[i];
                if (u < cdf) return dist.values[i];
            }
            return dist.values.back(); // u landed in the 1e-12 slack
        }
    }
    throw ConfigError("unknown distribution kind");
}

void SeedRecipe::noise_draws(std::size_t frame_index, double& u1, double& u2) const {
    const auto w = Philox4x32::words(master_seed, 1u, static_cast<std::uint64_t>(frame_index));
    u1 = uniform01_open_below(w[0]);
    u2 = uniform01_open_below(w[1]);
}

PatternFrame sample_pattern(const DistributionSpec& dist, std::size_t M,
                            std::size_t frame_index, const SeedRecipe& recipe) {
    dist.validate();
    if (M == 0) throw ConfigError("pattern needs at least one pixel");
    PatternFrame frame;
    frame.values.resize(M);
    sample_pattern_into(dist, M, frame_index, recipe, frame.values.data());
    return frame;
}

void sample_pattern_into(const DistributionSpec& dist, std::size_t M,
                         std::size_t frame_index, const SeedRecipe& recipe, double* out) {
    for (std::size_t m = 0; m < M; ++m)
        out[m] = recipe.pattern_draw(dist, M, frame_index, m);
}

PatternFrame apply_transform(const PatternFrame& frame, const TransformSpec& transform) {
    transform.validate();
    PatternFrame out;
    out.values.resize(frame.values.size());
    apply_transform_into(frame.values.data(), frame.values.size(), transform,
                         out.values.data());
    return out;
}

void apply_transform_into(const double* in, std::size_t M, const TransformSpec& transform,
                          double* out) {
    switch (transform.kind) {
        case TransformKind::Identity:
            if (out != in)
                for (std::size_t m = 0; m < M; ++m) out[m] = in[m];
            return;
        case TransformKind::Power:
            // cube is the hot case in the shipped transform sweeps; pow() is far slower
            if (transform.k == 3.0) {
                for (std::size_t m = 0; m < M; ++m) out[m] = in[m] * in[m] * in[m];
            } else if (transform.k == 2.0) {
                for (std::size_t m = 0; m < M; ++m) out[m] = in[m] * in[m];
            } else {
                for (std::size_t m = 0; m < M; ++m) out[m] = std::pow(in[m], transform.k);
            }
            return;
        case TransformKind::Exp:
            for (std::size_t m = 0; m < M; ++m) out[m] = std::exp(in[m]);
            return;
        case TransformKind::Log:
            for (std::size_t m = 0; m < M; ++m) {
                if (in[m] <= 0.0) {
                    std::ostringstream s;
                    s << "log transform undefined at pixel " << m << " (value " << in[m] << ")";
                    throw DomainError(s.str());
                }
                out[m] = std::log(in[m]);
            }
            return;
    }
    throw ConfigError("unknown transform kind");
}

const char* to_string(DistKind kind) {
    switch (kind) {
        case DistKind::Uniform: return "uniform";
        case DistKind::Bernoulli: return "bernoulli";
        case DistKind::Discrete: return "discrete";
    }
    throw ConfigError("unknown distribution kind");
}

const char* to_string(TransformKind kind) {
    switch (kind) {
        case TransformKind::Identity: return "identity";
        case TransformKind::Power: return "power";
        case TransformKind::Exp: return "exp";
        case TransformKind::Log: return "log";
    }
    throw ConfigError("unknown transform kind");
}

TransformSpec transform_from_string(const std::string& name) {
    if (name == "identity") return TransformSpec::identity();
    if (name == "exp") return TransformSpec::exponential();
    if (name == "log") return TransformSpec::logarithm();
    if (name.rfind("power", 0) == 0) {
        // accepted spellings: power3, power(3), power:3
        std::string arg = name.substr(5);
        if (!arg.empty() && (arg.front() == '(' || arg.front() == ':')) arg.erase(0, 1);
        if (!arg.empty() && arg.back() == ')') arg.pop_back();
        try {
            return TransformSpec::power(std::stod(arg));
        } catch (const std::invalid_argument&) {
            throw ConfigError("cannot parse power exponent in: " + name);
        }
    }
    throw ConfigError("unknown transform: " + name);
}

} // namespace ghoststat
