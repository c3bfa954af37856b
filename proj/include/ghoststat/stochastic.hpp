#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ghoststat/image.hpp"

namespace ghoststat {

enum class DistKind { Uniform, Bernoulli, Discrete };

// Pixel intensity law. Every speckle pixel is an independent draw from it,
// identically in space and time.
struct DistributionSpec {
    DistKind kind = DistKind::Uniform;

    // uniform
    double lo = 0.0;
    double hi = 1.0;
    // bernoulli: value1 with probability p, value0 otherwise
    double p = 0.5;
    double value0 = 0.0;
    double value1 = 1.0;
    // discrete
    std::vector<double> values;
    std::vector<double> probs;

    static DistributionSpec uniform(double lo, double hi);
    static DistributionSpec bernoulli(double p, double value0, double value1);
    static DistributionSpec discrete(std::vector<double> values, std::vector<double> probs);

    void validate() const; // throws ConfigError
    double support_min() const;
    double support_max() const;
    bool support_strictly_positive() const { return support_min() > 0.0; }

    std::string describe() const;
};

enum class TransformKind { Identity, Power, Exp, Log };

// The measurable F = f(I) applied to reference intensities before
// correlating with the bucket.
struct TransformSpec {
    TransformKind kind = TransformKind::Identity;
    double k = 1.0; // power exponent, > 0

    static TransformSpec identity();
    static TransformSpec power(double k);
    static TransformSpec exponential();
    static TransformSpec logarithm();

    void validate() const; // throws ConfigError

    // f at a single point; assumes the pairing was validated.
    double operator()(double x) const;

    std::string describe() const;
};

// Throws DomainError when the transform is undefined or constant-valued on
// the distribution's support (log needs strictly positive support; power
// with non-integer exponent likewise).
void validate_pairing(const DistributionSpec& dist, const TransformSpec& transform);

// Deterministic draw addressing. Pattern pixel (t, m) consumes counter
// t*M + m on stream 0; per-frame noise consumes counter t on stream 1.
// Identical (master_seed, M, T) reproduce identical stacks bit for bit
// regardless of worker count or evaluation order.
struct SeedRecipe {
    std::uint64_t master_seed = 0;

    double pattern_draw(const DistributionSpec& dist, std::size_t M,
                        std::size_t frame_index, std::size_t pixel) const;
    // Two independent uniform (0,1] variates for frame-level noise.
    void noise_draws(std::size_t frame_index, double& u1, double& u2) const;
};

// One full reference frame: M i.i.d. draws from dist at frame `frame_index`.
PatternFrame sample_pattern(const DistributionSpec& dist, std::size_t M,
                            std::size_t frame_index, const SeedRecipe& recipe);

// Allocation-free variant for streaming passes; writes M values to out.
void sample_pattern_into(const DistributionSpec& dist, std::size_t M,
                         std::size_t frame_index, const SeedRecipe& recipe, double* out);

// Elementwise F = f(I). Throws DomainError naming the first offending pixel
// when a value falls outside the transform's domain.
PatternFrame apply_transform(const PatternFrame& frame, const TransformSpec& transform);

// Allocation-free variant; in and out may alias.
void apply_transform_into(const double* in, std::size_t M, const TransformSpec& transform,
                          double* out);

const char* to_string(DistKind kind);
const char* to_string(TransformKind kind);
TransformSpec transform_from_string(const std::string& name);

// Name pinned in manifests so runs state exactly which generator made them.
inline constexpr const char* kGeneratorName = "philox4x32-10";

} // namespace ghoststat
