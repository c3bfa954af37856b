#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ghoststat/estimators.hpp"
#include "ghoststat/forward_model.hpp"
#include "ghoststat/image.hpp"
#include "ghoststat/stochastic.hpp"

namespace ghoststat {

// Everything a simulation/reconstruction run needs, parsed from a flat
// key=value file or an equivalent JSON object.
//
//   image        = card:64x64:nested-rects:0,0.4,0.7,1.0  (or a PGM path)
//   distribution = uniform:0.1:1 | bernoulli:0.5:0:1 | discrete:v,..:p,..
//   transforms   = identity,power3,exp,log
//   estimators   = delta-g2,g2,normalized-g2,dgi
//   T            = 100000
//   gamma        = 1
//   noise        = none | gaussian:<mean>:<variance>
//   seed         = 42
//   out          = runs/example
//   threads      = 0         (0 = all cores)
struct RunConfig {
    // image source: either a test card recipe or a graymap file
    bool use_card = true;
    std::size_t card_width = 64;
    std::size_t card_height = 64;
    CardLayout card_layout = CardLayout::NestedRects;
    std::vector<double> card_levels{0.0, 0.4, 0.7, 1.0};
    std::string image_path;

    DistributionSpec dist = DistributionSpec::uniform(0.1, 1.0);
    std::vector<TransformSpec> transforms{TransformSpec::identity()};
    std::vector<Estimator> estimators{Estimator::DeltaG2};
    std::size_t T = 100000;
    double gamma = 1.0;
    NoiseModel noise;
    std::uint64_t seed = 1;
    std::string out_dir;
    int threads = 0;

    GrayImage make_image() const;
    void validate() const;
};

// Auto-detects JSON (first non-space byte '{') vs flat key=value. Errors
// carry the file name and, for flat files, the line number.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

// Built-in protocol presets: "paper-sim" (noiseless uniform-speckle
// four-level run) and "paper-exp" (binary object, on/off speckle,
// additive gaussian detector noise).
RunConfig preset_config(const std::string& name);
std::string preset_text(const std::string& name);

// Individual field parsers, shared with CLI flag overrides.
DistributionSpec parse_distribution(const std::string& text);
NoiseModel parse_noise(const std::string& text);
std::vector<TransformSpec> parse_transform_list(const std::string& text);
std::vector<Estimator> parse_estimator_list(const std::string& text);
void parse_image_source(const std::string& text, RunConfig& config);

} // namespace ghoststat
