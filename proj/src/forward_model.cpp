#include "ghoststat/forward_model.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ghoststat/compensated.hpp"
#include "ghoststat/errors.hpp"
#include "ghoststat/parallel.hpp"
#include "ghoststat/pgm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ghoststat {

NoiseModel NoiseModel::gaussian(double mean_e, double var_e) {
    NoiseModel n;
    n.kind = NoiseKind::Gaussian;
    n.mean_e = mean_e;
    n.var_e = var_e;
    n.validate();
    return n;
}

void NoiseModel::validate() const {
    if (kind == NoiseKind::None) return;
    if (!std::isfinite(mean_e) || !std::isfinite(var_e) || var_e < 0.0)
        throw ConfigError("gaussian noise needs finite mean and nonnegative variance");
}

double NoiseModel::sample(const SeedRecipe& recipe, std::size_t frame_index) const {
    if (kind == NoiseKind::None) return 0.0;
    double u1 = 0.0, u2 = 0.0;
    recipe.noise_draws(frame_index, u1, u2);
    // Box-Muller; u1 in (0,1] keeps the log finite.
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    return mean_e + std::sqrt(var_e) * z;
}

PatternSource PatternSource::from_recipe(DistributionSpec dist, SeedRecipe recipe,
                                         std::size_t M) {
    dist.validate();
    if (M == 0) throw ConfigError("pattern source needs at least one pixel");
    PatternSource src;
    src.kind = Kind::Recipe;
    src.dist = std::move(dist);
    src.recipe = recipe;
    src.M = M;
    return src;
}

PatternSource PatternSource::from_stack(const std::string& path) {
    PatternSource src;
    src.kind = Kind::Stack;
    src.stack_path = path;
    src.stack = std::make_shared<PatternStack>(read_pattern_stack(path));
    src.M = src.stack->M;
    return src;
}

void PatternSource::frame_into(std::size_t t, double* out) const {
    if (kind == Kind::Recipe) {
        sample_pattern_into(dist, M, t, recipe, out);
        return;
    }
    if (!stack) throw ConfigError("pattern stack not loaded");
    if (t >= stack->T) throw ConfigError("frame index past end of pattern stack");
    std::memcpy(out, stack->values.data() + t * std::size_t(M), M * sizeof(double));
}

PatternFrame PatternSource::frame(std::size_t t) const {
    PatternFrame f;
    f.values.resize(M);
    frame_into(t, f.values.data());
    return f;
}

void MeasurementRun::validate() const {
    if (gamma <= 0.0 || !std::isfinite(gamma))
        throw ConfigError("run gamma must be positive and finite");
    if (T < 2) throw ConfigError("run needs at least two frames");
    if (buckets.size() != T) throw ConfigError("bucket count does not match T");
    for (double b : buckets)
        if (!std::isfinite(b)) throw ConfigError("buckets must be finite");
    if (patterns.M == 0) throw ConfigError("run needs a pattern source");
    if (image) {
        image->validate();
        if (image->pixel_count() != patterns.M)
            throw ConfigError("image pixel count does not match pattern length");
    }
    noise.validate();
}

double bucket_signal(const GrayImage& image, const PatternFrame& frame, double gamma) {
    if (frame.values.size() != image.pixel_count())
        throw ConfigError("frame length does not match image pixel count");
    CompensatedSum acc;
    for (std::size_t m = 0; m < frame.values.size(); ++m)
        acc.add(image.values[m] * frame.values[m]);
    return gamma * acc.value();
}

double reference_bucket(const PatternFrame& frame) {
    CompensatedSum acc;
    for (double v : frame.values) acc.add(v);
    return acc.value();
}

MeasurementRun simulate_run(const GrayImage& image, const DistributionSpec& dist,
                            const SeedRecipe& recipe, std::size_t T, double gamma,
                            const NoiseModel& noise, int threads) {
    image.validate();
    dist.validate();
    noise.validate();
    if (T < 2) throw ConfigError("simulation needs at least two frames");
    if (gamma <= 0.0 || !std::isfinite(gamma))
        throw ConfigError("gamma must be positive and finite");

    const std::size_t M = image.pixel_count();
    MeasurementRun run;
    run.gamma = gamma;
    run.T = T;
    run.buckets.resize(T);
    run.patterns = PatternSource::from_recipe(dist, recipe, M);
    run.image = image;
    run.noise = noise;

    // Each bucket depends only on its own frame's draws, so any chunking
    // produces the same bytes.
    const unsigned workers = resolve_threads(threads);
    parallel_chunks(T, workers, [&](unsigned, std::size_t begin, std::size_t end) {
        std::vector<double> frame(M);
        for (std::size_t t = begin; t < end; ++t) {
            sample_pattern_into(dist, M, t, recipe, frame.data());
            CompensatedSum acc;
            for (std::size_t m = 0; m < M; ++m)
                acc.add(image.values[m] * frame[m]);
            run.buckets[t] = gamma * acc.value() + noise.sample(recipe, t);
        }
    });
    return run;
}

std::pair<double, double> estimate_noise_moments(const std::vector<double>& dark_buckets) {
    const std::size_t n = dark_buckets.size();
    if (n < 2) throw DegenerateError("noise estimation needs at least two dark readings");
    CompensatedSum sum;
    for (double v : dark_buckets) sum.add(v);
    const double mean = sum.value() / static_cast<double>(n);
    CompensatedSum ss;
    for (double v : dark_buckets) ss.add((v - mean) * (v - mean));
    return {mean, ss.value() / static_cast<double>(n - 1)};
}

namespace {

json dist_to_json(const DistributionSpec& d) {
    json j;
    j["kind"] = to_string(d.kind);
    switch (d.kind) {
        case DistKind::Uniform:
            j["lo"] = d.lo;
            j["hi"] = d.hi;
            break;
        case DistKind::Bernoulli:
            j["p"] = d.p;
            j["value0"] = d.value0;
            j["value1"] = d.value1;
            break;
        case DistKind::Discrete:
            j["values"] = d.values;
            j["probs"] = d.probs;
            break;
    }
    return j;
}

DistributionSpec dist_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "uniform")
        return DistributionSpec::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    if (kind == "bernoulli")
        return DistributionSpec::bernoulli(j.at("p").get<double>(),
                                           j.at("value0").get<double>(),
                                           j.at("value1").get<double>());
    if (kind == "discrete")
        return DistributionSpec::discrete(j.at("values").get<std::vector<double>>(),
                                          j.at("probs").get<std::vector<double>>());
    throw FormatError("unknown distribution kind in manifest: " + kind);
}

json noise_to_json(const NoiseModel& n) {
    json j;
    j["kind"] = to_string(n.kind);
    if (n.kind == NoiseKind::Gaussian) {
        j["mean"] = n.mean_e;
        j["variance"] = n.var_e;
    }
    return j;
}

NoiseModel noise_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "none") return NoiseModel::none();
    if (kind == "gaussian")
        return NoiseModel::gaussian(j.at("mean").get<double>(), j.at("variance").get<double>());
    throw FormatError("unknown noise kind in manifest: " + kind);
}

} // namespace

void save_run(const std::string& dir, const MeasurementRun& run) {
    run.validate();
    fs::create_directories(dir);
    const fs::path base(dir);

    write_f64_array((base / "buckets.f64").string(), run.buckets);

    json j;
    j["format"] = "ghoststat-run";
    j["version"] = 1;
    j["generator"] = kGeneratorName;
    j["gamma"] = run.gamma;
    j["T"] = run.T;
    j["M"] = run.patterns.M;
    j["buckets"] = "buckets.f64";
    j["noise"] = noise_to_json(run.noise);
    if (run.patterns.kind == PatternSource::Kind::Recipe) {
        j["pattern_source"]["kind"] = "recipe";
        j["pattern_source"]["master_seed"] = run.patterns.recipe.master_seed;
        j["pattern_source"]["distribution"] = dist_to_json(run.patterns.dist);
    } else {
        j["pattern_source"]["kind"] = "stack";
        j["pattern_source"]["path"] = run.patterns.stack_path;
    }
    if (run.image) {
        write_f64_array((base / "object.f64").string(), run.image->values);
        write_pgm((base / "object.pgm").string(), *run.image);
        j["image"]["width"] = run.image->width;
        j["image"]["height"] = run.image->height;
        j["image"]["values"] = "object.f64";
    }

    std::ofstream out(base / "run.json");
    if (!out) throw FormatError("cannot create run manifest in " + dir);
    out << j.dump(2) << "\n";
    if (!out) throw FormatError("failed writing run manifest in " + dir);
}

MeasurementRun load_run(const std::string& dir) {
    fs::path base(dir);
    fs::path manifest = fs::is_directory(base) ? base / "run.json" : base;
    if (!fs::is_directory(base)) base = manifest.parent_path();

    std::ifstream in(manifest);
    if (!in) throw FormatError("cannot open run manifest: " + manifest.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw FormatError("bad run manifest " + manifest.string() + ": " + e.what());
    }
    if (j.value("format", "") != "ghoststat-run")
        throw FormatError("not a run manifest: " + manifest.string());

    MeasurementRun run;
    run.gamma = j.at("gamma").get<double>();
    run.T = j.at("T").get<std::size_t>();
    run.buckets = read_f64_array((base / j.at("buckets").get<std::string>()).string());
    run.noise = noise_from_json(j.at("noise"));

    const json& src = j.at("pattern_source");
    const std::size_t M = j.at("M").get<std::size_t>();
    if (src.at("kind") == "recipe") {
        SeedRecipe recipe{src.at("master_seed").get<std::uint64_t>()};
        run.patterns = PatternSource::from_recipe(dist_from_json(src.at("distribution")),
                                                  recipe, M);
    } else {
        fs::path p = src.at("path").get<std::string>();
        if (p.is_relative()) p = base / p;
        run.patterns = PatternSource::from_stack(p.string());
        if (run.patterns.M != M)
            throw FormatError("pattern stack M does not match manifest");
    }

    if (j.contains("image")) {
        GrayImage img;
        img.width = j["image"].at("width").get<std::size_t>();
        img.height = j["image"].at("height").get<std::size_t>();
        img.values = read_f64_array((base / j["image"].at("values").get<std::string>()).string());
        img.validate();
        run.image = std::move(img);
    }
    run.validate();
    return run;
}

MeasurementRun ingest_run(const std::string& bucket_csv, const std::string& stack_path,
                          double gamma, const NoiseModel& noise) {
    MeasurementRun run;
    run.gamma = gamma;
    run.buckets = read_csv_column(bucket_csv);
    run.T = run.buckets.size();
    run.patterns = PatternSource::from_stack(stack_path);
    run.noise = noise;
    if (run.patterns.stack->T < run.T)
        throw FormatError("pattern stack has fewer frames than the bucket list");
    run.validate();
    return run;
}

const char* to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::None: return "none";
        case NoiseKind::Gaussian: return "gaussian";
    }
    throw ConfigError("unknown noise kind");
}

} // namespace ghoststat
