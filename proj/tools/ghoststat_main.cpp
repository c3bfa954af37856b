// Command-line front end: simulate / reconstruct / analyze / ingest / verify.
// Exit contract: 0 success (and statistical checks pass), 1 statistical or
// runtime failure, 2 usage or config error.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ghoststat/analysis.hpp"
#include "ghoststat/config.hpp"
#include "ghoststat/errors.hpp"
#include "ghoststat/estimators.hpp"
#include "ghoststat/forward_model.hpp"
#include "ghoststat/image.hpp"
#include "ghoststat/io.hpp"
#include "ghoststat/pgm.hpp"
#include "ghoststat/theory.hpp"
#include "ghoststat/verify.hpp"

namespace fs = std::filesystem;
using namespace ghoststat;

namespace {

std::string transform_slug(const TransformSpec& t) {
    switch (t.kind) {
        case TransformKind::Identity: return "identity";
        case TransformKind::Power: {
            std::ostringstream s;
            s << "power" << t.k;
            std::string out = s.str();
            for (char& c : out)
                if (c == '.') c = '_';
            return out;
        }
        case TransformKind::Exp: return "exp";
        case TransformKind::Log: return "log";
    }
    return "unknown";
}

std::string estimator_slug(Estimator e) {
    std::string s = to_string(e);
    for (char& c : s)
        if (c == '-') c = '_';
    return s;
}

std::string default_out(const std::string& explicit_out, const std::string& config_out) {
    if (!explicit_out.empty()) return explicit_out;
    if (!config_out.empty()) return config_out;
    if (const char* env = std::getenv("GHOSTSTAT_OUT")) return env;
    return "ghoststat-out";
}

// Reconstruction geometry for PGM output. Runs carry their object image;
// ingested runs fall back to a square guess or explicit dimensions.
std::pair<std::size_t, std::size_t> recon_dims(const MeasurementRun& run,
                                               std::size_t width, std::size_t height) {
    if (width > 0 && height > 0) return {width, height};
    if (run.image) return {run.image->width, run.image->height};
    const std::size_t m = run.patterns.M;
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(m))));
    if (side * side == m) return {side, side};
    throw ConfigError("run has no image geometry and pixel count " + std::to_string(m) +
                      " is not square; pass --width and --height");
}

struct SimulateArgs {
    std::string config_path;
    std::string preset;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = -1;
};

int run_simulate(const SimulateArgs& a) {
    if (!a.config_path.empty() && !a.preset.empty())
        throw ConfigError("pass either --config or --preset, not both");
    RunConfig cfg;
    if (!a.preset.empty())
        cfg = preset_config(a.preset);
    else if (!a.config_path.empty())
        cfg = parse_config_file(a.config_path);
    if (a.seed_set) cfg.seed = a.seed;
    if (a.threads >= 0) cfg.threads = a.threads;
    cfg.out_dir = default_out(a.out, cfg.out_dir);
    cfg.validate();

    GrayImage img = cfg.make_image();
    SeedRecipe recipe{cfg.seed};
    MeasurementRun run = simulate_run(img, cfg.dist, recipe, cfg.T, cfg.gamma,
                                      cfg.noise, cfg.threads);
    save_run(cfg.out_dir, run);
    std::cout << "simulated T=" << run.T << " frames, M=" << run.patterns.M
              << " pixels, " << cfg.dist.describe() << ", gamma=" << run.gamma
              << ", seed=" << cfg.seed << "\nrun written to " << cfg.out_dir << "\n";
    return 0;
}

struct ReconstructArgs {
    std::string run_dir;
    std::string transforms = "identity";
    std::string estimators = "delta-g2";
    std::string out;
    bool centered = false;
    int threads = 0;
    std::size_t width = 0;
    std::size_t height = 0;
};

int run_reconstruct(const ReconstructArgs& a) {
    MeasurementRun run = load_run(a.run_dir);
    std::vector<TransformSpec> transforms = parse_transform_list(a.transforms);
    std::vector<Estimator> estimators = parse_estimator_list(a.estimators);
    const std::string out = a.out.empty() ? a.run_dir : a.out;
    fs::create_directories(out);
    const auto [w, h] = recon_dims(run, a.width, a.height);

    std::vector<CorrAccumulator> accs = accumulate_run(run, transforms, a.threads);
    std::vector<Reconstruction> centered;
    if (a.centered) centered = centered_delta_g2(run, transforms, accs, a.threads);

    int written = 0;
    for (Estimator est : estimators) {
        for (std::size_t k = 0; k < transforms.size(); ++k) {
            Reconstruction recon =
                (a.centered && est == Estimator::DeltaG2)
                    ? centered[k]
                    : extract_reconstruction(est, accs[k], transforms[k]);
            const std::string prefix = (fs::path(out) / ("recon_" + estimator_slug(est) +
                                                         "_" + transform_slug(transforms[k])))
                                           .string();
            save_reconstruction(prefix, recon, w, h);
            std::cout << "wrote " << prefix << ".pgm (+.f64)\n";
            ++written;
        }
    }
    std::cout << written << " reconstructions from T=" << run.T << " frames\n";
    return 0;
}

struct AnalyzeArgs {
    std::string run_dir;
    std::string recon_dir;
    std::string transforms = "identity";
    std::string estimators = "delta-g2";
    std::string image_path;
    std::string out;
    int threads = 0;
};

int run_analyze(const AnalyzeArgs& a) {
    MeasurementRun run = load_run(a.run_dir);
    const std::string recon_dir = a.recon_dir.empty() ? a.run_dir : a.recon_dir;
    const std::string out = default_out(a.out, recon_dir);
    fs::create_directories(out);

    GrayImage img;
    if (!a.image_path.empty())
        img = read_pgm(a.image_path);
    else if (run.image)
        img = *run.image;
    else
        throw ConfigError("run carries no object image; pass --image to define "
                          "the gray regions");
    GrayRegionIndex regions = build_region_index(img);

    std::vector<TransformSpec> transforms = parse_transform_list(a.transforms);
    std::vector<Estimator> estimators = parse_estimator_list(a.estimators);
    const bool have_theory = run.patterns.has_distribution();
    if (!have_theory)
        std::cout << "note: run has no distribution metadata; stats-only mode "
                     "(no Gaussian overlay, no predicted line)\n";

    std::optional<std::vector<CorrAccumulator>> accs; // built on first miss
    bool stat_fail = false;

    for (std::size_t k = 0; k < transforms.size(); ++k) {
        const TransformSpec& tr = transforms[k];
        std::optional<MomentSet> moments;
        if (have_theory) moments = compute_moments(run.patterns.dist, tr);

        for (Estimator est : estimators) {
            const std::string stem = estimator_slug(est) + "_" + transform_slug(tr);
            const fs::path f64 = fs::path(recon_dir) / ("recon_" + stem + ".f64");

            Reconstruction recon;
            if (fs::exists(f64)) {
                PatternStack stack = read_pattern_stack(f64.string());
                if (stack.M != img.pixel_count())
                    throw FormatError(f64.string() + ": " + std::to_string(stack.M) +
                                      " values do not match the " +
                                      std::to_string(img.pixel_count()) + "-pixel image");
                recon.estimator = est;
                recon.transform = tr;
                recon.values = std::move(stack.values);
                recon.T = run.T;
            } else {
                if (!accs) accs = accumulate_run(run, transforms, a.threads);
                recon = extract_reconstruction(est, (*accs)[k], tr);
            }

            std::optional<TheoryPrediction> pred;
            if (have_theory)
                pred = predict(est, *moments, img, regions, run.gamma, run.T, run.noise);

            std::vector<RegionStats> stats =
                region_statistics(recon, regions, pred ? &*pred : nullptr);
            std::vector<LinearityReport> fits;
            std::size_t ks_total = 0;
            std::size_t ks_pass = 0;

            if (pred) {
                LinearityReport fit = linearity_fit(stats, est, *pred);
                fits.push_back(fit);
                for (const auto& s : stats) {
                    if (!s.ks) continue;
                    ++ks_total;
                    if (*s.ks <= s.ks_threshold)
                        ++ks_pass;
                    else
                        stat_fail = true;
                }
                if (!fit.degenerate && fit.r2 < 0.999) stat_fail = true;
                write_theory_report((fs::path(out) / ("theory_" + stem + ".json")).string(),
                                    *pred, *moments, img, run.noise);
                std::cout << stem << ": R^2=" << fit.r2;
                if (ks_total)
                    std::cout << ", KS " << ks_pass << "/" << ks_total
                              << " regions within 1.36/sqrt(N)";
                if (fit.degenerate) std::cout << " (degenerate fit)";
                std::cout << "\n";
            } else {
                std::cout << stem << ": stats-only report\n";
            }

            write_region_stats_csv((fs::path(out) / ("analysis_" + stem + ".csv")).string(),
                                   stats);
            write_analysis_json((fs::path(out) / ("analysis_" + stem + ".json")).string(),
                                stats, fits);
        }
    }
    std::cout << "reports written to " << out << "\n";
    if (stat_fail) {
        std::cout << "statistical checks FAILED (KS above threshold or R^2 < 0.999)\n";
        return 1;
    }
    return 0;
}

struct IngestArgs {
    std::string buckets_csv;
    std::string stack_path;
    double gamma = 1.0;
    std::string noise = "none";
    std::string out;
};

int run_ingest(const IngestArgs& a) {
    MeasurementRun run = ingest_run(a.buckets_csv, a.stack_path, a.gamma,
                                    parse_noise(a.noise));
    const std::string out = default_out(a.out, "");
    save_run(out, run);
    std::cout << "ingested " << run.T << " buckets, M=" << run.patterns.M
              << " pixels per frame\nrun written to " << out << "\n";
    return 0;
}

struct VerifyArgs {
    bool quick = false;
    int threads = 1;
    std::vector<int> only;
    std::string work_dir;
    bool inject = false;
};

int run_verify(const VerifyArgs& a) {
    VerifyOptions opt;
    opt.quick = a.quick;
    opt.threads = a.threads;
    opt.only = a.only;
    opt.work_dir = a.work_dir;
    opt.progress = &std::cerr;
    opt.inject_c1_sign_flip = a.inject;
    if (const char* env = std::getenv("GHOSTSTAT_INJECT_C1_SIGN"))
        if (env[0] && env[0] != '0') opt.inject_c1_sign_flip = true;

    std::vector<CriterionResult> results = run_verification(opt);
    print_results(std::cout, results);
    return all_passed(results) ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"thermal-light ghost imaging: simulation, reconstruction, and "
                 "statistical verification"};
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* c_sim = app.add_subcommand("simulate", "synthesize a measurement run");
    c_sim->add_option("--config", sim.config_path, "config file (flat key=value or JSON)");
    c_sim->add_option("--preset", sim.preset,
                      "built-in protocol: paper-sim or paper-exp");
    c_sim->add_option("--out", sim.out, "output run directory");
    CLI::Option* seed_opt = c_sim->add_option("--seed", sim.seed, "master seed override");
    c_sim->add_option("--threads", sim.threads, "worker threads (0 = all cores)");

    ReconstructArgs rec;
    CLI::App* c_rec = app.add_subcommand("reconstruct", "compute images from a run");
    c_rec->add_option("--run", rec.run_dir, "run directory")->required();
    c_rec->add_option("--transforms", rec.transforms,
                      "comma list: identity,power3,exp,log");
    c_rec->add_option("--estimators", rec.estimators,
                      "comma list: g2,delta-g2,normalized-g2,dgi");
    c_rec->add_option("--out", rec.out, "output directory (default: run dir)");
    c_rec->add_flag("--centered", rec.centered,
                    "two-pass centered differential estimator");
    c_rec->add_option("--threads", rec.threads, "worker threads (0 = all cores)");
    c_rec->add_option("--width", rec.width, "image width for ingested runs");
    c_rec->add_option("--height", rec.height, "image height for ingested runs");

    AnalyzeArgs ana;
    CLI::App* c_ana = app.add_subcommand("analyze",
                                         "region statistics, Gaussian overlap, linearity");
    c_ana->add_option("--run", ana.run_dir, "run directory")->required();
    c_ana->add_option("--recon", ana.recon_dir,
                      "directory with recon_*.f64 files (default: run dir; missing "
                      "reconstructions are recomputed)");
    c_ana->add_option("--transforms", ana.transforms, "comma list");
    c_ana->add_option("--estimators", ana.estimators, "comma list");
    c_ana->add_option("--image", ana.image_path,
                      "PGM object image defining the gray regions (overrides the "
                      "run's own)");
    c_ana->add_option("--out", ana.out, "report directory (default: recon dir)");
    c_ana->add_option("--threads", ana.threads, "worker threads (0 = all cores)");

    IngestArgs ing;
    CLI::App* c_ing = app.add_subcommand("ingest",
                                         "import experimental buckets + pattern stack");
    c_ing->add_option("--buckets", ing.buckets_csv, "bucket CSV, one value per line")
        ->required();
    c_ing->add_option("--stack", ing.stack_path, "recorded pattern stack file")
        ->required();
    c_ing->add_option("--gamma", ing.gamma, "bucket coupling constant");
    c_ing->add_option("--noise", ing.noise, "none | gaussian:<mean>:<variance>");
    c_ing->add_option("--out", ing.out, "output run directory");

    VerifyArgs ver;
    CLI::App* c_ver = app.add_subcommand("verify", "run the acceptance matrix");
    c_ver->add_flag("--quick", ver.quick, "scaled-down matrix, finishes in seconds");
    c_ver->add_option("--threads", ver.threads, "worker threads (0 = all cores)");
    c_ver->add_option("--only", ver.only, "criterion numbers to run (default all)");
    c_ver->add_option("--work-dir", ver.work_dir, "scratch directory");
    c_ver->add_flag("--inject-c1-sign-flip", ver.inject,
                    "self-test hook: must make the linearity criterion fail");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        sim.seed_set = seed_opt->count() > 0;
        if (c_sim->parsed()) return run_simulate(sim);
        if (c_rec->parsed()) return run_reconstruct(rec);
        if (c_ana->parsed()) return run_analyze(ana);
        if (c_ing->parsed()) return run_ingest(ing);
        if (c_ver->parsed()) return run_verify(ver);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return 1;
    } catch (const DegenerateError& e) {
        std::cerr << "degenerate statistic: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
