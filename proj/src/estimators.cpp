#include "ghoststat/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ghoststat/errors.hpp"
#include "ghoststat/io.hpp"
#include "ghoststat/parallel.hpp"
#include "ghoststat/pgm.hpp"

namespace ghoststat {

void CorrAccumulator::init(std::size_t pixels) {
    M = pixels;
    count = 0;
    sum_S = {};
    sum_SR = {};
    sum_F.assign(pixels, {});
    sum_SF.assign(pixels, {});
    sum_SRF.assign(pixels, {});
}

void CorrAccumulator::add_frame(double S, double SR, const double* F) {
    for (std::size_t n = 0; n < M; ++n) {
        const double f = F[n];
        sum_F[n].add(f);
        sum_SF[n].add(S * f);
        sum_SRF[n].add(SR * f);
    }
    sum_S.add(S);
    sum_SR.add(SR);
    ++count;
}

void CorrAccumulator::merge(const CorrAccumulator& other) {
    if (other.M != M) throw ConfigError("cannot merge accumulators of different geometry");
    for (std::size_t n = 0; n < M; ++n) {
        sum_F[n].merge(other.sum_F[n]);
        sum_SF[n].merge(other.sum_SF[n]);
        sum_SRF[n].merge(other.sum_SRF[n]);
    }
    sum_S.merge(other.sum_S);
    sum_SR.merge(other.sum_SR);
    count += other.count;
}

std::vector<CorrAccumulator> accumulate_run(const MeasurementRun& run,
                                            const std::vector<TransformSpec>& transforms,
                                            int threads) {
    run.validate();
    if (transforms.empty()) throw ConfigError("need at least one transform");
    if (run.patterns.has_distribution())
        for (const auto& t : transforms) validate_pairing(run.patterns.dist, t);

    const std::size_t M = run.patterns.M;
    const unsigned workers = resolve_threads(threads);

    std::vector<std::vector<CorrAccumulator>> partial(workers);
    parallel_chunks(run.T, workers, [&](unsigned w, std::size_t begin, std::size_t end) {
        auto& accs = partial[w];
        accs.resize(transforms.size());
        for (auto& a : accs) a.init(M);
        std::vector<double> frame(M), transformed(M);
        for (std::size_t t = begin; t < end; ++t) {
            run.patterns.frame_into(t, frame.data());
            CompensatedSum sr;
            for (std::size_t m = 0; m < M; ++m) sr.add(frame[m]);
            const double SR = sr.value();
            const double S = run.buckets[t];
            for (std::size_t k = 0; k < transforms.size(); ++k) {
                if (transforms[k].kind == TransformKind::Identity) {
                    accs[k].add_frame(S, SR, frame.data());
                } else {
                    apply_transform_into(frame.data(), M, transforms[k], transformed.data());
                    accs[k].add_frame(S, SR, transformed.data());
                }
            }
        }
    });

    std::vector<CorrAccumulator> out = std::move(partial[0]);
    for (unsigned w = 1; w < workers; ++w) {
        if (partial[w].empty()) continue; // worker count was capped below `workers`
        for (std::size_t k = 0; k < transforms.size(); ++k)
            out[k].merge(partial[w][k]);
    }
    return out;
}

MeasurementRun simulate_and_accumulate(const GrayImage& image, const DistributionSpec& dist,
                                       const SeedRecipe& recipe, std::size_t T, double gamma,
                                       const NoiseModel& noise,
                                       const std::vector<TransformSpec>& transforms,
                                       std::vector<CorrAccumulator>& accs_out,
                                       int threads) {
    image.validate();
    dist.validate();
    noise.validate();
    if (T < 2) throw ConfigError("simulation needs at least two frames");
    if (gamma <= 0.0 || !std::isfinite(gamma))
        throw ConfigError("gamma must be positive and finite");
    if (transforms.empty()) throw ConfigError("need at least one transform");
    for (const auto& t : transforms) validate_pairing(dist, t);

    const std::size_t M = image.pixel_count();
    MeasurementRun run;
    run.gamma = gamma;
    run.T = T;
    run.buckets.resize(T);
    run.patterns = PatternSource::from_recipe(dist, recipe, M);
    run.image = image;
    run.noise = noise;

    const unsigned workers = resolve_threads(threads);
    std::vector<std::vector<CorrAccumulator>> partial(workers);
    parallel_chunks(T, workers, [&](unsigned w, std::size_t begin, std::size_t end) {
        auto& accs = partial[w];
        accs.resize(transforms.size());
        for (auto& a : accs) a.init(M);
        std::vector<double> frame(M), transformed(M);
        for (std::size_t t = begin; t < end; ++t) {
            sample_pattern_into(dist, M, t, recipe, frame.data());
            CompensatedSum dot, sr;
            for (std::size_t m = 0; m < M; ++m) {
                dot.add(image.values[m] * frame[m]);
                sr.add(frame[m]);
            }
            const double S = gamma * dot.value() + noise.sample(recipe, t);
            run.buckets[t] = S;
            const double SR = sr.value();
            for (std::size_t k = 0; k < transforms.size(); ++k) {
                if (transforms[k].kind == TransformKind::Identity) {
                    accs[k].add_frame(S, SR, frame.data());
                } else {
                    apply_transform_into(frame.data(), M, transforms[k], transformed.data());
                    accs[k].add_frame(S, SR, transformed.data());
                }
            }
        }
    });

    accs_out = std::move(partial[0]);
    for (unsigned w = 1; w < workers; ++w) {
        if (partial[w].empty()) continue;
        for (std::size_t k = 0; k < transforms.size(); ++k)
            accs_out[k].merge(partial[w][k]);
    }
    return run;
}

Reconstruction extract_reconstruction(Estimator est, const CorrAccumulator& acc,
                                      const TransformSpec& transform) {
    // G2 is a plain average, defined from one frame; the others subtract or
    // divide by means and need at least two.
    if (acc.count < 1) throw ConfigError("estimator needs at least one frame");
    if (est != Estimator::G2 && acc.count < 2)
        throw ConfigError("mean-subtracting estimators need at least two frames");
    const double T = static_cast<double>(acc.count);
    const double mean_S = acc.sum_S.value() / T;

    Reconstruction rec;
    rec.estimator = est;
    rec.transform = transform;
    rec.T = acc.count;
    rec.values.resize(acc.M);

    switch (est) {
        case Estimator::G2:
            for (std::size_t n = 0; n < acc.M; ++n)
                rec.values[n] = acc.sum_SF[n].value() / T;
            break;
        case Estimator::DeltaG2:
            for (std::size_t n = 0; n < acc.M; ++n)
                rec.values[n] = acc.sum_SF[n].value() / T -
                                mean_S * (acc.sum_F[n].value() / T);
            break;
        case Estimator::NormalizedG2: {
            if (mean_S == 0.0)
                throw DegenerateError("normalized correlation undefined: mean bucket is zero");
            for (std::size_t n = 0; n < acc.M; ++n) {
                const double mean_F = acc.sum_F[n].value() / T;
                if (mean_F == 0.0) {
                    std::ostringstream s;
                    s << "normalized correlation undefined: <F> is zero at pixel " << n;
                    throw DegenerateError(s.str());
                }
                rec.values[n] = (acc.sum_SF[n].value() / T) / (mean_S * mean_F);
            }
            break;
        }
        case Estimator::DGI: {
            const double sum_SR = acc.sum_SR.value();
            if (sum_SR == 0.0)
                throw DegenerateError("differential estimator undefined: <S_R> is zero");
            const double ratio = acc.sum_S.value() / sum_SR;
            for (std::size_t n = 0; n < acc.M; ++n)
                rec.values[n] = acc.sum_SF[n].value() / T -
                                ratio * (acc.sum_SRF[n].value() / T);
            break;
        }
    }
    for (double v : rec.values)
        if (!std::isfinite(v)) throw DegenerateError("non-finite reconstruction value");
    return rec;
}

namespace {

Reconstruction one_shot(const MeasurementRun& run, const TransformSpec& transform,
                        Estimator est, int threads) {
    auto accs = accumulate_run(run, {transform}, threads);
    return extract_reconstruction(est, accs[0], transform);
}

} // namespace

Reconstruction reconstruct_g2(const MeasurementRun& run, const TransformSpec& transform,
                              int threads) {
    return one_shot(run, transform, Estimator::G2, threads);
}

Reconstruction reconstruct_delta_g2(const MeasurementRun& run, const TransformSpec& transform,
                                    int threads) {
    return one_shot(run, transform, Estimator::DeltaG2, threads);
}

std::vector<Reconstruction> centered_delta_g2(const MeasurementRun& run,
                                              const std::vector<TransformSpec>& transforms,
                                              const std::vector<CorrAccumulator>& accs,
                                              int threads) {
    run.validate();
    if (accs.size() != transforms.size())
        throw ConfigError("one finished accumulator per transform is required");
    const std::size_t M = run.patterns.M;
    const std::size_t K = transforms.size();
    const double T = static_cast<double>(run.T);

    double mean_S = 0.0;
    std::vector<std::vector<double>> mean_F(K);
    for (std::size_t k = 0; k < K; ++k) {
        if (accs[k].M != M || accs[k].count != run.T)
            throw ConfigError("accumulator does not match the run");
        mean_F[k].resize(M);
        for (std::size_t n = 0; n < M; ++n)
            mean_F[k][n] = accs[k].sum_F[n].value() / T;
    }
    mean_S = accs[0].sum_S.value() / T;

    const unsigned workers = resolve_threads(threads);
    std::vector<std::vector<std::vector<CompensatedSum>>> partial(workers);
    parallel_chunks(run.T, workers, [&](unsigned w, std::size_t begin, std::size_t end) {
        auto& acc = partial[w];
        acc.assign(K, std::vector<CompensatedSum>(M));
        std::vector<double> frame(M), transformed(M);
        for (std::size_t t = begin; t < end; ++t) {
            run.patterns.frame_into(t, frame.data());
            const double ds = run.buckets[t] - mean_S;
            for (std::size_t k = 0; k < K; ++k) {
                const double* F = frame.data();
                if (transforms[k].kind != TransformKind::Identity) {
                    apply_transform_into(frame.data(), M, transforms[k], transformed.data());
                    F = transformed.data();
                }
                for (std::size_t n = 0; n < M; ++n)
                    acc[k][n].add(ds * (F[n] - mean_F[k][n]));
            }
        }
    });
    for (unsigned w = 1; w < workers; ++w) {
        if (partial[w].empty()) continue;
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t n = 0; n < M; ++n) partial[0][k][n].merge(partial[w][k][n]);
    }

    std::vector<Reconstruction> out(K);
    for (std::size_t k = 0; k < K; ++k) {
        out[k].estimator = Estimator::DeltaG2;
        out[k].transform = transforms[k];
        out[k].T = run.T;
        out[k].values.resize(M);
        for (std::size_t n = 0; n < M; ++n)
            out[k].values[n] = partial[0][k][n].value() / T;
    }
    return out;
}

Reconstruction reconstruct_delta_g2_centered(const MeasurementRun& run,
                                             const TransformSpec& transform, int threads) {
    auto accs = accumulate_run(run, {transform}, threads);
    return centered_delta_g2(run, {transform}, accs, threads)[0];
}

Reconstruction reconstruct_normalized_g2(const MeasurementRun& run,
                                         const TransformSpec& transform, int threads) {
    return one_shot(run, transform, Estimator::NormalizedG2, threads);
}

Reconstruction reconstruct_dgi(const MeasurementRun& run, const TransformSpec& transform,
                               int threads) {
    return one_shot(run, transform, Estimator::DGI, threads);
}

void save_reconstruction(const std::string& prefix, const Reconstruction& recon,
                         std::size_t width, std::size_t height) {
    if (width * height != recon.values.size())
        throw ConfigError("reconstruction size does not match requested dimensions");

    PatternStack sidecar;
    sidecar.M = static_cast<std::uint32_t>(recon.values.size());
    sidecar.T = 1;
    sidecar.values = recon.values;
    write_pattern_stack(prefix + ".f64", sidecar);

    const auto [lo_it, hi_it] = std::minmax_element(recon.values.begin(), recon.values.end());
    const double lo = *lo_it, hi = *hi_it;
    const double span = hi - lo;

    std::ofstream out(prefix + ".pgm", std::ios::binary);
    if (!out) throw FormatError("cannot create " + prefix + ".pgm");
    out << "P5\n"
        << "# " << to_string(recon.estimator) << " " << recon.transform.describe()
        << " T=" << recon.T << "\n"
        << "# min-max normalized: raw_min=" << lo << " raw_max=" << hi
        << " (raw values in the .f64 sidecar)\n"
        << width << " " << height << "\n255\n";
    std::vector<unsigned char> raw(recon.values.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = span > 0.0 ? (recon.values[i] - lo) / span : 0.5;
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
    if (!out) throw FormatError("failed writing " + prefix + ".pgm");
}

const char* to_string(Estimator est) {
    switch (est) {
        case Estimator::G2: return "g2";
        case Estimator::DeltaG2: return "delta-g2";
        case Estimator::NormalizedG2: return "normalized-g2";
        case Estimator::DGI: return "dgi";
    }
    throw ConfigError("unknown estimator");
}

Estimator estimator_from_string(const std::string& name) {
    if (name == "g2") return Estimator::G2;
    if (name == "delta-g2" || name == "dg2") return Estimator::DeltaG2;
    if (name == "normalized-g2" || name == "ng2") return Estimator::NormalizedG2;
    if (name == "dgi") return Estimator::DGI;
    throw ConfigError("unknown estimator: " + name);
}

} // namespace ghoststat
