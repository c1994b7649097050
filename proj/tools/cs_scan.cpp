// cs-scan: compressive scanning simulation + BPFA reconstruction front end.
//
// Subcommands: plan, acquire, reconstruct, denoise, evaluate, curve,
// dose-series, phantom. Exit codes: 0 success, 2 usage/validation,
// 3 numerical failure. CS_SCAN_THREADS caps worker parallelism.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "csscan/acquisition.hpp"
#include "csscan/bpfa.hpp"
#include "csscan/errors.hpp"
#include "csscan/io.hpp"
#include "csscan/metrics.hpp"
#include "csscan/parallel.hpp"
#include "csscan/phantom.hpp"
#include "csscan/rng.hpp"
#include "csscan/sampling.hpp"

namespace fs = std::filesystem;
using namespace csscan;

namespace {

double parse_ratio(std::string text) {
    bool percent = false;
    if (!text.empty() && text.back() == '%') {
        percent = true;
        text.pop_back();
    }
    double v = 0.0;
    try {
        v = std::stod(text);
    } catch (const std::exception&) {
        throw ValidationError("cannot parse ratio: " + text);
    }
    if (percent) v /= 100.0;
    if (!(v > 0.0) || v > 1.0) throw ValidationError("ratio out of range (0,1]: " + text);
    return v;
}

std::vector<double> parse_ratio_list(const std::string& text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const std::string tok =
            text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!tok.empty()) out.push_back(parse_ratio(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw ValidationError("empty ratio list");
    return out;
}

std::pair<int, int> parse_size(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos)
        throw ValidationError("size must look like HxW (e.g. 128x128): " + text);
    try {
        const int h = std::stoi(text.substr(0, x));
        const int w = std::stoi(text.substr(x + 1));
        if (h < 1 || w < 1) throw ValidationError("size must be positive: " + text);
        return {h, w};
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception&) {
        throw ValidationError("cannot parse size: " + text);
    }
}

std::pair<int, int> parse_offset(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos)
        throw ValidationError("offset must look like row,col: " + text);
    try {
        return {std::stoi(text.substr(0, comma)), std::stoi(text.substr(comma + 1))};
    } catch (const std::exception&) {
        throw ValidationError("cannot parse offset: " + text);
    }
}

Image crop_image(const Image& img, int r0, int c0, int size) {
    if (r0 < 0 || c0 < 0 || r0 + size > img.height || c0 + size > img.width)
        throw ValidationError("crop window out of bounds");
    Image out(size, size);
    out.peak = img.peak;
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) out.at(r, c) = img.at(r0 + r, c0 + c);
    return out;
}

// ---- shared option blocks ----

struct PlanOptions {
    std::string scheme = "linehop";
    std::string size;
    std::string ratio_text = "0.25";
    double dwell = 4.0;
    int hop_amplitude = 1;
    double hop_prob = 0.5;
    bool unidirectional = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

SamplingPlan build_plan(const PlanOptions& opt, int height, int width) {
    const Scheme scheme = scheme_from_name(opt.scheme);
    if (scheme != Scheme::Raster && !opt.seed_set)
        throw ValidationError("--seed is required for stochastic schemes");
    switch (scheme) {
        case Scheme::Raster:
            return raster_plan(height, width, opt.dwell);
        case Scheme::Uds:
            return uds_plan(height, width, parse_ratio(opt.ratio_text), opt.dwell, opt.seed);
        case Scheme::LineHop: {
            LineHopParams params;
            params.hop_amplitude = opt.hop_amplitude;
            params.hop_prob = opt.hop_prob;
            params.serpentine = !opt.unidirectional;
            params.seed = opt.seed;
            return linehop_plan(height, width, parse_ratio(opt.ratio_text), params, opt.dwell);
        }
    }
    throw ValidationError("unreachable scheme");
}

struct ReconOptions {
    int patch_size = 8;
    int stride = 1;
    int atoms = 64;
    double bp_a = 1.0, bp_b = 1.0;
    double gam_c = 1e-6, gam_d = 1e-6, gam_e = 1e-6, gam_f = 1e-6;
    int batch = 512;
    int epochs = 60;
    std::string mode = "em";
    int warmup = -1;  // -1: half the epochs (EM mode only)
    bool subtract_means = false;
    bool stat_averaging = false;
    double stat_t0 = 1.0;
    double stat_kappa = 0.6;
    double early_stop = 0.0;
    std::uint64_t seed = 0;

    BpfaHyperparams hyper() const {
        BpfaHyperparams h;
        h.atom_count = atoms;
        h.a = bp_a;
        h.b = bp_b;
        h.c = gam_c;
        h.d = gam_d;
        h.e = gam_e;
        h.f = gam_f;
        return h;
    }

    BatchSchedule schedule(std::size_t patch_count) const {
        BatchSchedule s;
        s.batch_size = batch == 0 ? 0
                                  : static_cast<int>(std::min<std::size_t>(batch, patch_count));
        s.epochs = epochs;
        s.shuffle_seed = derive_seed(seed, 0x73687566666c65ull, 0);  // "shuffle"
        return s;
    }

    InferenceOptions inference(int threads) const {
        InferenceOptions o;
        o.mode = inference_mode_from_name(mode);
        o.seed = derive_seed(seed, 0x696e666572ull, 0);  // "infer"
        o.gibbs_warmup_epochs =
            o.mode == InferenceMode::Em ? (warmup < 0 ? epochs / 2 : warmup) : 0;
        o.subtract_patch_means = subtract_means;
        o.stat_averaging = stat_averaging;
        o.stat_t0 = stat_t0;
        o.stat_kappa = stat_kappa;
        o.early_stop_rel_tol = early_stop;
        o.threads = threads;
        return o;
    }

    void describe(Manifest& m) const {
        m.set("patch_size", patch_size);
        m.set("stride", stride);
        m.set("atoms", atoms);
        m.set("bp_a", bp_a);
        m.set("bp_b", bp_b);
        m.set("gamma_c", gam_c);
        m.set("gamma_d", gam_d);
        m.set("gamma_e", gam_e);
        m.set("gamma_f", gam_f);
        m.set("batch", batch);
        m.set("epochs", epochs);
        m.set("mode", mode);
        m.set("warmup_epochs", warmup < 0 ? epochs / 2 : warmup);
        m.set("subtract_means", subtract_means ? 1 : 0);
        m.set("stat_averaging", stat_averaging ? 1 : 0);
        m.set("early_stop_rel_tol", early_stop);
        m.set("seed", seed);
        m.set("rng", Rng::generator_name());
    }
};

void add_recon_flags(CLI::App* cmd, ReconOptions& r, bool seed_required = true) {
    cmd->add_option("--patch-size,-B", r.patch_size, "Patch side length B");
    cmd->add_option("--stride", r.stride, "Patch stride (1 = fully overlapping)");
    cmd->add_option("--atoms,-K", r.atoms, "Dictionary atom count K");
    cmd->add_option("--bp-a", r.bp_a, "Beta process parameter a");
    cmd->add_option("--bp-b", r.bp_b, "Beta process parameter b");
    cmd->add_option("--gamma-c", r.gam_c, "Noise precision prior shape");
    cmd->add_option("--gamma-d", r.gam_d, "Noise precision prior rate");
    cmd->add_option("--gamma-e", r.gam_e, "Weight precision prior shape");
    cmd->add_option("--gamma-f", r.gam_f, "Weight precision prior rate");
    cmd->add_option("--batch", r.batch, "Mini-batch size (0 = full batch)");
    cmd->add_option("--epochs", r.epochs, "Epoch count");
    cmd->add_option("--mode", r.mode, "Inference mode: em or gibbs");
    cmd->add_option("--warmup", r.warmup,
                    "Sampled warm-up epochs before EM updates (-1 = epochs/2)");
    cmd->add_flag("--subtract-means", r.subtract_means, "Remove per-patch observed means");
    cmd->add_flag("--stat-averaging", r.stat_averaging,
                  "Robbins-Monro averaging of sufficient statistics");
    cmd->add_option("--stat-t0", r.stat_t0, "Averaging offset t0");
    cmd->add_option("--stat-kappa", r.stat_kappa, "Averaging decay exponent kappa");
    cmd->add_option("--early-stop", r.early_stop,
                    "Relative objective tolerance for early stop (0 = off)");
    if (seed_required) cmd->add_option("--seed", r.seed, "RNG seed")->required();
}

struct ReconstructionArtifacts {
    Image image;
    Trace trace;
    BpfaState state;
};

ReconstructionArtifacts reconstruct_observation(const Image& obs, const Mask& mask,
                                                const ReconOptions& r, int threads) {
    if (!mask.same_shape(obs)) throw ValidationError("observation and mask shapes differ");
    auto [grid, patches] = extract_patches(obs, mask, r.patch_size, r.stride);
    const auto hyper = r.hyper();
    const auto schedule = r.schedule(patches.size());
    const auto options = r.inference(threads);
    InferenceResult result = run_inference(patches, r.patch_size, hyper, schedule, options);
    ReconstructionArtifacts art;
    art.image = reconstruct_image(result.reconstructed, grid);
    art.trace = std::move(result.trace);
    art.state = std::move(result.state);
    return art;
}

void write_image_outputs(const Image& img, const fs::path& dir, const std::string& stem) {
    write_raw_image(img, dir / (stem + ".raw"));
    write_pgm(img, dir / (stem + ".pgm"), 16);
}

// ---- subcommand implementations ----

struct PlanCmd {
    PlanOptions plan;
    std::string out = "plan.txt";

    void run() const {
        auto [h, w] = parse_size(plan.size);
        SamplingPlan p = build_plan(plan, h, w);
        write_plan(p, out);
        const PlanMetrics m = plan_metrics(p);
        std::cout << "M=" << p.sample_count() << "\n"
                  << "max_jump=" << m.max_jump << "\n"
                  << "mean_jump=" << format_double(m.mean_jump) << "\n"
                  << "overlap_count=" << m.overlap_count << "\n";
    }
};

struct AcquireCmd {
    std::string truth_path;
    std::string plan_path;
    PlanOptions plan;
    std::string noise = "none";
    double sigma0 = 0.05;
    double ref_dwell = 4.0;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir = "acquisition";

    void run() const {
        const Image truth = read_image_any(truth_path);
        SamplingPlan p;
        if (!plan_path.empty()) {
            p = read_plan(plan_path);
        } else {
            if (plan.size.empty()) {
                PlanOptions sized = plan;
                sized.size = std::to_string(truth.height) + "x" + std::to_string(truth.width);
                p = build_plan(sized, truth.height, truth.width);
            } else {
                auto [h, w] = parse_size(plan.size);
                p = build_plan(plan, h, w);
            }
        }
        NoiseSpec n;
        n.kind = noise_kind_from_name(noise);
        n.base_sigma = sigma0;
        n.reference_dwell_us = ref_dwell;
        if (n.kind != NoiseKind::None && !seed_set)
            throw ValidationError("--seed is required when noise is enabled");
        n.seed = seed;

        const Observation obs = acquire(truth, p, n);
        const fs::path dir(out_dir);
        write_raw_image(obs.image, dir / "observation.raw");
        write_pbm(obs.mask, dir / "mask.pbm");
        write_plan(p, dir / "plan.txt");
        Manifest m;
        m.set("command", "acquire");
        m.set("truth", truth_path);
        m.set("scheme", scheme_name(p.scheme));
        m.set("samples", static_cast<std::uint64_t>(p.sample_count()));
        m.set("dwell_us", p.dwell_time_us);
        m.set("noise", noise_kind_name(n.kind));
        m.set("sigma0", n.base_sigma);
        m.set("reference_dwell_us", n.reference_dwell_us);
        m.set("seed", n.seed);
        m.set("rng", Rng::generator_name());
        m.write(dir / "manifest.txt");
        std::cout << "observation=" << (dir / "observation.raw").string() << "\n"
                  << "M=" << p.sample_count() << "\n";
    }
};

struct ReconstructCmd {
    std::string observation_path;
    std::string mask_path;
    ReconOptions recon;
    std::string out_dir = "reconstruction";

    void run() const {
        if (!fs::exists(observation_path))
            throw ValidationError("observation file missing: " + observation_path);
        if (!fs::exists(mask_path)) throw ValidationError("mask file missing: " + mask_path);
        const Image obs = read_image_any(observation_path);
        const Mask mask = read_mask_any(mask_path);
        const int threads = default_thread_count();
        const auto art = reconstruct_observation(obs, mask, recon, threads);

        const fs::path dir(out_dir);
        write_image_outputs(art.image, dir, "reconstruction");
        write_trace_csv(art.trace, dir / "trace.csv");
        write_dictionary_snapshot(art.state, dir / "dictionary.bpfa");
        Manifest m;
        m.set("command", "reconstruct");
        m.set("observation", observation_path);
        m.set("mask", mask_path);
        recon.describe(m);
        m.write(dir / "manifest.txt");
        std::cout << "reconstruction=" << (dir / "reconstruction.raw").string() << "\n"
                  << "epochs_run=" << art.trace.size() << "\n"
                  << "final_objective=" << format_double(art.trace.back().objective) << "\n";
    }
};

struct DenoiseCmd {
    std::string input_path;
    ReconOptions recon;
    std::string out_dir = "denoised";

    void run() const {
        const Image input = read_image_any(input_path);
        const Mask mask = Mask::full(input.height, input.width);
        const int threads = default_thread_count();
        const auto art = reconstruct_observation(input, mask, recon, threads);

        const fs::path dir(out_dir);
        write_image_outputs(art.image, dir, "denoised");
        write_trace_csv(art.trace, dir / "trace.csv");
        write_dictionary_snapshot(art.state, dir / "dictionary.bpfa");
        Manifest m;
        m.set("command", "denoise");
        m.set("input", input_path);
        recon.describe(m);
        m.write(dir / "manifest.txt");
        std::cout << "denoised=" << (dir / "denoised.raw").string() << "\n";
    }
};

struct EvaluateCmd {
    std::string reference_path;
    std::string test_path;
    double peak = 1.0;
    bool drift = false;
    int crop_size = 0;
    std::string crop_offset = "0,0";
    std::string csv_out;

    void run() const {
        const Image ref = read_image_any(reference_path);
        const Image test = read_image_any(test_path);
        std::string csv = "metric,value,offset_row,offset_col\n";
        if (!drift) {
            const double v = psnr(ref, test, peak);
            std::cout << "psnr=" << format_double(v) << "\n";
            csv += "psnr," + format_double(v) + ",,\n";
        } else {
            if (crop_size < 1) throw ValidationError("--crop-size required with --drift");
            auto [r0, c0] = parse_offset(crop_offset);
            const Image crop = crop_image(ref, r0, c0, crop_size);
            const DriftMatch match = drift_matched_psnr(crop, test, crop_size, peak);
            std::cout << "psnr=" << format_double(match.psnr_db) << "\n"
                      << "offset=" << match.row << "," << match.col << "\n";
            csv += "drift_psnr," + format_double(match.psnr_db) + "," +
                   std::to_string(match.row) + "," + std::to_string(match.col) + "\n";
        }
        if (!csv_out.empty()) write_file_atomic(csv_out, csv);
    }
};

struct CurveCmd {
    std::string truth_path;
    std::string ratios_text = "10%,20%,30%,40%,50%";
    int seeds = 10;
    std::uint64_t seed = 0;
    double dwell = 4.0;
    int hop_amplitude = 1;
    double hop_prob = 0.5;
    ReconOptions recon;
    std::string out_dir = "curve";

    void run() const {
        const Image truth = read_image_any(truth_path);
        const std::vector<double> ratios = parse_ratio_list(ratios_text);
        if (seeds < 1) throw ValidationError("--seeds must be >= 1");

        struct Job {
            Scheme scheme;
            double ratio;
            int seed_index;
        };
        std::vector<Job> jobs;
        for (Scheme scheme : {Scheme::Uds, Scheme::LineHop})
            for (double ratio : ratios)
                for (int s = 0; s < seeds; ++s) jobs.push_back({scheme, ratio, s});

        std::vector<double> result(jobs.size(), 0.0);
        const int workers = default_thread_count();
        parallel_for(0, jobs.size(), workers, [&](std::size_t j) {
            const Job& job = jobs[j];
            const std::uint64_t mask_seed =
                derive_seed(seed, 0x6d61736bull, j);  // "mask"
            SamplingPlan plan;
            if (job.scheme == Scheme::Uds) {
                plan = uds_plan(truth.height, truth.width, job.ratio, dwell, mask_seed);
            } else {
                LineHopParams p;
                p.hop_amplitude =
                    std::min(hop_amplitude, max_feasible_hop(truth.height, job.ratio));
                p.hop_prob = hop_prob;
                p.seed = mask_seed;
                plan = linehop_plan(truth.height, truth.width, job.ratio, p, dwell);
            }
            NoiseSpec none;
            const Observation obs = acquire(truth, plan, none);
            ReconOptions r = recon;
            r.seed = derive_seed(seed, 0x7265636full, j);  // "reco"
            const auto art = reconstruct_observation(obs.image, obs.mask, r, 1);
            result[j] = psnr(truth, art.image, 1.0);
        });

        std::string csv = "scheme,ratio,seed,psnr\n";
        for (std::size_t j = 0; j < jobs.size(); ++j)
            csv += scheme_name(jobs[j].scheme) + "," + format_double(jobs[j].ratio) + "," +
                   std::to_string(jobs[j].seed_index) + "," + format_double(result[j]) + "\n";

        std::string summary = "scheme,ratio,mean_psnr\n";
        for (Scheme scheme : {Scheme::Uds, Scheme::LineHop}) {
            for (double ratio : ratios) {
                double total = 0.0;
                int n = 0;
                for (std::size_t j = 0; j < jobs.size(); ++j) {
                    if (jobs[j].scheme == scheme && jobs[j].ratio == ratio) {
                        total += result[j];
                        ++n;
                    }
                }
                summary += scheme_name(scheme) + "," + format_double(ratio) + "," +
                           format_double(total / n) + "\n";
            }
        }

        const fs::path dir(out_dir);
        write_file_atomic(dir / "curve.csv", csv);
        write_file_atomic(dir / "curve_summary.csv", summary);
        Manifest m;
        m.set("command", "curve");
        m.set("truth", truth_path);
        m.set("ratios", ratios_text);
        m.set("seeds", seeds);
        m.set("base_seed", seed);
        m.set("dwell_us", dwell);
        m.set("hop_amplitude", hop_amplitude);
        m.set("hop_prob", hop_prob);
        recon.describe(m);
        m.set("seed", seed);
        m.write(dir / "manifest.txt");
        std::cout << "curve=" << (dir / "curve.csv").string() << "\n"
                  << "runs=" << jobs.size() << "\n";
    }
};

struct DoseSeriesCmd {
    std::string truth_path;
    std::string ratios_text = "50%,40%,30%,20%,10%";
    double ref_dwell = 4.0;
    std::string noise = "gaussian";
    double sigma0 = 0.25;
    int hop_amplitude = 1;
    double hop_prob = 0.5;
    int crop_size = 0;
    std::string crop_offset;
    std::string drift_step;
    std::uint64_t seed = 0;
    ReconOptions recon;
    std::string out_dir = "dose_series";

    void run() const {
        const Image truth = read_image_any(truth_path);
        const std::vector<double> ratios = parse_ratio_list(ratios_text);

        DoseBudget budget;
        budget.reference_dwell_us = ref_dwell;
        budget.reference_samples = static_cast<double>(truth.size());

        NoiseSpec n;
        n.kind = noise_kind_from_name(noise);
        n.base_sigma = sigma0;
        n.reference_dwell_us = ref_dwell;

        LineHopParams params;
        params.hop_amplitude = hop_amplitude;
        params.hop_prob = hop_prob;

        int crop = crop_size > 0 ? crop_size : (3 * std::min(truth.height, truth.width)) / 4;
        int cr0, cc0;
        if (crop_offset.empty()) {
            cr0 = (truth.height - crop) / 2;
            cc0 = (truth.width - crop) / 2;
        } else {
            std::tie(cr0, cc0) = parse_offset(crop_offset);
        }
        const Image reference_crop = crop_image(truth, cr0, cc0, crop);

        std::vector<DoseSeriesElement> series;
        if (drift_step.empty()) {
            series = constrained_dose_series(truth, ratios, budget, params, n, seed);
        } else {
            // Drift injector: element k sees the sample shifted by k * step.
            auto [dr, dc] = parse_offset(drift_step);
            for (std::size_t idx = 0; idx < ratios.size(); ++idx) {
                const Image shifted =
                    shift_image(truth, static_cast<int>(idx) * dr, static_cast<int>(idx) * dc);
                std::vector<DoseSeriesElement> one = constrained_dose_series(
                    shifted, {ratios[idx]}, budget, params, n,
                    derive_seed(seed, 0x64726966ull, idx));  // "drif"
                series.push_back(std::move(one.front()));
            }
        }

        const fs::path dir(out_dir);
        std::string csv = "ratio,dwell_us,samples,psnr,offset_row,offset_col\n";
        Manifest m;
        m.set("command", "dose-series");
        m.set("truth", truth_path);
        m.set("ratios", ratios_text);
        m.set("reference_dwell_us", ref_dwell);
        m.set("budget_us_px", budget.budget());
        m.set("noise", noise);
        m.set("sigma0", sigma0);
        m.set("crop_size", crop);
        m.set("crop_offset", std::to_string(cr0) + "," + std::to_string(cc0));
        m.set("base_seed", seed);
        recon.describe(m);
        m.set("seed", seed);

        for (std::size_t idx = 0; idx < series.size(); ++idx) {
            const auto& elem = series[idx];
            const std::string tag = "r" + std::to_string(idx);
            ReconOptions r = recon;
            r.seed = derive_seed(seed, 0x7265636full, idx);
            const auto art = reconstruct_observation(elem.observation.image,
                                                     elem.observation.mask, r,
                                                     default_thread_count());
            write_image_outputs(art.image, dir, "reconstruction_" + tag);
            write_raw_image(elem.observation.image, dir / ("observation_" + tag + ".raw"));
            write_pbm(elem.observation.mask, dir / ("mask_" + tag + ".pbm"));
            const DriftMatch match = drift_matched_psnr(reference_crop, art.image, crop, 1.0);
            csv += format_double(elem.ratio) + "," + format_double(elem.dwell_time_us) + "," +
                   std::to_string(elem.observation.plan.sample_count()) + "," +
                   format_double(match.psnr_db) + "," + std::to_string(match.row) + "," +
                   std::to_string(match.col) + "\n";
            m.set("dwell_us_" + tag, elem.dwell_time_us);
            m.set("samples_" + tag,
                  static_cast<std::uint64_t>(elem.observation.plan.sample_count()));
        }
        write_file_atomic(dir / "dose_series.csv", csv);
        m.write(dir / "manifest.txt");
        std::cout << "series=" << (dir / "dose_series.csv").string() << "\n"
                  << "elements=" << series.size() << "\n";
    }
};

struct PhantomCmd {
    std::string size = "128x128";
    std::string lattice = "square";
    double spacing = 16.0;
    double sigma = 2.8;
    double contrast = 0.85;
    double background = 0.08;
    std::string out = "phantom.raw";
    std::string pgm_out;

    void run() const {
        PhantomParams p;
        std::tie(p.height, p.width) = parse_size(size);
        p.lattice = lattice_from_name(lattice);
        p.spacing = spacing;
        p.sigma = sigma;
        p.contrast = contrast;
        p.background = background;
        const Image img = lattice_phantom(p);
        const fs::path path(out);
        if (path.extension() == ".pgm")
            write_pgm(img, path, 16);
        else
            write_raw_image(img, path);
        if (!pgm_out.empty()) write_pgm(img, pgm_out, 16);
        std::cout << "phantom=" << out << "\n";
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cs-scan: compressive scanning acquisition simulation and BPFA reconstruction"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI-style key=value file");

    PlanCmd plan_cmd;
    auto* plan = app.add_subcommand("plan", "Generate a sampling plan");
    plan->add_option("--scheme", plan_cmd.plan.scheme, "raster, uds or linehop");
    plan->add_option("--size", plan_cmd.plan.size, "Grid size HxW")->required();
    plan->add_option("--ratio", plan_cmd.plan.ratio_text, "Sampling ratio (fraction or %)");
    plan->add_option("--dwell", plan_cmd.plan.dwell, "Dwell time per pixel, microseconds");
    plan->add_option("--hop-amplitude", plan_cmd.plan.hop_amplitude, "Line hop half-width h");
    plan->add_option("--hop-prob", plan_cmd.plan.hop_prob, "Per-column hop probability");
    plan->add_flag("--unidirectional", plan_cmd.plan.unidirectional,
                   "Scan every line left-to-right instead of serpentine");
    plan->add_option("--seed", plan_cmd.plan.seed, "RNG seed")
        ->each([&](const std::string&) { plan_cmd.plan.seed_set = true; });
    plan->add_option("-o,--out", plan_cmd.out, "Output plan file");
    plan->callback([&] { plan_cmd.run(); });

    AcquireCmd acquire_cmd;
    auto* acq = app.add_subcommand("acquire", "Apply a sampling plan to a ground-truth image");
    acq->add_option("--truth", acquire_cmd.truth_path, "Ground-truth image (.pgm/.raw)")
        ->required();
    acq->add_option("--plan", acquire_cmd.plan_path, "Plan file (overrides scheme options)");
    acq->add_option("--scheme", acquire_cmd.plan.scheme, "raster, uds or linehop");
    acq->add_option("--size", acquire_cmd.plan.size, "Grid size HxW (defaults to image size)");
    acq->add_option("--ratio", acquire_cmd.plan.ratio_text, "Sampling ratio");
    acq->add_option("--dwell", acquire_cmd.plan.dwell, "Dwell time, microseconds");
    acq->add_option("--hop-amplitude", acquire_cmd.plan.hop_amplitude, "Line hop half-width");
    acq->add_option("--hop-prob", acquire_cmd.plan.hop_prob, "Per-column hop probability");
    acq->add_option("--noise", acquire_cmd.noise, "none, gaussian or poisson");
    acq->add_option("--sigma0", acquire_cmd.sigma0, "Noise std at reference dwell");
    acq->add_option("--ref-dwell", acquire_cmd.ref_dwell, "Reference dwell, microseconds");
    acq->add_option("--seed", acquire_cmd.seed, "RNG seed")->each([&](const std::string&) {
        acquire_cmd.seed_set = true;
        acquire_cmd.plan.seed = acquire_cmd.seed;
        acquire_cmd.plan.seed_set = true;
    });
    acq->add_option("-o,--out", acquire_cmd.out_dir, "Output directory");
    acq->callback([&] { acquire_cmd.run(); });

    ReconstructCmd recon_cmd;
    auto* rec = app.add_subcommand("reconstruct", "BPFA reconstruction from an observation");
    rec->add_option("--observation", recon_cmd.observation_path, "Observation image")->required();
    rec->add_option("--mask", recon_cmd.mask_path, "Mask file (.pbm/.txt)")->required();
    add_recon_flags(rec, recon_cmd.recon);
    rec->add_option("-o,--out", recon_cmd.out_dir, "Output directory");
    rec->callback([&] { recon_cmd.run(); });

    DenoiseCmd denoise_cmd;
    auto* den = app.add_subcommand("denoise", "Full-mask BPFA denoising");
    den->add_option("--input", denoise_cmd.input_path, "Input image")->required();
    add_recon_flags(den, denoise_cmd.recon);
    den->add_option("-o,--out", denoise_cmd.out_dir, "Output directory");
    den->callback([&] { denoise_cmd.run(); });

    EvaluateCmd eval_cmd;
    auto* eva = app.add_subcommand("evaluate", "PSNR / drift-matched PSNR between two images");
    eva->add_option("--reference", eval_cmd.reference_path, "Reference image")->required();
    eva->add_option("--test", eval_cmd.test_path, "Test image")->required();
    eva->add_option("--peak", eval_cmd.peak, "PSNR peak value");
    eva->add_flag("--drift", eval_cmd.drift, "Drift-matched search");
    eva->add_option("--crop-size", eval_cmd.crop_size, "Reference crop side length");
    eva->add_option("--crop-offset", eval_cmd.crop_offset, "Crop origin row,col in reference");
    eva->add_option("--csv", eval_cmd.csv_out, "Optional CSV output path");
    eva->callback([&] { eval_cmd.run(); });

    CurveCmd curve_cmd;
    auto* cur = app.add_subcommand("curve", "UDS vs line-hop PSNR curve");
    cur->add_option("--truth", curve_cmd.truth_path, "Ground-truth image")->required();
    cur->add_option("--ratios", curve_cmd.ratios_text, "Comma-separated ratio list");
    cur->add_option("--seeds", curve_cmd.seeds, "Mask realisations per (scheme, ratio)");
    cur->add_option("--dwell", curve_cmd.dwell, "Dwell time, microseconds");
    cur->add_option("--hop-amplitude", curve_cmd.hop_amplitude, "Line hop half-width");
    cur->add_option("--hop-prob", curve_cmd.hop_prob, "Per-column hop probability");
    add_recon_flags(cur, curve_cmd.recon, false);
    cur->add_option("--seed", curve_cmd.seed, "Base seed")->required();
    cur->add_option("-o,--out", curve_cmd.out_dir, "Output directory");
    cur->callback([&] {
        curve_cmd.recon.seed = curve_cmd.seed;
        curve_cmd.run();
    });

    DoseSeriesCmd dose_cmd;
    auto* dose = app.add_subcommand("dose-series", "Constrained-dose line-hop series");
    dose->add_option("--truth", dose_cmd.truth_path, "Ground-truth image")->required();
    dose->add_option("--ratios", dose_cmd.ratios_text, "Comma-separated ratio list");
    dose->add_option("--ref-dwell", dose_cmd.ref_dwell, "Reference dwell (budget = dwell * N)");
    dose->add_option("--noise", dose_cmd.noise, "none, gaussian or poisson");
    dose->add_option("--sigma0", dose_cmd.sigma0, "Noise std at reference dwell");
    dose->add_option("--hop-amplitude", dose_cmd.hop_amplitude, "Line hop half-width");
    dose->add_option("--hop-prob", dose_cmd.hop_prob, "Per-column hop probability");
    dose->add_option("--crop-size", dose_cmd.crop_size,
                     "Reference crop side (default 3/4 of min side)");
    dose->add_option("--crop-offset", dose_cmd.crop_offset, "Crop origin (default centered)");
    dose->add_option("--drift-step", dose_cmd.drift_step,
                     "Inject row,col sample drift per series element");
    add_recon_flags(dose, dose_cmd.recon, false);
    dose->add_option("--seed", dose_cmd.seed, "Base seed")->required();
    dose->add_option("-o,--out", dose_cmd.out_dir, "Output directory");
    dose->callback([&] {
        dose_cmd.recon.seed = dose_cmd.seed;
        dose_cmd.run();
    });

    PhantomCmd phantom_cmd;
    auto* pha = app.add_subcommand("phantom", "Generate a lattice-of-blobs ground truth");
    pha->add_option("--size", phantom_cmd.size, "Image size HxW");
    pha->add_option("--lattice", phantom_cmd.lattice, "square or hex");
    pha->add_option("--spacing", phantom_cmd.spacing, "Lattice constant, pixels");
    pha->add_option("--sigma", phantom_cmd.sigma, "Blob width, pixels");
    pha->add_option("--contrast", phantom_cmd.contrast, "Blob peak above background");
    pha->add_option("--background", phantom_cmd.background, "Background level");
    pha->add_option("-o,--out", phantom_cmd.out, "Output image (.raw or .pgm)");
    pha->add_option("--pgm", phantom_cmd.pgm_out, "Also write a 16-bit PGM preview");
    pha->callback([&] { phantom_cmd.run(); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
