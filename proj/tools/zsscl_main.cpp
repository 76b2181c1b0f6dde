// zsscl: reconstruct irregularly sampled seismic gathers by zero-shot
// self-consistency training of a small convolutional autoencoder.
//
// Subcommands: synth, simulate-missing, reconstruct, evaluate, benchmark.
// Exit codes: 0 success, 1 compute failure (divergence), 2 usage/parse error.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>
#include <vector>

#include "zsscl/zsscl.hpp"

namespace {

using namespace zsscl;

struct TrainFlags {
    int iterations = 2000;
    double lr = 1e-3;
    double w1 = 1.0, w2 = 1.0, w3 = 1.0;
    double rprime_fraction = 0.0;  // 0 = match the base mask
    std::uint64_t seed = 0;
    std::string loss = "scl";
    int tile_h = 512;
    int tile_w = 256;
    double overlap = 0.5;
    int history_stride = 1;

    PipelineConfig pipeline() const {
        PipelineConfig cfg;
        cfg.net.init_seed = seed;
        cfg.train.iterations = iterations;
        cfg.train.learning_rate = lr;
        cfg.train.w1 = w1;
        cfg.train.w2 = w2;
        cfg.train.w3 = w3;
        cfg.train.seed = seed;
        cfg.train.history_stride = history_stride;
        cfg.train.loss = loss_kind_from_string(loss);
        if (rprime_fraction > 0.0) {
            cfg.train.rprime.mode = RPrimePolicy::Mode::fixed_fraction;
            cfg.train.rprime.fraction = rprime_fraction;
        }
        cfg.tile_h = tile_h;
        cfg.tile_w = tile_w;
        cfg.overlap = overlap;
        return cfg;
    }
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--loss", f.loss, "Training objective: scl or traditional")
        ->check(CLI::IsMember({"scl", "traditional"}))
        ->capture_default_str();
    cmd->add_option("--iterations", f.iterations, "Training iterations per tile")->capture_default_str();
    cmd->add_option("--lr", f.lr, "Learning rate")->capture_default_str();
    cmd->add_option("--seed", f.seed, "Seed for init and the R' stream")->capture_default_str();
    cmd->add_option("--w1", f.w1, "Weight of the data term")->capture_default_str();
    cmd->add_option("--w2", f.w2, "Weight of the re-masked data term")->capture_default_str();
    cmd->add_option("--w3", f.w3, "Weight of the output-consistency term")->capture_default_str();
    cmd->add_option("--rprime-fraction", f.rprime_fraction,
                    "Fixed R' missing fraction (0 matches the input mask)")
        ->capture_default_str();
    cmd->add_option("--tile-h", f.tile_h, "Tile height in samples")->capture_default_str();
    cmd->add_option("--tile-w", f.tile_w, "Tile width in traces")->capture_default_str();
    cmd->add_option("--overlap", f.overlap, "Tile overlap fraction")->capture_default_str();
    cmd->add_option("--history-stride", f.history_stride, "Loss history sampling stride")
        ->capture_default_str();
}

void require_input_file(const std::string& path) {
    if (!std::filesystem::exists(path)) throw UsageError("input file does not exist: " + path);
}

void write_manifest(const std::string& path, const std::string& subcommand,
                    const std::vector<std::pair<std::string, std::string>>& kv,
                    double seconds) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open manifest for writing: " + path);
    os << "# zsscl " << subcommand << " manifest; reusable as --config\n";
    os << "[" << subcommand << "]\n";
    for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", seconds);
    os << "# wall_seconds=" << buf << "\n";
    if (!os) throw IoError("write failed: " + path);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

// ---- benchmark machinery ----

struct BenchRun {
    double fraction;
    std::uint64_t seed;
    LossKind arm;
    double ssim_v = 0.0, r2 = 0.0, mu = 0.0, seconds = 0.0;
};

void run_benchmark_case(BenchRun& run, const Gather& scene, int iterations) {
    const TraceMask R =
        generate_mask(scene.n_traces, run.fraction, 9000 + run.seed * 131 + static_cast<std::uint64_t>(run.fraction * 100));
    const Gather decimated = apply_mask(scene, R);

    PipelineConfig cfg;
    cfg.net.init_seed = run.seed;
    cfg.train.seed = run.seed;
    cfg.train.iterations = iterations;
    cfg.train.loss = run.arm;
    cfg.train.history_stride = iterations;  // keep the history light

    PipelineResult res = reconstruct_gather(decimated, R, cfg);
    run.ssim_v = ssim(res.recon, scene);
    run.r2 = r_squared(res.recon, scene);
    run.mu = pca_noise_std(res.recon);
    run.seconds = res.seconds;
}

int cmd_benchmark(int n_seeds, const std::vector<double>& fractions, const std::string& out_dir,
                  int iterations, int jobs) {
    if (n_seeds < 1) throw UsageError("--seeds must be >= 1");
    for (double f : fractions)
        if (f < 0.0 || f >= 1.0) throw UsageError("fractions must be in [0,1)");
    std::filesystem::create_directories(out_dir);

    std::cout << "benchmark seeds=" << n_seeds << " iterations=" << iterations << " jobs=" << jobs
              << " fractions=";
    for (std::size_t i = 0; i < fractions.size(); ++i)
        std::cout << (i ? "," : "") << fmt(fractions[i]);
    std::cout << "\n";

    const Gather scene = benchmark_scene();
    std::vector<BenchRun> runs;
    for (double f : fractions)
        for (int s = 0; s < n_seeds; ++s)
            for (LossKind arm : {LossKind::scl, LossKind::traditional})
                runs.push_back(BenchRun{f, static_cast<std::uint64_t>(s), arm});

    std::atomic<std::size_t> next{0};
    auto worker = [&runs, &scene, &next, iterations]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= runs.size()) return;
            run_benchmark_case(runs[i], scene, iterations);
        }
    };
    const int n_threads =
        std::max(1, std::min<int>(jobs, static_cast<int>(runs.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    // Canonical ordering regardless of completion order.
    std::sort(runs.begin(), runs.end(), [](const BenchRun& a, const BenchRun& b) {
        if (a.fraction != b.fraction) return a.fraction < b.fraction;
        if (a.arm != b.arm) return to_string(a.arm) < to_string(b.arm);
        return a.seed < b.seed;
    });

    const std::string csv_path = out_dir + "/results.csv";
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot open " + csv_path);
    csv << "fraction,arm,seed,ssim,r_squared,noise_std,seconds\n";
    for (const auto& r : runs)
        csv << fmt(r.fraction) << "," << to_string(r.arm) << "," << r.seed << "," << fmt(r.ssim_v)
            << "," << fmt(r.r2) << "," << fmt(r.mu) << "," << fmt(r.seconds) << "\n";
    csv.close();

    std::ostringstream summary;
    for (double f : fractions) {
        for (LossKind arm : {LossKind::scl, LossKind::traditional}) {
            std::vector<double> ss, rr;
            for (const auto& r : runs)
                if (r.fraction == f && r.arm == arm) {
                    ss.push_back(r.ssim_v);
                    rr.push_back(r.r2);
                }
            auto mean = [](const std::vector<double>& v) {
                double m = 0.0;
                for (double x : v) m += x;
                return m / static_cast<double>(v.size());
            };
            auto stdev = [&mean](const std::vector<double>& v) {
                const double m = mean(v);
                double s = 0.0;
                for (double x : v) s += (x - m) * (x - m);
                return v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
            };
            char line[256];
            std::snprintf(line, sizeof(line),
                          "fraction %.2f  %-11s  ssim %.4f +- %.4f   r2 %.4f +- %.4f\n", f,
                          to_string(arm).c_str(), mean(ss), stdev(ss), mean(rr), stdev(rr));
            summary << line;
        }
        int wins = 0;
        for (int s = 0; s < n_seeds; ++s) {
            double scl_v = 0.0, trad_v = 0.0;
            for (const auto& r : runs)
                if (r.fraction == f && r.seed == static_cast<std::uint64_t>(s)) {
                    (r.arm == LossKind::scl ? scl_v : trad_v) = r.ssim_v;
                }
            if (scl_v > trad_v) ++wins;
        }
        char line[128];
        std::snprintf(line, sizeof(line), "fraction %.2f  scl wins %d/%d seeds on ssim\n", f, wins,
                      n_seeds);
        summary << line;
    }
    const std::string summary_path = out_dir + "/summary.txt";
    std::ofstream sf(summary_path);
    sf << summary.str();
    sf.close();
    std::cout << summary.str();
    std::cout << "results: " << csv_path << "\nsummary: " << summary_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-shot self-consistency reconstruction of seismic gathers"};
    app.require_subcommand(1);
    // Key=value config files ("#" comments, subcommand options under a
    // [subcommand] section). Run manifests are valid config files, so any
    // run can be replayed with --config. Command-line flags win.
    app.set_config("--config", "", "Read options from a key=value file");
    app.fallthrough();

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "Write a synthetic benchmark gather");
    std::string synth_out;
    double synth_noise = 0.0;
    std::uint64_t synth_seed = 0;
    synth->add_option("--out", synth_out, "Output gather (.zsg grid or .sgy)")->required();
    synth->add_option("--noise-std", synth_noise,
                      "Additive Gaussian noise level as a fraction of the peak amplitude")
        ->capture_default_str();
    synth->add_option("--seed", synth_seed, "Noise seed")->capture_default_str();

    // ---- simulate-missing ----
    auto* sim = app.add_subcommand("simulate-missing", "Randomly decimate traces");
    std::string sim_in, sim_out, sim_mask_out;
    double sim_fraction = 0.5;
    std::uint64_t sim_seed = 0;
    sim->add_option("input,--input", sim_in, "Input gather")->required();
    sim->add_option("--fraction", sim_fraction, "Fraction of traces to drop")->capture_default_str();
    sim->add_option("--seed", sim_seed, "Mask seed")->capture_default_str();
    sim->add_option("--out", sim_out, "Decimated gather path")->required();
    sim->add_option("--mask-out", sim_mask_out, "Mask file path");

    // ---- reconstruct ----
    auto* rec = app.add_subcommand("reconstruct", "Train per-gather and fill missing traces");
    std::string rec_in, rec_mask, rec_out, rec_history, rec_manifest, rec_checkpoint, rec_net_out;
    TrainFlags rec_flags;
    rec->add_option("input,--input", rec_in, "Input gather with missing traces")->required();
    rec->add_option("--mask", rec_mask, "Mask file; omitted means detect silent traces");
    rec->add_option("--out", rec_out, "Reconstructed gather path")->required();
    rec->add_option("--net-out", rec_net_out, "Optional raw network output path");
    rec->add_option("--history", rec_history, "Loss history CSV path");
    rec->add_option("--manifest", rec_manifest, "Run manifest path (default <out>.manifest)");
    rec->add_option("--checkpoint", rec_checkpoint, "Save trained parameters here");
    add_train_flags(rec, rec_flags);

    // ---- evaluate ----
    auto* eval = app.add_subcommand("evaluate", "Compare a reconstruction against a reference");
    std::string eval_recon, eval_truth, eval_report, eval_csv;
    eval->add_option("recon", eval_recon, "Reconstructed gather")->required();
    eval->add_option("truth", eval_truth, "Reference gather")->required();
    eval->add_option("--report", eval_report, "Write the text report here");
    eval->add_option("--csv", eval_csv, "Write the CSV report here");

    // ---- benchmark ----
    auto* bench = app.add_subcommand("benchmark", "Compare both objectives on the benchmark scene");
    int bench_seeds = 10;
    std::vector<double> bench_fractions{0.3, 0.5};
    std::string bench_out = "benchmark-out";
    int bench_iterations = 2000;
    int bench_jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    bench->add_option("--seeds", bench_seeds, "Number of seeds per arm")->capture_default_str();
    bench->add_option("--fractions", bench_fractions, "Missing fractions to test")
        ->delimiter(',')
        ->capture_default_str();
    bench->add_option("--out", bench_out, "Output directory")->capture_default_str();
    bench->add_option("--iterations", bench_iterations, "Training iterations per run")
        ->capture_default_str();
    bench->add_option("--jobs", bench_jobs, "Concurrent runs")->capture_default_str();

    try {
        app.parse(argc, argv);

        if (*synth) {
            Gather g = benchmark_scene(synth_noise * peak_amplitude(benchmark_scene()), synth_seed);
            write_gather(g, synth_out);
            std::cout << "synth noise-std=" << fmt(synth_noise) << " seed=" << synth_seed << "\n";
            std::cout << "wrote " << synth_out << " (" << g.n_samples << "x" << g.n_traces << ")\n";
            return 0;
        }

        if (*sim) {
            require_input_file(sim_in);
            const Gather g = read_gather(sim_in);
            const TraceMask mask = generate_mask(g.n_traces, sim_fraction, sim_seed);
            write_gather(apply_mask(g, mask), sim_out);
            if (!sim_mask_out.empty()) write_mask(mask, sim_mask_out);
            std::cout << "simulate-missing input=" << sim_in << " fraction=" << fmt(sim_fraction)
                      << " seed=" << sim_seed << "\n";
            std::cout << "dropped " << mask.missing_count() << "/" << g.n_traces << " traces -> "
                      << sim_out << "\n";
            return 0;
        }

        if (*rec) {
            require_input_file(rec_in);
            const Gather input = read_gather(rec_in);
            std::optional<TraceMask> mask;
            if (!rec_mask.empty()) mask = read_mask(rec_mask);

            const PipelineConfig cfg = rec_flags.pipeline();
            PipelineResult res = reconstruct_gather(input, mask, cfg);
            write_gather(res.recon, rec_out);
            if (!rec_net_out.empty()) write_gather(res.net_field, rec_net_out);
            if (!rec_history.empty()) {
                std::ofstream os(rec_history);
                if (!os) throw IoError("cannot open loss history for writing: " + rec_history);
                for (std::size_t tile = 0; tile < res.tile_histories.size(); ++tile) {
                    if (res.tile_histories.size() > 1) os << "# tile " << tile << "\n";
                    write_loss_history(res.tile_histories[tile], os);
                }
            }
            if (!rec_checkpoint.empty()) save_checkpoint(res.params, rec_checkpoint);

            const std::string manifest_path =
                rec_manifest.empty() ? rec_out + ".manifest" : rec_manifest;
            write_manifest(manifest_path, "reconstruct",
                           {{"input", rec_in},
                            {"mask", rec_mask},
                            {"out", rec_out},
                            {"net-out", rec_net_out},
                            {"history", rec_history},
                            {"checkpoint", rec_checkpoint},
                            {"loss", rec_flags.loss},
                            {"iterations", std::to_string(rec_flags.iterations)},
                            {"lr", fmt(rec_flags.lr)},
                            {"seed", std::to_string(rec_flags.seed)},
                            {"w1", fmt(rec_flags.w1)},
                            {"w2", fmt(rec_flags.w2)},
                            {"w3", fmt(rec_flags.w3)},
                            {"rprime-fraction", fmt(rec_flags.rprime_fraction)},
                            {"tile-h", std::to_string(rec_flags.tile_h)},
                            {"tile-w", std::to_string(rec_flags.tile_w)},
                            {"overlap", fmt(rec_flags.overlap)},
                            {"history-stride", std::to_string(rec_flags.history_stride)}},
                           res.seconds);
            std::cout << "reconstructed " << rec_in << " -> " << rec_out << " ("
                      << res.mask.missing_count() << " missing traces, " << fmt(res.seconds)
                      << " s)\nmanifest: " << manifest_path << "\n";
            return 0;
        }

        if (*eval) {
            require_input_file(eval_recon);
            require_input_file(eval_truth);
            const Gather recon = read_gather(eval_recon);
            const Gather truth = read_gather(eval_truth);
            MetricsReport report;
            report.ssim = ssim(recon, truth);
            report.r_squared = r_squared(recon, truth);
            report.noise_std_recon = pca_noise_std(recon);
            report.noise_std_truth = pca_noise_std(truth);
            const std::string text = metrics_text(report);
            std::cout << text;
            if (!eval_report.empty()) {
                std::ofstream os(eval_report);
                if (!os) throw IoError("cannot open report for writing: " + eval_report);
                os << text;
            }
            if (!eval_csv.empty()) write_metrics_csv(report, eval_csv);
            return 0;
        }

        if (*bench) return cmd_benchmark(bench_seeds, bench_fractions, bench_out, bench_iterations, bench_jobs);

        return 2;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) return app.exit(e);
        app.exit(e);
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingError& e) {
        std::cerr << "training failed: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
