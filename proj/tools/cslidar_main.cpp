// cslidar: compressed-sensing photon-counting lidar simulator and
// reconstruction tool.
//
//   cslidar scene       synthesize a depth scene and save it as PSCENE
//   cslidar simulate    acquire masked photon-count traces from a scene
//   cslidar reconstruct solve per-depth frames and export a point cloud
//   cslidar analyze     information bounds, photon budgets, incoherence
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cslidar/analysis.hpp"
#include "cslidar/config.hpp"
#include "cslidar/io.hpp"
#include "cslidar/metrics.hpp"
#include "cslidar/pipeline.hpp"
#include "cslidar/scene.hpp"

namespace {

using namespace cslidar;

struct ConfigCli {
    std::string preset;
    std::string config_path;
    std::vector<std::string> overrides;

    void attach(CLI::App* cmd) {
        cmd->add_option("--preset", preset, "built-in preset: close-target or distant-target");
        cmd->add_option("--config", config_path, "key=value config file");
        cmd->add_option("--set", overrides, "override a single config key, e.g. --set masks=256")
            ->take_all();
    }

    RunConfig resolve() const {
        RunConfig cfg = preset.empty() ? RunConfig{} : run_preset(preset);
        if (!config_path.empty()) load_config(cfg, config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
            cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
        }
        return cfg;
    }
};

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory " + dir + ": " + ec.message());
}

int cmd_scene(const std::string& kind, int size, int width, int height, double range_a,
              double range_b, double range_step, int bars, int blobs, double albedo,
              std::uint64_t seed, const std::string& out) {
    const int w = width > 0 ? width : size;
    const int h = height > 0 ? height : size;
    SceneParams p;
    p.range_a = range_a;
    p.range_b = range_b;
    p.range_step = range_step;
    p.bar_count = bars;
    p.blob_count = blobs;
    p.albedo = albedo;
    p.seed = seed;
    SceneKind k;
    if (kind == "two_plane") k = SceneKind::two_plane;
    else if (kind == "bars") k = SceneKind::bars;
    else if (kind == "random_blobs") k = SceneKind::random_blobs;
    else throw std::invalid_argument("unknown scene kind '" + kind + "'");

    const DepthScene scene = generate_scene(k, w, h, p);
    save_scene(scene, out);

    std::size_t filled = 0;
    double rmin = 0.0, rmax = 0.0;
    for (std::size_t i = 0; i < scene.ranges.size(); ++i)
        if (scene.has_return(i)) {
            if (!filled || scene.ranges[i] < rmin) rmin = scene.ranges[i];
            if (!filled || scene.ranges[i] > rmax) rmax = scene.ranges[i];
            ++filled;
        }
    std::printf("scene %s: %dx%d, %zu/%d pixels with returns (%.1f%%), ranges %.3f..%.3f m\n",
                kind.c_str(), w, h, filled, scene.pixel_count(),
                100.0 * filled / scene.pixel_count(), rmin, rmax);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_simulate(const std::string& scene_path, const std::string& out_dir,
                 const ConfigCli& ccli, bool raster) {
    RunConfig cfg = ccli.resolve();
    const DepthScene scene = load_scene(scene_path);
    ensure_dir(out_dir);
    if (raster) cfg.differential = false;

    const SimulationOutput sim = simulate_scene(scene, cfg, raster);
    write_simulation(sim, out_dir);

    const long long pulses = static_cast<long long>(sim.schedule.rows.size()) *
                             sim.schedule.repeats * (sim.cfg.differential ? 2 : 1);
    std::printf("simulated %zu %s masks x %d repeats (%s), %lld pulses\n",
                sim.schedule.rows.size(), raster ? "raster" : "binary", sim.schedule.repeats,
                sim.cfg.differential ? "differential" : "single-sided", pulses);
    std::printf("photon scale: %.6g detected photons/pulse for a unit-albedo pixel at %.1f m\n",
                sim.cfg.illum.photons_per_pulse_per_pixel, sim.cfg.illum.reference_range_m);
    std::printf("wrote %zu trace files + manifest to %s\n",
                sim.traces.size() * (sim.cfg.differential ? 2 : 1), out_dir.c_str());
    return 0;
}

int cmd_reconstruct(const std::string& traces_dir, const std::string& out_dir,
                    const ConfigCli& ccli, const std::string& objective, int mask_limit,
                    bool raster, const std::string& truth_path) {
    RunConfig cfg = ccli.resolve();
    if (objective == "tv") cfg.solver.objective = Objective::tv;
    else if (objective == "l1") cfg.solver.objective = Objective::l1;
    else if (!objective.empty())
        throw std::invalid_argument("unknown objective '" + objective + "'");

    SimulationOutput sim = read_simulation(traces_dir);
    if (raster && !sim.raster)
        throw std::runtime_error("--raster given but " + traces_dir +
                                 " holds a binary-mask acquisition");
    ensure_dir(out_dir);

    const ReconstructionOutput rec = reconstruct_pipeline(sim, cfg, mask_limit);
    for (const auto& w : rec.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());

    write_ply(rec.cloud, sim.width, sim.height, cfg.fov_mrad * 1e-3, out_dir + "/cloud.ply");
    if (rec.frames.empty()) {
        std::printf("no depth frames reconstructed; wrote empty point cloud %s/cloud.ply\n",
                    out_dir.c_str());
        return 0;
    }
    write_frameset_csv(rec.frame_set, out_dir + "/frameset.csv");
    if (!rec.diagnostics.empty())
        write_diagnostics_csv(rec.diagnostics, out_dir + "/diagnostics.csv");
    for (std::size_t b = 0; b < rec.frames.size(); ++b) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%02zu.pgm", b);
        write_pgm16(rec.frames[b], out_dir + "/" + name);
        std::printf("frame %02zu: depth %.3f m (trace bin %d)", b, rec.frame_set.depth_m[b],
                    rec.frame_set.peak_bins[b]);
        if (b < rec.diagnostics.size())
            std::printf(", %d iterations, residual %.4g%s", rec.diagnostics[b].iterations,
                        rec.diagnostics[b].final_residual,
                        rec.diagnostics[b].converged ? "" : " (not converged)");
        std::printf("\n");
    }
    std::printf("point cloud: %zu points -> %s/cloud.ply\n", rec.cloud.points.size(),
                out_dir.c_str());

    if (!truth_path.empty()) {
        const DepthScene truth = load_scene(truth_path);
        const auto gt = ground_truth_frames(truth, rec.frame_set.peak_bins,
                                            rec.frame_set.window_bins, sim.cfg.det.bin_width_s);
        for (std::size_t b = 0; b < rec.frames.size(); ++b)
            std::printf("frame %02zu vs truth: PSNR %.2f dB, NCC %.3f\n", b,
                        psnr(rec.frames[b], gt[b]), ncc(rec.frames[b], gt[b]));
    }
    return 0;
}

int cmd_analyze_bounds(std::int64_t n, std::int64_t k, double mu, double delta,
                       const std::string& csv) {
    const auto ent = entropy_bound(n, k);
    const auto req = required_measurements(mu, k, n, delta);
    std::printf("support entropy: %.4f bits (exact), %.4f bits (k log2(n/k))\n", ent.exact_bits,
                ent.approx_bits);
    std::printf("measurements: %lld (incoherence bound at delta=%g), %lld (k log2 n rule)\n",
                static_cast<long long>(req.bound), delta,
                static_cast<long long>(req.practical));
    if (!csv.empty()) {
        std::ofstream f(csv, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + csv);
        f << "key,value\n"
          << "n," << n << "\nk," << k << "\nentropy_exact_bits," << ent.exact_bits
          << "\nentropy_approx_bits," << ent.approx_bits << "\nmeasurement_bound," << req.bound
          << "\nmeasurement_practical," << req.practical << '\n';
    }
    return 0;
}

int cmd_analyze_budget(double background, double window_ns, double snr, double photons_per_pulse,
                       const std::string& preset, const std::string& csv) {
    double w = window_ns, s = snr;
    if (!preset.empty()) {
        const auto p = budget_preset(preset);
        if (window_ns <= 0.0) w = p.window_ns;
        if (snr <= 0.0) s = p.target_snr;
    } else {
        if (w <= 0.0) w = 90.0;
        if (s <= 0.0) s = 15.0;
    }
    const auto rep = photon_budget(background, w, s, photons_per_pulse);
    std::printf("background: %.3f photons expected in a %.1f ns window\n",
                rep.background_photons, w);
    std::printf("minimum signal: %lld photons/measurement for SNR >= %.2f (achieves %.3f)\n",
                static_cast<long long>(rep.min_signal_photons), s, rep.expected_snr);
    if (photons_per_pulse > 0.0)
        std::printf("at %.3g photons/pulse: %lld pulses per measurement\n", photons_per_pulse,
                    static_cast<long long>(rep.recommended_repeats));
    if (!csv.empty()) {
        std::ofstream f(csv, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + csv);
        f << "key,value\n"
          << "background_photons," << rep.background_photons << "\nmin_signal_photons,"
          << rep.min_signal_photons << "\nexpected_snr," << rep.expected_snr
          << "\nrecommended_repeats," << rep.recommended_repeats << '\n';
    }
    return 0;
}

int cmd_analyze_incoherence(int n, std::uint64_t seed) {
    if (n > 1024)
        throw std::invalid_argument("incoherence check is O(n^3); use n <= 1024");
    const auto basis = MeasurementBasis::fast_binary(n, seed);
    const double mu = mutual_incoherence(canonical_rows(n), normalized_rows(basis));
    std::printf("mutual incoherence (pixel basis vs fast binary, n=%d, seed=%llu): %.12g\n", n,
                static_cast<unsigned long long>(seed), mu);
    std::printf("maximally incoherent value is 1; this pair %s it exactly\n",
                mu == 1.0 ? "attains" : "does not attain");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"compressed-sensing photon-counting lidar laboratory"};
    app.require_subcommand(1);

    // scene
    auto* sc = app.add_subcommand("scene", "synthesize a depth scene (PSCENE)");
    std::string sc_kind, sc_out;
    int sc_size = 64, sc_width = 0, sc_height = 0, sc_bars = 3, sc_blobs = 8;
    double sc_ra = 50.0, sc_rb = 55.0, sc_step = 5.0, sc_albedo = 1.0;
    std::uint64_t sc_seed = 0;
    sc->add_option("--kind", sc_kind, "two_plane, bars, or random_blobs")
        ->required()
        ->check(CLI::IsMember({"two_plane", "bars", "random_blobs"}));
    sc->add_option("--size", sc_size, "square size in pixels (default 64)");
    sc->add_option("--width", sc_width, "width, overrides --size");
    sc->add_option("--height", sc_height, "height, overrides --size");
    sc->add_option("--range-a", sc_ra, "first range in m (default 50)");
    sc->add_option("--range-b", sc_rb, "second/maximum range in m (default 55)");
    sc->add_option("--range-step", sc_step, "bar-to-bar range step in m (default 5)");
    sc->add_option("--bars", sc_bars, "number of bars (default 3)");
    sc->add_option("--blobs", sc_blobs, "number of blobs (default 8)");
    sc->add_option("--albedo", sc_albedo, "target albedo in [0,1] (default 1)");
    sc->add_option("--seed", sc_seed, "blob placement seed");
    sc->add_option("--out", sc_out, "output PSCENE path")->required();

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate a masked photon-count acquisition");
    std::string sim_scene, sim_out;
    bool sim_raster = false;
    ConfigCli sim_cfg;
    sim->add_option("--scene", sim_scene, "input PSCENE path")->required();
    sim->add_option("--out", sim_out, "output directory for traces + manifest")->required();
    sim->add_flag("--raster", sim_raster, "per-pixel raster acquisition instead of binary masks");
    sim_cfg.attach(sim);

    // reconstruct
    auto* rec = app.add_subcommand("reconstruct", "reconstruct depth frames from traces");
    std::string rec_traces, rec_out, rec_obj, rec_truth;
    int rec_masks = 0;
    bool rec_raster = false;
    ConfigCli rec_cfg;
    rec->add_option("--traces", rec_traces, "directory with manifest.txt")->required();
    rec->add_option("--out", rec_out, "output directory")->required();
    rec->add_option("--objective", rec_obj, "tv (default) or l1")
        ->check(CLI::IsMember({"tv", "l1"}));
    rec->add_option("--masks", rec_masks, "use only the first M masks");
    rec->add_flag("--raster", rec_raster, "expect a raster acquisition (per-pixel baseline)");
    rec->add_option("--truth", rec_truth, "PSCENE ground truth for PSNR/NCC reporting");
    rec_cfg.attach(rec);

    // analyze
    auto* an = app.add_subcommand("analyze", "bounds, budgets and incoherence checks");
    an->require_subcommand(1);
    auto* anb = an->add_subcommand("bounds", "entropy and measurement-count bounds");
    std::int64_t an_n = 4096, an_k = 64;
    double an_mu = 1.0, an_delta = 0.05;
    std::string an_csv;
    anb->add_option("--n", an_n, "pixel count (default 4096)");
    anb->add_option("--k", an_k, "sparsity (default 64)");
    anb->add_option("--mu", an_mu, "mutual incoherence (default 1)");
    anb->add_option("--delta", an_delta, "failure probability (default 0.05)");
    anb->add_option("--csv", an_csv, "also write key,value CSV");
    auto* ang = an->add_subcommand("budget", "photon budget for a target SNR");
    double ang_bg = 0.0, ang_window = 0.0, ang_snr = 0.0, ang_ppp = 0.0;
    std::string ang_preset, ang_csv;
    ang->add_option("--background", ang_bg, "background photons per ns")->required();
    ang->add_option("--window", ang_window, "gating window in ns (default 90)");
    ang->add_option("--snr", ang_snr, "target SNR (default 15)");
    ang->add_option("--photons-per-pulse", ang_ppp, "signal photons per pulse");
    ang->add_option("--budget-preset", ang_preset, "named window/SNR preset, e.g. daylight-532nm");
    ang->add_option("--csv", ang_csv, "also write key,value CSV");
    auto* ani = an->add_subcommand("incoherence", "pixel-basis vs fast-binary incoherence");
    int ani_n = 256;
    std::uint64_t ani_seed = 1;
    ani->add_option("--n", ani_n, "basis size, power of two <= 1024 (default 256)");
    ani->add_option("--seed", ani_seed, "permutation seed (default 1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*sc)
            return cmd_scene(sc_kind, sc_size, sc_width, sc_height, sc_ra, sc_rb, sc_step,
                             sc_bars, sc_blobs, sc_albedo, sc_seed, sc_out);
        if (*sim) return cmd_simulate(sim_scene, sim_out, sim_cfg, sim_raster);
        if (*rec)
            return cmd_reconstruct(rec_traces, rec_out, rec_cfg, rec_obj, rec_masks, rec_raster,
                                   rec_truth);
        if (*anb) return cmd_analyze_bounds(an_n, an_k, an_mu, an_delta, an_csv);
        if (*ang)
            return cmd_analyze_budget(ang_bg, ang_window, ang_snr, ang_ppp, ang_preset, ang_csv);
        if (*ani) return cmd_analyze_incoherence(ani_n, ani_seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
