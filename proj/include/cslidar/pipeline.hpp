#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "io.hpp"
#include "scene.hpp"
#include "sensing.hpp"
#include "solver.hpp"
#include "traces.hpp"

namespace cslidar {

struct SimulationOutput {
    MaskSchedule schedule;
    std::vector<AccumulatedTrace> traces;
    RunConfig cfg;  // with the calibrated photon scale filled in
    bool raster = false;
    int width = 0;
    int height = 0;
};

// Simulates a full acquisition: builds the basis and mask schedule, optionally
// calibrates the photon scale so each half-open mask returns
// cfg.target_photons_per_mask detected photons per pulse, then accumulates
// every mask.
inline SimulationOutput simulate_scene(const DepthScene& scene, RunConfig cfg,
                                       bool raster = false) {
    SimulationOutput out;
    out.width = scene.width;
    out.height = scene.height;
    out.raster = raster;
    const int n = scene.pixel_count();
    if (raster) {
        out.schedule = MaskSchedule{MeasurementBasis::raster(n), {}, cfg.repeats};
        out.schedule.rows.resize(n);
        for (int i = 0; i < n; ++i) out.schedule.rows[i] = i;
    } else {
        const auto basis = MeasurementBasis::fast_binary(n, cfg.basis_seed);
        out.schedule = select_rows(basis, std::min(cfg.masks, n), cfg.schedule_seed);
        out.schedule.repeats = cfg.repeats;
    }
    if (cfg.target_photons_per_mask > 0.0)
        cfg.illum.photons_per_pulse_per_pixel =
            calibrate_photons_per_pulse(scene, cfg.illum, cfg.target_photons_per_mask);
    out.traces = accumulate(scene, out.schedule, cfg.illum, cfg.det, cfg.bg, cfg.noise_seed,
                            cfg.differential, cfg.threads);
    out.cfg = cfg;
    return out;
}

struct ReconstructionOutput {
    DepthFrameSet frame_set;
    std::vector<Image> frames;
    std::vector<FrameDiagnostics> diagnostics;
    PointCloud cloud;
    std::vector<std::string> warnings;
};

inline int auto_window_bins(const RunConfig& cfg) {
    if (cfg.peak_window_bins > 0) return cfg.peak_window_bins;
    return 1 + std::max(1, static_cast<int>(std::ceil(cfg.illum.pulse_fwhm_s /
                                                      cfg.det.bin_width_s)));
}

// Filters traces with the detector response, finds depth peaks, regroups the
// measurements per depth bin and solves one frame per bin (or, for raster
// acquisitions, fills the per-pixel image directly). Produces no frames, with
// a warning, when no peak stands out.
inline ReconstructionOutput reconstruct_pipeline(const SimulationOutput& sim,
                                                 RunConfig cfg, int mask_limit = 0) {
    ReconstructionOutput out;
    const int m_all = static_cast<int>(sim.schedule.rows.size());
    const int m = mask_limit > 0 ? std::min(mask_limit, m_all) : m_all;

    std::vector<std::vector<double>> filtered(m);
    std::vector<std::vector<std::int64_t>> gross(m);
    for (int i = 0; i < m; ++i) {
        filtered[i] = correlate_response(sim.traces[i].signal, sim.cfg.det.response_curve);
        gross[i] = sim.traces[i].gross.counts;
    }

    const auto peaks =
        detect_depth_peaks(filtered, cfg.peak_threshold_sigma, cfg.peak_valley_ratio);
    if (peaks.empty()) {
        out.warnings.push_back("no depth peaks detected; nothing to reconstruct");
        return out;
    }
    const int window = auto_window_bins(cfg);
    out.frame_set = build_frame_set(filtered, peaks, window, sim.cfg.det.bin_width_s, &gross);
    for (const auto& w : out.frame_set.warnings) out.warnings.push_back(w);

    const int nbins = static_cast<int>(filtered.front().size());
    const bool fast = sim.schedule.basis.kind == MeasurementBasis::Kind::fast_binary;
    if (fast && !sim.cfg.differential) {
        const auto free_bins = signal_free_bins(nbins, peaks, window + 4);
        double bg_win = 0.0;
        if (free_bins.size() >= 10) {
            for (int i = 0; i < m; ++i)
                bg_win += estimate_background(sim.traces[i].signal, free_bins);
            bg_win = bg_win / m * (2 * window + 1);
        }
        debias_single_sided(out.frame_set, bg_win);
    }

    const std::size_t nframes = out.frame_set.depth_m.size();
    if (!fast) {
        // Raster baseline: each schedule row measured one pixel directly.
        const auto free_bins = signal_free_bins(nbins, peaks, window + 4);
        for (std::size_t b = 0; b < nframes; ++b) {
            Image img(sim.width, sim.height, 0.0);
            for (int i = 0; i < m; ++i) {
                double v = out.frame_set.columns[b][i];
                if (free_bins.size() >= 10)
                    v -= estimate_background(sim.traces[i].signal, free_bins) *
                         (2 * window + 1);
                img.data[sim.schedule.rows[i]] = v;
            }
            out.frames.push_back(std::move(img));
        }
    } else {
        MaskSchedule sched = sim.schedule;
        sched.rows.assign(sim.schedule.rows.begin(), sim.schedule.rows.begin() + m);
        // Measurement rows are zero-sum, so they carry no information about
        // the frame's mean level; anchor it with the total estimated from the
        // gross traces (or the single-sided column mean), measured by the
        // all-ones row 0 — unless row 0 was acquired directly.
        const bool anchor =
            !out.frame_set.dc_total.empty() &&
            std::find(sched.rows.begin(), sched.rows.end(), 0) == sched.rows.end();
        MaskSchedule anchored = sched;
        if (anchor) anchored.rows.insert(anchored.rows.begin(), 0);
        for (std::size_t b = 0; b < nframes; ++b) {
            SolverConfig scfg = cfg.solver;
            if (scfg.data_fidelity_delta == 0.0)
                scfg.data_fidelity_delta = out.frame_set.noise_sigma[b];
            std::vector<double> yb = out.frame_set.columns[b];
            if (anchor) yb.insert(yb.begin(), out.frame_set.dc_total[b]);
            auto solve =
                reconstruct_frame(yb, anchor ? anchored : sched, sim.width, sim.height, scfg);
            out.frames.push_back(std::move(solve.image));
            out.diagnostics.push_back(std::move(solve.diagnostics));
        }
    }
    out.cloud = stack_frames(out.frames, out.frame_set.depth_m, cfg.occupancy_threshold);
    return out;
}

// On-disk layout: <dir>/manifest.txt plus one CSV per mask (and one gross CSV
// per mask for differential runs). File contents depend only on the inputs,
// so a rerun with the same seed is byte-identical.
inline void write_simulation(const SimulationOutput& sim, const std::string& dir) {
    SimulationManifest man;
    man.width = sim.width;
    man.height = sim.height;
    man.basis_kind = sim.raster ? "raster" : "fast_binary";
    man.permutation_seed = sim.schedule.basis.permutation_seed;
    man.noise_seed = sim.cfg.noise_seed;
    man.repeats = sim.schedule.repeats;
    man.differential = sim.cfg.differential;
    man.illum = sim.cfg.illum;
    man.det = sim.cfg.det;
    man.bg = sim.cfg.bg;
    for (std::size_t i = 0; i < sim.traces.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "trace_%05zu.csv", i);
        man.rows.push_back(sim.schedule.rows[i]);
        man.signal_files.emplace_back(name);
        write_trace_csv(sim.traces[i].signal, dir + "/" + name);
        if (sim.cfg.differential) {
            std::snprintf(name, sizeof name, "trace_%05zu_gross.csv", i);
            man.gross_files.emplace_back(name);
            write_trace_csv(sim.traces[i].gross, dir + "/" + name);
        }
    }
    write_manifest(man, dir + "/manifest.txt");
}

inline SimulationOutput read_simulation(const std::string& dir) {
    const auto man = read_manifest(dir + "/manifest.txt");
    SimulationOutput sim;
    sim.width = man.width;
    sim.height = man.height;
    sim.raster = man.basis_kind == "raster";
    const int n = man.width * man.height;
    sim.schedule.basis = sim.raster ? MeasurementBasis::raster(n)
                                    : MeasurementBasis::fast_binary(n, man.permutation_seed);
    sim.schedule.rows = man.rows;
    sim.schedule.repeats = man.repeats;
    sim.cfg.illum = man.illum;
    sim.cfg.det = man.det;
    sim.cfg.bg = man.bg;
    sim.cfg.differential = man.differential;
    sim.cfg.noise_seed = man.noise_seed;
    sim.cfg.basis_seed = man.permutation_seed;
    sim.cfg.repeats = man.repeats;
    sim.cfg.masks = static_cast<int>(man.rows.size());
    for (int r : man.rows)
        if (r < 0 || r >= n)
            throw std::runtime_error("read_simulation: trace row outside basis");
    sim.traces.resize(man.rows.size());
    for (std::size_t i = 0; i < man.rows.size(); ++i) {
        Trace t = read_trace_csv(dir + "/" + man.signal_files[i]);
        if (static_cast<int>(t.counts.size()) != man.det.trace_bins)
            throw std::runtime_error("read_simulation: " + man.signal_files[i] +
                                     " has wrong bin count");
        t.bin_width_s = man.det.bin_width_s;
        t.n_pulses_accumulated = man.repeats;
        t.mask_id = man.rows[i];
        sim.traces[i].signal = std::move(t);
        if (!man.gross_files.empty()) {
            Trace g = read_trace_csv(dir + "/" + man.gross_files[i]);
            if (static_cast<int>(g.counts.size()) != man.det.trace_bins)
                throw std::runtime_error("read_simulation: " + man.gross_files[i] +
                                         " has wrong bin count");
            g.bin_width_s = man.det.bin_width_s;
            g.n_pulses_accumulated = man.repeats;
            g.mask_id = man.rows[i];
            sim.traces[i].gross = std::move(g);
        } else {
            sim.traces[i].gross = sim.traces[i].signal;
        }
    }
    return sim;
}

} // namespace cslidar
