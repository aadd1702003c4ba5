#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sensing.hpp"
#include "solver.hpp"

namespace cslidar {

namespace detail {

template <typename F>
auto parse_num(const std::string& v, const char* kind, F&& conv) {
    try {
        std::size_t used = 0;
        auto out = conv(v, &used);
        if (used != v.size()) throw std::invalid_argument(kind);
        return out;
    } catch (const std::logic_error&) {
        throw std::invalid_argument(std::string("expected ") + kind + ", got '" + v + "'");
    }
}

inline int parse_int(const std::string& v) {
    return parse_num(v, "an integer", [](const std::string& s, std::size_t* u) {
        return std::stoi(s, u);
    });
}

inline std::int64_t parse_i64(const std::string& v) {
    return parse_num(v, "an integer", [](const std::string& s, std::size_t* u) {
        return std::stoll(s, u);
    });
}

inline std::uint64_t parse_u64(const std::string& v) {
    return parse_num(v, "an unsigned integer", [](const std::string& s, std::size_t* u) {
        return std::stoull(s, u);
    });
}

inline double parse_double(const std::string& v) {
    return parse_num(v, "a number", [](const std::string& s, std::size_t* u) {
        return std::stod(s, u);
    });
}

inline bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw std::invalid_argument("expected 0/1/true/false, got '" + v + "'");
}

inline std::vector<double> parse_double_list(const std::string& v) {
    std::vector<double> out;
    std::istringstream vs(v);
    std::string tok;
    while (std::getline(vs, tok, ',')) out.push_back(parse_double(tok));
    if (out.empty()) throw std::invalid_argument("expected a comma-separated list");
    return out;
}

} // namespace detail

// Acquisition + reconstruction knobs, settable from key=value config files
// ('#' comments allowed) or CLI overrides. Zeros mean "derive automatically"
// where noted.
struct RunConfig {
    int masks = 512;
    int repeats = 10;
    bool differential = true;
    std::uint64_t basis_seed = 1;
    std::uint64_t schedule_seed = 1;
    std::uint64_t noise_seed = 1;
    int threads = 1;

    // 0 keeps illum.photons_per_pulse_per_pixel as given; otherwise the pixel
    // scale is calibrated so a half-open mask returns this many photons per pulse.
    double target_photons_per_mask = 0.0;

    IlluminationConfig illum;
    DetectorConfig det;
    BackgroundConfig bg;
    SolverConfig solver;

    double peak_threshold_sigma = 5.0;
    double peak_valley_ratio = 0.5;
    int peak_window_bins = 0;  // 0: derived from the pulse width
    double occupancy_threshold = 0.3;
    double fov_mrad = 30.0;

    void apply(const std::string& key, const std::string& value) {
        using namespace detail;
        if (key == "masks") masks = parse_int(value);
        else if (key == "repeats") repeats = parse_int(value);
        else if (key == "differential") differential = parse_bool(value);
        else if (key == "basis_seed") basis_seed = parse_u64(value);
        else if (key == "schedule_seed") schedule_seed = parse_u64(value);
        else if (key == "noise_seed") noise_seed = parse_u64(value);
        else if (key == "threads") threads = parse_int(value);
        else if (key == "illum.target_photons_per_mask")
            target_photons_per_mask = parse_double(value);
        else if (key == "illum.photons_per_pulse_per_pixel")
            illum.photons_per_pulse_per_pixel = parse_double(value);
        else if (key == "illum.pulse_fwhm_ns") illum.pulse_fwhm_s = parse_double(value) * 1e-9;
        else if (key == "illum.rep_rate_hz") illum.rep_rate_hz = parse_double(value);
        else if (key == "illum.reference_range_m") illum.reference_range_m = parse_double(value);
        else if (key == "detector.n_microcells") det.n_microcells = parse_i64(value);
        else if (key == "detector.pde") det.pde = parse_double(value);
        else if (key == "detector.dark_rate_hz") det.dark_rate_hz = parse_double(value);
        else if (key == "detector.bin_width_ns") det.bin_width_s = parse_double(value) * 1e-9;
        else if (key == "detector.trace_bins") det.trace_bins = parse_int(value);
        else if (key == "detector.response_curve") det.response_curve = parse_double_list(value);
        else if (key == "background.rate_per_ns") bg.rate_per_ns = parse_double(value);
        else if (key == "solver.objective") {
            if (value == "tv") solver.objective = Objective::tv;
            else if (value == "l1") solver.objective = Objective::l1;
            else throw std::invalid_argument("expected tv or l1, got '" + value + "'");
        }
        else if (key == "solver.smoothing_mu") solver.smoothing_mu = parse_double(value);
        else if (key == "solver.tolerance") solver.tolerance = parse_double(value);
        else if (key == "solver.max_iters") solver.max_iters = parse_int(value);
        else if (key == "solver.continuation_steps") solver.continuation_steps = parse_int(value);
        else if (key == "solver.delta") solver.data_fidelity_delta = parse_double(value);
        else if (key == "peaks.threshold_sigma") peak_threshold_sigma = parse_double(value);
        else if (key == "peaks.valley_ratio") peak_valley_ratio = parse_double(value);
        else if (key == "peaks.window_bins") peak_window_bins = parse_int(value);
        else if (key == "cloud.occupancy_threshold") occupancy_threshold = parse_double(value);
        else if (key == "cloud.fov_mrad") fov_mrad = parse_double(value);
        else throw std::invalid_argument("unknown config key '" + key + "'");
    }
};

inline void load_config(RunConfig& cfg, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_config: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
            line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        const auto eq = line.find('=', start);
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
        try {
            cfg.apply(line.substr(start, eq - start), line.substr(eq + 1));
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

// Built-in operating points. "close-target" mirrors a desk-scale acquisition
// with strong returns and daylight background; "distant-target" a far, dim
// target measured with many repeats under a dark sky.
inline RunConfig run_preset(const std::string& name) {
    RunConfig c;
    if (name == "close-target") {
        c.masks = 512;
        c.repeats = 10;
        c.target_photons_per_mask = 2500.0;
        c.illum.pulse_fwhm_s = 0.5e-9;
        c.illum.reference_range_m = 55.0;
        c.det.trace_bins = 512;
        c.det.bin_width_s = 1e-9;
        c.bg.rate_per_ns = 30.0;
        c.solver.objective = Objective::tv;
        c.solver.tolerance = 1e-6;
        c.solver.max_iters = 1500;
        return c;
    }
    if (name == "distant-target") {
        c.masks = 512;
        c.repeats = 100;
        c.target_photons_per_mask = 50.0;
        c.illum.pulse_fwhm_s = 0.5e-9;
        c.illum.reference_range_m = 380.0;
        c.det.trace_bins = 2600;
        c.det.bin_width_s = 1e-9;
        c.bg.rate_per_ns = 2.0;
        c.solver.objective = Objective::tv;
        c.solver.tolerance = 1e-6;
        c.solver.max_iters = 1500;
        return c;
    }
    throw std::invalid_argument("unknown preset '" + name +
                                "' (have: close-target, distant-target)");
}

} // namespace cslidar
