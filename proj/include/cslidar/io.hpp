#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "scene.hpp"
#include "sensing.hpp"
#include "solver.hpp"
#include "traces.hpp"

namespace cslidar {

// 16-bit binary PGM (big-endian samples), intensities clipped at zero and
// scaled so the image maximum maps to 65535.
inline void write_pgm16(const Image& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pgm16: cannot open " + path);
    f << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
    double vmax = 0.0;
    for (double v : img.data) vmax = std::max(vmax, v);
    const double scale = vmax > 0.0 ? 65535.0 / vmax : 0.0;
    for (double v : img.data) {
        const auto s = static_cast<std::uint16_t>(std::lround(std::max(0.0, v) * scale));
        const char bytes[2] = {static_cast<char>(s >> 8), static_cast<char>(s & 0xff)};
        f.write(bytes, 2);
    }
    if (!f) throw std::runtime_error("write_pgm16: write failed: " + path);
}

// ASCII PBM; 1 marks an open mirror.
inline void write_pbm(const std::vector<std::uint8_t>& mask, int width, int height,
                      const std::string& path) {
    if (static_cast<std::size_t>(width) * height != mask.size())
        throw std::invalid_argument("write_pbm: width*height != mask size");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pbm: cannot open " + path);
    f << "P1\n" << width << ' ' << height << '\n';
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (x) f << ' ';
            f << (mask[static_cast<std::size_t>(y) * width + x] ? '1' : '0');
        }
        f << '\n';
    }
    if (!f) throw std::runtime_error("write_pbm: write failed: " + path);
}

// ASCII PLY. Pixel coordinates become meters through a pinhole with the
// given full field of view: x = (px + 0.5 - w/2) * (fov/w) * depth.
inline void write_ply(const PointCloud& cloud, int width, int height, double fov_radians,
                      const std::string& path) {
    if (!(fov_radians > 0.0)) throw std::invalid_argument("write_ply: fov must be > 0");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_ply: cannot open " + path);
    f << "ply\nformat ascii 1.0\nelement vertex " << cloud.points.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property float intensity\nend_header\n";
    const double sx = fov_radians / width, sy = fov_radians / height;
    for (const auto& p : cloud.points) {
        const double x = (p.x_pixel + 0.5 - width / 2.0) * sx * p.depth_m;
        const double y = (p.y_pixel + 0.5 - height / 2.0) * sy * p.depth_m;
        f << static_cast<float>(x) << ' ' << static_cast<float>(y) << ' '
          << static_cast<float>(p.depth_m) << ' ' << static_cast<float>(p.intensity) << '\n';
    }
    if (!f) throw std::runtime_error("write_ply: write failed: " + path);
}

inline void write_trace_csv(const Trace& trace, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_trace_csv: cannot open " + path);
    f << "bin_index,time_ns,count\n";
    // The time axis is presentational (readers recover the bin width from the
    // entry of bin 1); 12 significant digits keep it clean of fp drift.
    char tbuf[32];
    for (std::size_t b = 0; b < trace.counts.size(); ++b) {
        std::snprintf(tbuf, sizeof tbuf, "%.12g", b * trace.bin_width_s * 1e9);
        f << b << ',' << tbuf << ',' << trace.counts[b] << '\n';
    }
    if (!f) throw std::runtime_error("write_trace_csv: write failed: " + path);
}

inline Trace read_trace_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_trace_csv: cannot open " + path);
    auto fail = [&](int line, const std::string& what) {
        throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
    };
    std::string line;
    if (!std::getline(f, line) || line != "bin_index,time_ns,count")
        fail(1, "expected header 'bin_index,time_ns,count'");
    Trace t;
    double t1 = 0.0;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        long long idx = 0;
        double time_ns = 0.0;
        long long count = 0;
        char c1 = 0, c2 = 0;
        if (!(ls >> idx) || !(ls >> c1) || c1 != ',' || !(ls >> time_ns) || !(ls >> c2) ||
            c2 != ',' || !(ls >> count))
            fail(lineno, "expected '<bin>,<time_ns>,<count>'");
        if (idx != static_cast<long long>(t.counts.size()))
            fail(lineno, "bin index out of order");
        if (idx == 1) t1 = time_ns;
        t.counts.push_back(count);
    }
    if (t.counts.empty()) fail(lineno, "no samples");
    t.bin_width_s = t.counts.size() > 1 ? t1 * 1e-9 : 1e-9;
    return t;
}

// Depth-binned measurement matrix: header row of depth-bin centers, one row
// of windowed counts per mask.
inline void write_frameset_csv(const DepthFrameSet& fs, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_frameset_csv: cannot open " + path);
    f << "mask_index";
    for (double d : fs.depth_m) f << ',' << detail::format_g17(d);
    f << '\n';
    for (std::size_t i = 0; i < fs.n_masks(); ++i) {
        f << i;
        for (const auto& col : fs.columns) f << ',' << detail::format_g17(col[i]);
        f << '\n';
    }
    if (!f) throw std::runtime_error("write_frameset_csv: write failed: " + path);
}

inline void write_diagnostics_csv(const std::vector<FrameDiagnostics>& diags,
                                  const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_diagnostics_csv: cannot open " + path);
    f << "frame,iteration,objective\n";
    for (std::size_t d = 0; d < diags.size(); ++d)
        for (std::size_t i = 0; i < diags[d].objective_per_iter.size(); ++i)
            f << d << ',' << i << ',' << detail::format_g17(diags[d].objective_per_iter[i])
              << '\n';
    if (!f) throw std::runtime_error("write_diagnostics_csv: write failed: " + path);
}

// Everything needed to reproduce or reconstruct a simulated acquisition.
// Deliberately carries no timestamps so reruns are byte-identical.
struct SimulationManifest {
    int width = 0;
    int height = 0;
    std::string basis_kind = "fast_binary";
    std::uint64_t permutation_seed = 0;
    std::uint64_t noise_seed = 0;
    int repeats = 1;
    bool differential = true;
    IlluminationConfig illum;
    DetectorConfig det;
    BackgroundConfig bg;
    std::vector<int> rows;
    std::vector<std::string> signal_files;
    std::vector<std::string> gross_files;  // empty when not recorded
};

inline void write_manifest(const SimulationManifest& m, const std::string& path) {
    if (m.signal_files.size() != m.rows.size())
        throw std::invalid_argument("write_manifest: file list does not match rows");
    if (!m.gross_files.empty() && m.gross_files.size() != m.rows.size())
        throw std::invalid_argument("write_manifest: gross list does not match rows");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_manifest: cannot open " + path);
    f << "PMANIFEST 1\n";
    f << "width=" << m.width << "\nheight=" << m.height << '\n';
    f << "basis=" << m.basis_kind << '\n';
    f << "permutation_seed=" << m.permutation_seed << '\n';
    f << "noise_seed=" << m.noise_seed << '\n';
    f << "repeats=" << m.repeats << '\n';
    f << "differential=" << (m.differential ? 1 : 0) << '\n';
    f << "photons_per_pulse_per_pixel=" << detail::format_g17(m.illum.photons_per_pulse_per_pixel)
      << '\n';
    f << "pulse_fwhm_s=" << detail::format_g17(m.illum.pulse_fwhm_s) << '\n';
    f << "rep_rate_hz=" << detail::format_g17(m.illum.rep_rate_hz) << '\n';
    f << "reference_range_m=" << detail::format_g17(m.illum.reference_range_m) << '\n';
    f << "n_microcells=" << m.det.n_microcells << '\n';
    f << "pde=" << detail::format_g17(m.det.pde) << '\n';
    f << "dark_rate_hz=" << detail::format_g17(m.det.dark_rate_hz) << '\n';
    f << "bin_width_s=" << detail::format_g17(m.det.bin_width_s) << '\n';
    f << "trace_bins=" << m.det.trace_bins << '\n';
    f << "response_curve=";
    for (std::size_t i = 0; i < m.det.response_curve.size(); ++i)
        f << (i ? "," : "") << detail::format_g17(m.det.response_curve[i]);
    f << '\n';
    f << "background_rate_per_ns=" << detail::format_g17(m.bg.rate_per_ns) << '\n';
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
        f << "trace " << m.rows[i] << ' ' << m.signal_files[i];
        if (!m.gross_files.empty()) f << ' ' << m.gross_files[i];
        f << '\n';
    }
    if (!f) throw std::runtime_error("write_manifest: write failed: " + path);
}

inline SimulationManifest read_manifest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_manifest: cannot open " + path);
    auto fail = [&](int line, const std::string& what) {
        throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
    };
    std::string line;
    if (!std::getline(f, line) || line != "PMANIFEST 1")
        fail(1, "expected 'PMANIFEST 1' header");
    SimulationManifest m;
    int lineno = 1;
    bool saw_gross = false;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line.rfind("trace ", 0) == 0) {
            std::istringstream ls(line.substr(6));
            int r = 0;
            std::string sig, gross;
            if (!(ls >> r >> sig)) fail(lineno, "expected 'trace <row> <file> [<gross>]'");
            m.rows.push_back(r);
            m.signal_files.push_back(sig);
            if (ls >> gross) {
                m.gross_files.push_back(gross);
                saw_gross = true;
            } else if (saw_gross) {
                fail(lineno, "missing gross file");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(lineno, "expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        try {
            if (key == "width") m.width = std::stoi(val);
            else if (key == "height") m.height = std::stoi(val);
            else if (key == "basis") m.basis_kind = val;
            else if (key == "permutation_seed") m.permutation_seed = std::stoull(val);
            else if (key == "noise_seed") m.noise_seed = std::stoull(val);
            else if (key == "repeats") m.repeats = std::stoi(val);
            else if (key == "differential") m.differential = std::stoi(val) != 0;
            else if (key == "photons_per_pulse_per_pixel")
                m.illum.photons_per_pulse_per_pixel = std::stod(val);
            else if (key == "pulse_fwhm_s") m.illum.pulse_fwhm_s = std::stod(val);
            else if (key == "rep_rate_hz") m.illum.rep_rate_hz = std::stod(val);
            else if (key == "reference_range_m") m.illum.reference_range_m = std::stod(val);
            else if (key == "n_microcells") m.det.n_microcells = std::stoll(val);
            else if (key == "pde") m.det.pde = std::stod(val);
            else if (key == "dark_rate_hz") m.det.dark_rate_hz = std::stod(val);
            else if (key == "bin_width_s") m.det.bin_width_s = std::stod(val);
            else if (key == "trace_bins") m.det.trace_bins = std::stoi(val);
            else if (key == "background_rate_per_ns") m.bg.rate_per_ns = std::stod(val);
            else if (key == "response_curve") {
                m.det.response_curve.clear();
                std::istringstream vs(val);
                std::string tok;
                while (std::getline(vs, tok, ',')) m.det.response_curve.push_back(std::stod(tok));
            } else {
                fail(lineno, "unknown key '" + key + "'");
            }
        } catch (const std::logic_error&) {
            fail(lineno, "bad value for '" + key + "'");
        }
    }
    if (m.basis_kind != "fast_binary" && m.basis_kind != "raster")
        fail(lineno, "unknown basis kind '" + m.basis_kind + "'");
    if (m.width < 1 || m.height < 1) fail(lineno, "missing or invalid dimensions");
    if (m.rows.empty()) fail(lineno, "no trace entries");
    if (!m.gross_files.empty() && m.gross_files.size() != m.rows.size())
        fail(lineno, "gross files listed for only some traces");
    return m;
}

} // namespace cslidar
