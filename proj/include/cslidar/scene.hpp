#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "image.hpp"
#include "rng.hpp"

namespace cslidar {

// Per-pixel range/albedo map. A range <= 0 means "no return" (empty sky);
// such pixels are canonicalized to exactly -1 so serialization round-trips
// bit-exactly.
struct DepthScene {
    int width = 0;
    int height = 0;
    std::vector<double> ranges;   // meters
    std::vector<double> albedos;  // [0, 1]

    int pixel_count() const { return width * height; }
    bool has_return(std::size_t i) const { return ranges[i] > 0.0; }

    double max_range() const {
        double r = 0.0;
        for (double v : ranges) r = std::max(r, v);
        return r;
    }
};

inline DepthScene make_scene(int width, int height,
                             std::vector<double> ranges,
                             std::vector<double> albedos) {
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("scene: dimensions must be positive");
    const std::size_t n = static_cast<std::size_t>(width) * height;
    if (ranges.size() != n || albedos.size() != n)
        throw std::invalid_argument("scene: pixel array size does not match dimensions");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(ranges[i]))
            throw std::invalid_argument("scene: non-finite range");
        if (!(albedos[i] >= 0.0 && albedos[i] <= 1.0))
            throw std::invalid_argument("scene: albedo outside [0, 1]");
        if (ranges[i] <= 0.0) ranges[i] = -1.0;
    }
    return DepthScene{width, height, std::move(ranges), std::move(albedos)};
}

enum class SceneKind { two_plane, bars, random_blobs };

struct SceneParams {
    // two_plane: left half at range_a, right half at range_b.
    double range_a = 50.0;
    double range_b = 55.0;
    // bars: vertical strips against empty sky, ranges range_a + i*range_step.
    int bar_count = 3;
    double range_step = 5.0;
    // random_blobs: overlapping ellipses with ranges in [range_a, range_b].
    int blob_count = 8;
    std::uint64_t seed = 0;

    double albedo = 1.0;
};

// Deterministic synthetic scenes. Same (kind, size, params) always produces
// the same scene; random_blobs depends only on params.seed.
inline DepthScene generate_scene(SceneKind kind, int width, int height,
                                 const SceneParams& p) {
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("generate_scene: dimensions must be positive");
    if (!(p.albedo >= 0.0 && p.albedo <= 1.0))
        throw std::invalid_argument("generate_scene: albedo outside [0, 1]");
    const std::size_t n = static_cast<std::size_t>(width) * height;
    std::vector<double> ranges(n, -1.0);
    std::vector<double> albedos(n, 0.0);

    switch (kind) {
    case SceneKind::two_plane: {
        if (p.range_a <= 0.0 || p.range_b <= 0.0)
            throw std::invalid_argument("generate_scene: plane ranges must be positive");
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * width + x;
                ranges[i] = (x < width / 2) ? p.range_a : p.range_b;
                albedos[i] = p.albedo;
            }
        break;
    }
    case SceneKind::bars: {
        if (p.bar_count < 1 || p.bar_count > width)
            throw std::invalid_argument("generate_scene: bar count outside [1, width]");
        if (p.range_a <= 0.0 || p.range_a + (p.bar_count - 1) * p.range_step <= 0.0)
            throw std::invalid_argument("generate_scene: bar ranges must be positive");
        const int slot = width / p.bar_count;
        const int bar_w = std::max(1, (slot * 3) / 5);
        for (int b = 0; b < p.bar_count; ++b) {
            const int x0 = b * slot + (slot - bar_w) / 2;
            const double r = p.range_a + b * p.range_step;
            for (int y = 0; y < height; ++y)
                for (int x = x0; x < x0 + bar_w && x < width; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * width + x;
                    ranges[i] = r;
                    albedos[i] = p.albedo;
                }
        }
        break;
    }
    case SceneKind::random_blobs: {
        if (p.blob_count < 1)
            throw std::invalid_argument("generate_scene: blob count must be >= 1");
        if (p.range_a <= 0.0 || p.range_b < p.range_a)
            throw std::invalid_argument("generate_scene: blob range interval invalid");
        std::mt19937_64 rng = make_stream(p.seed, 0x5ce7e);
        std::uniform_real_distribution<double> ux(0.0, width);
        std::uniform_real_distribution<double> uy(0.0, height);
        std::uniform_real_distribution<double> urad(width / 8.0, width / 3.0);
        std::uniform_real_distribution<double> urange(p.range_a, p.range_b);
        for (int b = 0; b < p.blob_count; ++b) {
            const double cx = ux(rng), cy = uy(rng);
            const double rx = urad(rng), ry = urad(rng);
            const double r = urange(rng);
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x) {
                    const double dx = (x + 0.5 - cx) / rx;
                    const double dy = (y + 0.5 - cy) / ry;
                    if (dx * dx + dy * dy <= 1.0) {
                        const std::size_t i = static_cast<std::size_t>(y) * width + x;
                        ranges[i] = r;  // nearer blob drawn later wins the pixel
                        albedos[i] = p.albedo;
                    }
                }
        }
        break;
    }
    }
    return make_scene(width, height, std::move(ranges), std::move(albedos));
}

// One image per occupied depth bin; bin centers in meters.
struct DepthFrameStack {
    std::vector<double> bin_centers;
    std::vector<Image> frames;
};

// Quantizes ranges into bins of bin_width meters: pixel i lands in bin
// floor(range_i / bin_width). Only occupied bins get a frame; frame values
// are the pixel albedos, so every pixel with a return appears in exactly
// one frame.
inline DepthFrameStack discretize(const DepthScene& scene, double bin_width) {
    if (!(bin_width > 0.0))
        throw std::invalid_argument("discretize: bin width must be positive");
    std::map<long long, Image> bins;
    for (int y = 0; y < scene.height; ++y)
        for (int x = 0; x < scene.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * scene.width + x;
            if (!scene.has_return(i)) continue;
            const long long b = static_cast<long long>(std::floor(scene.ranges[i] / bin_width));
            auto it = bins.find(b);
            if (it == bins.end())
                it = bins.emplace(b, Image(scene.width, scene.height, 0.0)).first;
            it->second.at(x, y) = scene.albedos[i];
        }
    DepthFrameStack out;
    for (auto& [b, img] : bins) {
        out.bin_centers.push_back((b + 0.5) * bin_width);
        out.frames.push_back(std::move(img));
    }
    return out;
}

namespace detail {

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

// Text format: "PSCENE 1 <width> <height>" header, then one "<range> <albedo>"
// line per pixel in row-major order. Doubles use %.17g so load(save(s)) == s
// bit-exactly.
inline void save_scene(const DepthScene& scene, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_scene: cannot open " + path);
    f << "PSCENE 1 " << scene.width << ' ' << scene.height << '\n';
    for (std::size_t i = 0; i < scene.ranges.size(); ++i)
        f << detail::format_g17(scene.ranges[i]) << ' '
          << detail::format_g17(scene.albedos[i]) << '\n';
    if (!f) throw std::runtime_error("save_scene: write failed: " + path);
}

inline DepthScene load_scene(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_scene: cannot open " + path);
    auto fail = [&](int line, const std::string& what) {
        throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
    };
    std::string line;
    if (!std::getline(f, line)) fail(1, "missing PSCENE header");
    std::istringstream hs(line);
    std::string magic;
    int version = 0, w = 0, h = 0;
    if (!(hs >> magic >> version >> w >> h) || magic != "PSCENE")
        fail(1, "malformed header, expected 'PSCENE 1 <width> <height>'");
    if (version != 1) fail(1, "unsupported PSCENE version " + std::to_string(version));
    if (w <= 0 || h <= 0) fail(1, "non-positive dimensions");
    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<double> ranges, albedos;
    ranges.reserve(n);
    albedos.reserve(n);
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        double r = 0.0, a = 0.0;
        if (!(ls >> r >> a)) fail(lineno, "expected '<range_m> <albedo>'");
        std::string extra;
        if (ls >> extra) fail(lineno, "trailing content '" + extra + "'");
        if (!(a >= 0.0 && a <= 1.0)) fail(lineno, "albedo outside [0, 1]");
        if (ranges.size() == n) fail(lineno, "more pixels than width*height");
        ranges.push_back(r);
        albedos.push_back(a);
    }
    if (ranges.size() != n)
        fail(lineno, "expected " + std::to_string(n) + " pixels, got " +
                         std::to_string(ranges.size()));
    return make_scene(w, h, std::move(ranges), std::move(albedos));
}

} // namespace cslidar
