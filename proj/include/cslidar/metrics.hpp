#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "image.hpp"
#include "scene.hpp"
#include "sensing.hpp"

namespace cslidar {

// Peak SNR in dB against a reference image. Reconstructions recover shape up
// to the photon-count scale, so by default the candidate is first rescaled by
// the least-squares factor <r, t>/<r, r>; peak defaults to max(truth).
inline double psnr(const Image& recon, const Image& truth, bool fit_scale = true,
                   double peak = 0.0) {
    if (recon.width != truth.width || recon.height != truth.height)
        throw std::invalid_argument("psnr: dimension mismatch");
    const std::size_t n = truth.size();
    double alpha = 1.0;
    if (fit_scale) {
        double rt = 0.0, rr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            rt += recon.data[i] * truth.data[i];
            rr += recon.data[i] * recon.data[i];
        }
        alpha = rr > 0.0 ? rt / rr : 0.0;
    }
    if (peak <= 0.0) peak = truth.max_value();
    if (peak <= 0.0) throw std::invalid_argument("psnr: reference peak must be positive");
    double mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = alpha * recon.data[i] - truth.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(n);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

// Zero-mean normalized cross-correlation in [-1, 1]; 0 when either image is
// constant.
inline double ncc(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("ncc: dimension mismatch");
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a.data[i];
        mb += b.data[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a.data[i] - ma, db = b.data[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

// Reference frames matching a reconstruction's depth layout: each scene pixel
// is assigned to the nearest detected peak whose window contains its arrival
// bin, with the pixel albedo as intensity. Pixels outside every window are
// dropped.
inline std::vector<Image> ground_truth_frames(const DepthScene& scene,
                                              const std::vector<int>& peak_bins,
                                              int window_bins, double bin_width_s) {
    if (peak_bins.empty())
        throw std::invalid_argument("ground_truth_frames: no peaks");
    if (window_bins < 1 || !(bin_width_s > 0.0))
        throw std::invalid_argument("ground_truth_frames: invalid window");
    std::vector<Image> frames(peak_bins.size(), Image(scene.width, scene.height, 0.0));
    for (int y = 0; y < scene.height; ++y)
        for (int x = 0; x < scene.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * scene.width + x;
            if (!scene.has_return(i)) continue;
            const double t0 = 2.0 * scene.ranges[i] / kSpeedOfLight;
            const int a = static_cast<int>(std::floor(t0 / bin_width_s));
            int best = -1, bestDist = window_bins + 1;
            for (std::size_t p = 0; p < peak_bins.size(); ++p) {
                const int d = std::abs(a - peak_bins[p]);
                if (d <= window_bins && d < bestDist) {
                    bestDist = d;
                    best = static_cast<int>(p);
                }
            }
            if (best >= 0) frames[best].at(x, y) = scene.albedos[i];
        }
    return frames;
}

} // namespace cslidar
