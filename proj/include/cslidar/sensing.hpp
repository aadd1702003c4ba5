#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <thread>
#include <vector>

#include "basis.hpp"
#include "rng.hpp"
#include "scene.hpp"

namespace cslidar {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s, exact

// Pulsed illumination. photons_per_pulse_per_pixel is the mean number of
// detected photons a unit-albedo pixel at reference_range_m returns per
// pulse; other pixels scale by albedo * (reference_range / range)^2.
struct IlluminationConfig {
    double photons_per_pulse_per_pixel = 1.0;
    double pulse_fwhm_s = 0.5e-9;
    double rep_rate_hz = 1000.0;
    double reference_range_m = 50.0;

    void validate() const {
        if (!(photons_per_pulse_per_pixel >= 0.0))
            throw std::invalid_argument("illumination: photons_per_pulse_per_pixel must be >= 0");
        if (!(pulse_fwhm_s >= 0.0))
            throw std::invalid_argument("illumination: pulse_fwhm_s must be >= 0");
        if (!(rep_rate_hz > 0.0))
            throw std::invalid_argument("illumination: rep_rate_hz must be > 0");
        if (!(reference_range_m > 0.0))
            throw std::invalid_argument("illumination: reference_range_m must be > 0");
    }
};

// Time-binned photon-counting detector (SiPM-like). Arrivals in one bin
// share n_microcells cells; a cell fires at most once per bin, which
// saturates bright bins. response_curve is a unit-mass pmf of timing
// jitter in whole bins, centered on index size/2; {1} means none.
struct DetectorConfig {
    std::int64_t n_microcells = 100000;
    double pde = 1.0;
    double dark_rate_hz = 1e5;
    std::vector<double> response_curve = {1.0};
    double bin_width_s = 1e-9;
    int trace_bins = 512;

    void validate() const {
        if (n_microcells < 1)
            throw std::invalid_argument("detector: n_microcells must be >= 1");
        if (!(pde > 0.0 && pde <= 1.0))
            throw std::invalid_argument("detector: pde must be in (0, 1]");
        if (!(dark_rate_hz >= 0.0))
            throw std::invalid_argument("detector: dark_rate_hz must be >= 0");
        if (!(bin_width_s > 0.0))
            throw std::invalid_argument("detector: bin_width_s must be > 0");
        if (trace_bins < 1)
            throw std::invalid_argument("detector: trace_bins must be >= 1");
        if (response_curve.empty())
            throw std::invalid_argument("detector: response_curve must be nonempty");
        double sum = 0.0;
        for (double v : response_curve) {
            if (!(v >= 0.0))
                throw std::invalid_argument("detector: response_curve entries must be >= 0");
            sum += v;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("detector: response_curve must sum to 1");
    }
};

// Ambient light. rate_per_ns is the detector count rate with half the
// mirrors open (the normal operating point); other open fractions scale
// it proportionally.
struct BackgroundConfig {
    double rate_per_ns = 0.0;

    void validate() const {
        if (!(rate_per_ns >= 0.0))
            throw std::invalid_argument("background: rate_per_ns must be >= 0");
    }
};

// One accumulated histogram. counts is signed: differential accumulation
// (positive minus complementary mask) can go negative; single-pulse raw
// traces are always nonnegative.
struct Trace {
    std::vector<std::int64_t> counts;
    double bin_width_s = 1e-9;
    int n_pulses_accumulated = 1;
    int mask_id = -1;
};

// Mean photon arrivals per bin for one pulse through a binary mask:
// per-pixel Gaussian pulse echoes at t = 2r/c plus mask-scaled ambient
// and dark counts. Throws if any echo center falls beyond the trace.
inline std::vector<double> expected_pulse_intensity(const DepthScene& scene,
                                                    const std::vector<std::uint8_t>& mask,
                                                    const IlluminationConfig& illum,
                                                    const DetectorConfig& det,
                                                    const BackgroundConfig& bg) {
    illum.validate();
    det.validate();
    bg.validate();
    const std::size_t n = scene.ranges.size();
    if (mask.size() != n)
        throw std::invalid_argument("expected_pulse_intensity: mask size != scene pixels");

    const double dt = det.bin_width_s;
    const int nbins = det.trace_bins;
    std::vector<double> lam(nbins, 0.0);

    const double sigma = illum.pulse_fwhm_s / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    std::size_t open = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        ++open;
        if (!scene.has_return(i)) continue;
        const double r = scene.ranges[i];
        const double mean = illum.photons_per_pulse_per_pixel * scene.albedos[i] *
                            (illum.reference_range_m / r) * (illum.reference_range_m / r);
        if (mean == 0.0) continue;
        const double t0 = 2.0 * r / kSpeedOfLight;
        const int center = static_cast<int>(std::floor(t0 / dt));
        if (center >= nbins)
            throw std::invalid_argument(
                "expected_pulse_intensity: echo at " + std::to_string(t0 * 1e9) +
                " ns falls beyond the " + std::to_string(nbins * dt * 1e9) + " ns trace");
        if (sigma == 0.0) {
            lam[center] += mean;
            continue;
        }
        const int b0 = std::max(0, static_cast<int>(std::floor((t0 - 5.0 * sigma) / dt)));
        const int b1 = std::min(nbins - 1, static_cast<int>(std::floor((t0 + 5.0 * sigma) / dt)));
        const double inv = 1.0 / (sigma * std::sqrt(2.0));
        double lo = std::erf((b0 * dt - t0) * inv);
        for (int b = b0; b <= b1; ++b) {
            const double hi = std::erf(((b + 1) * dt - t0) * inv);
            lam[b] += mean * 0.5 * (hi - lo);
            lo = hi;
        }
    }

    const double open_fraction = n ? static_cast<double>(open) / n : 0.0;
    const double floor_rate =
        bg.rate_per_ns * (dt * 1e9) * (open_fraction / 0.5) + det.dark_rate_hz * dt;
    if (floor_rate > 0.0)
        for (double& v : lam) v += floor_rate;
    return lam;
}

// Expected fired microcells when k photons arrive in one bin:
// n * (1 - exp(-k * pde / n)). Monotone in k, saturates at n_microcells.
inline double saturate(double k, const DetectorConfig& det) {
    det.validate();
    if (!(k >= 0.0)) throw std::invalid_argument("saturate: k must be >= 0");
    const double n = static_cast<double>(det.n_microcells);
    return n * (1.0 - std::exp(-k * det.pde / n));
}

namespace detail {

// Photons land on uniformly chosen microcells; a photon on an already-fired
// cell is lost. Exact occupancy sampling: mean n(1-(1-pde/n)^k), and for
// n_microcells -> infinity the counts stay exactly Poisson.
inline std::int64_t detect_photons(std::int64_t k, const DetectorConfig& det,
                                   std::mt19937_64& rng) {
    if (k <= 0) return 0;
    if (det.pde < 1.0) {
        std::binomial_distribution<std::int64_t> thin(k, det.pde);
        k = thin(rng);
        if (k <= 0) return 0;
    }
    const double n = static_cast<double>(det.n_microcells);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::int64_t occ = 0;
    for (std::int64_t i = 0; i < k; ++i)
        if (u(rng) * n >= static_cast<double>(occ)) ++occ;
    return occ;
}

// Poisson arrivals per bin, saturation, then per-count timing jitter from
// the response pmf. Distributions are constructed fresh per bin so the
// variate stream depends only on (lambda, rng state).
inline std::vector<std::int64_t> draw_counts(const std::vector<double>& lam,
                                             const DetectorConfig& det,
                                             std::mt19937_64& rng) {
    const int nbins = static_cast<int>(lam.size());
    std::vector<std::int64_t> fired(nbins, 0);
    for (int b = 0; b < nbins; ++b) {
        if (lam[b] <= 0.0) continue;
        std::poisson_distribution<std::int64_t> pois(lam[b]);
        fired[b] = detect_photons(pois(rng), det, rng);
    }
    if (det.response_curve.size() == 1) return fired;

    std::vector<double> cdf(det.response_curve.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < cdf.size(); ++i) {
        acc += det.response_curve[i];
        cdf[i] = acc;
    }
    const int center = static_cast<int>(cdf.size()) / 2;
    std::uniform_real_distribution<double> u(0.0, acc);
    std::vector<std::int64_t> out(nbins, 0);
    for (int b = 0; b < nbins; ++b) {
        for (std::int64_t c = 0; c < fired[b]; ++c) {
            const double r = u(rng);
            int k = 0;
            while (r > cdf[k]) ++k;
            const int dest = b + k - center;
            if (dest >= 0 && dest < nbins) ++out[dest];
        }
    }
    return out;
}

} // namespace detail

// One pulse through one binary mask.
inline Trace simulate_pulse(const DepthScene& scene, const std::vector<std::uint8_t>& mask,
                            const IlluminationConfig& illum, const DetectorConfig& det,
                            const BackgroundConfig& bg, std::mt19937_64& rng) {
    const auto lam = expected_pulse_intensity(scene, mask, illum, det, bg);
    Trace t;
    t.counts = detail::draw_counts(lam, det, rng);
    t.bin_width_s = det.bin_width_s;
    t.n_pulses_accumulated = 1;
    return t;
}

// signal: the measurement trace (positive - negative when differential).
// gross: positive + negative raw counts, kept for shot-noise estimation.
struct AccumulatedTrace {
    Trace signal;
    Trace gross;
};

// Accumulates `schedule.repeats` pulses per mask. In differential mode each
// repeat fires one pulse through the mask and one through its complement and
// counts the difference, cancelling ambient light in expectation. Per-mask
// RNG streams are derived as seed ^ row_id, so results are byte-identical
// for a fixed seed regardless of execution order or thread count.
inline std::vector<AccumulatedTrace> accumulate(const DepthScene& scene,
                                                const MaskSchedule& schedule,
                                                const IlluminationConfig& illum,
                                                const DetectorConfig& det,
                                                const BackgroundConfig& bg,
                                                std::uint64_t seed,
                                                bool differential = true,
                                                int threads = 1) {
    if (scene.pixel_count() != schedule.basis.n)
        throw std::invalid_argument("accumulate: scene pixels != basis n");
    if (schedule.repeats < 1)
        throw std::invalid_argument("accumulate: repeats must be >= 1");
    illum.validate();
    det.validate();
    bg.validate();

    const int m = static_cast<int>(schedule.rows.size());
    std::vector<AccumulatedTrace> out(m);

    auto run_mask = [&](int mi) {
        const int row_id = schedule.rows[mi];
        const auto mask = to_dmd(row(schedule.basis, row_id), scene.width, scene.height);
        const auto lam_pos = expected_pulse_intensity(scene, mask.positive, illum, det, bg);
        std::vector<double> lam_neg;
        if (differential)
            lam_neg = expected_pulse_intensity(scene, mask.negative, illum, det, bg);

        std::mt19937_64 rng = make_stream(seed, static_cast<std::uint64_t>(row_id));
        const int nbins = det.trace_bins;
        std::vector<std::int64_t> diff(nbins, 0), gross(nbins, 0);
        for (int rep = 0; rep < schedule.repeats; ++rep) {
            const auto pos = detail::draw_counts(lam_pos, det, rng);
            if (differential) {
                const auto neg = detail::draw_counts(lam_neg, det, rng);
                for (int b = 0; b < nbins; ++b) {
                    diff[b] += pos[b] - neg[b];
                    gross[b] += pos[b] + neg[b];
                }
            } else {
                for (int b = 0; b < nbins; ++b) {
                    diff[b] += pos[b];
                    gross[b] += pos[b];
                }
            }
        }
        AccumulatedTrace& at = out[mi];
        at.signal = Trace{std::move(diff), det.bin_width_s, schedule.repeats, row_id};
        at.gross = Trace{std::move(gross), det.bin_width_s, schedule.repeats, row_id};
    };

    if (threads <= 1 || m <= 1) {
        for (int mi = 0; mi < m; ++mi) run_mask(mi);
        return out;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    const int nt = std::min(threads, m);
    for (int t = 0; t < nt; ++t)
        pool.emplace_back([&] {
            for (int mi = next.fetch_add(1); mi < m; mi = next.fetch_add(1)) run_mask(mi);
        });
    for (auto& th : pool) th.join();
    return out;
}

// photons_per_pulse_per_pixel that makes the expected detected signal through
// an average half-open mask equal target_photons (half the whole-scene return).
inline double calibrate_photons_per_pulse(const DepthScene& scene,
                                          const IlluminationConfig& illum,
                                          double target_photons) {
    if (!(target_photons > 0.0))
        throw std::invalid_argument("calibrate: target_photons must be > 0");
    illum.validate();
    double total = 0.0;
    for (std::size_t i = 0; i < scene.ranges.size(); ++i) {
        if (!scene.has_return(i)) continue;
        const double q = illum.reference_range_m / scene.ranges[i];
        total += scene.albedos[i] * q * q;
    }
    if (total == 0.0)
        throw std::invalid_argument("calibrate: scene has no returns");
    return target_photons / (0.5 * total);
}

} // namespace cslidar
