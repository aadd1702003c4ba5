#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cslidar {

struct EntropyBound {
    double exact_bits = 0.0;   // n * H2(k/n)
    double approx_bits = 0.0;  // k * log2(n/k)
};

// Information needed to specify a k-sparse support among n pixels: the
// binary entropy bound n*H2(k/n) bits, alongside the k*log2(n/k)
// approximation it tends to for k << n.
inline EntropyBound entropy_bound(std::int64_t n, std::int64_t k) {
    if (n < 1) throw std::invalid_argument("entropy_bound: n must be >= 1");
    if (k < 0 || k > n) throw std::invalid_argument("entropy_bound: k outside [0, n]");
    EntropyBound out;
    const double p = static_cast<double>(k) / static_cast<double>(n);
    if (k > 0 && k < n)
        out.exact_bits =
            static_cast<double>(n) * (-p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p));
    out.approx_bits =
        k == 0 ? 0.0
               : static_cast<double>(k) *
                     std::log2(static_cast<double>(n) / static_cast<double>(k));
    return out;
}

struct MeasurementCount {
    std::int64_t bound = 0;      // ceil(mu^2 * k * ln(n / delta))
    std::int64_t practical = 0;  // round(k * log2 n), the usual operating point
};

// Measurements sufficient for k-sparse recovery with failure probability
// delta given mutual incoherence mu (mu = 1 for maximally incoherent pairs).
inline MeasurementCount required_measurements(double mu, std::int64_t k, std::int64_t n,
                                              double delta) {
    if (!(mu >= 1.0)) throw std::invalid_argument("required_measurements: mu must be >= 1");
    if (n < 1) throw std::invalid_argument("required_measurements: n must be >= 1");
    if (k < 1 || k > n) throw std::invalid_argument("required_measurements: k outside [1, n]");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("required_measurements: delta outside (0, 1)");
    MeasurementCount out;
    out.bound = static_cast<std::int64_t>(
        std::ceil(mu * mu * static_cast<double>(k) * std::log(static_cast<double>(n) / delta)));
    out.practical = std::llround(static_cast<double>(k) * std::log2(static_cast<double>(n)));
    return out;
}

struct BudgetReport {
    std::int64_t min_signal_photons = 0;  // per measurement, smallest meeting target_snr
    double background_photons = 0.0;      // rate * window
    double expected_snr = 0.0;            // at min_signal_photons
    std::int64_t recommended_repeats = 1; // pulses needed at photons_per_pulse
};

// Smallest integer signal photon count S with S / sqrt(S + B) >= target_snr,
// where B is the background expected in the gating window.
inline BudgetReport photon_budget(double background_rate_per_ns, double window_ns,
                                  double target_snr, double photons_per_pulse = 0.0) {
    if (!(background_rate_per_ns >= 0.0))
        throw std::invalid_argument("photon_budget: background rate must be >= 0");
    if (!(window_ns > 0.0)) throw std::invalid_argument("photon_budget: window must be > 0");
    if (!(target_snr > 0.0)) throw std::invalid_argument("photon_budget: target_snr must be > 0");
    if (!(photons_per_pulse >= 0.0))
        throw std::invalid_argument("photon_budget: photons_per_pulse must be >= 0");
    BudgetReport out;
    const double b = background_rate_per_ns * window_ns;
    out.background_photons = b;
    const double t2 = target_snr * target_snr;
    // S^2 = t^2 (S + B) at equality.
    const double s_star = 0.5 * (t2 + target_snr * std::sqrt(t2 + 4.0 * b));
    auto meets = [&](std::int64_t s) {
        return static_cast<double>(s) / std::sqrt(static_cast<double>(s) + b) >= target_snr;
    };
    std::int64_t s = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(s_star)));
    while (!meets(s)) ++s;
    while (s > 1 && meets(s - 1)) --s;
    out.min_signal_photons = s;
    out.expected_snr = static_cast<double>(s) / std::sqrt(static_cast<double>(s) + b);
    out.recommended_repeats =
        photons_per_pulse > 0.0
            ? static_cast<std::int64_t>(std::ceil(static_cast<double>(s) / photons_per_pulse))
            : 1;
    return out;
}

struct BudgetPreset {
    std::string name;
    double window_ns = 0.0;
    double target_snr = 0.0;
};

// Named gating-window/SNR operating points; the background rate is whatever
// the detector measures on site.
inline const std::vector<BudgetPreset>& budget_presets() {
    static const std::vector<BudgetPreset> presets = {
        {"daylight-532nm", 90.0, 15.0},
    };
    return presets;
}

inline BudgetPreset budget_preset(const std::string& name) {
    for (const auto& p : budget_presets())
        if (p.name == name) return p;
    throw std::invalid_argument("photon_budget: unknown preset '" + name + "'");
}

// Predicted per-mask SNR of a differential compressed acquisition totalling
// P detected photons per mask over n pixels: the mask-to-mask signal spread
// is about 2P/sqrt(n) while the differential shot noise is sqrt(2P), giving
// sqrt(2 P / n).
inline double mask_snr_estimate(double photons_per_mask, std::int64_t n_pixels) {
    if (!(photons_per_mask >= 0.0))
        throw std::invalid_argument("mask_snr_estimate: photons must be >= 0");
    if (n_pixels < 1) throw std::invalid_argument("mask_snr_estimate: n_pixels must be >= 1");
    return std::sqrt(2.0 * photons_per_mask / static_cast<double>(n_pixels));
}

// Shot-noise SNR of a direct (raster) pixel measurement collecting S signal
// and B background photons.
inline double pixel_snr(double signal_photons, double background_photons) {
    if (!(signal_photons >= 0.0) || !(background_photons >= 0.0))
        throw std::invalid_argument("pixel_snr: photon counts must be >= 0");
    if (signal_photons == 0.0) return 0.0;
    return signal_photons / std::sqrt(signal_photons + background_photons);
}

} // namespace cslidar
