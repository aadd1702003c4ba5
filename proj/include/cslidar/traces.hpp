#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "basis.hpp"
#include "sensing.hpp"

namespace cslidar {

// Cross-correlation with the detector response (matched filter), zero-padded
// at the trace edges: out[t] = sum_k response[k] * in[t + k - size/2].
// Linear in the input, so scaling every trace scales every output exactly.
inline std::vector<double> correlate_response(const std::vector<double>& counts,
                                              const std::vector<double>& response) {
    if (response.empty())
        throw std::invalid_argument("correlate_response: empty response");
    const int nbins = static_cast<int>(counts.size());
    const int k0 = static_cast<int>(response.size()) / 2;
    std::vector<double> out(nbins, 0.0);
    for (int t = 0; t < nbins; ++t) {
        double acc = 0.0;
        for (int k = 0; k < static_cast<int>(response.size()); ++k) {
            const int src = t + k - k0;
            if (src >= 0 && src < nbins) acc += response[k] * counts[src];
        }
        out[t] = acc;
    }
    return out;
}

inline std::vector<double> correlate_response(const Trace& trace,
                                              const std::vector<double>& response) {
    std::vector<double> c(trace.counts.begin(), trace.counts.end());
    return correlate_response(c, response);
}

namespace detail {

inline double median_inplace(std::vector<double>& v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
        return 0.5 * (v[mid - 1] + hi);
    }
    return hi;
}

} // namespace detail

// Finds depth-bin candidates shared by a set of filtered traces.
//
// The per-bin score is sum_i |filtered_i[b]|. Bins above
//   median + threshold_sigma * 1.4826 * MAD
// (a robust Gaussian-consistent sigma estimate) form candidate runs; each run
// yields its local maxima, and adjacent maxima are reported separately only
// when the valley between them drops below valley_ratio of the smaller one.
// All-zero traces produce an empty list.
inline std::vector<int> detect_depth_peaks(const std::vector<std::vector<double>>& filtered,
                                           double threshold_sigma,
                                           double valley_ratio = 0.5) {
    if (filtered.empty())
        throw std::invalid_argument("detect_depth_peaks: no traces");
    if (!(threshold_sigma >= 0.0))
        throw std::invalid_argument("detect_depth_peaks: threshold_sigma must be >= 0");
    if (!(valley_ratio >= 0.0 && valley_ratio <= 1.0))
        throw std::invalid_argument("detect_depth_peaks: valley_ratio outside [0, 1]");
    const std::size_t nbins = filtered.front().size();
    if (nbins == 0) throw std::invalid_argument("detect_depth_peaks: empty traces");
    std::vector<double> score(nbins, 0.0);
    for (const auto& tr : filtered) {
        if (tr.size() != nbins)
            throw std::invalid_argument("detect_depth_peaks: trace lengths differ");
        for (std::size_t b = 0; b < nbins; ++b) score[b] += std::fabs(tr[b]);
    }

    std::vector<double> tmp = score;
    const double med = detail::median_inplace(tmp);
    for (std::size_t b = 0; b < nbins; ++b) tmp[b] = std::fabs(score[b] - med);
    const double mad = detail::median_inplace(tmp);
    const double threshold = med + threshold_sigma * 1.4826 * mad;

    std::vector<int> peaks;
    std::size_t b = 0;
    while (b < nbins) {
        if (!(score[b] > threshold) || score[b] <= 0.0) {
            ++b;
            continue;
        }
        const std::size_t start = b;
        while (b < nbins && score[b] > threshold && score[b] > 0.0) ++b;
        const std::size_t end = b;  // run is [start, end)

        // Local maxima within the run (plateaus count once, at their first bin).
        std::vector<std::size_t> maxima;
        for (std::size_t i = start; i < end;) {
            std::size_t j = i;
            while (j + 1 < end && score[j + 1] == score[i]) ++j;
            const bool rise = (i == start) || score[i - 1] < score[i];
            const bool fall = (j + 1 == end) || score[j + 1] < score[i];
            if (rise && fall) maxima.push_back(i);
            i = j + 1;
        }
        // Merge maxima not separated by a deep enough valley, keeping the taller.
        std::vector<std::size_t> kept;
        for (std::size_t p : maxima) {
            if (kept.empty()) {
                kept.push_back(p);
                continue;
            }
            double valley = score[p];
            for (std::size_t i = kept.back(); i <= p; ++i) valley = std::min(valley, score[i]);
            if (valley < valley_ratio * std::min(score[kept.back()], score[p]))
                kept.push_back(p);
            else if (score[p] > score[kept.back()])
                kept.back() = p;
        }
        for (std::size_t p : kept) peaks.push_back(static_cast<int>(p));
    }
    return peaks;
}

// Measurements regrouped by depth: column b holds, for every mask, the
// filtered counts summed over a window around peak bin b.
struct DepthFrameSet {
    std::vector<double> depth_m;               // one per depth bin, ascending
    std::vector<int> peak_bins;                // trace bin index per depth bin
    std::vector<std::vector<double>> columns;  // [depth bin][mask]
    std::vector<double> noise_sigma;           // per depth bin, 0 when unknown
    std::vector<double> dc_total;              // estimated sum over pixels per depth bin
    int window_bins = 0;
    std::vector<std::string> warnings;

    std::size_t n_masks() const { return columns.empty() ? 0 : columns.front().size(); }
};

// Bins at least `margin` away from every window around the given peaks.
inline std::vector<int> signal_free_bins(int nbins, const std::vector<int>& peaks, int margin) {
    std::vector<int> out;
    for (int b = 0; b < nbins; ++b) {
        bool clear = true;
        for (int p : peaks)
            if (std::abs(b - p) <= margin) { clear = false; break; }
        if (clear) out.push_back(b);
    }
    return out;
}

// Sums each filtered trace over [peak - window, peak + window] per peak.
// Peaks whose windows overlap are merged into one depth bin (the tallest
// peak represents it) with a warning.
//
// When gross traces are supplied, two extra statistics come with each depth
// bin: the shot-noise scale sqrt(sum of windowed gross counts), and the
// background-corrected mean windowed gross count. For differential
// acquisitions every gross trace (positive + complement) collects the full
// aperture, so that mean estimates the frame's total signal — the projection
// onto the all-ones row that the zero-sum measurement rows cannot see.
inline DepthFrameSet build_frame_set(const std::vector<std::vector<double>>& filtered,
                                     const std::vector<int>& peaks,
                                     int window_bins,
                                     double bin_width_s,
                                     const std::vector<std::vector<std::int64_t>>* gross = nullptr) {
    if (filtered.empty()) throw std::invalid_argument("build_frame_set: no traces");
    if (peaks.empty()) throw std::invalid_argument("build_frame_set: no peaks");
    if (window_bins < 1) throw std::invalid_argument("build_frame_set: window_bins must be >= 1");
    if (!(bin_width_s > 0.0)) throw std::invalid_argument("build_frame_set: bin width must be > 0");
    const int nbins = static_cast<int>(filtered.front().size());
    for (const auto& tr : filtered)
        if (static_cast<int>(tr.size()) != nbins)
            throw std::invalid_argument("build_frame_set: trace lengths differ");
    if (gross && gross->size() != filtered.size())
        throw std::invalid_argument("build_frame_set: gross trace count mismatch");

    std::vector<int> sorted = peaks;
    std::sort(sorted.begin(), sorted.end());
    for (int p : sorted)
        if (p < 0 || p >= nbins)
            throw std::invalid_argument("build_frame_set: peak outside trace");

    // Peak score for choosing the representative of merged windows.
    auto peak_score = [&](int p) {
        double s = 0.0;
        for (const auto& tr : filtered) s += std::fabs(tr[p]);
        return s;
    };

    DepthFrameSet out;
    out.window_bins = window_bins;

    // Per-bin background of the gross traces, from bins far from every peak.
    double gross_bg_bin = 0.0;
    if (gross) {
        const auto free = signal_free_bins(nbins, sorted, window_bins + 4);
        if (free.size() >= 10) {
            double acc = 0.0;
            for (const auto& g : *gross)
                for (int b : free) acc += static_cast<double>(g[b]);
            gross_bg_bin = acc / (static_cast<double>(free.size()) *
                                  static_cast<double>(gross->size()));
        }
    }

    std::vector<int> reps;
    for (int p : sorted) {
        if (!reps.empty() && p - reps.back() <= 2 * window_bins) {
            out.warnings.push_back("merged depth windows at trace bins " +
                                   std::to_string(reps.back()) + " and " + std::to_string(p));
            if (peak_score(p) > peak_score(reps.back())) reps.back() = p;
        } else {
            reps.push_back(p);
        }
    }

    for (int p : reps) {
        const int lo = std::max(0, p - window_bins);
        const int hi = std::min(nbins - 1, p + window_bins);
        out.peak_bins.push_back(p);
        out.depth_m.push_back((p + 0.5) * bin_width_s * kSpeedOfLight / 2.0);
        std::vector<double> col(filtered.size(), 0.0);
        for (std::size_t i = 0; i < filtered.size(); ++i) {
            double acc = 0.0;
            for (int t = lo; t <= hi; ++t) acc += filtered[i][t];
            col[i] = acc;
        }
        out.columns.push_back(std::move(col));
        double gross_win = 0.0;
        if (gross) {
            for (const auto& g : *gross)
                for (int t = lo; t <= hi; ++t) gross_win += static_cast<double>(g[t]);
            out.dc_total.push_back(gross_win / static_cast<double>(gross->size()) -
                                   gross_bg_bin * (hi - lo + 1));
        }
        out.noise_sigma.push_back(gross_win > 0.0 ? std::sqrt(gross_win) : 0.0);
    }
    return out;
}

// Mean counts per bin over a set of signal-free bins. Needs at least 10
// bins for a stable estimate.
inline double estimate_background(const Trace& trace, const std::vector<int>& signal_free_bins) {
    if (signal_free_bins.size() < 10)
        throw std::invalid_argument("estimate_background: need at least 10 signal-free bins");
    double acc = 0.0;
    for (int b : signal_free_bins) {
        if (b < 0 || b >= static_cast<int>(trace.counts.size()))
            throw std::invalid_argument("estimate_background: bin outside trace");
        acc += static_cast<double>(trace.counts[b]);
    }
    return acc / static_cast<double>(signal_free_bins.size());
}

// Converts single-sided (non-differential) depth columns into approximate
// +-1-row measurements: a positive mask sees (<row, x> + sum(x))/2 plus
// background, so after background removal the column is doubled and its
// mean (a DC estimate shared by all random rows) subtracted. The residual
// DC estimation error is absorbed into the solver's fidelity slack. The
// subtracted mean replaces any gross-trace total in dc_total: single-sided
// gross traces only cover half the aperture, so the column mean is the
// right estimate of the frame total here.
inline void debias_single_sided(DepthFrameSet& fs, double background_per_window) {
    fs.dc_total.assign(fs.columns.size(), 0.0);
    for (std::size_t b = 0; b < fs.columns.size(); ++b) {
        auto& col = fs.columns[b];
        double mean = 0.0;
        for (double& v : col) {
            v = 2.0 * (v - background_per_window);
            mean += v;
        }
        mean /= static_cast<double>(col.size());
        for (double& v : col) v -= mean;
        fs.dc_total[b] = mean;
    }
}

} // namespace cslidar
