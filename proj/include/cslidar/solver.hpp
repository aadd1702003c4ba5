#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "basis.hpp"
#include "image.hpp"

namespace cslidar {

enum class Objective { tv, l1 };

struct SolverConfig {
    Objective objective = Objective::tv;
    double smoothing_mu = 0.0;        // final Huber smoothing; 0 picks 1e-5 * initial
    double tolerance = 1e-7;          // relative objective change over a 10-iter window
    int max_iters = 3000;             // per continuation stage
    int continuation_steps = 5;
    double data_fidelity_delta = 0.0; // radius of ||Ax - y||_2 constraint

    void validate() const {
        if (!(smoothing_mu >= 0.0))
            throw std::invalid_argument("solver: smoothing_mu must be >= 0");
        if (!(tolerance > 0.0))
            throw std::invalid_argument("solver: tolerance must be > 0");
        if (max_iters < 1)
            throw std::invalid_argument("solver: max_iters must be >= 1");
        if (continuation_steps < 1)
            throw std::invalid_argument("solver: continuation_steps must be >= 1");
        if (!(data_fidelity_delta >= 0.0))
            throw std::invalid_argument("solver: data_fidelity_delta must be >= 0");
    }
};

struct FrameDiagnostics {
    int iterations = 0;
    bool converged = false;
    double final_residual = 0.0;
    std::vector<double> objective_per_iter;  // unsmoothed objective of each iterate
    std::vector<double> stage_objectives;    // best objective after each stage
};

struct FrameSolve {
    Image image;
    FrameDiagnostics diagnostics;
};

// Anisotropic total variation: sum of |horizontal| + |vertical| neighbor
// differences.
inline double tv_norm(const Image& img) {
    double acc = 0.0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (x + 1 < img.width) acc += std::fabs(img.at(x + 1, y) - img.at(x, y));
            if (y + 1 < img.height) acc += std::fabs(img.at(x, y + 1) - img.at(x, y));
        }
    return acc;
}

inline double l1_norm(const Image& img) {
    double acc = 0.0;
    for (double v : img.data) acc += std::fabs(v);
    return acc;
}

namespace detail {

inline double huber(double d, double mu) {
    const double a = std::fabs(d);
    return a >= mu ? a - 0.5 * mu : d * d / (2.0 * mu);
}

inline double huber_slope(double d, double mu) {
    return std::clamp(d / mu, -1.0, 1.0);
}

// Value and gradient of the Huber-smoothed objective. The gradient is
// Lipschitz with constant 1/mu (l1) or 8/mu (tv).
inline double smoothed_value_grad(const std::vector<double>& x, int w, int h,
                                  double mu, Objective obj, std::vector<double>& grad) {
    grad.assign(x.size(), 0.0);
    double f = 0.0;
    if (obj == Objective::l1) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            f += huber(x[i], mu);
            grad[i] = huber_slope(x[i], mu);
        }
        return f;
    }
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            const std::size_t i = static_cast<std::size_t>(y) * w + xx;
            if (xx + 1 < w) {
                const double d = x[i + 1] - x[i];
                f += huber(d, mu);
                const double s = huber_slope(d, mu);
                grad[i + 1] += s;
                grad[i] -= s;
            }
            if (y + 1 < h) {
                const double d = x[i + w] - x[i];
                f += huber(d, mu);
                const double s = huber_slope(d, mu);
                grad[i + w] += s;
                grad[i] -= s;
            }
        }
    return f;
}

inline double true_objective(const std::vector<double>& x, int w, int h, Objective obj) {
    double f = 0.0;
    if (obj == Objective::l1) {
        for (double v : x) f += std::fabs(v);
        return f;
    }
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            const std::size_t i = static_cast<std::size_t>(y) * w + xx;
            if (xx + 1 < w) f += std::fabs(x[i + 1] - x[i]);
            if (y + 1 < h) f += std::fabs(x[i + w] - x[i]);
        }
    return f;
}

} // namespace detail

inline double smoothed_objective(const Image& img, double mu, Objective obj) {
    if (!(mu > 0.0)) throw std::invalid_argument("smoothed_objective: mu must be > 0");
    std::vector<double> g;
    return detail::smoothed_value_grad(img.data, img.width, img.height, mu, obj, g);
}

inline Image smoothed_gradient(const Image& img, double mu, Objective obj) {
    if (!(mu > 0.0)) throw std::invalid_argument("smoothed_gradient: mu must be > 0");
    std::vector<double> g;
    detail::smoothed_value_grad(img.data, img.width, img.height, mu, obj, g);
    Image out(img.width, img.height);
    out.data = std::move(g);
    return out;
}

// Minimizes TV or L1 subject to ||Ax - y||_2 <= delta, where A selects rows
// of the fast binary transform. Nesterov's accelerated scheme on the
// Huber-smoothed objective with geometric continuation in the smoothing
// parameter; A A^T = n I makes the feasible-ball projection closed-form, so
// every iterate stays feasible and A is never materialized. Each iteration
// costs four fast transforms plus O(n). Returns the best-objective feasible
// iterate; `converged` reports whether the final stage met the tolerance.
inline FrameSolve reconstruct_frame(const std::vector<double>& y,
                                    const MaskSchedule& schedule,
                                    int width, int height,
                                    const SolverConfig& cfg) {
    cfg.validate();
    const MeasurementBasis& basis = schedule.basis;
    if (basis.kind != MeasurementBasis::Kind::fast_binary)
        throw std::invalid_argument("reconstruct_frame: schedule must use a fast_binary basis");
    if (width * height != basis.n)
        throw std::invalid_argument("reconstruct_frame: width*height != basis n");
    if (y.size() != schedule.rows.size())
        throw std::invalid_argument("reconstruct_frame: measurement count != schedule rows");
    const int n = basis.n;
    const int m = static_cast<int>(y.size());
    const double nd = static_cast<double>(n);

    auto apply_A = [&](const std::vector<double>& x) {
        const auto t = fast_transform(basis, x);
        std::vector<double> out(m);
        for (int i = 0; i < m; ++i) out[i] = t[schedule.rows[i]];
        return out;
    };
    auto apply_At = [&](const std::vector<double>& v) {
        std::vector<double> z(n, 0.0);
        for (int i = 0; i < m; ++i) z[schedule.rows[i]] = v[i];
        return fast_transform(basis, z);
    };
    // Projection onto {u : ||Au - y|| <= delta}; exact because A A^T = n I.
    auto project = [&](std::vector<double> u) {
        const auto au = apply_A(u);
        std::vector<double> r(m);
        double nr2 = 0.0;
        for (int i = 0; i < m; ++i) {
            r[i] = y[i] - au[i];
            nr2 += r[i] * r[i];
        }
        const double nr = std::sqrt(nr2);
        if (nr <= cfg.data_fidelity_delta) return u;
        const double step = (1.0 - cfg.data_fidelity_delta / nr) / nd;
        const auto corr = apply_At(r);
        for (int i = 0; i < n; ++i) u[i] += step * corr[i];
        return u;
    };

    FrameSolve out;
    out.image = Image(width, height);
    FrameDiagnostics& diag = out.diagnostics;

    std::vector<double> x = apply_At(y);
    for (double& v : x) v /= nd;  // A x0 = y exactly
    double max_abs = 0.0;
    for (double v : x) max_abs = std::max(max_abs, std::fabs(v));
    if (max_abs == 0.0) {  // y == 0: zero image is optimal and feasible
        diag.converged = true;
        return out;
    }

    const double mu0 = 0.9 * max_abs;
    const double mu_final =
        cfg.smoothing_mu > 0.0 ? std::min(cfg.smoothing_mu, mu0) : 1e-5 * mu0;
    const double lf = cfg.objective == Objective::tv ? 8.0 : 1.0;
    const double ratio = std::pow(mu_final / mu0, 1.0 / cfg.continuation_steps);

    std::vector<double> best = x;
    double best_obj = detail::true_objective(x, width, height, cfg.objective);

    std::vector<double> grad, wsum(n), trial(n), history;
    double mu = mu0;
    for (int stage = 0; stage < cfg.continuation_steps; ++stage) {
        mu *= ratio;
        if (stage + 1 == cfg.continuation_steps) mu = mu_final;
        const double step = mu / lf;
        const std::vector<double> center = best;  // prox center: warm start
        x = best;
        std::fill(wsum.begin(), wsum.end(), 0.0);
        history.clear();
        bool stage_converged = false;

        for (int k = 0; k < cfg.max_iters; ++k) {
            const double f =
                detail::smoothed_value_grad(x, width, height, mu, cfg.objective, grad);

            for (int i = 0; i < n; ++i) trial[i] = x[i] - step * grad[i];
            const auto yk = project(trial);
            const double obj =
                detail::true_objective(yk, width, height, cfg.objective);
            diag.objective_per_iter.push_back(obj);
            if (obj < best_obj) {
                best_obj = obj;
                best = yk;
            }

            const double alpha = 0.5 * (k + 1);
            for (int i = 0; i < n; ++i) wsum[i] += alpha * grad[i];
            for (int i = 0; i < n; ++i) trial[i] = center[i] - step * wsum[i];
            const auto zk = project(trial);

            const double tau = 2.0 / (k + 3.0);
            for (int i = 0; i < n; ++i) x[i] = tau * zk[i] + (1.0 - tau) * yk[i];

            ++diag.iterations;
            history.push_back(f);
            if (history.size() > 10) {
                double mean = 0.0;
                for (std::size_t j = history.size() - 10; j < history.size(); ++j)
                    mean += history[j];
                mean /= 10.0;
                if (std::fabs(f - mean) <= cfg.tolerance * std::fabs(mean)) {
                    stage_converged = true;
                    break;
                }
            }
        }
        diag.stage_objectives.push_back(best_obj);
        diag.converged = stage_converged;
    }

    const auto abest = apply_A(best);
    double res2 = 0.0;
    for (int i = 0; i < m; ++i) res2 += (abest[i] - y[i]) * (abest[i] - y[i]);
    diag.final_residual = std::sqrt(res2);
    out.image.data = std::move(best);
    return out;
}

// One 3D point per occupied pixel, in pixel coordinates plus metric depth.
struct CloudPoint {
    int x_pixel = 0;
    int y_pixel = 0;
    double depth_m = 0.0;
    double intensity = 0.0;
};

struct PointCloud {
    std::vector<CloudPoint> points;
};

// Fuses per-depth frames into a cloud. Intensities are clipped at zero; a
// pixel is occupied in a frame when its clipped value reaches
// occupancy_threshold times the global maximum over all frames, and a pixel
// claimed by several frames keeps the most intense one.
inline PointCloud stack_frames(const std::vector<Image>& frames,
                               const std::vector<double>& depth_m,
                               double occupancy_threshold) {
    if (frames.size() != depth_m.size())
        throw std::invalid_argument("stack_frames: frame/depth count mismatch");
    if (!(occupancy_threshold >= 0.0 && occupancy_threshold <= 1.0))
        throw std::invalid_argument("stack_frames: occupancy_threshold outside [0, 1]");
    PointCloud cloud;
    if (frames.empty()) return cloud;
    const int w = frames.front().width, h = frames.front().height;
    double gmax = 0.0;
    for (const auto& f : frames) {
        if (f.width != w || f.height != h)
            throw std::invalid_argument("stack_frames: frame dimensions differ");
        gmax = std::max(gmax, f.max_value());
    }
    if (gmax <= 0.0) return cloud;
    const double cut = occupancy_threshold * gmax;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int best = -1;
            double vbest = -1.0;
            for (std::size_t f = 0; f < frames.size(); ++f) {
                const double v = std::max(0.0, frames[f].at(x, y));
                if (v >= cut && v > vbest) {
                    vbest = v;
                    best = static_cast<int>(f);
                }
            }
            if (best >= 0)
                cloud.points.push_back(CloudPoint{x, y, depth_m[best], vbest});
        }
    return cloud;
}

} // namespace cslidar
