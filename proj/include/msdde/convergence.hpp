#pragma once

// Monte Carlo strong-error harness. Each trial samples one Wiener lattice at the
// reference step; the reference run and every scheme at every h read that lattice.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "msdde/errors.hpp"
#include "msdde/model.hpp"
#include "msdde/noise.hpp"
#include "msdde/philox.hpp"
#include "msdde/presets.hpp"
#include "msdde/schemes.hpp"

namespace msdde {

struct SchemeSeries {
    SchemeKind scheme = SchemeKind::em;
    std::vector<double> steps;
    std::vector<double> mse;
    std::vector<bool> diverged;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
};

struct ConvergenceReport {
    std::vector<SchemeSeries> series;
    std::size_t trials = 0;
    double reference_step = 0.0;
    SchemeKind reference_scheme = SchemeKind::milstein;
    std::size_t lattices_sampled = 0;
    std::size_t reference_divergences = 0;
    double runtime_seconds = 0.0;

    bool any_diverged() const {
        if (reference_divergences > 0) return true;
        for (const auto& s : series) {
            if (std::find(s.diverged.begin(), s.diverged.end(), true) != s.diverged.end()) return true;
        }
        return false;
    }
};

/// Least squares line through (ln h, ln mse): returns (slope, intercept).
inline std::pair<double, double> fit_slope(std::span<const double> h, std::span<const double> mse) {
    if (h.size() != mse.size()) throw InvalidArgument("fit_slope: size mismatch");
    if (h.size() < 2) throw InvalidArgument("fit_slope: need at least two points");
    const auto n = static_cast<double>(h.size());
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!(h[i] > 0.0) || !(mse[i] > 0.0)) throw InvalidArgument("fit_slope: values must be positive");
        sx += std::log(h[i]);
        sy += std::log(mse[i]);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double dx = std::log(h[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(mse[i]) - my);
    }
    if (sxx == 0.0) throw InvalidArgument("fit_slope: step sizes must not all coincide");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

inline std::pair<double, double> fit_slope(std::span<const std::pair<double, double>> points) {
    std::vector<double> h, e;
    for (const auto& [a, b] : points) {
        h.push_back(a);
        e.push_back(b);
    }
    return fit_slope(h, e);
}

/// Seed of trial `i`, independent of scheduling. The base is mixed first so that
/// small bases do not share trial seeds.
inline std::uint64_t trial_seed(std::uint64_t base, std::size_t i) {
    return rng::mix64(rng::mix64(base) ^ static_cast<std::uint64_t>(i));
}

namespace detail {

/// Squared final-time errors of one trial, laid out [scheme][step]; NaN marks a diverged run.
struct TrialErrors {
    std::vector<double> squared;
    bool reference_diverged = false;
};

inline TrialErrors run_trial(const SemilinearSdde& p, const ExperimentConfig& cfg, std::size_t trial,
                             std::atomic<std::size_t>& lattices) {
    const WienerLattice lat = sample_lattice(p.noise_dim, p.horizon, cfg.reference_step, trial_seed(cfg.seed, trial));
    lattices.fetch_add(1, std::memory_order_relaxed);

    TrialErrors out;
    out.squared.assign(cfg.schemes.size() * cfg.steps.size(), std::numeric_limits<double>::quiet_NaN());

    const TimeMesh ref_mesh(p.horizon, cfg.reference_step, p.delays);
    const Trajectory reference = integrate(p, cfg.reference_scheme, ref_mesh, lat, 1, cfg.rule);
    if (reference.diverged()) {
        out.reference_diverged = true;
        return out;
    }
    const Vector& exact = reference.final_value();

    NoiseRequest request{false, false, cfg.rule};
    for (SchemeKind s : cfg.schemes) {
        request.doubles = request.doubles || is_second_order(s);
        request.mixed = request.mixed || s == SchemeKind::mm;
    }
    for (std::size_t hi = 0; hi < cfg.steps.size(); ++hi) {
        const double h = cfg.steps[hi];
        const TimeMesh mesh(p.horizon, h, p.delays);
        NoiseRequest req = request;
        if (req.doubles && h > p.min_delay() * (1.0 + 1e-12)) req.doubles = req.mixed = false;
        const auto noise = step_noise_sequence(lat, mesh, p.delays, 0, req);
        for (std::size_t si = 0; si < cfg.schemes.size(); ++si) {
            const SchemeKind kind = cfg.schemes[si];
            if (is_second_order(kind) && !req.doubles) {
                throw StepSizeError("run_convergence: Milstein-type schemes need h <= min delay");
            }
            const Trajectory y = integrate(p, kind, mesh, noise);
            if (y.diverged()) continue;
            out.squared[si * cfg.steps.size() + hi] = (y.final_value() - exact).squaredNorm();
        }
    }
    return out;
}

}  // namespace detail

/// MSE(T) = sqrt(mean_i |Y_N^(i) - X^(i)(T)|^2) per scheme and step, plus fitted slopes.
/// Steps at which any trial diverged are flagged and left out of the fit.
inline ConvergenceReport run_convergence(const SemilinearSdde& p, const ExperimentConfig& cfg) {
    p.validate();
    cfg.validate(p);
    const auto started = std::chrono::steady_clock::now();

    std::vector<detail::TrialErrors> results(cfg.trials);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> lattices{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < cfg.trials; i = next.fetch_add(1)) {
            try {
                results[i] = detail::run_trial(p, cfg, i, lattices);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(cfg.trials);
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(cfg.parallelism, 1, cfg.trials);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    ConvergenceReport report;
    report.trials = cfg.trials;
    report.reference_step = cfg.reference_step;
    report.reference_scheme = cfg.reference_scheme;
    report.lattices_sampled = lattices.load();
    for (const auto& r : results) report.reference_divergences += r.reference_diverged ? 1 : 0;

    const std::size_t n_steps = cfg.steps.size();
    for (std::size_t si = 0; si < cfg.schemes.size(); ++si) {
        SchemeSeries series;
        series.scheme = cfg.schemes[si];
        std::vector<double> fit_h, fit_e;
        for (std::size_t hi = 0; hi < n_steps; ++hi) {
            double sum = 0.0;
            for (const auto& r : results) sum += r.squared[si * n_steps + hi];
            const double mse = std::sqrt(sum / static_cast<double>(cfg.trials));
            const bool bad = !std::isfinite(mse);
            series.steps.push_back(cfg.steps[hi]);
            series.mse.push_back(mse);
            series.diverged.push_back(bad);
            if (!bad && mse > 0.0) {
                fit_h.push_back(cfg.steps[hi]);
                fit_e.push_back(mse);
            }
        }
        if (fit_h.size() >= 2) std::tie(series.slope, series.intercept) = fit_slope(fit_h, fit_e);
        report.series.push_back(std::move(series));
    }
    report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

}  // namespace msdde
