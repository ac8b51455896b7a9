#pragma once

// Semilinear SDDE
//
//   dX = [A_0 X + f(t, X, X(t - tau_1), ..., X(t - tau_K))] dt
//        + sum_j [A_j X + g_j(t, X, X(t - tau_1), ...)] dW_j,     X = phi on [-tau, 0],
//
// together with delay-aligned meshes, Bellman breakpoints and trajectory storage.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msdde/errors.hpp"
#include "msdde/linalg.hpp"
#include "msdde/noise.hpp"

namespace msdde {

/// (t, x, [x(t - tau_1), ..., x(t - tau_K)]) -> R^d
using VectorField = std::function<Vector(double, const Vector&, std::span<const Vector>)>;
/// Same arguments, returns a d x d Jacobian.
using JacobianField = std::function<Matrix(double, const Vector&, std::span<const Vector>)>;
using History = std::function<Vector(double)>;

/// Problem description. `A` is either empty (no linear part, the "plain" form) or
/// holds m + 1 matrices A_0..A_m. Jacobian vectors are optional: `jac_x_g` has m
/// entries, `jac_delay_g[j]` has K entries.
struct SemilinearSdde {
    std::size_t dim = 0;
    std::size_t noise_dim = 0;
    std::vector<Matrix> A;
    std::vector<double> delays;
    double horizon = 0.0;
    VectorField f;
    std::vector<VectorField> g;
    std::vector<JacobianField> jac_x_g;
    std::vector<std::vector<JacobianField>> jac_delay_g;
    History history;

    std::size_t delay_count() const { return delays.size(); }
    double max_delay() const { return delays.empty() ? 0.0 : *std::max_element(delays.begin(), delays.end()); }
    double min_delay() const {
        return delays.empty() ? std::numeric_limits<double>::infinity()
                              : *std::min_element(delays.begin(), delays.end());
    }
    bool is_plain() const { return A.empty(); }
    bool has_jacobians() const {
        if (jac_x_g.size() != noise_dim || jac_delay_g.size() != noise_dim) return false;
        for (const auto& row : jac_delay_g) {
            if (row.size() != delays.size()) return false;
        }
        return true;
    }

    /// Throws ConfigurationError / InvalidArgument on structural problems.
    void validate() const {
        if (dim < 1) throw InvalidArgument("SemilinearSdde: state dimension must be >= 1");
        if (!(horizon > 0.0)) throw InvalidArgument("SemilinearSdde: horizon must be positive");
        for (double tau : delays) {
            if (!(tau > 0.0)) throw InvalidArgument("SemilinearSdde: delays must be positive");
        }
        if (!A.empty()) {
            if (A.size() != noise_dim + 1) {
                throw ConfigurationError("SemilinearSdde: expected m + 1 = " + std::to_string(noise_dim + 1) +
                                         " linear matrices, got " + std::to_string(A.size()));
            }
            for (const auto& a : A) {
                if (a.rows() != static_cast<Eigen::Index>(dim) || a.cols() != static_cast<Eigen::Index>(dim)) {
                    throw ConfigurationError("SemilinearSdde: linear matrix has wrong shape");
                }
                if (!all_finite(a)) throw InvalidArgument("SemilinearSdde: linear matrix has non-finite entries");
            }
        }
        if (!f) throw ConfigurationError("SemilinearSdde: drift callback missing");
        if (g.size() != noise_dim) throw ConfigurationError("SemilinearSdde: expected one diffusion callback per noise");
        if (!history) throw ConfigurationError("SemilinearSdde: history callback missing");
    }
};

/// Problem with only the linear parts: f = g_j = 0, exact zero Jacobians.
inline SemilinearSdde linear_problem(std::vector<Matrix> a, std::vector<double> delays, double horizon,
                                     History history) {
    SemilinearSdde p;
    p.dim = static_cast<std::size_t>(a.at(0).rows());
    p.noise_dim = a.size() - 1;
    p.A = std::move(a);
    p.delays = std::move(delays);
    p.horizon = horizon;
    const auto d = static_cast<Eigen::Index>(p.dim);
    const VectorField zero = [d](double, const Vector&, std::span<const Vector>) { return Vector::Zero(d).eval(); };
    const JacobianField zero_jac = [d](double, const Vector&, std::span<const Vector>) {
        return Matrix::Zero(d, d).eval();
    };
    p.f = zero;
    p.g.assign(p.noise_dim, zero);
    p.jac_x_g.assign(p.noise_dim, zero_jac);
    p.jac_delay_g.assign(p.noise_dim, std::vector<JacobianField>(p.delays.size(), zero_jac));
    p.history = std::move(history);
    return p;
}

/// f - sum_j A_j g_j at the given arguments.
inline Vector f_tilde(const SemilinearSdde& p, double t, const Vector& x, std::span<const Vector> delayed) {
    Vector out = p.f(t, x, delayed);
    if (p.is_plain()) return out;
    for (std::size_t j = 0; j < p.noise_dim; ++j) {
        if (is_zero(p.A[j + 1])) continue;
        out.noalias() -= p.A[j + 1] * p.g[j](t, x, delayed);
    }
    return out;
}

/// Equivalent problem with the linear parts folded into the callbacks: drift
/// A_0 x + f, diffusions A_j x + g_j, Jacobians A_j + grad_x g_j. A problem whose
/// matrices are all zero keeps its callbacks unchanged.
inline SemilinearSdde as_plain_sdde(const SemilinearSdde& p) {
    SemilinearSdde out = p;
    out.A.clear();
    if (p.is_plain() || std::all_of(p.A.begin(), p.A.end(), [](const Matrix& a) { return is_zero(a); })) {
        return out;
    }
    const Matrix a0 = p.A[0];
    out.f = [a0, f = p.f](double t, const Vector& x, std::span<const Vector> delayed) {
        Vector v = f(t, x, delayed);
        v.noalias() += a0 * x;
        return v;
    };
    for (std::size_t j = 0; j < p.noise_dim; ++j) {
        const Matrix aj = p.A[j + 1];
        out.g[j] = [aj, g = p.g[j]](double t, const Vector& x, std::span<const Vector> delayed) {
            Vector v = g(t, x, delayed);
            v.noalias() += aj * x;
            return v;
        };
        if (j < p.jac_x_g.size() && p.jac_x_g[j]) {
            out.jac_x_g[j] = [aj, jac = p.jac_x_g[j]](double t, const Vector& x, std::span<const Vector> delayed) {
                Matrix m = jac(t, x, delayed);
                m += aj;
                return m;
            };
        }
    }
    return out;
}

/// Fills every missing Jacobian with a central finite difference of step
/// 1e-6 (1 + |x_i|). Opt-in only.
inline SemilinearSdde with_finite_difference_jacobians(SemilinearSdde p) {
    auto differentiate = [](VectorField g, std::ptrdiff_t slot) -> JacobianField {
        // slot < 0: current state, otherwise the delayed argument with that index
        return [g = std::move(g), slot](double t, const Vector& x, std::span<const Vector> delayed) {
            std::vector<Vector> args(delayed.begin(), delayed.end());
            Vector base = slot < 0 ? x : args[static_cast<std::size_t>(slot)];
            const auto d = base.size();
            Matrix jac(d, d);
            for (Eigen::Index i = 0; i < d; ++i) {
                const double step = 1e-6 * (1.0 + std::abs(base[i]));
                Vector plus = base, minus = base;
                plus[i] += step;
                minus[i] -= step;
                Vector gp, gm;
                if (slot < 0) {
                    gp = g(t, plus, delayed);
                    gm = g(t, minus, delayed);
                } else {
                    args[static_cast<std::size_t>(slot)] = plus;
                    gp = g(t, x, args);
                    args[static_cast<std::size_t>(slot)] = minus;
                    gm = g(t, x, args);
                    args[static_cast<std::size_t>(slot)] = base;
                }
                jac.col(i) = (gp - gm) / (2.0 * step);
            }
            return jac;
        };
    };
    p.jac_x_g.resize(p.noise_dim);
    p.jac_delay_g.resize(p.noise_dim);
    for (std::size_t j = 0; j < p.noise_dim; ++j) {
        if (!p.jac_x_g[j]) p.jac_x_g[j] = differentiate(p.g[j], -1);
        p.jac_delay_g[j].resize(p.delays.size());
        for (std::size_t k = 0; k < p.delays.size(); ++k) {
            if (!p.jac_delay_g[j][k]) p.jac_delay_g[j][k] = differentiate(p.g[j], static_cast<std::ptrdiff_t>(k));
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Bellman breakpoints

/// Sorted, merged delay multiples in (0, T], always ending at T. Delays are
/// compared on a 1e-12 relative tolerance when merging.
inline std::vector<double> bellman_intervals(std::span<const double> delays, double horizon) {
    if (!(horizon > 0.0)) throw InvalidArgument("bellman_intervals: horizon must be positive");
    std::vector<double> points;
    for (double tau : delays) {
        if (!(tau > 0.0)) throw InvalidArgument("bellman_intervals: delays must be positive");
        for (std::size_t n = 1;; ++n) {
            const double sigma = static_cast<double>(n) * tau;
            if (sigma > horizon * (1.0 + 1e-12)) break;
            points.push_back(std::min(sigma, horizon));
        }
    }
    points.push_back(horizon);
    std::sort(points.begin(), points.end());
    std::vector<double> merged;
    for (double s : points) {
        if (merged.empty() || s - merged.back() > 1e-12 * std::max(1.0, s)) {
            merged.push_back(s);
        } else if (s == horizon) {
            merged.back() = horizon;
        }
    }
    return merged;
}

// ---------------------------------------------------------------------------
// Meshes and trajectories

/// Uniform mesh t_n = n h for n = -p..N with t_{-p} = -tau and t_N = T.
class TimeMesh {
public:
    TimeMesh() = default;

    /// Throws MeshAlignmentError when T or some delay is not a multiple of h.
    TimeMesh(double horizon, double step, std::span<const double> delays) : step_(step) {
        if (!(step > 0.0)) throw InvalidArgument("build_mesh: step must be positive");
        if (!(horizon > 0.0)) throw InvalidArgument("build_mesh: horizon must be positive");
        steps_ = static_cast<std::size_t>(detail::exact_multiple(horizon, step, "build_mesh horizon"));
        for (std::size_t k = 0; k < delays.size(); ++k) {
            if (!(delays[k] > 0.0)) throw InvalidArgument("build_mesh: delays must be positive");
            const auto pk = detail::exact_multiple(
                delays[k], step, "build_mesh delay tau_" + std::to_string(k + 1) + " = " + std::to_string(delays[k]));
            delay_steps_.push_back(static_cast<std::size_t>(pk));
            history_steps_ = std::max(history_steps_, static_cast<std::size_t>(pk));
        }
    }

    double step() const { return step_; }
    /// N
    std::size_t steps() const { return steps_; }
    /// p, the number of steps in [-tau, 0].
    std::size_t history_steps() const { return history_steps_; }
    /// p_k with t_{p_k} = tau_k.
    std::span<const std::size_t> delay_steps() const { return delay_steps_; }
    std::size_t size() const { return history_steps_ + steps_ + 1; }

    double time(std::ptrdiff_t n) const { return static_cast<double>(n) * step_; }
    std::ptrdiff_t first() const { return -static_cast<std::ptrdiff_t>(history_steps_); }
    std::ptrdiff_t last() const { return static_cast<std::ptrdiff_t>(steps_); }

    /// Mesh index of t; throws LookupError when off-mesh or out of range.
    std::ptrdiff_t index_of(double t) const {
        const double ratio = t / step_;
        const double nearest = std::round(ratio);
        if (std::abs(ratio - nearest) > 1e-9 * std::max(1.0, std::abs(ratio))) {
            throw LookupError("time " + std::to_string(t) + " is not a mesh point");
        }
        const auto n = static_cast<std::ptrdiff_t>(nearest);
        if (n < first() || n > last()) throw LookupError("time " + std::to_string(t) + " outside the mesh");
        return n;
    }

private:
    double step_ = 0.0;
    std::size_t steps_ = 0;
    std::size_t history_steps_ = 0;
    std::vector<std::size_t> delay_steps_;
};

inline TimeMesh build_mesh(double horizon, double step, std::span<const double> delays) {
    return {horizon, step, delays};
}

/// Scheme output Y_n, n = -p..N. History entries hold phi(t_n). When a run
/// diverges the remaining entries are NaN and `diverged_at()` gives the first
/// offending index.
class Trajectory {
public:
    Trajectory(TimeMesh mesh, const History& history) : mesh_(std::move(mesh)) {
        values_.reserve(mesh_.size());
        for (std::ptrdiff_t n = mesh_.first(); n <= 0; ++n) values_.push_back(history(mesh_.time(n)));
        const auto d = values_.front().size();
        values_.resize(mesh_.size(), Vector::Constant(d, std::numeric_limits<double>::quiet_NaN()));
    }

    const TimeMesh& mesh() const { return mesh_; }
    std::size_t dim() const { return static_cast<std::size_t>(values_.front().size()); }

    const Vector& at(std::ptrdiff_t n) const {
        if (n < mesh_.first() || n > mesh_.last()) {
            throw LookupError("trajectory index " + std::to_string(n) + " outside the mesh");
        }
        return values_[static_cast<std::size_t>(n - mesh_.first())];
    }
    void set(std::ptrdiff_t n, Vector y) { values_[static_cast<std::size_t>(n - mesh_.first())] = std::move(y); }

    /// Y at mesh time t (history values for t <= 0).
    const Vector& lookup(double t) const { return at(mesh_.index_of(t)); }
    const Vector& final_value() const { return values_.back(); }

    bool diverged() const { return diverged_at_.has_value(); }
    std::optional<std::ptrdiff_t> diverged_at() const { return diverged_at_; }
    void mark_diverged(std::ptrdiff_t n) { diverged_at_ = n; }

private:
    TimeMesh mesh_;
    std::vector<Vector> values_;
    std::optional<std::ptrdiff_t> diverged_at_;
};

}  // namespace msdde
