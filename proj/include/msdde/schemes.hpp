#pragma once

// One-step maps and the integration driver for Euler-Maruyama (EM), Milstein,
// Magnus-Euler-Maruyama (MEM) and Magnus-Milstein (MM).
//
// EM and Milstein integrate the folded plain form of the problem. MEM and MM
// split off the linear part: a Magnus exponential of the A_j-generated flow is
// applied to an EM / Milstein type update of the remaining terms, with the
// drift modified to f~ = f - sum_j A_j g_j.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msdde/errors.hpp"
#include "msdde/linalg.hpp"
#include "msdde/model.hpp"
#include "msdde/noise.hpp"

namespace msdde {

enum class SchemeKind { em, milstein, mem, mm };

inline std::string_view to_string(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::em: return "em";
        case SchemeKind::milstein: return "milstein";
        case SchemeKind::mem: return "mem";
        case SchemeKind::mm: return "mm";
    }
    return "?";
}

inline SchemeKind parse_scheme(std::string_view name) {
    if (name == "em") return SchemeKind::em;
    if (name == "milstein") return SchemeKind::milstein;
    if (name == "mem") return SchemeKind::mem;
    if (name == "mm") return SchemeKind::mm;
    throw ConfigurationError("unknown scheme '" + std::string(name) + "'");
}

inline std::string_view to_string(IntegralRule rule) {
    switch (rule) {
        case IntegralRule::trapezium: return "trapezium";
        case IntegralRule::rectangle: return "rectangle";
        case IntegralRule::riemann: return "riemann";
    }
    return "?";
}

inline IntegralRule parse_rule(std::string_view name) {
    if (name == "trapezium") return IntegralRule::trapezium;
    if (name == "rectangle") return IntegralRule::rectangle;
    if (name == "riemann") return IntegralRule::riemann;
    throw ConfigurationError("unknown integral rule '" + std::string(name) + "'");
}

inline bool is_second_order(SchemeKind kind) { return kind == SchemeKind::milstein || kind == SchemeKind::mm; }
inline bool is_magnus(SchemeKind kind) { return kind == SchemeKind::mem || kind == SchemeKind::mm; }

/// What a scheme needs from step_noise.
inline NoiseRequest noise_request(SchemeKind kind, IntegralRule rule = IntegralRule::trapezium) {
    return {is_second_order(kind), kind == SchemeKind::mm, rule};
}

/// Mesh values one step reads.
///
/// `lagged[k]` is (Y(t_n - tau_1 - tau_k), ..., Y(t_n - tau_K - tau_k)); it is
/// filled only when `active[k]`, i.e. t_n >= tau_k.
struct StepState {
    double t = 0.0;
    Vector current;
    std::vector<Vector> delayed;
    std::vector<bool> active;
    std::vector<std::vector<Vector>> lagged;
};

inline StepState gather_step_state(const SemilinearSdde& p, const Trajectory& y, std::ptrdiff_t n,
                                   bool with_lagged) {
    const TimeMesh& mesh = y.mesh();
    const auto pk = mesh.delay_steps();
    StepState s;
    s.t = mesh.time(n);
    s.current = y.at(n);
    const std::size_t K = p.delay_count();
    s.delayed.reserve(K);
    s.active.resize(K);
    s.lagged.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto lag_k = static_cast<std::ptrdiff_t>(pk[k]);
        s.delayed.push_back(y.at(n - lag_k));
        s.active[k] = n >= lag_k;
        if (with_lagged && s.active[k]) {
            for (std::size_t l = 0; l < K; ++l) {
                s.lagged[k].push_back(y.at(n - lag_k - static_cast<std::ptrdiff_t>(pk[l])));
            }
        }
    }
    return s;
}

/// Constant pieces of the Magnus logarithms: A^_0 = A_0 - 1/2 sum A_j^2 and the
/// non-vanishing brackets [A_i, A_j], 0 <= i < j <= m.
class MagnusGenerators {
public:
    explicit MagnusGenerators(const SemilinearSdde& p) : noise_dim_(p.noise_dim) {
        const auto d = static_cast<Eigen::Index>(p.dim);
        if (p.is_plain()) {
            drift_ = Matrix::Zero(d, d);
            return;
        }
        drift_ = p.A[0];
        for (std::size_t j = 1; j <= noise_dim_; ++j) {
            if (is_zero(p.A[j])) continue;
            drift_.noalias() -= 0.5 * (p.A[j] * p.A[j]);
            diffusion_.push_back({j, p.A[j]});
        }
        for (std::size_t i = 0; i <= noise_dim_; ++i) {
            for (std::size_t j = i + 1; j <= noise_dim_; ++j) {
                Matrix bracket = lie_bracket(p.A[i], p.A[j]);
                if (!is_zero(bracket)) brackets_.push_back({i, j, std::move(bracket)});
            }
        }
    }

    /// (A_0 - 1/2 sum A_j^2) h + sum A_j dW_j
    Matrix log1(const StepNoise& noise) const {
        Matrix omega = drift_ * noise.h;
        for (const auto& [j, a] : diffusion_) omega += a * noise.dW[static_cast<Eigen::Index>(j - 1)];
        return omega;
    }

    /// log1 + 1/2 sum_{i<j} [A_i, A_j] (I_ji - I_ij), with I_j0 / I_0j for i = 0.
    Matrix log2(const StepNoise& noise) const {
        Matrix omega = log1(noise);
        if (brackets_.empty()) return omega;
        if (!noise.has_doubles() || !noise.has_mixed()) {
            throw ConfigurationError("magnus_log_2: step noise lacks double or mixed integrals");
        }
        for (const auto& b : brackets_) {
            const auto j = static_cast<Eigen::Index>(b.j - 1);
            double area = 0.0;
            if (b.i == 0) {
                area = noise.Ij0[j] - noise.I0[j];
            } else {
                const auto i = static_cast<Eigen::Index>(b.i - 1);
                area = noise.I(j, i) - noise.I(i, j);
            }
            omega += (0.5 * area) * b.bracket;
        }
        return omega;
    }

    bool commuting() const { return brackets_.empty(); }

private:
    struct Diffusion {
        std::size_t j;
        Matrix a;
    };
    struct Bracket {
        std::size_t i;
        std::size_t j;
        Matrix bracket;
    };
    std::size_t noise_dim_;
    Matrix drift_;
    std::vector<Diffusion> diffusion_;
    std::vector<Bracket> brackets_;
};

inline Matrix magnus_log_1(const SemilinearSdde& p, const StepNoise& noise) {
    return MagnusGenerators(p).log1(noise);
}

inline Matrix magnus_log_2(const SemilinearSdde& p, const StepNoise& noise) {
    return MagnusGenerators(p).log2(noise);
}

namespace detail {

/// Y + f~ h + sum_j g_j dW_j, plus for `second_order` the immediate correction
/// sum_ij (grad_x g_j [A_i Y + g_i] - A_i g_j) I_ij and, for each k with
/// t_n >= tau_k, sum_ij grad_{x_tau_k} g_j [A_i Y^tau_k + g_i(delayed args)] I^tau_k_ij.
/// With a plain problem this is exactly the EM / Milstein update.
inline Vector taylor_update(const SemilinearSdde& p, const StepState& s, const StepNoise& noise, bool second_order) {
    const std::size_t m = p.noise_dim;
    if (noise.paths() != m) throw ConfigurationError("step: noise dimension does not match the problem");
    const bool plain = p.is_plain();
    const Vector& y = s.current;
    const std::span<const Vector> delayed(s.delayed);

    std::vector<Vector> g(m);
    for (std::size_t j = 0; j < m; ++j) g[j] = p.g[j](s.t, y, delayed);

    Vector drift = p.f(s.t, y, delayed);
    if (!plain) {
        for (std::size_t j = 0; j < m; ++j) {
            if (!is_zero(p.A[j + 1])) drift.noalias() -= p.A[j + 1] * g[j];
        }
    }
    Vector out = y + noise.h * drift;
    for (std::size_t j = 0; j < m; ++j) out += noise.dW[static_cast<Eigen::Index>(j)] * g[j];
    if (!second_order || m == 0) return out;

    if (!p.has_jacobians()) throw ConfigurationError("Milstein-type step requires diffusion Jacobians");
    if (!noise.has_doubles()) throw ConfigurationError("Milstein-type step requires double integrals");

    // u_i = A_i Y + g_i
    std::vector<Vector> u(m);
    for (std::size_t i = 0; i < m; ++i) {
        u[i] = g[i];
        if (!plain && !is_zero(p.A[i + 1])) u[i].noalias() += p.A[i + 1] * y;
    }
    for (std::size_t j = 0; j < m; ++j) {
        if (!p.jac_x_g[j]) throw ConfigurationError("Milstein-type step: missing grad_x g_" + std::to_string(j + 1));
        Vector combined = Vector::Zero(y.size());
        for (std::size_t i = 0; i < m; ++i) {
            combined += noise.I(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * u[i];
        }
        out.noalias() += p.jac_x_g[j](s.t, y, delayed) * combined;
        if (!plain) {
            for (std::size_t i = 0; i < m; ++i) {
                if (is_zero(p.A[i + 1])) continue;
                out.noalias() -= noise.I(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                                 (p.A[i + 1] * g[j]);
            }
        }
    }

    for (std::size_t k = 0; k < p.delay_count(); ++k) {
        if (!s.active[k]) continue;
        if (!noise.has_delayed(k)) {
            throw ConfigurationError("Milstein-type step requires delayed double integrals for tau_" +
                                     std::to_string(k + 1));
        }
        const double t_lag = s.t - p.delays[k];
        const Vector& y_lag = s.delayed[k];
        const std::span<const Vector> lag_args(s.lagged[k]);
        std::vector<Vector> v(m);
        for (std::size_t i = 0; i < m; ++i) {
            v[i] = p.g[i](t_lag, y_lag, lag_args);
            if (!plain && !is_zero(p.A[i + 1])) v[i].noalias() += p.A[i + 1] * y_lag;
        }
        const Matrix& lagged_integrals = noise.delayed[k];
        for (std::size_t j = 0; j < m; ++j) {
            if (!p.jac_delay_g[j][k]) {
                throw ConfigurationError("Milstein-type step: missing delayed Jacobian of g_" + std::to_string(j + 1));
            }
            Vector combined = Vector::Zero(y.size());
            for (std::size_t i = 0; i < m; ++i) {
                combined += lagged_integrals(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * v[i];
            }
            out.noalias() += p.jac_delay_g[j][k](s.t, y, delayed) * combined;
        }
    }
    return out;
}

inline Vector apply_exponential(const Matrix& omega, Vector inner) {
    if (is_zero(omega)) return inner;
    return mat_exp(omega) * inner;
}

}  // namespace detail

inline Vector step_em(const SemilinearSdde& p, const StepState& s, const StepNoise& noise) {
    if (!p.is_plain()) return detail::taylor_update(as_plain_sdde(p), s, noise, false);
    return detail::taylor_update(p, s, noise, false);
}

inline Vector step_milstein(const SemilinearSdde& p, const StepState& s, const StepNoise& noise) {
    if (!p.is_plain()) return detail::taylor_update(as_plain_sdde(p), s, noise, true);
    return detail::taylor_update(p, s, noise, true);
}

inline Vector step_mem(const SemilinearSdde& p, const MagnusGenerators& gen, const StepState& s,
                       const StepNoise& noise) {
    return detail::apply_exponential(gen.log1(noise), detail::taylor_update(p, s, noise, false));
}

inline Vector step_mem(const SemilinearSdde& p, const StepState& s, const StepNoise& noise) {
    return step_mem(p, MagnusGenerators(p), s, noise);
}

inline Vector step_mm(const SemilinearSdde& p, const MagnusGenerators& gen, const StepState& s,
                      const StepNoise& noise) {
    return detail::apply_exponential(gen.log2(noise), detail::taylor_update(p, s, noise, true));
}

inline Vector step_mm(const SemilinearSdde& p, const StepState& s, const StepNoise& noise) {
    return step_mm(p, MagnusGenerators(p), s, noise);
}

inline constexpr double kDivergenceThreshold = 1e12;

/// Coarse-step noise for every step of `mesh`, taken from `lat` with
/// `subintervals` equal pieces per step (0 selects h / h_ref).
inline std::vector<StepNoise> step_noise_sequence(const WienerLattice& lat, const TimeMesh& mesh,
                                                  std::span<const double> delays, std::size_t subintervals,
                                                  const NoiseRequest& request) {
    const double h = mesh.step();
    if (subintervals == 0) {
        subintervals = static_cast<std::size_t>(detail::exact_multiple(h, lat.h_ref(), "scheme step vs lattice"));
    }
    std::vector<StepNoise> out;
    out.reserve(mesh.steps());
    for (std::size_t n = 0; n < mesh.steps(); ++n) {
        out.push_back(step_noise(lat, mesh.time(static_cast<std::ptrdiff_t>(n)), h, subintervals, delays, request));
    }
    return out;
}

/// Runs `kind` over the whole mesh with precomputed step noise. A run whose
/// state leaves [-1e12, 1e12] (or turns non-finite) is flagged diverged and stopped.
inline Trajectory integrate(const SemilinearSdde& p, SchemeKind kind, const TimeMesh& mesh,
                            std::span<const StepNoise> noise) {
    p.validate();
    if (std::abs(mesh.time(mesh.last()) - p.horizon) > 1e-9 * p.horizon) {
        throw MeshAlignmentError("integrate: mesh does not end at the problem horizon");
    }
    if (mesh.delay_steps().size() != p.delay_count()) {
        throw MeshAlignmentError("integrate: mesh was built for a different delay set");
    }
    if (noise.size() != mesh.steps()) throw ConfigurationError("integrate: need one StepNoise per step");
    const bool second = is_second_order(kind);
    if (second) {
        if (mesh.step() > p.min_delay() * (1.0 + 1e-12)) {
            throw StepSizeError("integrate: Milstein-type schemes need h <= min delay");
        }
        if (!p.has_jacobians()) throw ConfigurationError("integrate: Milstein-type schemes need diffusion Jacobians");
    }

    const SemilinearSdde plain = is_magnus(kind) ? SemilinearSdde{} : as_plain_sdde(p);
    const SemilinearSdde& problem = is_magnus(kind) ? p : plain;
    const std::optional<MagnusGenerators> gen =
        is_magnus(kind) ? std::optional<MagnusGenerators>(MagnusGenerators(p)) : std::nullopt;

    Trajectory y(mesh, p.history);
    for (std::size_t n = 0; n < mesh.steps(); ++n) {
        const auto idx = static_cast<std::ptrdiff_t>(n);
        const StepState s = gather_step_state(problem, y, idx, second);
        Vector next;
        switch (kind) {
            case SchemeKind::em: next = step_em(problem, s, noise[n]); break;
            case SchemeKind::milstein: next = step_milstein(problem, s, noise[n]); break;
            case SchemeKind::mem: next = step_mem(problem, *gen, s, noise[n]); break;
            case SchemeKind::mm: next = step_mm(problem, *gen, s, noise[n]); break;
        }
        const bool blown = !next.allFinite() || next.cwiseAbs().maxCoeff() > kDivergenceThreshold;
        y.set(idx + 1, std::move(next));
        if (blown) {
            y.mark_diverged(idx + 1);
            break;
        }
    }
    return y;
}

/// Runs `kind` with noise drawn from `lat`; `subintervals` = 0 selects h / h_ref.
inline Trajectory integrate(const SemilinearSdde& p, SchemeKind kind, const TimeMesh& mesh, const WienerLattice& lat,
                            std::size_t subintervals = 0, IntegralRule rule = IntegralRule::trapezium) {
    if (lat.paths() != p.noise_dim) throw ConfigurationError("integrate: lattice path count differs from m");
    if (is_second_order(kind) && mesh.step() > p.min_delay() * (1.0 + 1e-12)) {
        throw StepSizeError("integrate: Milstein-type schemes need h <= min delay");
    }
    const auto noise = step_noise_sequence(lat, mesh, p.delays, subintervals, noise_request(kind, rule));
    return integrate(p, kind, mesh, noise);
}

}  // namespace msdde
