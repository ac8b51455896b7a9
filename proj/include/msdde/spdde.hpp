#pragma once

// Stochastic heat equation with delayed cooling on [0, 1], zero boundary values,
//
//   dU = [D U_xx + C_U(t - tau, x)] dt + c U dW^c(t, x),
//
// discretized in space by forward-time centered-space differences on x_j = j / d
// and assembled into a linear SDDE for (U_1, ..., U_d). U_d is the pinned right
// boundary, carried as a state with zero dynamics.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "msdde/errors.hpp"
#include "msdde/linalg.hpp"
#include "msdde/model.hpp"
#include "msdde/noise.hpp"

namespace msdde::spdde {

struct HeatProblem {
    double diffusion = 1.0 / 25.0;   // D
    double noise_scale = 0.15;       // c
    double delay = 1.0;              // tau; 0 means instantaneous cooling
    double rate_a = 1.0;             // r_a
    double rate_b = 10.0;            // r_b
    std::size_t intervals = 50;      // d, with dx = 1/d
    std::function<double(double)> initial = [](double x) { return std::sin(2.0 * std::numbers::pi * x); };
    NoiseKind noise = NoiseKind::correlated;
    double horizon = 6.0;

    double dx() const { return 1.0 / static_cast<double>(intervals); }
    double grid(std::size_t j) const { return static_cast<double>(j) * dx(); }
    /// Observation points a = x_1 and b = x_{d-1}.
    double point_a() const { return grid(1); }
    double point_b() const { return grid(intervals - 1); }

    void validate() const {
        if (!(diffusion > 0.0)) throw InvalidArgument("HeatProblem: diffusion coefficient must be positive");
        if (intervals < 3) throw InvalidArgument("HeatProblem: need at least 3 spatial intervals");
        if (delay < 0.0 || rate_a < 0.0 || rate_b < 0.0 || noise_scale < 0.0) {
            throw InvalidArgument("HeatProblem: delay, rates and noise scale must be non-negative");
        }
        if (!(horizon > 0.0)) throw InvalidArgument("HeatProblem: horizon must be positive");
        if (!initial) throw InvalidArgument("HeatProblem: initial temperature missing");
    }
};

/// Largest stable explicit step, (dx)^2 / (2 D). Explicit Euler is stable for h strictly below it.
inline double stability_threshold(const HeatProblem& hp) { return hp.dx() * hp.dx() / (2.0 * hp.diffusion); }

/// Delayed cooling C_U at x from the delayed observations u_a = U(t - tau, a), u_b = U(t - tau, b).
inline double cooling(const HeatProblem& hp, double u_a, double u_b, double x) {
    if (!(x > 0.0 && x < 1.0)) return 0.0;
    const double a = hp.point_a();
    const double b = hp.point_b();
    return ((x - b) / (b - a)) * hp.rate_a * u_a + ((a - x) / (b - a)) * hp.rate_b * u_b;
}

/// Default mode count: d for correlated noise, one mode per evolving point (d - 1) otherwise.
inline std::size_t default_modes(const HeatProblem& hp) {
    return hp.noise == NoiseKind::correlated ? hp.intervals : hp.intervals - 1;
}

/// The KL basis that drives `modes` Wiener processes on this grid.
inline KLBasis noise_basis(const HeatProblem& hp, std::size_t modes) {
    return kl_basis(hp.noise, modes, hp.dx());
}

/// (D / dx^2) times the tridiagonal second-difference matrix, last row zero.
inline Matrix diffusion_matrix(const HeatProblem& hp) {
    const auto d = static_cast<Eigen::Index>(hp.intervals);
    Matrix a0 = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i + 1 < d; ++i) {
        a0(i, i) = -2.0;
        if (i > 0) a0(i, i - 1) = 1.0;
        a0(i, i + 1) = 1.0;
    }
    return (hp.diffusion / (hp.dx() * hp.dx())) * a0;
}

/// Drift weight vectors v_1, v_2 (1-based entries j+1-d and 1-j, zero at j = d).
inline std::pair<Vector, Vector> cooling_weights(const HeatProblem& hp) {
    const auto d = static_cast<Eigen::Index>(hp.intervals);
    Vector v1 = Vector::Zero(d), v2 = Vector::Zero(d);
    for (Eigen::Index idx = 0; idx + 1 < d; ++idx) {
        const double j = static_cast<double>(idx + 1);
        v1[idx] = j + 1.0 - static_cast<double>(d);
        v2[idx] = 1.0 - j;
    }
    return {v1, v2};
}

/// Linear SDDE dU = [A_0 U + f(U(t - tau))] dt + sum_j A_j U dW_j for the heat problem.
///
/// A_j = (c / sqrt(dx)) sqrt(lambda_j) diag(phi_j(x_1), ..., phi_j(x_d)); the
/// scale c / sqrt(dx) enters once. With tau = 0 the cooling reads the current
/// state and the problem has no delays.
inline SemilinearSdde assemble(const HeatProblem& hp, std::size_t modes) {
    hp.validate();
    const std::size_t d = hp.intervals;
    if (hp.noise == NoiseKind::correlated && modes > d) {
        throw ConfigurationError("assemble: correlated noise supports at most d = " + std::to_string(d) + " modes");
    }
    if (hp.noise == NoiseKind::uncorrelated && modes > d - 1) {
        throw ConfigurationError("assemble: uncorrelated noise supports at most d - 1 = " + std::to_string(d - 1) +
                                 " modes");
    }
    const auto dim = static_cast<Eigen::Index>(d);

    SemilinearSdde p;
    p.dim = d;
    p.noise_dim = modes;
    p.horizon = hp.horizon;
    if (hp.delay > 0.0) p.delays = {hp.delay};

    p.A.push_back(diffusion_matrix(hp));
    if (modes > 0) {
        const KLBasis basis = noise_basis(hp, modes);
        const double scale = hp.noise_scale / std::sqrt(hp.dx());
        for (std::size_t j = 1; j <= modes; ++j) {
            Matrix aj = Matrix::Zero(dim, dim);
            const double amplitude = scale * std::sqrt(basis.eigenvalues[j - 1]);
            for (std::size_t i = 1; i <= d; ++i) {
                aj(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(i - 1)) =
                    amplitude * basis.eigenfunction(j, hp.grid(i));
            }
            p.A.push_back(std::move(aj));
        }
    }

    const auto [v1, v2] = cooling_weights(hp);
    const double wa = hp.rate_a / static_cast<double>(d - 2);
    const double wb = hp.rate_b / static_cast<double>(d - 2);
    const bool delayed = hp.delay > 0.0;
    const Eigen::Index ia = 0;         // U_1
    const Eigen::Index ib = dim - 2;   // U_{d-1}
    p.f = [=](double, const Vector& x, std::span<const Vector> lagged) -> Vector {
        const Vector& source = delayed ? lagged[0] : x;
        return (wa * source[ia]) * v1 + (wb * source[ib]) * v2;
    };

    const VectorField zero = [dim](double, const Vector&, std::span<const Vector>) { return Vector::Zero(dim).eval(); };
    const JacobianField zero_jac = [dim](double, const Vector&, std::span<const Vector>) {
        return Matrix::Zero(dim, dim).eval();
    };
    p.g.assign(modes, zero);
    p.jac_x_g.assign(modes, zero_jac);
    p.jac_delay_g.assign(modes, std::vector<JacobianField>(p.delays.size(), zero_jac));

    Vector u0(dim);
    for (std::size_t i = 1; i < d; ++i) u0[static_cast<Eigen::Index>(i - 1)] = hp.initial(hp.grid(i));
    u0[dim - 1] = 0.0;
    p.history = [u0](double) { return u0; };
    return p;
}

inline SemilinearSdde assemble(const HeatProblem& hp) { return assemble(hp, default_modes(hp)); }

enum class SliceAxis { fixed_time, fixed_space };

/// Cross section of the field. `abscissa` holds x_0..x_d for a fixed time, or
/// mesh times t_0..t_N for a fixed position.
struct FieldSlice {
    SliceAxis axis = SliceAxis::fixed_time;
    double coordinate = 0.0;
    std::vector<double> abscissa;
    std::vector<double> values;
};

/// U(t, x_0..x_d) with the boundary U_0 = 0 re-attached.
inline std::vector<double> field_row(const Trajectory& traj, std::ptrdiff_t n) {
    const Vector& u = traj.at(n);
    std::vector<double> row(static_cast<std::size_t>(u.size()) + 1, 0.0);
    for (Eigen::Index i = 0; i < u.size(); ++i) row[static_cast<std::size_t>(i) + 1] = u[i];
    return row;
}

inline FieldSlice slice(const Trajectory& traj, const HeatProblem& hp, SliceAxis axis, double coordinate) {
    FieldSlice out;
    out.axis = axis;
    out.coordinate = coordinate;
    const TimeMesh& mesh = traj.mesh();
    if (axis == SliceAxis::fixed_time) {
        out.values = field_row(traj, mesh.index_of(coordinate));
        for (std::size_t j = 0; j <= hp.intervals; ++j) out.abscissa.push_back(hp.grid(j));
        return out;
    }
    const double ratio = coordinate * static_cast<double>(hp.intervals);
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) > 1e-9 || nearest < 0.0 || nearest > static_cast<double>(hp.intervals)) {
        throw LookupError("slice: x = " + std::to_string(coordinate) + " is not a grid point");
    }
    const auto j = static_cast<std::size_t>(nearest);
    for (std::ptrdiff_t n = 0; n <= mesh.last(); ++n) {
        out.abscissa.push_back(mesh.time(n));
        out.values.push_back(field_row(traj, n)[j]);
    }
    return out;
}

/// CSV with header "t,<x_0>,...,<x_d>" and one row per `stride`-th mesh time from t = 0.
/// Rows after a divergence are written as NaN.
inline void write_field_csv(const Trajectory& traj, const HeatProblem& hp, const std::string& path,
                            std::size_t stride = 1) {
    std::ofstream out(path);
    if (!out) throw IoError("write_field_csv: cannot open " + path);
    out.precision(17);
    out << "t";
    for (std::size_t j = 0; j <= hp.intervals; ++j) out << ',' << hp.grid(j);
    out << '\n';
    const TimeMesh& mesh = traj.mesh();
    stride = std::max<std::size_t>(stride, 1);
    for (std::ptrdiff_t n = 0; n <= mesh.last(); n += static_cast<std::ptrdiff_t>(stride)) {
        out << mesh.time(n);
        for (double v : field_row(traj, n)) out << ',' << v;
        out << '\n';
    }
    if (!out) throw IoError("write_field_csv: write failed for " + path);
}

}  // namespace msdde::spdde
