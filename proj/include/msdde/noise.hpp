#pragma once

// Wiener paths on a fine reference lattice and every coarse-step stochastic
// quantity derived from them. All randomness of a run comes from one lattice;
// coarse increments and iterated integrals are deterministic functions of it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "msdde/errors.hpp"
#include "msdde/linalg.hpp"
#include "msdde/philox.hpp"

namespace msdde {

namespace detail {

/// Nearest integer to x/unit, or throws when x/unit is not integral within 1e-12 relative.
inline std::int64_t exact_multiple(double x, double unit, const std::string& what) {
    if (!(unit > 0.0) || !std::isfinite(x)) {
        throw MeshAlignmentError(what + ": invalid unit or value");
    }
    const double ratio = x / unit;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) > 1e-12 * std::max(1.0, std::abs(ratio))) {
        throw MeshAlignmentError(what + ": " + std::to_string(x) + " is not an integer multiple of " +
                                 std::to_string(unit));
    }
    return static_cast<std::int64_t>(nearest);
}

}  // namespace detail

/// Samples W_j(n h_ref), j = 0..m-1, n = 0..n_samples, of m independent standard
/// Wiener paths. Immutable once built.
class WienerLattice {
public:
    WienerLattice(std::size_t paths, std::size_t n_samples, double h_ref, std::uint64_t seed,
                  std::vector<double> values)
        : paths_(paths), n_samples_(n_samples), h_ref_(h_ref), seed_(seed), values_(std::move(values)) {
        if (!(h_ref > 0.0)) throw InvalidArgument("WienerLattice: h_ref must be positive");
        if (values_.size() != paths_ * (n_samples_ + 1)) {
            throw InvalidArgument("WienerLattice: value buffer has wrong size");
        }
    }

    std::size_t paths() const { return paths_; }
    std::size_t n_samples() const { return n_samples_; }
    std::size_t points() const { return n_samples_ + 1; }
    double h_ref() const { return h_ref_; }
    std::uint64_t seed() const { return seed_; }
    double horizon() const { return static_cast<double>(n_samples_) * h_ref_; }

    double value(std::size_t j, std::size_t n) const { return values_[j * points() + n]; }
    std::span<const double> path(std::size_t j) const {
        return {values_.data() + j * points(), points()};
    }
    /// Row-major (path, sample) storage.
    std::span<const double> raw() const { return values_; }

    /// Lattice index of time t; throws MeshAlignmentError when t is off the lattice.
    std::size_t index_of(double t) const {
        const auto n = detail::exact_multiple(t, h_ref_, "lattice time");
        if (n < 0 || static_cast<std::size_t>(n) > n_samples_) {
            throw MeshAlignmentError("lattice time " + std::to_string(t) + " outside [0, " +
                                     std::to_string(horizon()) + "]");
        }
        return static_cast<std::size_t>(n);
    }

    double at(std::size_t j, double t) const { return value(j, index_of(t)); }

private:
    std::size_t paths_;
    std::size_t n_samples_;
    double h_ref_;
    std::uint64_t seed_;
    std::vector<double> values_;
};

/// Increment of path j over fine step n: sqrt(h_ref) times the n-th normal of stream j.
inline double fine_increment(std::uint64_t seed, std::size_t j, std::uint64_t n, double h_ref) {
    return std::sqrt(h_ref) * rng::standard_normal(seed, j, n);
}

inline WienerLattice sample_lattice(std::size_t paths, double horizon, double h_ref, std::uint64_t seed) {
    if (!(horizon > 0.0)) throw InvalidArgument("sample_lattice: horizon must be positive");
    const auto n_samples = detail::exact_multiple(horizon, h_ref, "sample_lattice horizon");
    const auto points = static_cast<std::size_t>(n_samples) + 1;
    const double scale = std::sqrt(h_ref);
    std::vector<double> values(paths * points, 0.0);
    for (std::size_t j = 0; j < paths; ++j) {
        double* w = values.data() + j * points;
        w[0] = 0.0;
        for (std::size_t n = 0; n + 1 < points; n += 2) {
            const auto z = rng::normal_pair(seed, j, n / 2);
            w[n + 1] = w[n] + scale * z[0];
            if (n + 2 < points) w[n + 2] = w[n + 1] + scale * z[1];
        }
    }
    return {paths, static_cast<std::size_t>(n_samples), h_ref, seed, std::move(values)};
}

/// W_j(t) - W_j(s) for lattice times s <= t.
inline double increment(const WienerLattice& lat, std::size_t j, double s, double t) {
    if (j >= lat.paths()) throw InvalidArgument("increment: path index out of range");
    if (s > t) throw InvalidArgument("increment: expected s <= t");
    return lat.value(j, lat.index_of(t)) - lat.value(j, lat.index_of(s));
}

enum class IntegralRule { trapezium, rectangle, riemann };

/// Stochastic quantities of one coarse step [t_n, t_n + h].
///
/// Paths are indexed 0..m-1. `I(i, j)` approximates the Ito double integral
/// int int dW_i dW_j (inner integrator i). `I0[j]` is int int du dW_j and
/// `Ij0[j]` is int int dW_j du. `delayed[k](i, j)` uses the inner integrator
/// W_i(. - tau_k); it is an empty matrix when t_n < tau_k.
struct StepNoise {
    double t = 0.0;
    double h = 0.0;
    Vector dW;
    Matrix I;
    Vector I0;
    Vector Ij0;
    std::vector<Matrix> delayed;

    std::size_t paths() const { return static_cast<std::size_t>(dW.size()); }
    bool has_doubles() const { return paths() == 0 || I.rows() == dW.size(); }
    bool has_mixed() const { return paths() == 0 || (I0.size() == dW.size() && Ij0.size() == dW.size()); }
    bool has_delayed(std::size_t k) const {
        return k < delayed.size() && (paths() == 0 || delayed[k].rows() == dW.size());
    }
};

/// Which quantities step_noise should produce beyond the increments.
struct NoiseRequest {
    bool doubles = true;
    bool mixed = true;
    IntegralRule rule = IntegralRule::trapezium;
};

namespace detail {

/// Returns p within a few ulps of `part` such that (total - p) + p == total in
/// binary64. Falls back to total / 2, for which the split is always exact.
inline double exact_complement_partner(double total, double part) {
    if (!std::isfinite(total) || !std::isfinite(part)) return part;
    double up = part;
    double down = part;
    for (int nudge = 0; nudge <= 8; ++nudge) {
        if ((total - up) + up == total) return up;
        if ((total - down) + down == total) return down;
        up = std::nextafter(up, std::numeric_limits<double>::infinity());
        down = std::nextafter(down, -std::numeric_limits<double>::infinity());
    }
    return 0.5 * total;
}

/// Off-diagonal double integral over F equal subintervals, by the chosen rule.
/// `inner` and `outer` hold the path values at the F + 1 subinterval boundaries.
inline double double_integral(std::span<const double> inner, std::span<const double> outer, IntegralRule rule) {
    const std::size_t f = inner.size() - 1;
    const double outer_end = outer[f];
    if (rule == IntegralRule::riemann) {
        return 0.5 * (inner[f] - inner[0]) * (outer_end - outer[0]);
    }
    double diagonal_sum = 0.0;
    double tail_sum = 0.0;
    for (std::size_t l = 0; l < f; ++l) {
        const double a = inner[l + 1] - inner[l];
        diagonal_sum += 0.5 * a * (outer[l + 1] - outer[l]);
        tail_sum += a * (outer_end - outer[l + 1]);
    }
    return rule == IntegralRule::rectangle ? tail_sum : diagonal_sum + tail_sum;
}

}  // namespace detail

/// Coarse-step noise for [t_n, t_n + h] from F equal subintervals of the lattice.
///
/// Diagonal non-delayed doubles use I_jj = (dW_j^2 - h)/2. Off-diagonal and all
/// delayed doubles use `request.rule`. The mixed pair uses fine-mesh trapezoid
/// quadrature for I_j0 and I_0j = h dW_j - I_j0 (exact in floating point).
inline StepNoise step_noise(const WienerLattice& lat, double t_n, double h, std::size_t subintervals,
                            std::span<const double> delays, const NoiseRequest& request = {}) {
    if (!(h > 0.0)) throw InvalidArgument("step_noise: step must be positive");
    if (subintervals == 0) throw InvalidArgument("step_noise: subinterval count must be >= 1");
    const std::size_t m = lat.paths();
    const std::size_t start = lat.index_of(t_n);
    const std::size_t end = lat.index_of(t_n + h);
    const auto sub_len = detail::exact_multiple(h / static_cast<double>(subintervals), lat.h_ref(),
                                                "step_noise subinterval");
    if (sub_len <= 0 || static_cast<std::size_t>(sub_len) * subintervals != end - start) {
        throw MeshAlignmentError("step_noise: subintervals do not tile the step on the lattice");
    }
    const auto stride = static_cast<std::size_t>(sub_len);

    std::vector<std::size_t> delay_offsets;
    if (request.doubles && !delays.empty()) {
        const double min_delay = *std::min_element(delays.begin(), delays.end());
        if (h > min_delay * (1.0 + 1e-12)) {
            throw StepSizeError("step_noise: step " + std::to_string(h) + " exceeds smallest delay " +
                                std::to_string(min_delay));
        }
        for (double tau : delays) {
            delay_offsets.push_back(
                static_cast<std::size_t>(detail::exact_multiple(tau, lat.h_ref(), "step_noise delay")));
        }
    }

    StepNoise out;
    out.t = t_n;
    out.h = h;
    out.dW.resize(static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) out.dW[j] = lat.value(j, end) - lat.value(j, start);

    // Path values at the subinterval boundaries, shifted back by `offset` lattice samples.
    auto boundaries = [&](std::size_t j, std::size_t offset) {
        std::vector<double> w(subintervals + 1);
        for (std::size_t l = 0; l <= subintervals; ++l) w[l] = lat.value(j, start + l * stride - offset);
        return w;
    };

    if (request.doubles) {
        std::vector<std::vector<double>> sub(m);
        for (std::size_t j = 0; j < m; ++j) sub[j] = boundaries(j, 0);
        out.I.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                out.I(i, j) = i == j ? 0.5 * (out.dW[j] * out.dW[j] - h)
                                     : detail::double_integral(sub[i], sub[j], request.rule);
            }
        }
        out.delayed.resize(delays.size());
        for (std::size_t k = 0; k < delays.size(); ++k) {
            if (delay_offsets[k] > start) continue;  // t_n < tau_k: not needed, not available
            Matrix& dk = out.delayed[k];
            dk.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
            for (std::size_t i = 0; i < m; ++i) {
                const auto lagged = boundaries(i, delay_offsets[k]);
                for (std::size_t j = 0; j < m; ++j) dk(i, j) = detail::double_integral(lagged, sub[j], request.rule);
            }
        }
    }

    if (request.mixed) {
        out.I0.resize(static_cast<Eigen::Index>(m));
        out.Ij0.resize(static_cast<Eigen::Index>(m));
        const double dt = lat.h_ref();
        for (std::size_t j = 0; j < m; ++j) {
            const double base = lat.value(j, start);
            double area = 0.0;
            for (std::size_t n = start; n < end; ++n) {
                area += 0.5 * dt * ((lat.value(j, n) - base) + (lat.value(j, n + 1) - base));
            }
            const double total = h * out.dW[j];
            const double ij0 = detail::exact_complement_partner(total, area);
            out.Ij0[j] = ij0;
            out.I0[j] = total - ij0;
        }
    }
    return out;
}

/// step_noise with off-diagonal doubles by the rectangle rule (second sum only).
inline StepNoise step_noise_rectangle(const WienerLattice& lat, double t_n, double h, std::size_t subintervals,
                                      std::span<const double> delays) {
    return step_noise(lat, t_n, h, subintervals, delays, {true, true, IntegralRule::rectangle});
}

/// step_noise with off-diagonal doubles by the one-term product dW_i dW_j / 2.
inline StepNoise step_noise_riemann(const WienerLattice& lat, double t_n, double h, std::size_t subintervals,
                                    std::span<const double> delays) {
    return step_noise(lat, t_n, h, subintervals, delays, {true, true, IntegralRule::riemann});
}

// ---------------------------------------------------------------------------
// Karhunen-Loeve bases for Q-Wiener noise on [0, 1]

enum class NoiseKind { uncorrelated, correlated };

/// Truncated eigenpairs of a spatial covariance.
///
/// correlated: Q(x, y) = min(x, y), lambda_j = 4 / (pi^2 (2j-1)^2),
/// phi_j(x) = sqrt(2) sin(x / sqrt(lambda_j)).
/// uncorrelated: lattice realization of Q(x, y) = 1{x = y}; mode j (1-based) drives
/// the grid point x = j * spacing alone, lambda_j = 1.
struct KLBasis {
    NoiseKind kind = NoiseKind::correlated;
    std::vector<double> eigenvalues;
    double spacing = 0.0;

    std::size_t modes() const { return eigenvalues.size(); }

    /// phi_j(x) for 1-based mode index j.
    double eigenfunction(std::size_t j, double x) const {
        if (j < 1 || j > modes()) throw InvalidArgument("KLBasis: mode index out of range");
        if (kind == NoiseKind::correlated) {
            return std::numbers::sqrt2 * std::sin(x / std::sqrt(eigenvalues[j - 1]));
        }
        return std::abs(x - static_cast<double>(j) * spacing) < 0.5 * spacing ? 1.0 : 0.0;
    }
};

/// `spacing` is only used by the uncorrelated kind; it defaults to 1/m.
inline KLBasis kl_basis(NoiseKind kind, std::size_t modes, double spacing = 0.0) {
    if (modes < 1) throw InvalidArgument("kl_basis: need at least one mode");
    KLBasis basis;
    basis.kind = kind;
    basis.spacing = spacing > 0.0 ? spacing : 1.0 / static_cast<double>(modes);
    basis.eigenvalues.resize(modes);
    for (std::size_t j = 1; j <= modes; ++j) {
        const double odd = 2.0 * static_cast<double>(j) - 1.0;
        basis.eigenvalues[j - 1] =
            kind == NoiseKind::correlated ? 4.0 / (std::numbers::pi * std::numbers::pi * odd * odd) : 1.0;
    }
    return basis;
}

/// Truncated field W^c(t, x) = sum_j sqrt(lambda_j) phi_j(x) W_j(t) at each grid point.
inline Vector sample_q_wiener(const KLBasis& basis, const WienerLattice& lat, std::span<const double> grid,
                              double t) {
    if (lat.paths() < basis.modes()) {
        throw ConfigurationError("sample_q_wiener: lattice has fewer paths than basis modes");
    }
    const std::size_t n = lat.index_of(t);
    Vector field = Vector::Zero(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t j = 1; j <= basis.modes(); ++j) {
        const double amplitude = std::sqrt(basis.eigenvalues[j - 1]) * lat.value(j - 1, n);
        for (std::size_t g = 0; g < grid.size(); ++g) field[g] += amplitude * basis.eigenfunction(j, grid[g]);
    }
    return field;
}

// ---------------------------------------------------------------------------
// Binary lattice files: "WLAT", u32 version, u64 paths, u64 n_samples,
// f64 h_ref, u64 seed, then paths * (n_samples + 1) f64 values, row-major.
// Native (little-endian) byte order.

inline constexpr std::uint32_t kLatticeFormatVersion = 1;

inline void write_lattice(const WienerLattice& lat, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_lattice: cannot open " + path);
    const std::uint32_t version = kLatticeFormatVersion;
    const std::uint64_t paths = lat.paths();
    const std::uint64_t samples = lat.n_samples();
    const double h_ref = lat.h_ref();
    const std::uint64_t seed = lat.seed();
    out.write("WLAT", 4);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&paths), sizeof paths);
    out.write(reinterpret_cast<const char*>(&samples), sizeof samples);
    out.write(reinterpret_cast<const char*>(&h_ref), sizeof h_ref);
    out.write(reinterpret_cast<const char*>(&seed), sizeof seed);
    const auto raw = lat.raw();
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(double)));
    if (!out) throw IoError("write_lattice: write failed for " + path);
}

inline WienerLattice read_lattice(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_lattice: cannot open " + path);
    char magic[4] = {};
    std::uint32_t version = 0;
    std::uint64_t paths = 0, samples = 0, seed = 0;
    double h_ref = 0.0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&paths), sizeof paths);
    in.read(reinterpret_cast<char*>(&samples), sizeof samples);
    in.read(reinterpret_cast<char*>(&h_ref), sizeof h_ref);
    in.read(reinterpret_cast<char*>(&seed), sizeof seed);
    if (!in || std::memcmp(magic, "WLAT", 4) != 0) throw IoError("read_lattice: bad header in " + path);
    if (version != kLatticeFormatVersion) {
        throw IoError("read_lattice: unsupported version " + std::to_string(version) + " in " + path);
    }
    std::vector<double> values(paths * (samples + 1));
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw IoError("read_lattice: truncated data in " + path);
    return {paths, samples, h_ref, seed, std::move(values)};
}

}  // namespace msdde
