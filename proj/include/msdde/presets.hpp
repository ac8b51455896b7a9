#pragma once

// Named problems for the CLI and the convergence harness.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "msdde/errors.hpp"
#include "msdde/linalg.hpp"
#include "msdde/model.hpp"
#include "msdde/schemes.hpp"
#include "msdde/spdde.hpp"

namespace msdde {

struct ExperimentConfig {
    std::string preset;
    std::vector<SchemeKind> schemes{SchemeKind::em, SchemeKind::milstein, SchemeKind::mem, SchemeKind::mm};
    std::vector<double> steps;
    double reference_step = 0x1p-12;
    SchemeKind reference_scheme = SchemeKind::milstein;
    IntegralRule rule = IntegralRule::trapezium;
    std::size_t trials = 200;
    std::uint64_t seed = 42;
    std::string output_dir = ".";
    std::size_t parallelism = 1;

    void validate(const SemilinearSdde& p) const {
        if (schemes.empty()) throw ConfigurationError("config: no schemes selected");
        if (steps.empty()) throw ConfigurationError("config: no step sizes given");
        if (trials == 0) throw ConfigurationError("config: need at least one trial");
        if (!(reference_step > 0.0)) throw ConfigurationError("config: reference step must be positive");
        detail::exact_multiple(p.horizon, reference_step, "horizon vs reference step");
        for (double tau : p.delays) detail::exact_multiple(tau, reference_step, "delay vs reference step");
        for (double h : steps) {
            if (!(h > 0.0)) throw ConfigurationError("config: step sizes must be positive");
            detail::exact_multiple(h, reference_step, "step vs reference step");
        }
    }
};

/// Halving sequence first, first/2, ..., last.
inline std::vector<double> halving_steps(double first, double last) {
    if (!(first > 0.0) || !(last > 0.0) || last > first) throw InvalidArgument("halving_steps: need first >= last > 0");
    std::vector<double> out;
    for (double h = first; h >= last * (1.0 - 1e-12); h *= 0.5) out.push_back(h);
    if (std::abs(out.back() - last) > 1e-12 * last) {
        throw InvalidArgument("halving_steps: last step is not first / 2^k");
    }
    out.back() = last;
    return out;
}

struct Preset {
    SemilinearSdde problem;
    ExperimentConfig config;
};

namespace presets {

inline Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

inline Matrix mat2(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

inline History constant_history(Vector v) {
    return [v = std::move(v)](double) { return v; };
}

inline JacobianField zero_jacobian(Eigen::Index d) {
    return [d](double, const Vector&, std::span<const Vector>) { return Matrix::Zero(d, d).eval(); };
}

inline SemilinearSdde example1() {
    SemilinearSdde p;
    p.dim = 2;
    p.noise_dim = 2;
    p.delays = {1.0};
    p.horizon = 6.0;
    p.A = {mat2(-0.1, 0.4, -0.3, 0.2), mat2(0.3, 0.1, 0.0, 0.2), mat2(0.1, 0.0, 0.3, 0.1)};
    p.f = [](double, const Vector&, std::span<const Vector> d) {
        const Vector& y = d[0];
        return vec2(0.1 * std::cos(y[0] + y[1]), 0.1 * (y[1] - y[0] * y[0]));
    };
    p.g = {
        [](double, const Vector&, std::span<const Vector> d) {
            const Vector& y = d[0];
            return vec2((std::sin(y[0]) + std::exp(-y[1] * y[1])) / 3.0, (std::atan(y[0]) + std::cos(y[1])) / 3.0);
        },
        [](double, const Vector&, std::span<const Vector> d) {
            const Vector& y = d[0];
            const double ay = std::atan(y[1]);
            return vec2(0.18 * y[0] + 0.04 * ay, 0.21 * y[0] + 0.03 * ay);
        },
    };
    p.jac_x_g = {zero_jacobian(2), zero_jacobian(2)};
    p.jac_delay_g = {
        {[](double, const Vector&, std::span<const Vector> d) {
            const Vector& y = d[0];
            return (mat2(std::cos(y[0]), -2.0 * y[1] * std::exp(-y[1] * y[1]), 1.0 / (1.0 + y[0] * y[0]),
                         -std::sin(y[1])) /
                    3.0)
                .eval();
        }},
        {[](double, const Vector&, std::span<const Vector> d) {
            const double s = 1.0 / (1.0 + d[0][1] * d[0][1]);
            return mat2(0.18, 0.04 * s, 0.21, 0.03 * s);
        }},
    };
    p.history = constant_history(vec2(0.8, 0.2));
    return p;
}

inline SemilinearSdde example2() {
    SemilinearSdde p = example1();
    p.f = [](double, const Vector& x, std::span<const Vector> d) {
        const double s = x[0] + x[1] + d[0][0] + d[0][1];
        return vec2(std::cos(s) / 3.0, std::sin(s) / 3.0);
    };
    p.g = {
        [](double, const Vector& x, std::span<const Vector> d) {
            const Vector& y = d[0];
            return vec2(std::cos(x[0]) / 9.0 + (std::sin(y[0]) + std::exp(-y[1] * y[1])) / 5.0,
                        std::sin(x[1]) / 9.0 + (std::atan(y[0]) + std::cos(y[1])) / 5.0);
        },
        [](double, const Vector& x, std::span<const Vector> d) {
            const Vector& y = d[0];
            const double r = 1.0 / (1.0 + y[0] * y[0]);
            const double ay = std::atan(y[1]);
            return vec2(std::sin(x[1]) / 7.0 + 0.04 * r + 0.05 * ay, std::cos(x[0]) / 7.0 + 0.06 * r + 0.04 * ay);
        },
    };
    p.jac_x_g = {
        [](double, const Vector& x, std::span<const Vector>) {
            return mat2(-std::sin(x[0]) / 9.0, 0.0, 0.0, std::cos(x[1]) / 9.0);
        },
        [](double, const Vector& x, std::span<const Vector>) {
            return mat2(0.0, std::cos(x[1]) / 7.0, -std::sin(x[0]) / 7.0, 0.0);
        },
    };
    p.jac_delay_g = {
        {[](double, const Vector&, std::span<const Vector> d) {
            const Vector& y = d[0];
            return (mat2(std::cos(y[0]), -2.0 * y[1] * std::exp(-y[1] * y[1]), 1.0 / (1.0 + y[0] * y[0]),
                         -std::sin(y[1])) /
                    5.0)
                .eval();
        }},
        {[](double, const Vector&, std::span<const Vector> d) {
            const Vector& y = d[0];
            const double q = 1.0 + y[0] * y[0];
            const double dr = -2.0 * y[0] / (q * q);
            const double s = 1.0 / (1.0 + y[1] * y[1]);
            return mat2(0.04 * dr, 0.05 * s, 0.06 * dr, 0.04 * s);
        }},
    };
    return p;
}

inline SemilinearSdde example3() {
    SemilinearSdde p;
    p.dim = 2;
    p.noise_dim = 2;
    p.delays = {1.0, 0.25};
    p.horizon = 6.0;
    p.A = {mat2(-0.1, 0.03, -0.2, -0.04), mat2(0.15, 0.1, 0.2, 0.1), mat2(0.05, 0.03, 0.04, 0.01)};
    p.f = [](double, const Vector& x, std::span<const Vector>) {
        return vec2(std::sin(x[0]) / 5.0, std::cos(x[1]) / 5.0);
    };
    // y = X(t - 1), z = X(t - 1/4)
    p.g = {
        [](double, const Vector&, std::span<const Vector> d) {
            const Vector& y = d[0];
            const Vector& z = d[1];
            return vec2(0.1 * (z[0] - y[0]), 0.1 * (y[1] - z[1]));
        },
        [](double, const Vector& x, std::span<const Vector> d) {
            const Vector& y = d[0];
            const Vector& z = d[1];
            return vec2(std::sin(x[1] * y[1] * z[1]) / 5.0, std::cos(x[0] * y[0] * z[0]) / 5.0);
        },
    };
    const auto g2_jac = [](int which) {
        return [which](double, const Vector& x, std::span<const Vector> d) {
            const Vector& y = d[0];
            const Vector& z = d[1];
            const double c = std::cos(x[1] * y[1] * z[1]) / 5.0;
            const double s = -std::sin(x[0] * y[0] * z[0]) / 5.0;
            // partial of the product x*y*z with respect to the selected factor
            const Vector* v[3] = {&x, &y, &z};
            const Vector& a = *v[(which + 1) % 3];
            const Vector& b = *v[(which + 2) % 3];
            return mat2(0.0, c * a[1] * b[1], s * a[0] * b[0], 0.0);
        };
    };
    p.jac_x_g = {zero_jacobian(2), g2_jac(0)};
    p.jac_delay_g = {
        {[](double, const Vector&, std::span<const Vector>) { return mat2(-0.1, 0.0, 0.0, 0.1); },
         [](double, const Vector&, std::span<const Vector>) { return mat2(0.1, 0.0, 0.0, -0.1); }},
        {g2_jac(1), g2_jac(2)},
    };
    p.history = constant_history(vec2(0.8, 0.2));
    return p;
}

inline SemilinearSdde gbm() {
    Matrix a0(1, 1), a1(1, 1);
    a0 << 0.05;
    a1 << 0.2;
    Vector y0(1);
    y0 << 1.0;
    return linear_problem({a0, a1}, {1.0}, 1.0, constant_history(y0));
}

}  // namespace presets

inline std::vector<std::string> preset_names() { return {"example1", "example2", "example3", "gbm", "spdde-heat"}; }

inline Preset preset(std::string_view name) {
    ExperimentConfig cfg;
    cfg.preset = std::string(name);
    if (name == "example1" || name == "example2") {
        cfg.steps = halving_steps(0x1p-3, 0x1p-8);
        return {name == "example1" ? presets::example1() : presets::example2(), cfg};
    }
    if (name == "example3") {
        cfg.steps = halving_steps(0x1p-2, 0x1p-7);
        return {presets::example3(), cfg};
    }
    if (name == "gbm") {
        cfg.steps = halving_steps(0x1p-2, 0x1p-8);
        return {presets::gbm(), cfg};
    }
    if (name == "spdde-heat") {
        cfg.schemes = {SchemeKind::em, SchemeKind::mem};
        cfg.steps = halving_steps(0x1p-8, 0x1p-11);
        cfg.reference_scheme = SchemeKind::em;
        cfg.trials = 20;
        return {spdde::assemble(spdde::HeatProblem{}), cfg};
    }
    throw PresetError("unknown preset '" + std::string(name) + "'");
}

}  // namespace msdde
