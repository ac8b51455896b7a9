// msdde: convergence experiments, single runs, heat-equation runs and Q-Wiener sampling.
//
// Exit codes: 0 success, 1 file I/O failure, 2 configuration / alignment / usage
// error, 3 divergence (output written up to the divergence).

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "msdde/convergence.hpp"
#include "msdde/errors.hpp"
#include "msdde/noise.hpp"
#include "msdde/presets.hpp"
#include "msdde/report.hpp"
#include "msdde/schemes.hpp"
#include "msdde/spdde.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

/// Accepts decimal ("0.04") or power form ("2^-7").
double parse_number(const std::string& text) {
    const auto caret = text.find('^');
    std::size_t used = 0;
    try {
        if (caret == std::string::npos) {
            const double v = std::stod(text, &used);
            if (used == text.size()) return v;
        } else {
            const std::string base = text.substr(0, caret), exponent = text.substr(caret + 1);
            std::size_t ub = 0, ue = 0;
            const double b = std::stod(base, &ub);
            const double e = std::stod(exponent, &ue);
            if (ub == base.size() && ue == exponent.size()) return std::pow(b, e);
        }
    } catch (const std::exception&) {
    }
    throw msdde::ConfigurationError("cannot parse number '" + text + "'");
}

/// Rewrites "2^k" in integer options to plain digits; other text passes through.
const CLI::Validator kPowerForm(
    [](std::string& text) {
        if (text.find('^') == std::string::npos) return std::string{};
        double v = 0.0;
        try {
            v = parse_number(text);
        } catch (const msdde::Error& e) {
            return std::string(e.what());
        }
        if (!(v >= 0.0) || v != std::floor(v) || v > 1e18) return "'" + text + "' is not a non-negative integer";
        text = std::to_string(static_cast<std::uint64_t>(v));
        return std::string{};
    },
    "INT or 2^k");

/// "2^-3..2^-8" (halving sequence) or a comma list.
std::vector<double> parse_steps(const std::string& text) {
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        return msdde::halving_steps(parse_number(text.substr(0, dots)), parse_number(text.substr(dots + 2)));
    }
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        out.push_back(parse_number(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<msdde::SchemeKind> parse_schemes(const std::string& text) {
    std::vector<msdde::SchemeKind> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        out.push_back(msdde::parse_scheme(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

msdde::NoiseKind parse_noise_kind(const std::string& s) {
    if (s == "correlated") return msdde::NoiseKind::correlated;
    if (s == "uncorrelated") return msdde::NoiseKind::uncorrelated;
    throw msdde::ConfigurationError("unknown noise kind '" + s + "'");
}

std::size_t lattice_samples_for(double horizon, double h) {
    return static_cast<std::size_t>(msdde::detail::exact_multiple(horizon, h, "horizon vs step"));
}

struct ConvergeArgs {
    std::string preset, schemes = "em,milstein,mem,mm", steps, href, rule = "trapezium", out = ".", reference;
    std::size_t trials = 0, parallel = 1;
    std::optional<std::uint64_t> seed;
};

int run_converge(const ConvergeArgs& a) {
    auto [problem, cfg] = msdde::preset(a.preset);
    cfg.schemes = parse_schemes(a.schemes);
    if (!a.steps.empty()) cfg.steps = parse_steps(a.steps);
    if (!a.href.empty()) cfg.reference_step = parse_number(a.href);
    if (!a.reference.empty()) cfg.reference_scheme = msdde::parse_scheme(a.reference);
    if (a.trials > 0) cfg.trials = a.trials;
    if (a.seed) cfg.seed = *a.seed;
    cfg.rule = msdde::parse_rule(a.rule);
    cfg.parallelism = a.parallel;
    cfg.output_dir = a.out;

    const auto report = msdde::run_convergence(problem, cfg);
    std::filesystem::create_directories(cfg.output_dir);
    const auto base = std::filesystem::path(cfg.output_dir) / a.preset;
    msdde::write_report_csv(report, base.string() + "_convergence.csv");
    msdde::write_report_svg(report, base.string() + "_convergence.svg");

    for (const auto& s : report.series) {
        std::printf("%-9s slope %.3f\n", std::string(msdde::to_string(s.scheme)).c_str(), s.slope);
        for (std::size_t i = 0; i < s.steps.size(); ++i) {
            std::printf("  h=2^%-4g mse=%.6e%s\n", std::log2(s.steps[i]), s.mse[i], s.diverged[i] ? "  diverged" : "");
        }
    }
    std::printf("%zu trials, %zu lattices, %.1f s\n", report.trials, report.lattices_sampled, report.runtime_seconds);
    return report.any_diverged() ? kExitDiverged : kExitOk;
}

struct SimulateArgs {
    std::string preset, scheme = "mem", step = "2^-6", out = "traj.csv", rule = "trapezium", href;
    std::uint64_t seed = 1;
};

int run_simulate(const SimulateArgs& a) {
    const auto [problem, cfg] = msdde::preset(a.preset);
    const double h = parse_number(a.step);
    const double h_ref = a.href.empty() ? std::min(h, cfg.reference_step) : parse_number(a.href);
    const auto lat = msdde::sample_lattice(problem.noise_dim, problem.horizon, h_ref, a.seed);
    const msdde::TimeMesh mesh(problem.horizon, h, problem.delays);
    const auto y = msdde::integrate(problem, msdde::parse_scheme(a.scheme), mesh, lat, 0, msdde::parse_rule(a.rule));
    msdde::write_trajectory_csv(y, a.out);
    if (y.diverged()) {
        std::fprintf(stderr, "diverged at t = %g\n", mesh.time(*y.diverged_at()));
        return kExitDiverged;
    }
    return kExitOk;
}

struct SpddeArgs {
    std::size_t d = 50;
    std::string D = "0.04", c = "0.15", tau = "1", ra = "1", rb = "10", T = "6", noise = "correlated", scheme = "mem",
                step = "2^-7", href, out = "field.csv", svg;
    std::size_t modes = 0, stride = 1;
    std::uint64_t seed = 1;
};

int run_spdde(const SpddeArgs& a) {
    msdde::spdde::HeatProblem hp;
    hp.intervals = a.d;
    hp.diffusion = parse_number(a.D);
    hp.noise_scale = parse_number(a.c);
    hp.delay = parse_number(a.tau);
    hp.rate_a = parse_number(a.ra);
    hp.rate_b = parse_number(a.rb);
    hp.horizon = parse_number(a.T);
    hp.noise = parse_noise_kind(a.noise);
    const std::size_t modes = a.modes > 0 ? a.modes : msdde::spdde::default_modes(hp);
    const auto problem = msdde::spdde::assemble(hp, modes);

    const double h = parse_number(a.step);
    const double h_ref = a.href.empty() ? h : parse_number(a.href);
    const msdde::TimeMesh mesh(hp.horizon, h, problem.delays);
    const auto lat = msdde::sample_lattice(modes, hp.horizon, h_ref, a.seed);
    const auto y = msdde::integrate(problem, msdde::parse_scheme(a.scheme), mesh, lat);
    msdde::spdde::write_field_csv(y, hp, a.out, a.stride);
    if (!a.svg.empty()) msdde::write_field_svg(y, hp, a.svg);
    std::printf("h = %g, stability threshold = %g\n", h, msdde::spdde::stability_threshold(hp));
    if (y.diverged()) {
        std::fprintf(stderr, "diverged at t = %g\n", mesh.time(*y.diverged_at()));
        return kExitDiverged;
    }
    return kExitOk;
}

struct QWienerArgs {
    std::string kind = "correlated", href = "2^-16", T = "4", out = "wc.csv";
    std::size_t modes = 50, stride = 0;
    std::uint64_t seed = 9;
};

int run_qwiener(const QWienerArgs& a) {
    const auto basis = msdde::kl_basis(parse_noise_kind(a.kind), a.modes);
    const double h_ref = parse_number(a.href);
    const double horizon = parse_number(a.T);
    const std::size_t samples = lattice_samples_for(horizon, h_ref);
    const auto lat = msdde::sample_lattice(a.modes, horizon, h_ref, a.seed);
    std::vector<double> grid;
    for (std::size_t i = 0; i <= a.modes; ++i) grid.push_back(static_cast<double>(i) / static_cast<double>(a.modes));
    const std::size_t stride = a.stride > 0 ? a.stride : std::max<std::size_t>(1, samples / 1024);
    msdde::write_q_wiener_csv(basis, lat, grid, a.out, stride);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Magnus-type integrators for semilinear stochastic delay differential equations"};
    app.require_subcommand(1);

    ConvergeArgs conv;
    auto* c = app.add_subcommand("converge", "Monte Carlo strong-error experiment");
    c->add_option("--preset", conv.preset, "example1|example2|example3|gbm|spdde-heat")->required();
    c->add_option("--schemes", conv.schemes, "comma list of em,milstein,mem,mm");
    c->add_option("--steps", conv.steps, "step sizes, e.g. 2^-3..2^-8 or 0.25,0.125");
    c->add_option("--href", conv.href, "reference step");
    c->add_option("--reference", conv.reference, "reference scheme");
    c->add_option("--trials", conv.trials, "number of trials")->transform(kPowerForm);
    c->add_option("--seed", conv.seed, "base seed")->transform(kPowerForm);
    c->add_option("--out", conv.out, "output directory");
    c->add_option("--rule", conv.rule, "trapezium|rectangle|riemann");
    c->add_option("--parallel", conv.parallel, "worker threads")->transform(kPowerForm);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Single trajectory of a preset");
    s->add_option("--preset", sim.preset)->required();
    s->add_option("--scheme", sim.scheme);
    s->add_option("--step", sim.step);
    s->add_option("--href", sim.href, "lattice step (default min(step, preset reference step))");
    s->add_option("--rule", sim.rule);
    s->add_option("--seed", sim.seed)->transform(kPowerForm);
    s->add_option("--out", sim.out);

    SpddeArgs heat;
    auto* h = app.add_subcommand("spdde", "Stochastic heat equation with delayed cooling");
    h->add_option("--d", heat.d, "spatial intervals")->transform(kPowerForm);
    h->add_option("--D", heat.D, "diffusion coefficient");
    h->add_option("--c", heat.c, "noise scale");
    h->add_option("--tau", heat.tau, "cooling delay");
    h->add_option("--ra", heat.ra);
    h->add_option("--rb", heat.rb);
    h->add_option("--T", heat.T, "horizon");
    h->add_option("--noise", heat.noise, "correlated|uncorrelated");
    h->add_option("--modes", heat.modes, "noise modes (default d or d-1)")->transform(kPowerForm);
    h->add_option("--scheme", heat.scheme);
    h->add_option("--step", heat.step);
    h->add_option("--href", heat.href);
    h->add_option("--seed", heat.seed)->transform(kPowerForm);
    h->add_option("--stride", heat.stride, "write every n-th time row")->transform(kPowerForm);
    h->add_option("--out", heat.out);
    h->add_option("--svg", heat.svg, "heat-map output");

    QWienerArgs qw;
    auto* q = app.add_subcommand("qwiener", "Sample a truncated Q-Wiener field");
    q->add_option("--kind", qw.kind, "correlated|uncorrelated");
    q->add_option("--modes", qw.modes)->transform(kPowerForm);
    q->add_option("--href", qw.href);
    q->add_option("--T", qw.T);
    q->add_option("--seed", qw.seed)->transform(kPowerForm);
    q->add_option("--stride", qw.stride, "write every n-th lattice time (default: about 1024 rows)")->transform(kPowerForm);
    q->add_option("--out", qw.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*c) return run_converge(conv);
        if (*s) return run_simulate(sim);
        if (*h) return run_spdde(heat);
        if (*q) return run_qwiener(qw);
    } catch (const msdde::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const msdde::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitOk;
}
