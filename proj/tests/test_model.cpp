#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "msdde/errors.hpp"
#include "msdde/model.hpp"
#include "msdde/presets.hpp"
#include "oracles.hpp"

using namespace msdde;

namespace {

Vector v1(double a) {
    Vector v(1);
    v << a;
    return v;
}

Matrix m1(double a) {
    Matrix m(1, 1);
    m << a;
    return m;
}

SemilinearSdde scalar_problem(double a0, double a1, VectorField f, VectorField g) {
    SemilinearSdde p;
    p.dim = 1;
    p.noise_dim = 1;
    p.A = {m1(a0), m1(a1)};
    p.delays = {1.0};
    p.horizon = 2.0;
    p.f = std::move(f);
    p.g = {std::move(g)};
    p.history = [](double) { return v1(1.0); };
    return p;
}

VectorField constant(double c) {
    return [c](double, const Vector&, std::span<const Vector>) { return v1(c); };
}

/// A random-ish point with one delayed argument per delay.
struct Point {
    Vector x;
    std::vector<Vector> delayed;
};

std::vector<Point> sample_points(std::size_t delays) {
    std::vector<Point> out;
    const double seeds[][2] = {{0.8, 0.2}, {-1.3, 0.4}, {2.1, -0.7}, {0.05, 1.9}};
    for (std::size_t s = 0; s < 4; ++s) {
        Point p;
        p.x = presets::vec2(seeds[s][0], seeds[s][1]);
        for (std::size_t k = 0; k < delays; ++k) {
            p.delayed.push_back(presets::vec2(seeds[(s + k + 1) % 4][1] + 0.3 * k, seeds[(s + 2 * k + 2) % 4][0]));
        }
        out.push_back(p);
    }
    return out;
}

}  // namespace

TEST(FTilde, VanishingSums) {
    const std::vector<Vector> none;
    auto p = scalar_problem(0.3, 0.0, constant(1.5), constant(4.0));
    EXPECT_EQ(f_tilde(p, 0.0, v1(2.0), none)[0], 1.5);
    p = scalar_problem(0.3, 2.0, constant(1.5), constant(0.0));
    EXPECT_EQ(f_tilde(p, 0.0, v1(2.0), none)[0], 1.5);
}

TEST(FTilde, DirectEvaluation) {
    const std::vector<Vector> none;
    const auto p = scalar_problem(0.0, 2.0, constant(1.0), constant(3.0));
    EXPECT_EQ(f_tilde(p, 0.0, v1(0.7), none)[0], -5.0);
}

TEST(BellmanIntervals, SingleDelay) {
    const std::vector<double> delays{1.0};
    EXPECT_EQ(bellman_intervals(delays, 6.0), (std::vector<double>{1, 2, 3, 4, 5, 6}));
}

TEST(BellmanIntervals, TwoDelaysMergeAtHorizon) {
    const std::vector<double> delays{1.0, 0.25};
    EXPECT_EQ(bellman_intervals(delays, 1.0), (std::vector<double>{0.25, 0.5, 0.75, 1.0}));
}

TEST(BellmanIntervals, HorizonAppended) {
    const std::vector<double> delays{0.4};
    const auto b = bellman_intervals(delays, 1.0);
    ASSERT_EQ(b.size(), 3u);
    EXPECT_DOUBLE_EQ(b[0], 0.4);
    EXPECT_DOUBLE_EQ(b[1], 0.8);
    EXPECT_EQ(b[2], 1.0);
}

TEST(BellmanIntervals, DecimalDuplicatesMerged) {
    const std::vector<double> delays{0.1, 0.3};
    const auto b = bellman_intervals(delays, 0.9);
    EXPECT_EQ(b.size(), 9u);
    EXPECT_EQ(b.back(), 0.9);
}

TEST(BellmanIntervals, InvalidDelay) {
    const std::vector<double> delays{1.0, 0.0};
    EXPECT_THROW(bellman_intervals(delays, 2.0), InvalidArgument);
}

TEST(BuildMesh, DirectConstruction) {
    const std::vector<double> delays{0.5};
    const auto mesh = build_mesh(1.0, 0.25, delays);
    EXPECT_EQ(mesh.first(), -2);
    EXPECT_EQ(mesh.last(), 4);
    EXPECT_EQ(mesh.delay_steps()[0], 2u);
    std::vector<double> times;
    for (auto n = mesh.first(); n <= mesh.last(); ++n) times.push_back(mesh.time(n));
    EXPECT_EQ(times, (std::vector<double>{-0.5, -0.25, 0, 0.25, 0.5, 0.75, 1.0}));
}

TEST(BuildMesh, MisalignedDelayNamed) {
    const std::vector<double> delays{0.5};
    try {
        build_mesh(1.2, 0.3, delays);
        FAIL() << "expected an alignment error";
    } catch (const MeshAlignmentError& e) {
        EXPECT_NE(std::string(e.what()).find("0.5"), std::string::npos) << e.what();
    }
}

TEST(BuildMesh, ExampleThreeSteps) {
    const auto p = presets::example3();
    EXPECT_NO_THROW(build_mesh(6.0, 0x1p-2, p.delays));
    // 1/4 is not a multiple of 1/2, so the coarse step is refused before any scheme runs
    EXPECT_THROW(build_mesh(6.0, 0x1p-1, p.delays), MeshAlignmentError);
}

TEST(BuildMeshProperty, BellmanBreakpointsAreMeshPoints) {
    const std::vector<std::vector<double>> delay_sets{{1.0}, {1.0, 0.25}, {0.75, 0.5}, {0.375}};
    for (const auto& delays : delay_sets) {
        for (double h : {0.125, 0.0625}) {
            const auto mesh = build_mesh(3.0, h, delays);
            for (double s : bellman_intervals(delays, 3.0)) {
                const auto n = mesh.index_of(s);
                EXPECT_EQ(mesh.time(n), s);
            }
        }
    }
}

TEST(Trajectory, HistoryAndLookup) {
    const std::vector<double> delays{0.5};
    const auto mesh = build_mesh(1.0, 0.25, delays);
    Trajectory y(mesh, [](double t) { return v1(10.0 + t); });
    EXPECT_EQ(y.lookup(-0.25)[0], 9.75);
    EXPECT_EQ(y.lookup(0.0)[0], 10.0);
    y.set(2, v1(42.0));
    EXPECT_EQ(y.lookup(0.5)[0], 42.0);
    EXPECT_TRUE(std::isnan(y.lookup(0.75)[0]));
    EXPECT_THROW(y.lookup(0.3), LookupError);
    EXPECT_THROW(y.lookup(-0.75), LookupError);
    EXPECT_THROW(y.at(5), LookupError);
}

TEST(Trajectory, DoublyDelayedLookupStaysInHistory) {
    // t_n = tau_1, doubly delayed time t_n - tau_1 - tau_2 = -tau_2 >= -tau
    const std::vector<double> delays{1.0, 0.25};
    const auto mesh = build_mesh(2.0, 0.25, delays);
    const Trajectory y(mesh, [](double t) { return v1(t); });
    const auto n = mesh.index_of(1.0);
    const auto p1 = static_cast<std::ptrdiff_t>(mesh.delay_steps()[0]);
    const auto p2 = static_cast<std::ptrdiff_t>(mesh.delay_steps()[1]);
    EXPECT_EQ(y.at(n - p1 - p2)[0], -0.25);
    EXPECT_EQ(y.at(n - p1 - p1)[0], -1.0);
}

TEST(AsPlainSdde, PlainProblemUnchanged) {
    auto p = presets::example1();
    p.A.clear();
    const auto q = as_plain_sdde(p);
    for (const auto& pt : sample_points(1)) {
        EXPECT_EQ(q.f(0.0, pt.x, pt.delayed), p.f(0.0, pt.x, pt.delayed));
        for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(q.g[j](0.0, pt.x, pt.delayed), p.g[j](0.0, pt.x, pt.delayed));
    }
}

TEST(AsPlainSdde, LinearDriftFolded) {
    const auto p = linear_problem({m1(-0.7), m1(0.0)}, {1.0}, 1.0, [](double) { return v1(1.0); });
    const auto q = as_plain_sdde(p);
    const std::vector<Vector> delayed{v1(3.0)};
    EXPECT_TRUE(q.is_plain());
    EXPECT_DOUBLE_EQ(q.f(0.0, v1(2.0), delayed)[0], -1.4);
}

TEST(AsPlainSdde, FoldedJacobianAddsMatrix) {
    const auto p = presets::example2();
    const auto q = as_plain_sdde(p);
    for (const auto& pt : sample_points(1)) {
        for (std::size_t j = 0; j < 2; ++j) {
            const Matrix expected = p.A[j + 1] + p.jac_x_g[j](0.0, pt.x, pt.delayed);
            EXPECT_TRUE(q.jac_x_g[j](0.0, pt.x, pt.delayed).isApprox(expected, 1e-15));
            const Vector expected_g = p.A[j + 1] * pt.x + p.g[j](0.0, pt.x, pt.delayed);
            EXPECT_TRUE(q.g[j](0.0, pt.x, pt.delayed).isApprox(expected_g, 1e-15));
        }
    }
}

TEST(Validate, StructuralErrors) {
    auto p = presets::example1();
    EXPECT_NO_THROW(p.validate());
    p.g.pop_back();
    EXPECT_THROW(p.validate(), ConfigurationError);
    p = presets::example1();
    p.A.pop_back();
    EXPECT_THROW(p.validate(), ConfigurationError);
    p = presets::example1();
    p.delays = {-1.0};
    EXPECT_THROW(p.validate(), InvalidArgument);
}

// Hand-derived Jacobians of the preset diffusions against central differences.
class PresetJacobians : public ::testing::TestWithParam<const char*> {};

TEST_P(PresetJacobians, MatchFiniteDifferences) {
    const auto p = preset(GetParam()).problem;
    ASSERT_TRUE(p.has_jacobians());
    for (const auto& pt : sample_points(p.delay_count())) {
        for (std::size_t j = 0; j < p.noise_dim; ++j) {
            const auto gx = [&](const Vector& x) { return p.g[j](0.0, x, pt.delayed); };
            EXPECT_LE((p.jac_x_g[j](0.0, pt.x, pt.delayed) - oracle::fd_jacobian(gx, pt.x)).norm(), 1e-8)
                << "x-Jacobian of g_" << j + 1;
            for (std::size_t k = 0; k < p.delay_count(); ++k) {
                const auto gk = [&](const Vector& yk) {
                    auto args = pt.delayed;
                    args[k] = yk;
                    return p.g[j](0.0, pt.x, args);
                };
                EXPECT_LE((p.jac_delay_g[j][k](0.0, pt.x, pt.delayed) - oracle::fd_jacobian(gk, pt.delayed[k])).norm(),
                          1e-8)
                    << "delay " << k + 1 << " Jacobian of g_" << j + 1;
            }
        }
    }
}

INSTANTIATE_TEST_SUITE_P(Examples, PresetJacobians, ::testing::Values("example1", "example2", "example3"));

TEST(FiniteDifferenceJacobians, FillOnlyMissing) {
    auto p = presets::example3();
    const auto exact = p;
    p.jac_x_g[1] = nullptr;
    p.jac_delay_g[1][1] = nullptr;
    const auto q = with_finite_difference_jacobians(p);
    for (const auto& pt : sample_points(2)) {
        EXPECT_LE((q.jac_x_g[1](0.0, pt.x, pt.delayed) - exact.jac_x_g[1](0.0, pt.x, pt.delayed)).norm(), 1e-7);
        EXPECT_LE((q.jac_delay_g[1][1](0.0, pt.x, pt.delayed) - exact.jac_delay_g[1][1](0.0, pt.x, pt.delayed)).norm(),
                  1e-7);
        EXPECT_EQ(q.jac_delay_g[0][0](0.0, pt.x, pt.delayed), exact.jac_delay_g[0][0](0.0, pt.x, pt.delayed));
    }
}
