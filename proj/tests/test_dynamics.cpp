#include "doctest.h"

#include "usq/dynamics.hpp"
#include "usq/error.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace usq;

namespace {

QOperator cavity_a(int n_max, int atom_dim) { return embed_cavity(annihilation(n_max), atom_dim); }

DensityMatrix dressed_projector(const Spectrum& s, int k) { return DensityMatrix::pure(s.state(k)); }

DensityMatrix random_state(int dim, const SpaceSpec& space, std::mt19937& rng) {
    std::normal_distribution<double> d;
    Matrix m(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            m(i, j) = cplx{d(rng), d(rng)};
        }
    }
    Matrix rho = m * m.adjoint();
    rho /= rho.trace();
    return {space, rho};
}

struct DrivenRabi {
    int n_max = 8;
    Spectrum s;
    std::vector<JumpSet> jumps;
    std::optional<DriveSpec> drive;

    DrivenRabi() {
        s = diagonalize(build_rabi({.omega_q = 1.6, .coupling = 0.3, .theta = 0.4}, n_max));
        const int cutoff = s.levels_within(6.0);
        jumps.push_back(build_jumps(s, {.label = "cavity", .op = cavity_a(n_max, 2), .rate = 0.02}, cutoff));
        jumps.push_back(
            build_jumps(s, {.label = "qubit", .op = embed_atom(n_max, two_level_ops().sigma_minus), .rate = 0.01},
                        cutoff));
        drive.emplace(std::vector<GaussianPulse>{{.amplitude = 1.5, .center = 3.0, .width = 1.0, .carrier = 1.2}},
                      embed_atom(n_max, two_level_ops().sigma_x));
    }
};

} // namespace

TEST_SUITE("dynamics") {

TEST_CASE("uncoupled cavity channel reduces to standard photon loss") {
    const int n_max = 8;
    const double gamma = 0.3;
    const auto s = diagonalize(build_rabi({.omega_q = 1.37, .coupling = 0.0}, n_max));
    const auto set = build_jumps(s, {.label = "cavity", .op = cavity_a(n_max, 2), .rate = gamma}, s.size());
    CHECK_FALSE(set.jumps.empty());
    for (const auto& jump : set.jumps) {
        Eigen::Index from = 0;
        Eigen::Index to = 0;
        s.states.col(jump.k).cwiseAbs().maxCoeff(&from);
        s.states.col(jump.j).cwiseAbs().maxCoeff(&to);
        const int n_from = static_cast<int>(from) / 2;
        const int n_to = static_cast<int>(to) / 2;
        CHECK(from % 2 == to % 2);
        CHECK(n_from - n_to == 1);
        CHECK(jump.rate == doctest::Approx(gamma * n_from).epsilon(1e-12));
        CHECK(jump.k > jump.j);
    }
    CHECK(set.jumps.size() == static_cast<std::size_t>(2 * (n_max - 1)));
}

TEST_CASE("dressed jump rates follow the defining overlap") {
    const int n_max = 20;
    const auto s = diagonalize(build_rabi({.omega_q = 1.0, .coupling = 0.5}, n_max));
    const auto a = cavity_a(n_max, 2);
    const auto set = build_jumps(s, {.label = "cavity", .op = a, .rate = 1e-3}, s.levels_within(6.0));
    const cplx c01 = s.states.col(0).dot((a + a.adjoint()).mat() * s.states.col(1));
    bool found = false;
    for (const auto& jump : set.jumps) {
        CHECK(jump.k > jump.j);
        CHECK(jump.rate >= 1e-14);
        if (jump.j == 0 && jump.k == 1) {
            found = true;
            CHECK(jump.rate == doctest::Approx(1e-3 * std::norm(c01)).epsilon(1e-12));
        }
    }
    CHECK(found);
    CHECK_THROWS_AS(build_jumps(s, {.label = "bad", .op = a, .rate = -1.0}, 3), InvalidArgument);
    CHECK_THROWS_AS(build_jumps(s, {.label = "bad", .op = cavity_a(5, 2), .rate = 1.0}, 3), DimensionMismatch);
}

TEST_CASE("master equation right-hand side") {
    SUBCASE("dressed ground state is stationary") {
        const int n_max = 15;
        const auto h = build_rabi({.omega_q = 1.2, .coupling = 0.6, .theta = 0.3}, n_max);
        const auto s = diagonalize(h);
        const std::vector<JumpSet> jumps{
            build_jumps(s, {.label = "cavity", .op = cavity_a(n_max, 2), .rate = 0.01}, s.levels_within(6.0))};
        CHECK(max_abs(lindblad_rhs(dressed_projector(s, 0), 0.0, h, std::nullopt, jumps)) <= 1e-10);
    }
    SUBCASE("two-level decay") {
        const SpaceSpec space = SpaceSpec::single(2);
        const double gamma = 0.7;
        Matrix op = Matrix::Zero(2, 2);
        op(0, 1) = 1.0;
        const std::vector<JumpSet> jumps{
            JumpSet{.label = "decay", .channel_rate = gamma, .jumps = {Jump{0, 1, gamma, QOperator(space, op)}}}};
        const auto rho = DensityMatrix::pure(StateVector::basis(space, 1));
        const Matrix out = lindblad_rhs(rho, 0.0, QOperator::zero(space), std::nullopt, jumps);
        Matrix expected = Matrix::Zero(2, 2);
        expected(0, 0) = gamma;
        expected(1, 1) = -gamma;
        CHECK(max_abs(out - expected) < 1e-15);
    }
    SUBCASE("trace and Hermiticity preservation on random states") {
        DrivenRabi m;
        std::mt19937 rng(3);
        for (int trial = 0; trial < 100; ++trial) {
            const auto rho = random_state(m.s.size(), m.s.space, rng);
            const Matrix out = lindblad_rhs(rho, 2.7, build_rabi({.omega_q = 1.6, .coupling = 0.3, .theta = 0.4}, 8),
                                            m.drive, m.jumps);
            CHECK(std::abs(out.trace()) <= 1e-10);
            CHECK(max_abs(out - out.adjoint()) <= 1e-10);
        }
    }
}

TEST_CASE("dressed-basis generator matches the bare-basis right-hand side") {
    DrivenRabi m;
    const auto h = build_rabi({.omega_q = 1.6, .coupling = 0.3, .theta = 0.4}, m.n_max);
    const DressedGenerator gen(m.s, m.drive, m.jumps);
    std::mt19937 rng(5);
    for (double t : {0.0, 2.5, 3.0, 4.1}) {
        const auto rho = random_state(m.s.size(), m.s.space, rng);
        const Matrix bare = lindblad_rhs(rho, t, h, m.drive, m.jumps);
        Matrix dressed(m.s.size(), m.s.size());
        gen.apply(t, m.s.to_dressed(rho.mat()), dressed);
        CHECK(max_abs(m.s.to_bare(dressed) - bare) <= 1e-11);
    }
    CHECK(gen.max_frequency_scale() >= 1.2);
    CHECK(gen.drive_active(3.0));
    CHECK_FALSE(gen.drive_active(3000.0));
}

TEST_CASE("evolution") {
    SUBCASE("ground state is a fixed point for every model") {
        const std::vector<QOperator> hamiltonians{
            build_rabi({.omega_q = 1.0, .coupling = 0.4}, 12),
            build_rabi({.omega_q = 2.0, .coupling = 0.15, .theta = std::numbers::pi / 6}, 12),
            build_cascade({.coupling = 0.4}, 12),
        };
        for (const auto& h : hamiltonians) {
            const auto s = diagonalize(h);
            const int atom_dim = h.space().factors()[1];
            const std::vector<JumpSet> jumps{
                build_jumps(s, {.label = "cavity", .op = cavity_a(12, atom_dim), .rate = 0.05}, s.levels_within(6.0))};
            const auto rho0 = dressed_projector(s, 0);
            const auto grid = uniform_grid(0.0, 20.0, 1.0);
            const auto traj = evolve(rho0, s, std::nullopt, jumps, grid, {.step = 0.002});
            CHECK(max_abs(traj.state(traj.size() - 1).mat() - rho0.mat()) < 1e-8);
        }
    }
    SUBCASE("single dressed decay is exponential") {
        const int n_max = 15;
        const auto s = diagonalize(build_rabi({.omega_q = 1.0, .coupling = 0.3}, n_max));
        const std::vector<JumpSet> jumps{
            build_jumps(s, {.label = "cavity", .op = cavity_a(n_max, 2), .rate = 0.05}, 2)};
        REQUIRE(jumps[0].jumps.size() == 1U);
        const double rate = jumps[0].jumps[0].rate;
        const auto grid = uniform_grid(0.0, 30.0, 1.5);
        const auto traj = evolve(dressed_projector(s, 1), s, std::nullopt, jumps, grid, {.step = 0.004});
        for (std::size_t i = 0; i < traj.size(); ++i) {
            const double p = traj.dressed_states[i](1, 1).real();
            CHECK(std::abs(p - std::exp(-rate * traj.times[i])) / std::exp(-rate * traj.times[i]) < 1e-3);
        }
    }
    SUBCASE("standard dissipator recovered at weak coupling") {
        const int n_max = 6;
        const double gamma = 0.05;
        const auto h = build_rabi({.omega_q = 1.5, .coupling = 1e-3}, n_max);
        const auto s = diagonalize(h);
        const std::vector<JumpSet> jumps{
            build_jumps(s, {.label = "cavity", .op = cavity_a(n_max, 2), .rate = gamma}, s.size())};
        const auto rho0 = DensityMatrix::pure(StateVector::basis(s.space, bare_index(1, 0, 2)));
        const auto n_op = embed_cavity(number_op(n_max), 2);
        const auto grid = uniform_grid(0.0, 20.0, 2.0);
        const auto traj = evolve(rho0, s, std::nullopt, jumps, grid, {.step = 0.005});
        for (std::size_t i = 0; i < traj.size(); ++i) {
            const double n = expectation_real(traj.state(i), n_op);
            const double ref = std::exp(-gamma * traj.times[i]);
            CHECK(std::abs(n - ref) / ref < 1e-3);
        }
    }
    SUBCASE("energy does not increase without a drive") {
        DrivenRabi m;
        const auto grid = uniform_grid(0.0, 10.0, 0.05);
        std::mt19937 rng(2);
        const auto traj = evolve(random_state(m.s.size(), m.s.space, rng), m.s, std::nullopt, m.jumps, grid,
                                 {.step = 0.002});
        const DressedGenerator gen(m.s, std::nullopt, m.jumps);
        Matrix d(m.s.size(), m.s.size());
        for (const auto& rho : traj.dressed_states) {
            gen.apply(0.0, rho, d);
            const double de = (d.diagonal().real().array() * m.s.energies.array()).sum();
            CHECK(de <= 1e-10);
        }
    }
    SUBCASE("driven trajectory stays physical and converges in the step") {
        DrivenRabi m;
        const auto grid = uniform_grid(0.0, 8.0, 0.1);
        const auto rho0 = dressed_projector(m.s, 0);
        const auto coarse = evolve(rho0, m.s, m.drive, m.jumps, grid, {.step = 0.002});
        const auto fine = evolve(rho0, m.s, m.drive, m.jumps, grid, {.step = 0.001});
        CHECK(coarse.warnings == 0);
        for (const auto& d : coarse.diagnostics) {
            CHECK(d.trace_error <= 1e-6);
            CHECK(d.hermiticity_error <= 1e-8);
            CHECK(d.min_eigenvalue >= -1e-6);
        }
        CHECK(max_abs(coarse.dressed_states.back() - fine.dressed_states.back()) < 1e-8);
        // Population actually moved.
        CHECK(coarse.dressed_states.back()(0, 0).real() < 0.999);
    }
    SUBCASE("observer sees every output point") {
        DrivenRabi m;
        const auto grid = uniform_grid(0.0, 1.0, 0.25);
        std::vector<double> seen;
        const auto traj = evolve(dressed_projector(m.s, 0), m.s, m.drive, m.jumps, grid,
                                 {.step = 0.002, .keep_states = false},
                                 [&](std::size_t, double t, const Matrix&) { seen.push_back(t); });
        CHECK(seen == grid);
        CHECK(traj.dressed_states.empty());
        CHECK_THROWS_AS(traj.state(0), InvalidArgument);
    }
}

TEST_CASE("evolution preconditions") {
    DrivenRabi m;
    const auto rho0 = dressed_projector(m.s, 0);
    SUBCASE("step above the resolution bound") {
        CHECK_THROWS_AS(evolve(rho0, m.s, m.drive, m.jumps, uniform_grid(0.0, 1.0, 0.1), {.step = 0.05}),
                        StepTooLarge);
    }
    SUBCASE("step above the output spacing") {
        const std::vector<double> grid{0.0, 0.001, 0.002};
        CHECK_THROWS_AS(evolve(rho0, m.s, m.drive, m.jumps, grid, {.step = 0.002}), StepTooLarge);
    }
    SUBCASE("jump sets must match the spectrum") {
        const auto other = diagonalize(build_rabi({.omega_q = 1.1, .coupling = 0.3}, m.n_max));
        const std::vector<JumpSet> foreign{
            build_jumps(other, {.label = "cavity", .op = cavity_a(m.n_max, 2), .rate = 0.1}, 4)};
        CHECK_THROWS_AS(evolve(rho0, m.s, std::nullopt, foreign, uniform_grid(0.0, 1.0, 0.5)), InvalidArgument);
    }
    SUBCASE("overflow aborts with a numerical error") {
        const std::optional<DriveSpec> huge(
            std::in_place, std::vector<GaussianPulse>{{.amplitude = 1e300, .center = 0.5, .width = 0.2, .carrier = 1.0}},
            embed_atom(m.n_max, two_level_ops().sigma_x));
        CHECK_THROWS_AS(evolve(rho0, m.s, huge, m.jumps, uniform_grid(0.0, 1.0, 0.5), {.log_warnings = false}),
                        NumericalError);
    }
    SUBCASE("non-increasing output grid") {
        const std::vector<double> grid{0.0, 1.0, 1.0};
        CHECK_THROWS_AS(evolve(rho0, m.s, std::nullopt, m.jumps, grid), InvalidArgument);
    }
}

} // TEST_SUITE
