#include "doctest.h"

#include "usq/error.hpp"
#include "usq/models.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace usq;

namespace {

Eigen::VectorXd eigenvalues(const QOperator& h) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.mat(), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

} // namespace

TEST_SUITE("models") {

TEST_CASE("decoupled Rabi spectrum is n + m") {
    const int n_max = 8;
    const auto h = build_rabi({.omega_q = 1.0, .coupling = 0.0}, n_max);
    std::vector<double> expected;
    for (int n = 0; n < n_max; ++n) {
        expected.push_back(n);
        expected.push_back(n + 1);
    }
    std::sort(expected.begin(), expected.end());
    const auto e = eigenvalues(h);
    for (int i = 0; i < e.size(); ++i) {
        CHECK(e(i) == doctest::Approx(expected[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }
}

TEST_CASE("weak-coupling doublet splits by twice the coupling") {
    const double g = 0.01;
    const auto e = eigenvalues(build_rabi({.omega_q = 1.0, .coupling = g}, 20));
    CHECK((e(2) - e(1)) == doctest::Approx(2.0 * g).epsilon(0.01));
}

TEST_CASE("ground state holds virtual photons at resonance") {
    const int n_max = 30;
    const auto h = build_rabi({.omega_q = 1.0, .coupling = 0.5}, n_max);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.mat());
    const StateVector ground(h.space(), es.eigenvectors().col(0));
    CHECK(expectation_real(ground, embed_cavity(number_op(n_max), 2)) > 0.05);
}

TEST_CASE("Hamiltonians are Hermitian") {
    for (double theta : {0.0, 0.3, std::numbers::pi / 6}) {
        CHECK(build_rabi({.omega_q = 1.7, .coupling = 0.8, .theta = theta}, 15).hermiticity_error() <= 1e-12);
    }
    CHECK(build_cascade({.coupling = 0.4}, 15).hermiticity_error() <= 1e-12);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(build_rabi({.coupling = -0.1}, 5), InvalidArgument);
    CHECK_THROWS_AS(build_rabi({.omega_q = 0.0}, 5), InvalidArgument);
    CHECK_THROWS_AS(build_cascade({.omega_s = 1.0, .omega_g = 0.5}, 5), InvalidArgument);
    CHECK_THROWS_AS(build_rabi({}, 1), InvalidDimension);
}

TEST_CASE("parity symmetry holds only at theta = 0") {
    const int n_max = 12;
    const auto parity = rabi_parity(n_max);
    const auto h0 = build_rabi({.omega_q = 1.3, .coupling = 0.7}, n_max);
    CHECK(max_abs(commutator(h0, parity).mat()) <= 1e-10);
    const auto h1 = build_rabi({.omega_q = 1.3, .coupling = 0.7, .theta = 0.4}, n_max);
    CHECK(max_abs(commutator(h1, parity).mat()) > 1e-3);
}

TEST_CASE("spectrum is invariant under coupling sign flip") {
    const int n_max = 16;
    for (double theta : {0.0, 0.5}) {
        const RabiParams p{.omega_q = 1.4, .coupling = 0.6, .theta = theta};
        const auto h_plus = build_rabi(p, n_max);
        const auto h_free = build_rabi({.omega_q = 1.4, .coupling = 0.0, .theta = theta}, n_max);
        const auto h_minus = 2.0 * h_free - h_plus;
        const auto ep = eigenvalues(h_plus);
        const auto em = eigenvalues(h_minus);
        if (theta == 0.0) {
            CHECK((ep - em).cwiseAbs().maxCoeff() <= 1e-9);
        } else {
            // sigma_z coupling breaks the parity map; the spectrum may change
            CHECK(ep.size() == em.size());
        }
    }
}

TEST_CASE("cascade s-block decouples") {
    const int n_max = 10;
    const CascadeParams p{.omega_s = 0.2, .omega_g = 3.5, .omega_e = 4.5, .coupling = 0.4};
    const auto h = build_cascade(p, n_max);
    for (int n = 0; n < n_max; ++n) {
        const int s_idx = bare_index(n, 0, 3);
        for (int m = 0; m < n_max; ++m) {
            for (int level : {1, 2}) {
                CHECK(h(s_idx, bare_index(m, level, 3)) == cplx{});
            }
        }
        CHECK(h(s_idx, s_idx).real() == doctest::Approx(p.omega_s + n));
    }
}

TEST_CASE("cascade g-e block equals a shifted Rabi model") {
    const int n_max = 14;
    const CascadeParams p{.coupling = 0.4};
    const auto h = build_cascade(p, n_max);
    // Extract the (g, e) block.
    const int d = 2 * n_max;
    Matrix block(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            const int bi = bare_index(i / 2, 1 + i % 2, 3);
            const int bj = bare_index(j / 2, 1 + j % 2, 3);
            block(i, j) = h(bi, bj);
        }
    }
    const auto rabi = build_rabi({.omega_q = p.omega_eg(), .coupling = p.coupling}, n_max);
    const auto eb = eigenvalues(QOperator(rabi.space(), block));
    const auto er = eigenvalues(rabi);
    CHECK(((eb.array() - p.omega_g).matrix() - er).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("uncoupled cascade is diagonal") {
    const auto h = build_cascade({.coupling = 0.0}, 6);
    Matrix off = h.mat();
    off.diagonal().setZero();
    CHECK(max_abs(off) == 0.0);
}

TEST_CASE("Gaussian drive envelope") {
    const GaussianPulse p{.amplitude = 1.3, .center = 50.0, .width = 4.0, .carrier = 1.9};
    const DriveSpec spec({p}, tensor({identity(4), two_level_ops().sigma_x}));

    SUBCASE("tail") {
        const auto far = drive_term(spec, p.center + 8.5 * p.width);
        CHECK(max_abs(far.mat()) < 1e-10 * p.amplitude / p.width);
    }
    SUBCASE("peak") {
        const double expected = p.amplitude / (p.width * std::sqrt(2.0 * std::numbers::pi)) *
                                std::cos(p.carrier * p.center);
        CHECK(spec.coefficient(p.center) == doctest::Approx(expected).epsilon(1e-14));
        CHECK(drive_term(spec, p.center).is_hermitian());
    }
    SUBCASE("area") {
        // Composite Simpson over t0 +- 8 tau.
        const int n = 4000;
        const double lo = p.center - 8 * p.width;
        const double h = 16 * p.width / n;
        double sum = p.envelope(lo) + p.envelope(lo + n * h);
        for (int i = 1; i < n; ++i) {
            sum += (i % 2 ? 4.0 : 2.0) * p.envelope(lo + i * h);
        }
        CHECK(std::abs(sum * h / 3.0 - p.amplitude) < 1e-6);
    }
    SUBCASE("carrier phase") {
        GaussianPulse q = p;
        q.phase = 0.5 * std::numbers::pi;
        CHECK(q.value(p.center) == doctest::Approx(-p.envelope(p.center) * std::sin(p.carrier * p.center)));
    }
}

TEST_CASE("drive validation") {
    CHECK_THROWS_AS(DriveSpec({GaussianPulse{.width = 0.0}}, two_level_ops().sigma_x), InvalidArgument);
    CHECK_THROWS_AS(DriveSpec({GaussianPulse{}}, two_level_ops().sigma_plus), NotHermitian);
}

} // TEST_SUITE
