#include "usq/spectrum.hpp"

#include "usq/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace usq {

namespace {

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

int default_reference_index(const SpaceSpec& space) {
    if (space.num_factors() == 2) {
        // |e, 0>: the top atom level with zero photons
        return bare_index(0, space.factors()[1] - 1, space.factors()[1]);
    }
    return 0;
}

void fix_phase(Eigen::Ref<Vector> col) {
    int best = 0;
    double best_abs = -1.0;
    for (int i = 0; i < col.size(); ++i) {
        const double m = std::abs(col(i));
        if (m > best_abs * (1.0 + 1e-12) + 1e-300) {
            best = i;
            best_abs = m;
        }
    }
    if (best_abs > 0.0) {
        col *= std::conj(col(best)) / best_abs;
        col(best) = best_abs;
    }
}

} // namespace

int Spectrum::levels_within(double window) const {
    int n = 0;
    for (int k = 0; k < size(); ++k) {
        if (energies(k) - energies(0) <= window + 1e-12) {
            ++n;
        }
    }
    return n;
}

Spectrum diagonalize(const QOperator& h, const DiagonalizeOptions& opts) {
    h.require_hermitian("diagonalize", opts.hermitian_tol * std::max(1.0, max_abs(h.mat())));

    const Matrix herm = 0.5 * (h.mat() + h.mat().adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(herm);
    if (es.info() != Eigen::Success) {
        throw NumericalError("diagonalize: eigensolver did not converge");
    }

    Spectrum s;
    s.space = h.space();
    s.energies = es.eigenvalues();
    s.states = es.eigenvectors();

    const int n = s.size();
    const int ref = opts.reference_index.value_or(default_reference_index(h.space()));

    // Reorder degenerate clusters deterministically.
    int start = 0;
    while (start < n) {
        int stop = start + 1;
        while (stop < n && s.energies(stop) - s.energies(stop - 1) <= opts.degeneracy_tol) {
            ++stop;
        }
        if (stop - start > 1) {
            ++s.degenerate_clusters;
            std::vector<int> order(stop - start);
            std::iota(order.begin(), order.end(), start);
            std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
                return std::abs(s.states(ref, a)) > std::abs(s.states(ref, b));
            });
            const Matrix block = s.states.middleCols(start, stop - start);
            const Eigen::VectorXd vals = s.energies.segment(start, stop - start);
            for (int i = 0; i < stop - start; ++i) {
                s.states.col(start + i) = block.col(order[i] - start);
                s.energies(start + i) = vals(order[i] - start);
            }
        }
        start = stop;
    }

    for (int k = 0; k < n; ++k) {
        fix_phase(s.states.col(k));
    }

    std::uint64_t fp = 1469598103934665603ULL;
    fp = fnv1a(s.energies.data(), sizeof(double) * static_cast<std::size_t>(n), fp);
    fp = fnv1a(s.states.data(), sizeof(cplx) * static_cast<std::size_t>(s.states.size()), fp);
    s.fingerprint = fp;
    return s;
}

DressedDecomposition positive_part(const QOperator& x, const Spectrum& s) {
    if (!(x.space() == s.space)) {
        throw DimensionMismatch("positive_part: operator space " + x.space().str() + " vs spectrum space " +
                                s.space.str());
    }
    const Matrix xd = s.to_dressed(x.mat());
    const Matrix plus = xd.triangularView<Eigen::StrictlyUpper>();
    const Matrix diag = xd.diagonal().asDiagonal();
    const Matrix plus_bare = s.to_bare(plus);
    return DressedDecomposition{
        .x_plus = QOperator(s.space, plus_bare),
        .x_minus = QOperator(s.space, plus_bare.adjoint()),
        .x_diag = QOperator(s.space, s.to_bare(diag)),
        .dressed_plus = plus,
        .standard_plus = QOperator(s.space, x.mat().triangularView<Eigen::StrictlyUpper>()),
        .x0 = 1.0,
        .diag_norm = xd.diagonal().cwiseAbs().maxCoeff(),
    };
}

std::vector<BareAmplitude> ground_coefficients(const Spectrum& s, bool enforce_parity) {
    const auto& f = s.space.factors();
    int atom_dim = 1;
    for (std::size_t i = 1; i < f.size(); ++i) {
        atom_dim *= f[i];
    }
    std::vector<BareAmplitude> out;
    out.reserve(static_cast<std::size_t>(s.size()));
    const bool check = enforce_parity && f.size() == 2 && f[1] == 2;
    for (int idx = 0; idx < s.size(); ++idx) {
        const BareAmplitude c{.photons = idx / atom_dim, .level = idx % atom_dim, .amplitude = s.states(idx, 0)};
        if (check && (c.photons + c.level) % 2 == 1 && std::abs(c.amplitude) > 1e-9) {
            std::ostringstream os;
            os << "ground_coefficients: odd-parity amplitude " << std::abs(c.amplitude) << " at level " << c.level
               << ", n = " << c.photons;
            throw NumericalError(os.str());
        }
        out.push_back(c);
    }
    return out;
}

cplx coefficient(const std::vector<BareAmplitude>& c, int level, int photons) {
    for (const auto& b : c) {
        if (b.level == level && b.photons == photons) {
            return b.amplitude;
        }
    }
    return {};
}

double level_gap(RabiParams p, int n_max, double omega_q, int lower_level) {
    p.omega_q = omega_q;
    const QOperator h = build_rabi(p, n_max);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.mat(), Eigen::EigenvaluesOnly);
    const auto& e = es.eigenvalues();
    return e(lower_level + 1) - e(lower_level);
}

SplittingResult effective_splitting(const RabiParams& base, int n_max, const SplittingScan& scan) {
    if (scan.points < 3 || !(scan.omega_q_max > scan.omega_q_min)) {
        throw InvalidArgument("effective_splitting: scan needs >= 3 points over a non-empty range");
    }
    const auto gap = [&](double wq) { return level_gap(base, n_max, wq, scan.lower_level); };
    const double dx = (scan.omega_q_max - scan.omega_q_min) / (scan.points - 1);

    int best = 0;
    double best_gap = gap(scan.omega_q_min);
    for (int i = 1; i < scan.points; ++i) {
        const double g = gap(scan.omega_q_min + i * dx);
        if (g < best_gap) {
            best_gap = g;
            best = i;
        }
    }
    if (best == 0 || best == scan.points - 1) {
        throw NumericalError("effective_splitting: no local minimum of the gap inside [" +
                             std::to_string(scan.omega_q_min) + ", " + std::to_string(scan.omega_q_max) + "]");
    }

    // Golden-section refinement on the bracketing cells.
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = scan.omega_q_min + (best - 1) * dx;
    double hi = scan.omega_q_min + (best + 1) * dx;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = gap(x1);
    double f2 = gap(x2);
    while (hi - lo > scan.tolerance) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = gap(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = gap(x2);
        }
    }
    const double x = 0.5 * (lo + hi);
    return {.omega_q_star = x, .gap = gap(x)};
}

} // namespace usq
