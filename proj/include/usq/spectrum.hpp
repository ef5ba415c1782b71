// spectrum.hpp: dressed basis of a system Hamiltonian and the split of a system
// operator into positive- and negative-frequency parts in that basis.

#pragma once

#include "usq/models.hpp"
#include "usq/operators.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace usq {

/// Eigen-decomposition of a Hermitian Hamiltonian with ascending energies.
///
/// Column k of `states` is the dressed state |k~>. Each column is phase-fixed
/// so that its largest-magnitude bare amplitude is real and positive (ties go
/// to the lowest bare index). Energies closer than `degeneracy_tol` form a
/// cluster ordered by descending overlap with a reference bare state (|e,0>
/// for cavity (x) atom spaces).
struct Spectrum {
    SpaceSpec space{std::vector<int>{1}};
    Eigen::VectorXd energies;
    Matrix states;
    int degenerate_clusters = 0;
    std::uint64_t fingerprint = 0;

    int size() const noexcept { return static_cast<int>(energies.size()); }
    double transition(int k, int j = 0) const { return energies(k) - energies(j); }
    StateVector state(int k) const { return {space, states.col(k)}; }

    /// V^dagger M V
    Matrix to_dressed(const Matrix& bare) const { return states.adjoint() * bare * states; }
    /// V M V^dagger
    Matrix to_bare(const Matrix& dressed) const { return states * dressed * states.adjoint(); }

    /// Number of levels with energy <= E_0 + window.
    int levels_within(double window) const;
};

struct DiagonalizeOptions {
    double hermitian_tol = 1e-12;
    double degeneracy_tol = 1e-9;
    /// Bare index used to order degenerate clusters; defaults to |e,0>.
    std::optional<int> reference_index;
};

/// Throws NotHermitian for non-Hermitian input.
Spectrum diagonalize(const QOperator& h, const DiagonalizeOptions& opts = {});

/// X = X+ + X- + X_diag with X+ = sum_{i<j} X_ij |i~><j~|.
///
/// The dressed-diagonal part is kept separate and enters neither X+ nor X-.
struct DressedDecomposition {
    QOperator x_plus;
    QOperator x_minus;
    QOperator x_diag;
    Matrix dressed_plus;   ///< strictly upper-triangular X+ in the dressed basis
    QOperator standard_plus; ///< strictly upper-triangular X in the bare basis (a for X = a + a^dag)
    double x0 = 1.0;     ///< zero-point amplitude tag; cancels in normalized variances
    double diag_norm = 0.0;

    bool has_diagonal(double tol = 1e-9) const noexcept { return diag_norm > tol; }
};

DressedDecomposition positive_part(const QOperator& x, const Spectrum& s);

struct BareAmplitude {
    int photons = 0;
    int level = 0; ///< atom level index (g = 0, e = 1 for a qubit)
    cplx amplitude;
};

/// Bare-basis expansion of the dressed ground state |0~>.
///
/// With `enforce_parity` on a cavity (x) qubit space, odd-parity coefficients
/// (c_{g,odd}, c_{e,even}) must vanish to 1e-9, otherwise NumericalError.
std::vector<BareAmplitude> ground_coefficients(const Spectrum& s, bool enforce_parity = true);

/// Amplitude of |level, photons> in a coefficient list (0 when absent).
cplx coefficient(const std::vector<BareAmplitude>& c, int level, int photons);

struct SplittingScan {
    double omega_q_min = 1.5;
    double omega_q_max = 2.5;
    int points = 101;
    int lower_level = 2; ///< gap is E[lower_level + 1] - E[lower_level]
    double tolerance = 1e-10;
};

struct SplittingResult {
    double omega_q_star = 0.0;
    double gap = 0.0; ///< 2 Omega_eff
};

/// Gap E[level+1] - E[level] of the extended Rabi model at qubit frequency omega_q.
double level_gap(RabiParams p, int n_max, double omega_q, int lower_level);

/// Coarse scan over omega_q followed by golden-section refinement of the gap
/// minimum. Throws NumericalError when the scan minimum sits on the range edge.
SplittingResult effective_splitting(const RabiParams& base, int n_max, const SplittingScan& scan = {});

} // namespace usq
