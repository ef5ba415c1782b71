// quadrature.hpp: normally-ordered output quadrature variances and photon flux
// from the positive-frequency part of the cavity field.

#pragma once

#include "usq/dynamics.hpp"
#include "usq/models.hpp"
#include "usq/spectrum.hpp"

#include <string_view>
#include <vector>

namespace usq {

/// Local-oscillator reference: Gamma(t) = omega t + phi.
struct ReferenceFrame {
    double omega = 1.0;
    double phi = 0.0;

    double angle(double t) const noexcept { return omega * t + phi; }
};

/// generalized: x+ from the dressed decomposition; standard: x+ -> a.
enum class VarianceMode { generalized, standard };

std::string_view to_string(VarianceMode m);

struct VarianceRecord {
    double t = 0.0;
    double s1n = 0.0;
    double s2n = 0.0;
    double flux = 0.0; ///< <x- x+>
    VarianceMode mode = VarianceMode::generalized;
};

/// First and second moments of x+ needed for the equal-time variances.
struct FieldMoments {
    cplx plus;       ///< <x+>
    cplx minus;      ///< <x->
    cplx plus_plus;  ///< <x+ x+>
    cplx minus_minus;///< <x- x->
    cplx minus_plus; ///< <x- x+>

    /// S^(n)(Gamma) = <x+,x+> e^{2i Gamma} + <x-,x-> e^{-2i Gamma} + 2 <x-,x+>
    /// with <A,B> = <AB> - <A><B>. Throws NumericalError when the imaginary
    /// part exceeds imag_tol.
    double variance(double gamma, double imag_tol = 1e-9) const;
    /// <x- x+>; throws NumericalError when it is negative beyond tolerance.
    double flux(double tol = 1e-9) const;
};

/// Evaluates field moments on density matrices expressed in a fixed basis.
///
/// `basis` maps the state's basis to the bare basis (the dressed states of a
/// Trajectory, or the identity for bare-basis states).
class FieldProbe {
public:
    FieldProbe(const Matrix& basis, const DressedDecomposition& decomp, VarianceMode mode);

    FieldMoments moments(const Matrix& rho) const;
    VarianceRecord record(double t, const Matrix& rho, const ReferenceFrame& frame) const;
    VarianceMode mode() const noexcept { return mode_; }

private:
    Matrix plus_;
    Matrix plus_plus_;
    Matrix minus_plus_;
    VarianceMode mode_;
};

/// S1 in `frame` and S2 in the same frame with phi + pi/2 (same code path).
VarianceRecord variance_record(const DensityMatrix& rho, double t, const DressedDecomposition& decomp,
                               const ReferenceFrame& frame, VarianceMode mode);

/// One record per trajectory point. The trajectory must keep its states.
std::vector<VarianceRecord> output_variances(const Trajectory& traj, const DressedDecomposition& decomp,
                                             const ReferenceFrame& frame, VarianceMode mode);

std::vector<double> photon_flux(const Trajectory& traj, const DressedDecomposition& decomp);

/// s2 - 1 for q2 = i(a^dag - a) on the dressed ground state of a theta = 0
/// Rabi model. Negative values mean intracavity squeezing.
double ground_quadrature_variance(const RabiParams& p, int n_max);

struct SqueezingGrid {
    std::vector<double> couplings; ///< Omega_R
    std::vector<double> detunings; ///< omega_q - omega_c
};

/// Evenly spaced grid, endpoints included (count >= 1; count == 1 uses lo).
std::vector<double> linspace(double lo, double hi, int count);

struct SqueezingMap {
    SqueezingGrid grid;
    std::vector<double> values; ///< row-major: values[i * detunings.size() + j] at (couplings[i], detunings[j])
    double min_value = 0.0;
    double min_coupling = 0.0;
    double min_detuning = 0.0;

    double at(std::size_t i, std::size_t j) const { return values[i * grid.detunings.size() + j]; }
};

/// ground_quadrature_variance over the grid (omega_c = 1, theta = 0), spread
/// over `workers` threads. Results do not depend on the worker count.
SqueezingMap ground_squeezing_map(const SqueezingGrid& grid, int n_max, int workers = 1);

} // namespace usq
