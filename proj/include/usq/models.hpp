// models.hpp: Hamiltonians of the cavity-emitter systems and Gaussian drives.
//
// Frequencies and times are in units of the cavity frequency (omega_c = 1).

#pragma once

#include "usq/operators.hpp"

#include <vector>

namespace usq {

/// Extended Rabi model: omega_c a^dag a + omega_q s+ s- + g (a + a^dag)(cos t s_x + sin t s_z).
/// theta = 0 is the standard quantum Rabi model.
struct RabiParams {
    double omega_c = 1.0;
    double omega_q = 1.0;
    double coupling = 0.0;
    double theta = 0.0;

    double detuning() const noexcept { return omega_q - omega_c; }
    void validate() const;
};

/// Cascade emitter (s < g < e) with only the g <-> e transition coupled to the cavity.
struct CascadeParams {
    double omega_c = 1.0;
    double omega_s = 0.0;
    double omega_g = 3.5;
    double omega_e = 4.5;
    double coupling = 0.0;

    double omega_gs() const noexcept { return omega_g - omega_s; }
    double omega_eg() const noexcept { return omega_e - omega_g; }
    void validate() const;
};

/// Area-normalized Gaussian pulse A exp[-(t-t0)^2 / 2 tau^2] / (tau sqrt(2 pi)) with carrier cos(omega t + phase).
struct GaussianPulse {
    double amplitude = 0.0;
    double center = 0.0;
    double width = 1.0;
    double carrier = 0.0;
    double phase = 0.0;

    double envelope(double t) const;
    double value(double t) const;
    double peak() const;
    void validate() const;
};

/// Sum of pulses multiplying a fixed Hermitian operator.
class DriveSpec {
public:
    DriveSpec(std::vector<GaussianPulse> pulses, QOperator op);

    const std::vector<GaussianPulse>& pulses() const noexcept { return pulses_; }
    const QOperator& op() const noexcept { return op_; }

    /// sum_k E_k(t) cos(omega_k t + phase_k)
    double coefficient(double t) const;
    /// sum_k |E_k(t)|, an upper bound on |coefficient(t)|.
    double envelope_bound(double t) const;
    double max_carrier() const;

private:
    std::vector<GaussianPulse> pulses_;
    QOperator op_;
};

/// Bare index of |n> (x) |level> in a cavity-first composite space.
constexpr int bare_index(int photons, int level, int atom_dim) noexcept { return photons * atom_dim + level; }

/// op (x) identity(atom_dim)
QOperator embed_cavity(const QOperator& cavity_op, int atom_dim);
/// identity(n_max) (x) op
QOperator embed_atom(int n_max, const QOperator& atom_op);

QOperator build_rabi(const RabiParams& p, int n_max);
QOperator build_cascade(const CascadeParams& p, int n_max);

QOperator drive_term(const DriveSpec& spec, double t);

/// exp[i pi (a^dag a + s+ s-)] on the cavity (x) qubit space.
QOperator rabi_parity(int n_max);

} // namespace usq
