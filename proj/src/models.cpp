#include "usq/models.hpp"

#include "usq/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace usq {

void RabiParams::validate() const {
    if (!(coupling >= 0.0)) {
        throw InvalidArgument("RabiParams: coupling must be >= 0");
    }
    if (!(omega_q > 0.0)) {
        throw InvalidArgument("RabiParams: omega_q must be > 0");
    }
    if (!std::isfinite(omega_c) || !std::isfinite(theta)) {
        throw InvalidArgument("RabiParams: non-finite omega_c or theta");
    }
}

void CascadeParams::validate() const {
    if (!(omega_s < omega_g && omega_g < omega_e)) {
        throw InvalidArgument("CascadeParams: levels must satisfy omega_s < omega_g < omega_e");
    }
    if (!(coupling >= 0.0)) {
        throw InvalidArgument("CascadeParams: coupling must be >= 0");
    }
}

double GaussianPulse::envelope(double t) const {
    const double x = (t - center) / width;
    return amplitude * std::exp(-0.5 * x * x) / (width * std::sqrt(2.0 * std::numbers::pi));
}

double GaussianPulse::value(double t) const { return envelope(t) * std::cos(carrier * t + phase); }

double GaussianPulse::peak() const { return amplitude / (width * std::sqrt(2.0 * std::numbers::pi)); }

void GaussianPulse::validate() const {
    if (!(width > 0.0)) {
        throw InvalidArgument("GaussianPulse: width must be > 0");
    }
    if (!std::isfinite(amplitude) || !std::isfinite(center) || !std::isfinite(carrier) ||
        !std::isfinite(phase)) {
        throw InvalidArgument("GaussianPulse: non-finite parameter");
    }
}

DriveSpec::DriveSpec(std::vector<GaussianPulse> pulses, QOperator op) : pulses_(std::move(pulses)), op_(std::move(op)) {
    for (const auto& p : pulses_) {
        p.validate();
    }
    op_.require_hermitian("DriveSpec");
}

double DriveSpec::coefficient(double t) const {
    double c = 0.0;
    for (const auto& p : pulses_) {
        c += p.value(t);
    }
    return c;
}

double DriveSpec::envelope_bound(double t) const {
    double c = 0.0;
    for (const auto& p : pulses_) {
        c += std::abs(p.envelope(t));
    }
    return c;
}

double DriveSpec::max_carrier() const {
    double w = 0.0;
    for (const auto& p : pulses_) {
        w = std::max(w, std::abs(p.carrier));
    }
    return w;
}

QOperator embed_cavity(const QOperator& cavity_op, int atom_dim) {
    return tensor({cavity_op, identity(atom_dim)});
}

QOperator embed_atom(int n_max, const QOperator& atom_op) { return tensor({identity(n_max), atom_op}); }

QOperator build_rabi(const RabiParams& p, int n_max) {
    p.validate();
    const auto a = embed_cavity(annihilation(n_max), 2);
    const auto ad = a.adjoint();
    const auto q = two_level_ops();
    const auto sp = embed_atom(n_max, q.sigma_plus);
    const auto sm = embed_atom(n_max, q.sigma_minus);
    const auto atom_coupling =
        std::cos(p.theta) * embed_atom(n_max, q.sigma_x) + std::sin(p.theta) * embed_atom(n_max, q.sigma_z);
    return p.omega_c * (ad * a) + p.omega_q * (sp * sm) + p.coupling * ((ad + a) * atom_coupling);
}

QOperator build_cascade(const CascadeParams& p, int n_max) {
    p.validate();
    const auto a = embed_cavity(annihilation(n_max), 3);
    const auto ad = a.adjoint();
    const auto s = three_level_ops();
    const auto proj = [&](Level3 l) { return embed_atom(n_max, s(l, l)); };
    const auto ge = embed_atom(n_max, s(Level3::e, Level3::g) + s(Level3::g, Level3::e));
    return p.omega_c * (ad * a) + p.omega_s * proj(Level3::s) + p.omega_g * proj(Level3::g) +
           p.omega_e * proj(Level3::e) + p.coupling * ((a + ad) * ge);
}

QOperator drive_term(const DriveSpec& spec, double t) { return spec.coefficient(t) * spec.op(); }

QOperator rabi_parity(int n_max) {
    const SpaceSpec space({n_max, 2});
    Matrix m = Matrix::Zero(space.total_dim(), space.total_dim());
    for (int n = 0; n < n_max; ++n) {
        for (int level = 0; level < 2; ++level) {
            m(bare_index(n, level, 2), bare_index(n, level, 2)) = ((n + level) % 2 == 0) ? 1.0 : -1.0;
        }
    }
    return {space, std::move(m)};
}

} // namespace usq
