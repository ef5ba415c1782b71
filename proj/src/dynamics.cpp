#include "usq/dynamics.hpp"

#include "usq/error.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

namespace usq {

JumpSet build_jumps(const Spectrum& s, const DissipationChannel& ch, int cutoff) {
    if (!(ch.rate >= 0.0)) {
        throw InvalidArgument("build_jumps: channel '" + ch.label + "' has negative rate");
    }
    if (!(ch.op.space() == s.space)) {
        throw DimensionMismatch("build_jumps: channel '" + ch.label + "' operator space " + ch.op.space().str() +
                                " vs spectrum " + s.space.str());
    }
    if (cutoff < 0 || cutoff > s.size()) {
        throw InvalidArgument("build_jumps: cutoff " + std::to_string(cutoff) + " outside [0, " +
                              std::to_string(s.size()) + "]");
    }
    JumpSet set{.label = ch.label, .channel_rate = ch.rate, .jumps = {}, .basis_fingerprint = s.fingerprint};
    const Matrix c = s.to_dressed(ch.op.mat() + ch.op.mat().adjoint());
    for (int k = 1; k < cutoff; ++k) {
        for (int j = 0; j < k; ++j) {
            const double rate = ch.rate * std::norm(c(j, k));
            if (rate < 1e-14) {
                continue;
            }
            Matrix op = s.states.col(j) * s.states.col(k).adjoint();
            set.jumps.push_back(Jump{.j = j, .k = k, .rate = rate, .op = QOperator(s.space, std::move(op))});
        }
    }
    return set;
}

Matrix lindblad_rhs(const DensityMatrix& rho, double t, const QOperator& h0, const std::optional<DriveSpec>& drive,
                    std::span<const JumpSet> jumps) {
    if (!(rho.space() == h0.space())) {
        throw DimensionMismatch("lindblad_rhs: state space " + rho.space().str() + " vs Hamiltonian " +
                                h0.space().str());
    }
    Matrix h = h0.mat();
    if (drive) {
        if (!(drive->op().space() == h0.space())) {
            throw DimensionMismatch("lindblad_rhs: drive operator space mismatch");
        }
        h += drive->coefficient(t) * drive->op().mat();
    }
    const Matrix& r = rho.mat();
    Matrix out = -kI * (h * r - r * h);
    for (const auto& set : jumps) {
        for (const auto& jump : set.jumps) {
            if (!(jump.op.space() == h0.space())) {
                throw DimensionMismatch("lindblad_rhs: jump operator space mismatch");
            }
            const Matrix& o = jump.op.mat();
            const Matrix odo = o.adjoint() * o;
            out += jump.rate * (o * r * o.adjoint() - 0.5 * (r * odo + odo * r));
        }
    }
    return out;
}

// ---------------------------------------------------------------- dressed generator

DressedGenerator::DressedGenerator(const Spectrum& s, const std::optional<DriveSpec>& drive,
                                   std::span<const JumpSet> jumps, double drive_floor)
    : drive_(drive) {
    const int n = s.size();
    gain_ = Eigen::MatrixXd::Zero(n, n);
    for (const auto& set : jumps) {
        if (set.basis_fingerprint != s.fingerprint) {
            throw InvalidArgument("DressedGenerator: jump set '" + set.label +
                                  "' was built from a different spectrum");
        }
        for (const auto& jump : set.jumps) {
            gain_(jump.j, jump.k) += jump.rate;
            freq_scale_ = std::max(freq_scale_, s.transition(jump.k, jump.j));
        }
    }
    const Eigen::VectorXd out_rate = gain_.colwise().sum().transpose();
    coherent_decay_.resize(n, n);
    for (int m = 0; m < n; ++m) {
        for (int l = 0; l < n; ++l) {
            coherent_decay_(l, m) = cplx{-0.5 * (out_rate(l) + out_rate(m)), -(s.energies(l) - s.energies(m))};
        }
    }
    if (drive_) {
        if (!(drive_->op().space() == s.space)) {
            throw DimensionMismatch("DressedGenerator: drive operator space mismatch");
        }
        drive_dressed_ = s.to_dressed(drive_->op().mat());
        drive_dressed_ = 0.5 * (drive_dressed_ + drive_dressed_.adjoint()).eval();
        double peak = 0.0;
        for (const auto& p : drive_->pulses()) {
            peak = std::max(peak, std::abs(p.peak()));
        }
        drive_threshold_ = drive_floor * peak;
        freq_scale_ = std::max(freq_scale_, drive_->max_carrier());
    }
}

bool DressedGenerator::drive_active(double t) const {
    return drive_ && drive_->envelope_bound(t) >= drive_threshold_ && drive_threshold_ > 0.0;
}

void DressedGenerator::apply(double t, const Matrix& rho, Matrix& out) const {
    out.noalias() = coherent_decay_.cwiseProduct(rho);
    out.diagonal().real().noalias() += gain_ * rho.diagonal().real();
    if (drive_active(t)) {
        const double c = drive_->coefficient(t);
        const Matrix m = drive_dressed_ * rho;
        // -i c (V rho - rho V) with rho V = (V rho)^dag
        out.noalias() += (-kI * c) * (m - m.adjoint());
    }
}

// ---------------------------------------------------------------- evolve

DensityMatrix Trajectory::state(std::size_t i) const {
    if (i >= dressed_states.size()) {
        throw InvalidArgument("Trajectory::state: states were not kept or index out of range");
    }
    return {space, basis * dressed_states[i] * basis.adjoint()};
}

std::vector<double> uniform_grid(double t0, double t1, double dt) {
    if (!(dt > 0.0) || !(t1 >= t0)) {
        throw InvalidArgument("uniform_grid: need dt > 0 and t1 >= t0");
    }
    const auto n = static_cast<std::size_t>(std::floor((t1 - t0) / dt + 1e-6));
    std::vector<double> g(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        g[i] = t0 + static_cast<double>(i) * dt;
    }
    return g;
}

Vector propagate_pure(const Vector& psi_dressed, const Spectrum& h0, const DriveSpec& drive, double t0, double t1,
                      double step, int levels, double drive_floor) {
    const int k = levels > 0 ? std::min(levels, h0.size()) : h0.size();
    if (psi_dressed.size() != k) {
        throw DimensionMismatch("propagate_pure: state dimension " + std::to_string(psi_dressed.size()) + " vs " +
                                std::to_string(k));
    }
    if (!(step > 0.0) || !(t1 >= t0)) {
        throw InvalidArgument("propagate_pure: need step > 0 and t1 >= t0");
    }
    const Matrix full = h0.to_dressed(drive.op().mat());
    const Matrix v = 0.5 * (full + full.adjoint()).topLeftCorner(k, k);
    const Eigen::VectorXd e = h0.energies.head(k);
    double peak = 0.0;
    for (const auto& p : drive.pulses()) {
        peak = std::max(peak, std::abs(p.peak()));
    }
    const double threshold = drive_floor * peak;
    const auto rhs = [&](double t, const Vector& psi) -> Vector {
        return -kI * (e.cwiseProduct(psi) + drive.coefficient(t) * (v * psi));
    };
    const auto steps = std::max(1L, static_cast<long>(std::ceil((t1 - t0) / step - 1e-9)));
    const double h = (t1 - t0) / static_cast<double>(steps);
    const Vector free_phase = (-kI * h * e.cast<cplx>()).array().exp().matrix();
    Vector psi = psi_dressed;
    for (long s = 0; s < steps; ++s) {
        const double t = t0 + static_cast<double>(s) * h;
        if (drive.envelope_bound(t) < threshold && drive.envelope_bound(t + 0.5 * h) < threshold &&
            drive.envelope_bound(t + h) < threshold) {
            psi = psi.cwiseProduct(free_phase);
            continue;
        }
        const Vector k1 = rhs(t, psi);
        const Vector k2 = rhs(t + 0.5 * h, psi + 0.5 * h * k1);
        const Vector k3 = rhs(t + 0.5 * h, psi + 0.5 * h * k2);
        const Vector k4 = rhs(t + h, psi + h * k3);
        psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!psi.allFinite()) {
        throw NumericalError("propagate_pure: non-finite state");
    }
    return psi;
}

namespace {

StateDiagnostics dressed_diagnostics(const Matrix& rho) {
    StateDiagnostics d;
    d.hermiticity_error = max_abs(rho - rho.adjoint());
    d.trace_error = std::abs(rho.trace() - cplx{1.0, 0.0});
    const Matrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
    d.min_eigenvalue = es.eigenvalues().minCoeff();
    return d;
}

} // namespace

Trajectory evolve(const DensityMatrix& rho0, const Spectrum& h0, const std::optional<DriveSpec>& drive,
                  std::span<const JumpSet> jumps, std::span<const double> times, const EvolveOptions& opts,
                  const TrajectoryObserver& observer) {
    if (!(rho0.space() == h0.space)) {
        throw DimensionMismatch("evolve: initial state space " + rho0.space().str() + " vs Hamiltonian " +
                                h0.space.str());
    }
    if (times.empty()) {
        throw InvalidArgument("evolve: empty time grid");
    }
    const DressedGenerator gen(h0, drive, jumps, opts.drive_floor);

    double min_spacing = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double dt = times[i] - times[i - 1];
        if (!(dt > 0.0)) {
            throw InvalidArgument("evolve: output times must be strictly increasing");
        }
        min_spacing = std::min(min_spacing, dt);
    }
    const double bound = std::min(0.02 / gen.max_frequency_scale(), min_spacing);
    if (!(opts.step > 0.0) || opts.step > bound * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "evolve: step " << opts.step << " exceeds bound " << bound << " (frequency scale "
           << gen.max_frequency_scale() << ", output spacing " << min_spacing << ")";
        throw StepTooLarge(os.str());
    }

    Trajectory traj;
    traj.space = h0.space;
    traj.basis = h0.states;
    traj.step = opts.step;
    traj.max_frequency_scale = gen.max_frequency_scale();
    for (const auto& set : jumps) {
        traj.channel_rates.emplace_back(set.label, set.channel_rate);
    }
    traj.times.reserve(times.size());
    traj.diagnostics.reserve(times.size());

    const int n = h0.size();
    Matrix rho = h0.to_dressed(rho0.mat());
    Matrix k1(n, n), k2(n, n), k3(n, n), k4(n, n), tmp(n, n);

    const auto record = [&](std::size_t i, double t) {
        if (!rho.allFinite()) {
            std::ostringstream os;
            os << "evolve: non-finite density matrix at t = " << t;
            throw NumericalError(os.str());
        }
        const auto d = dressed_diagnostics(rho);
        if (d.trace_error > opts.trace_tol || d.hermiticity_error > opts.hermiticity_tol ||
            d.min_eigenvalue < -opts.positivity_tol) {
            ++traj.warnings;
            if (opts.log_warnings) {
                std::clog << "warning: evolve: t = " << t << " trace err " << d.trace_error << ", herm err "
                          << d.hermiticity_error << ", min eig " << d.min_eigenvalue << '\n';
            }
        }
        traj.times.push_back(t);
        traj.diagnostics.push_back(d);
        if (opts.keep_states) {
            traj.dressed_states.push_back(rho);
        }
        if (observer) {
            observer(i, t, rho);
        }
    };

    double t = times.front();
    record(0, t);
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double span = times[i] - times[i - 1];
        const auto steps = static_cast<long>(std::ceil(span / opts.step - 1e-9));
        const double h = span / static_cast<double>(steps);
        const double t_start = times[i - 1];
        for (long s = 0; s < steps; ++s) {
            t = t_start + static_cast<double>(s) * h;
            gen.apply(t, rho, k1);
            tmp.noalias() = rho + (0.5 * h) * k1;
            gen.apply(t + 0.5 * h, tmp, k2);
            tmp.noalias() = rho + (0.5 * h) * k2;
            gen.apply(t + 0.5 * h, tmp, k3);
            tmp.noalias() = rho + h * k3;
            gen.apply(t + h, tmp, k4);
            rho.noalias() += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        t = times[i];
        record(i, t);
    }
    return traj;
}

} // namespace usq
