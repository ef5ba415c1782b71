#include "usq/quadrature.hpp"

#include "usq/error.hpp"
#include "usq/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace usq {

namespace {

cplx trace_product(const Matrix& rho, const Matrix& op) { return rho.transpose().cwiseProduct(op).sum(); }

} // namespace

std::string_view to_string(VarianceMode m) {
    return m == VarianceMode::generalized ? "generalized" : "standard";
}

double FieldMoments::variance(double gamma, double imag_tol) const {
    const cplx rot = std::exp(cplx{0.0, 2.0 * gamma});
    const cplx pp = plus_plus - plus * plus;
    const cplx mm = minus_minus - minus * minus;
    const cplx mp = minus_plus - minus * plus;
    const cplx s = pp * rot + mm * std::conj(rot) + 2.0 * mp;
    if (std::abs(s.imag()) > imag_tol) {
        std::ostringstream os;
        os << "variance: imaginary part " << s.imag() << " exceeds " << imag_tol;
        throw NumericalError(os.str());
    }
    return s.real();
}

double FieldMoments::flux(double tol) const {
    if (std::abs(minus_plus.imag()) > tol || minus_plus.real() < -tol) {
        std::ostringstream os;
        os << "flux: <x- x+> = " << minus_plus.real() << " + " << minus_plus.imag() << "i is not non-negative";
        throw NumericalError(os.str());
    }
    return minus_plus.real();
}

FieldProbe::FieldProbe(const Matrix& basis, const DressedDecomposition& decomp, VarianceMode mode) : mode_(mode) {
    const QOperator& plus = mode == VarianceMode::generalized ? decomp.x_plus : decomp.standard_plus;
    if (basis.rows() != plus.dim() || basis.cols() != plus.dim()) {
        throw DimensionMismatch("FieldProbe: basis is " + std::to_string(basis.rows()) + "x" +
                                std::to_string(basis.cols()) + ", field operator dimension " +
                                std::to_string(plus.dim()));
    }
    plus_ = basis.adjoint() * plus.mat() * basis;
    plus_plus_ = plus_ * plus_;
    minus_plus_ = plus_.adjoint() * plus_;
}

FieldMoments FieldProbe::moments(const Matrix& rho) const {
    if (rho.rows() != plus_.rows() || rho.cols() != plus_.cols()) {
        throw DimensionMismatch("FieldProbe: state dimension " + std::to_string(rho.rows()) + " vs " +
                                std::to_string(plus_.rows()));
    }
    return FieldMoments{
        .plus = trace_product(rho, plus_),
        .minus = trace_product(rho, plus_.adjoint()),
        .plus_plus = trace_product(rho, plus_plus_),
        .minus_minus = trace_product(rho, plus_plus_.adjoint()),
        .minus_plus = trace_product(rho, minus_plus_),
    };
}

VarianceRecord FieldProbe::record(double t, const Matrix& rho, const ReferenceFrame& frame) const {
    const FieldMoments m = moments(rho);
    // S2 is S1 of the frame rotated by pi/2, evaluated through the same path.
    const ReferenceFrame rotated{.omega = frame.omega, .phi = frame.phi + 0.5 * std::numbers::pi};
    return VarianceRecord{
        .t = t,
        .s1n = m.variance(frame.angle(t)),
        .s2n = m.variance(rotated.angle(t)),
        .flux = m.flux(),
        .mode = mode_,
    };
}

VarianceRecord variance_record(const DensityMatrix& rho, double t, const DressedDecomposition& decomp,
                               const ReferenceFrame& frame, VarianceMode mode) {
    if (!(rho.space() == decomp.x_plus.space())) {
        throw DimensionMismatch("variance_record: state space " + rho.space().str() + " vs field space " +
                                decomp.x_plus.space().str());
    }
    const FieldProbe probe(Matrix::Identity(rho.dim(), rho.dim()), decomp, mode);
    return probe.record(t, rho.mat(), frame);
}

std::vector<VarianceRecord> output_variances(const Trajectory& traj, const DressedDecomposition& decomp,
                                             const ReferenceFrame& frame, VarianceMode mode) {
    if (!(traj.space == decomp.x_plus.space())) {
        throw DimensionMismatch("output_variances: trajectory space " + traj.space.str() + " vs field space " +
                                decomp.x_plus.space().str());
    }
    if (traj.dressed_states.size() != traj.times.size()) {
        throw InvalidArgument("output_variances: trajectory did not keep its states");
    }
    const FieldProbe probe(traj.basis, decomp, mode);
    std::vector<VarianceRecord> out;
    out.reserve(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
        out.push_back(probe.record(traj.times[i], traj.dressed_states[i], frame));
    }
    return out;
}

std::vector<double> photon_flux(const Trajectory& traj, const DressedDecomposition& decomp) {
    if (!(traj.space == decomp.x_plus.space())) {
        throw DimensionMismatch("photon_flux: trajectory space " + traj.space.str() + " vs field space " +
                                decomp.x_plus.space().str());
    }
    if (traj.dressed_states.size() != traj.times.size()) {
        throw InvalidArgument("photon_flux: trajectory did not keep its states");
    }
    const FieldProbe probe(traj.basis, decomp, VarianceMode::generalized);
    std::vector<double> out;
    out.reserve(traj.size());
    for (const auto& rho : traj.dressed_states) {
        out.push_back(probe.moments(rho).flux());
    }
    return out;
}

double ground_quadrature_variance(const RabiParams& p, int n_max) {
    if (p.theta != 0.0) {
        throw InvalidArgument("ground_quadrature_variance: requires theta = 0");
    }
    const Spectrum s = diagonalize(build_rabi(p, n_max));
    const QOperator a = embed_cavity(annihilation(n_max), 2);
    const QOperator q2 = kI * (a.adjoint() - a);
    const StateVector ground = s.state(0);
    const double mean = expectation_real(ground, q2);
    return expectation_real(ground, q2 * q2) - mean * mean - 1.0;
}

std::vector<double> linspace(double lo, double hi, int count) {
    if (count < 1) {
        throw InvalidArgument("linspace: count must be >= 1");
    }
    std::vector<double> v(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        v[static_cast<std::size_t>(i)] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
    }
    return v;
}

SqueezingMap ground_squeezing_map(const SqueezingGrid& grid, int n_max, int workers) {
    if (grid.couplings.empty() || grid.detunings.empty()) {
        throw InvalidArgument("ground_squeezing_map: empty grid");
    }
    SqueezingMap map{.grid = grid, .values = {}};
    const std::size_t nd = grid.detunings.size();
    map.values.assign(grid.couplings.size() * nd, 0.0);
    parallel_for(map.values.size(), workers, [&](std::size_t idx) {
        const RabiParams p{.omega_c = 1.0,
                           .omega_q = 1.0 + grid.detunings[idx % nd],
                           .coupling = grid.couplings[idx / nd],
                           .theta = 0.0};
        map.values[idx] = ground_quadrature_variance(p, n_max);
    });
    // First minimum in grid order, so ties resolve deterministically.
    const auto it = std::min_element(map.values.begin(), map.values.end());
    const auto idx = static_cast<std::size_t>(it - map.values.begin());
    map.min_value = *it;
    map.min_coupling = grid.couplings[idx / nd];
    map.min_detuning = grid.detunings[idx % nd];
    return map;
}

} // namespace usq
