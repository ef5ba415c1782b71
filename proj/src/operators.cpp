#include "usq/operators.hpp"

#include "usq/error.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <sstream>

namespace usq {

double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

SpaceSpec::SpaceSpec(std::vector<int> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) {
        throw InvalidDimension("SpaceSpec: at least one factor required");
    }
    for (std::size_t i = 0; i < factors_.size(); ++i) {
        const int min_dim = i == 0 ? 1 : 2;
        if (factors_[i] < min_dim) {
            throw InvalidDimension("SpaceSpec: factor " + std::to_string(i) + " = " +
                                   std::to_string(factors_[i]) + " is below " + std::to_string(min_dim));
        }
        total_ *= factors_[i];
    }
}

std::string SpaceSpec::str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < factors_.size(); ++i) {
        os << (i ? "x" : "") << factors_[i];
    }
    os << ']';
    return os.str();
}

// ---------------------------------------------------------------- QOperator

QOperator::QOperator(SpaceSpec space, Matrix mat) : space_(std::move(space)), mat_(std::move(mat)) {
    const int n = space_.total_dim();
    if (mat_.rows() != n || mat_.cols() != n) {
        throw DimensionMismatch("QOperator: matrix is " + std::to_string(mat_.rows()) + "x" +
                                std::to_string(mat_.cols()) + " but space " + space_.str() + " has dimension " +
                                std::to_string(n));
    }
}

QOperator QOperator::identity(const SpaceSpec& space) {
    return {space, Matrix::Identity(space.total_dim(), space.total_dim())};
}

QOperator QOperator::zero(const SpaceSpec& space) {
    return {space, Matrix::Zero(space.total_dim(), space.total_dim())};
}

QOperator QOperator::adjoint() const { return {space_, mat_.adjoint()}; }

double QOperator::hermiticity_error() const { return max_abs(mat_ - mat_.adjoint()); }

const QOperator& QOperator::require_hermitian(const char* what, double tol) const {
    const double err = hermiticity_error();
    if (err > tol) {
        std::ostringstream os;
        os << what << ": operator is not Hermitian (max |A - A^dag| = " << err << ")";
        throw NotHermitian(os.str());
    }
    return *this;
}

namespace {

void require_same_space(const SpaceSpec& a, const SpaceSpec& b, const char* what) {
    if (!(a == b)) {
        throw DimensionMismatch(std::string(what) + ": spaces " + a.str() + " and " + b.str() + " differ");
    }
}

} // namespace

QOperator& QOperator::operator+=(const QOperator& rhs) {
    require_same_space(space_, rhs.space_, "operator+");
    mat_ += rhs.mat_;
    return *this;
}

QOperator& QOperator::operator-=(const QOperator& rhs) {
    require_same_space(space_, rhs.space_, "operator-");
    mat_ -= rhs.mat_;
    return *this;
}

QOperator& QOperator::operator*=(cplx s) {
    mat_ *= s;
    return *this;
}

QOperator operator+(QOperator lhs, const QOperator& rhs) { return lhs += rhs; }
QOperator operator-(QOperator lhs, const QOperator& rhs) { return lhs -= rhs; }

QOperator operator*(const QOperator& lhs, const QOperator& rhs) {
    require_same_space(lhs.space(), rhs.space(), "operator*");
    return {lhs.space(), lhs.mat() * rhs.mat()};
}

QOperator operator*(cplx s, QOperator op) { return op *= s; }
QOperator operator*(double s, QOperator op) { return op *= cplx{s, 0.0}; }

QOperator commutator(const QOperator& a, const QOperator& b) { return a * b - b * a; }

// ---------------------------------------------------------------- states

StateVector::StateVector(SpaceSpec space, Vector amplitudes) : space_(std::move(space)), amps_(std::move(amplitudes)) {
    if (amps_.size() != space_.total_dim()) {
        throw DimensionMismatch("StateVector: " + std::to_string(amps_.size()) + " amplitudes for space " +
                                space_.str());
    }
}

StateVector StateVector::basis(const SpaceSpec& space, int index) {
    if (index < 0 || index >= space.total_dim()) {
        throw InvalidDimension("StateVector::basis: index " + std::to_string(index) + " out of range");
    }
    Vector v = Vector::Zero(space.total_dim());
    v(index) = 1.0;
    return {space, std::move(v)};
}

StateVector StateVector::normalized() const {
    const double n = norm();
    if (n == 0.0) {
        throw NumericalError("StateVector::normalized: zero vector");
    }
    return {space_, amps_ / n};
}

DensityMatrix::DensityMatrix(SpaceSpec space, Matrix mat) : space_(std::move(space)), mat_(std::move(mat)) {
    const int n = space_.total_dim();
    if (mat_.rows() != n || mat_.cols() != n) {
        throw DimensionMismatch("DensityMatrix: matrix does not match space " + space_.str());
    }
}

DensityMatrix DensityMatrix::pure(const StateVector& psi) {
    return {psi.space(), psi.amplitudes() * psi.amplitudes().adjoint()};
}

StateDiagnostics DensityMatrix::diagnostics() const {
    StateDiagnostics d;
    d.hermiticity_error = max_abs(mat_ - mat_.adjoint());
    d.trace_error = std::abs(mat_.trace() - cplx{1.0, 0.0});
    const Matrix herm = 0.5 * (mat_ + mat_.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
    d.min_eigenvalue = es.eigenvalues().minCoeff();
    return d;
}

void DensityMatrix::require_physical() const {
    const auto d = diagnostics();
    if (d.hermiticity_error > 1e-10 || d.trace_error > 1e-8 || d.min_eigenvalue < -1e-7) {
        std::ostringstream os;
        os << "DensityMatrix: unphysical state (herm err " << d.hermiticity_error << ", trace err " << d.trace_error
           << ", min eig " << d.min_eigenvalue << ")";
        throw NumericalError(os.str());
    }
}

// ---------------------------------------------------------------- builders

QOperator identity(int dim) { return QOperator::identity(SpaceSpec::single(dim)); }

QOperator annihilation(int n_max) {
    if (n_max < 2) {
        throw InvalidDimension("annihilation: n_max must be >= 2, got " + std::to_string(n_max));
    }
    Matrix m = Matrix::Zero(n_max, n_max);
    for (int n = 0; n + 1 < n_max; ++n) {
        m(n, n + 1) = std::sqrt(static_cast<double>(n + 1));
    }
    return {SpaceSpec::single(n_max), std::move(m)};
}

QOperator creation(int n_max) { return annihilation(n_max).adjoint(); }

QOperator number_op(int n_max) {
    const auto a = annihilation(n_max);
    return a.adjoint() * a;
}

TwoLevelOps two_level_ops() {
    const auto q = SpaceSpec::single(2);
    Matrix sp = Matrix::Zero(2, 2);
    sp(1, 0) = 1.0;
    Matrix sz = Matrix::Zero(2, 2);
    sz(0, 0) = -1.0;
    sz(1, 1) = 1.0;
    const Matrix sm = sp.adjoint();
    return TwoLevelOps{
        .sigma_x = QOperator(q, sp + sm),
        .sigma_z = QOperator(q, sz),
        .sigma_plus = QOperator(q, sp),
        .sigma_minus = QOperator(q, sm),
    };
}

ThreeLevelOps::ThreeLevelOps() {
    const auto space = SpaceSpec::single(3);
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            Matrix m = Matrix::Zero(3, 3);
            m(a, b) = 1.0;
            ops_.emplace(std::pair{static_cast<Level3>(a), static_cast<Level3>(b)}, QOperator(space, std::move(m)));
        }
    }
}

const QOperator& ThreeLevelOps::operator()(Level3 alpha, Level3 beta) const { return ops_.at({alpha, beta}); }

ThreeLevelOps three_level_ops() { return ThreeLevelOps{}; }

QOperator tensor(std::span<const QOperator> ops) {
    if (ops.empty()) {
        throw InvalidDimension("tensor: empty operator list");
    }
    std::vector<int> factors = ops.front().space().factors();
    Matrix acc = ops.front().mat();
    for (const auto& op : ops.subspan(1)) {
        acc = Matrix(Eigen::kroneckerProduct(acc, op.mat()));
        factors.insert(factors.end(), op.space().factors().begin(), op.space().factors().end());
    }
    return {SpaceSpec(std::move(factors)), std::move(acc)};
}

QOperator tensor(std::initializer_list<QOperator> ops) {
    return tensor(std::span<const QOperator>(ops.begin(), ops.size()));
}

cplx expectation(const DensityMatrix& rho, const QOperator& op) {
    require_same_space(rho.space(), op.space(), "expectation");
    // Tr(rho op) = sum_ij rho_ij op_ji
    return (rho.mat().transpose().cwiseProduct(op.mat())).sum();
}

cplx expectation(const StateVector& psi, const QOperator& op) {
    require_same_space(psi.space(), op.space(), "expectation");
    return psi.amplitudes().dot(op.mat() * psi.amplitudes());
}

template <class State>
double expectation_real(const State& state, const QOperator& op, double imag_tol) {
    const cplx v = expectation(state, op);
    if (std::abs(v.imag()) > imag_tol) {
        std::ostringstream os;
        os << "expectation_real: imaginary part " << v.imag() << " exceeds " << imag_tol;
        throw NumericalError(os.str());
    }
    return v.real();
}

template double expectation_real<DensityMatrix>(const DensityMatrix&, const QOperator&, double);
template double expectation_real<StateVector>(const StateVector&, const QOperator&, double);

} // namespace usq
