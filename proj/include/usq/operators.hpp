// operators.hpp: truncated Fock-space and few-level operator algebra.
//
// Conventions fixed across the library:
//   - composite spaces are ordered cavity first, atom second;
//   - two-level basis is (|g>, |e>) = (0, 1);
//   - three-level basis is (|s>, |g>, |e>) = (0, 1, 2).

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace usq {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr cplx kI{0.0, 1.0};

/// Largest absolute entry of a matrix (0 for an empty matrix).
double max_abs(const Matrix& m);

/// Ordered subsystem dimensions of a composite Hilbert space.
///
/// The first factor is the cavity (or the only factor) and may be 1; every
/// further factor must be at least 2.
class SpaceSpec {
public:
    explicit SpaceSpec(std::vector<int> factors);

    static SpaceSpec single(int dim) { return SpaceSpec({dim}); }

    const std::vector<int>& factors() const noexcept { return factors_; }
    int total_dim() const noexcept { return total_; }
    std::size_t num_factors() const noexcept { return factors_.size(); }

    std::string str() const;

    bool operator==(const SpaceSpec& other) const noexcept { return factors_ == other.factors_; }

private:
    std::vector<int> factors_;
    int total_ = 1;
};

/// Dense complex square matrix tagged with the space it acts on.
class QOperator {
public:
    QOperator(SpaceSpec space, Matrix mat);

    static QOperator identity(const SpaceSpec& space);
    static QOperator zero(const SpaceSpec& space);

    const SpaceSpec& space() const noexcept { return space_; }
    const Matrix& mat() const noexcept { return mat_; }
    int dim() const noexcept { return space_.total_dim(); }
    cplx operator()(int row, int col) const { return mat_(row, col); }

    QOperator adjoint() const;

    /// max |M - M^dagger|
    double hermiticity_error() const;
    bool is_hermitian(double tol = 1e-12) const { return hermiticity_error() <= tol; }
    /// Throws NotHermitian with `what` in the message when the check fails.
    const QOperator& require_hermitian(const char* what, double tol = 1e-12) const;

    QOperator& operator+=(const QOperator& rhs);
    QOperator& operator-=(const QOperator& rhs);
    QOperator& operator*=(cplx s);

private:
    SpaceSpec space_;
    Matrix mat_;
};

QOperator operator+(QOperator lhs, const QOperator& rhs);
QOperator operator-(QOperator lhs, const QOperator& rhs);
QOperator operator*(const QOperator& lhs, const QOperator& rhs);
QOperator operator*(cplx s, QOperator op);
QOperator operator*(double s, QOperator op);

QOperator commutator(const QOperator& a, const QOperator& b);

class StateVector {
public:
    StateVector(SpaceSpec space, Vector amplitudes);

    /// Bare basis ket |index>.
    static StateVector basis(const SpaceSpec& space, int index);

    const SpaceSpec& space() const noexcept { return space_; }
    const Vector& amplitudes() const noexcept { return amps_; }
    double norm() const { return amps_.norm(); }
    bool is_normalized(double tol = 1e-10) const { return std::abs(norm() - 1.0) <= tol; }
    StateVector normalized() const;

private:
    SpaceSpec space_;
    Vector amps_;
};

/// Summary of how far a matrix is from being a physical density matrix.
struct StateDiagnostics {
    double hermiticity_error = 0.0; ///< max |rho - rho^dagger|
    double trace_error = 0.0;       ///< |Tr rho - 1|
    double min_eigenvalue = 0.0;    ///< smallest eigenvalue of the Hermitian part
};

class DensityMatrix {
public:
    DensityMatrix(SpaceSpec space, Matrix mat);

    static DensityMatrix pure(const StateVector& psi);

    const SpaceSpec& space() const noexcept { return space_; }
    const Matrix& mat() const noexcept { return mat_; }
    int dim() const noexcept { return space_.total_dim(); }

    StateDiagnostics diagnostics() const;

    /// Throws NumericalError unless Hermitian within 1e-10, unit trace within
    /// 1e-8 and min eigenvalue >= -1e-7.
    void require_physical() const;

private:
    SpaceSpec space_;
    Matrix mat_;
};

QOperator identity(int dim);
/// a with a[n, n+1] = sqrt(n+1); throws InvalidDimension for n_max < 2.
QOperator annihilation(int n_max);
QOperator creation(int n_max);
QOperator number_op(int n_max);

struct TwoLevelOps {
    QOperator sigma_x;
    QOperator sigma_z;
    QOperator sigma_plus;  ///< |e><g|
    QOperator sigma_minus; ///< |g><e|
};

TwoLevelOps two_level_ops();

enum class Level3 : int { s = 0, g = 1, e = 2 };

/// Transition operators sigma_{ab} = |a><b| of a three-level emitter.
class ThreeLevelOps {
public:
    ThreeLevelOps();
    const QOperator& operator()(Level3 alpha, Level3 beta) const;

private:
    std::map<std::pair<Level3, Level3>, QOperator> ops_;
};

ThreeLevelOps three_level_ops();

/// Kronecker product in the given factor order; space factors concatenated.
QOperator tensor(std::span<const QOperator> ops);
QOperator tensor(std::initializer_list<QOperator> ops);

cplx expectation(const DensityMatrix& rho, const QOperator& op);
cplx expectation(const StateVector& psi, const QOperator& op);

/// Expectation of a Hermitian observable; throws NumericalError when the
/// imaginary part exceeds `imag_tol`.
template <class State>
double expectation_real(const State& state, const QOperator& op, double imag_tol = 1e-10);

} // namespace usq
