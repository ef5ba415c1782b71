// dynamics.hpp: zero-temperature master equation with dressed-state jump
// operators, integrated with fixed-step RK4 under Gaussian drives.

#pragma once

#include "usq/models.hpp"
#include "usq/operators.hpp"
#include "usq/spectrum.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace usq {

/// One bath coupled through the system operator s (a, sigma_-, sigma_ge, ...).
/// The bath density of states and coupling are absorbed into the flat rate.
struct DissipationChannel {
    std::string label;
    QOperator op;
    double rate = 0.0;
};

/// Dressed jump |j~><k~| with k > j and rate Gamma^{jk} = rate |<j~|s + s^dag|k~>|^2.
struct Jump {
    int j = 0;
    int k = 0;
    double rate = 0.0;
    QOperator op; ///< |j~><k~| in the bare basis
};

struct JumpSet {
    std::string label;
    double channel_rate = 0.0;
    std::vector<Jump> jumps;
    std::uint64_t basis_fingerprint = 0; ///< Spectrum the indices refer to
};

/// Downward jumps between the lowest `cutoff` dressed levels; rates below
/// 1e-14 are dropped.
JumpSet build_jumps(const Spectrum& s, const DissipationChannel& ch, int cutoff);

/// -i[H0 + H_d(t), rho] + sum Gamma D[|j><k|] rho, evaluated with dense bare-basis
/// products. D[O] rho = O rho O^dag - (rho O^dag O + O^dag O rho) / 2.
Matrix lindblad_rhs(const DensityMatrix& rho, double t, const QOperator& h0, const std::optional<DriveSpec>& drive,
                    std::span<const JumpSet> jumps);

/// The same generator expressed in the eigenbasis of H0, where the coherent
/// part and every dressed jump act elementwise. `apply` assumes a Hermitian
/// rho (the drive commutator is formed from a single product).
class DressedGenerator {
public:
    DressedGenerator(const Spectrum& s, const std::optional<DriveSpec>& drive, std::span<const JumpSet> jumps,
                     double drive_floor = 1e-15);

    /// out = L(t) rho, all matrices in the dressed basis.
    void apply(double t, const Matrix& rho, Matrix& out) const;

    /// Largest retained transition frequency or drive carrier (at least 1).
    double max_frequency_scale() const noexcept { return freq_scale_; }
    bool drive_active(double t) const;

private:
    Matrix coherent_decay_; ///< -i(E_l - E_m) - (G_l + G_m)/2
    Eigen::MatrixXd gain_;  ///< gain_(j, k) = Gamma^{jk}
    std::optional<DriveSpec> drive_;
    Matrix drive_dressed_;
    double drive_threshold_ = 0.0;
    double freq_scale_ = 1.0;
};

struct EvolveOptions {
    double step = 2e-3;
    bool keep_states = true;
    double drive_floor = 1e-15; ///< drive skipped where sum |E_k(t)| < floor * max pulse peak
    // Monitoring thresholds; violations are counted and logged, not fatal.
    double trace_tol = 1e-6;
    double hermiticity_tol = 1e-8;
    double positivity_tol = 1e-6;
    bool log_warnings = true;
};

struct Trajectory {
    SpaceSpec space{std::vector<int>{1}};
    std::vector<double> times;
    std::vector<Matrix> dressed_states; ///< empty unless keep_states
    std::vector<StateDiagnostics> diagnostics;
    Matrix basis;                       ///< dressed -> bare map (columns |k~>)
    double step = 0.0;
    double max_frequency_scale = 0.0;
    std::vector<std::pair<std::string, double>> channel_rates;
    int warnings = 0;

    std::size_t size() const noexcept { return times.size(); }
    DensityMatrix state(std::size_t i) const;
};

/// Called at each output time with rho in the dressed basis.
using TrajectoryObserver = std::function<void(std::size_t index, double t, const Matrix& rho_dressed)>;

/// RK4 from rho0 at times.front() through every output time.
///
/// Requires step <= min(0.02 / scale, output spacing) where scale is the
/// largest retained transition frequency or carrier (StepTooLarge). Jump sets
/// must come from `h0`'s spectrum. NaN aborts with NumericalError.
Trajectory evolve(const DensityMatrix& rho0, const Spectrum& h0, const std::optional<DriveSpec>& drive,
                  std::span<const JumpSet> jumps, std::span<const double> times, const EvolveOptions& opts = {},
                  const TrajectoryObserver& observer = {});

/// Coherent evolution of a dressed-basis state vector under H0 + drive from t0
/// to t1 (no dissipation), RK4 with ceil((t1 - t0) / step) equal substeps.
///
/// With levels > 0 the problem is restricted to the lowest `levels` dressed
/// states (psi must have that length). Steps where the drive is gated off
/// (envelope below drive_floor * peak) use the exact free phase. Used to
/// calibrate pulses cheaply before the full open-system run.
Vector propagate_pure(const Vector& psi_dressed, const Spectrum& h0, const DriveSpec& drive, double t0, double t1,
                      double step, int levels = -1, double drive_floor = 1e-15);

/// Uniform grid t0, t0 + dt, ... up to and including t1 (within dt/1e6).
std::vector<double> uniform_grid(double t0, double t1, double dt);

} // namespace usq
