#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ipw/radiation_geometry.hpp"

namespace ipw {

// Basis order |down H>, |down V>, |up H>, |up V>: index = 2 * atom + photon.
namespace pair_basis {
inline constexpr int DownH = 0;
inline constexpr int DownV = 1;
inline constexpr int UpH = 2;
inline constexpr int UpV = 3;
}  // namespace pair_basis

using Matrix4c = Eigen::Matrix<std::complex<double>, 4, 4>;

struct IonPhotonState {
    Matrix4c rho = Matrix4c::Zero();

    /// Trace 1 (1e-12), Hermitian, positive semidefinite (1e-10).
    void validate() const;
    /// <Psi_d| rho |Psi_d> with Psi_d = (|down H> + |up V>)/sqrt(2).
    double fidelity() const;

    static IonPhotonState target();
    /// w |Psi_d><Psi_d| + (1 - w) I/4.
    static IonPhotonState werner(double w);
};

struct ErrorBudget {
    double depol = 0.0;              // weight of I/4 mixed into the state
    double readout_err = 0.0;        // symmetric atom-state misassignment probability
    double rotation_contrast = 1.0;  // Bloch-vector contrast of the atom analysis pulse

    void validate() const;
};

/// Coherent {|down H>, |up V>} block with populations (pH, ppi) and coherence
/// kappa sqrt(pH ppi), plus pV on |down V>; then depolarized by budget.depol.
/// Readout and rotation errors act on measurements, not on the state.
IonPhotonState build_state(const CollectionProbabilities& probs, double kappa, const ErrorBudget& budget);

/// Depolarization weight for which build_state(probs, kappa, {p}) has fidelity `target_fidelity`.
double fit_depolarization(const CollectionProbabilities& probs, double kappa, double target_fidelity);

struct FringePoint {
    double setting = 0.0;
    double p_up_apd1 = 0.0;  // P(atom read as up | APD1 click)
    double p_up_apd2 = 0.0;
    double p_apd1 = 0.0;     // marginal click probabilities
    double p_apd2 = 0.0;
};

/// Photon rotated by psi about x of its Bloch sphere (psi is the Bloch angle,
/// twice the physical half-wave-plate angle), then APD1 = H, APD2 = V; atom
/// measured in z through the readout confusion. Throws DataError when an APD
/// branch has zero probability.
std::vector<FringePoint> fringe_z(const IonPhotonState& state, std::span<const double> psi_grid,
                                  const ErrorBudget& budget);

/// Photon rotated by pi/2 about x, atom given a pi/2 pulse about
/// cos(phi) X + sin(phi) Y (contrast scaled by rotation_contrast), then z
/// readout. For Psi_d: P(up | APD1) = (1 + cos phi)/2 and P(up | APD2) = (1 - cos phi)/2.
std::vector<FringePoint> fringe_x(const IonPhotonState& state, std::span<const double> phi_grid,
                                  const ErrorBudget& budget);

/// CSV `setting_value,p_up_apd1,p_up_apd2`.
void write_csv(std::ostream& os, std::span<const FringePoint> fringe);

struct MeasurementSettings {
    double photon_rotation = 0.0;
    std::optional<double> atom_phase;  // set: pi/2 analysis pulse with this phase
    std::uint64_t shots = 1;
    std::uint64_t seed = 0;
};

struct CountsRow {
    double setting_value = 0.0;  // psi for z-basis rows, phi for x-basis rows
    int apd = 1;                 // 1 or 2
    std::uint64_t atom_up = 0;
    std::uint64_t atom_down = 0;
};

using CountsTable = std::vector<CountsRow>;

/// Exact joint outcome probabilities for one setting: [apd - 1][0 = up, 1 = down].
std::array<std::array<double, 2>, 2> outcome_probabilities(const IonPhotonState& state, double photon_rotation,
                                                           std::optional<double> atom_phase, const ErrorBudget& budget);

/// Multinomial draws of the four (APD, atom) outcomes per setting; each
/// setting uses its own generator seeded from (seed, setting index).
CountsTable simulate_measurements(const IonPhotonState& state, std::span<const MeasurementSettings> settings,
                                  const ErrorBudget& budget);

/// Protocol helpers: z-basis rows over psi_grid, x-basis rows over phi_grid.
std::vector<MeasurementSettings> z_protocol(std::span<const double> psi_grid, std::uint64_t shots, std::uint64_t seed);
std::vector<MeasurementSettings> x_protocol(std::span<const double> phi_grid, std::uint64_t shots, std::uint64_t seed);

/// CSV `setting_value,apd,atom_up,atom_down`.
void write_csv(std::ostream& os, const CountsTable& counts);
CountsTable read_counts_csv(std::istream& is);

struct FidelityEstimate {
    double fidelity;
    double sigma;
    double population;  // P(down, APD1) + P(up, APD2) at psi = 0
    double contrast;    // sum of the two fitted conditional x-fringe amplitudes
};

/// F = (P(down, APD1) + P(up, APD2))/2 + contrast/2, with the populations from
/// the psi = 0 z-basis rows and the contrast from fixed-period sinusoid fits
/// (mean, amplitude, phase) to the x-basis conditional probabilities.
/// Throws DataError for missing psi = 0 data, fewer than three distinct
/// phases per APD, or an unbounded contrast.
FidelityEstimate estimate_fidelity(const CountsTable& z_counts, const CountsTable& x_counts);

/// Same estimator evaluated on exact probabilities (infinite shots).
FidelityEstimate estimate_fidelity_exact(const IonPhotonState& state, std::span<const double> phi_grid,
                                         const ErrorBudget& budget);

}  // namespace ipw
