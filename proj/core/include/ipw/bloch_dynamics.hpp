#pragma once

#include <array>
#include <complex>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ipw/atomic_model.hpp"

namespace ipw {

// Coherent block ordering: the four D3/2 sublevels by increasing mJ, then P1/2(-1/2), P1/2(+1/2).
namespace level {
inline constexpr int D_m32 = 0;
inline constexpr int D_m12 = 1;
inline constexpr int D_p12 = 2;
inline constexpr int D_p32 = 3;
inline constexpr int P_m12 = 4;
inline constexpr int P_p12 = 5;  // |e>
inline constexpr int count = 6;
}  // namespace level

/// Index of a D3/2 or P1/2 sublevel in the coherent block.
int coherent_index(const Sublevel& s);

// S1/2 sinks. "Good" sinks are fed only by |e> = P1/2(+1/2); "bad" ones only by P1/2(-1/2).
enum class Sink : int { DownGood = 0, UpGood = 1, DownBad = 2, UpBad = 3 };

enum class PulseShape { square };

struct PulseSpec {
    double t_p_ns = 10.0;
    double omega_per_ns = 0.0;  // Rabi rate of the D3/2(+3/2) <-> |e> drive
    double detuning_per_ns = 0.0;
    PulseShape shape = PulseShape::square;

    /// Square pulse of duration t_p_ns with area pi on the D3/2(+3/2) <-> |e> transition.
    static PulseSpec pi_pulse(double t_p_ns, double detuning_per_ns = 0.0);
    void validate() const;
};

using DensityMatrix6 = Eigen::Matrix<std::complex<double>, level::count, level::count>;

struct DynamicState {
    double t_ns = 0.0;
    DensityMatrix6 rho = DensityMatrix6::Zero();
    std::array<double, 4> sinks{};

    static DynamicState pure(int coherent_level);

    double sink(Sink s) const { return sinks[static_cast<int>(s)]; }
    double coherent_trace() const { return rho.trace().real(); }
    double sink_total() const { return sinks[0] + sinks[1] + sinks[2] + sinks[3]; }
    double total_probability() const { return coherent_trace() + sink_total(); }
    double bad_fraction() const;
};

/// Optical Bloch equations for the 650 nm sigma- drive with spontaneous decay
/// of P1/2 into D3/2 (returned to the coherent block) and S1/2 (tagged sinks).
class BlochSystem {
public:
    BlochSystem(const AtomSpec& atom, const PulseSpec& pulse);

    struct Derivative {
        DensityMatrix6 drho;
        std::array<double, 4> dsinks;
    };

    Derivative derivative(const DensityMatrix6& rho, bool drive_on) const;

    /// One classical RK4 step of length dt_ns.
    void step(DynamicState& state, double dt_ns, bool drive_on) const;

    /// Analytically route remaining P1/2 population into its decay products
    /// (the t -> infinity limit with the drive off).
    void funnel_excited(DynamicState& state) const;

    const DensityMatrix6& hamiltonian() const { return hamiltonian_; }
    double max_drive_rate() const { return max_rate_; }

private:
    struct Jump {
        int upper;
        int lower;  // coherent index, or -1 for an S sink
        int sink;   // sink index when lower == -1
        double rate;
    };

    DensityMatrix6 hamiltonian_ = DensityMatrix6::Zero();
    std::vector<Jump> jumps_;
    std::array<double, level::count> loss_{};  // total decay rate out of each level
    double max_rate_ = 0.0;
};

/// Fixed-step integration: drive on over [0, t_p], off afterwards. The pulse
/// edge always falls on a step boundary. Returns the initial state followed by
/// every `record_every`-th step and the final state.
///
/// Throws ValidationError if the initial state is not normalized or Hermitian,
/// dt_ns > tau_e/200, the drive is under-resolved (dt * sqrt(Omega^2 + Delta^2) > pi/20),
/// or t_end_ns < t_p.
std::vector<DynamicState> evolve(const AtomSpec& atom, const PulseSpec& pulse, const DynamicState& initial,
                                 double dt_ns, double t_end_ns, int record_every = 1);

struct DoubleExcitationOptions {
    int min_steps_per_pulse = 400;
    int steps_per_lifetime = 400;
    double decay_lifetimes = 15.0;
    double convergence = 1e-6;  // S-sink total change per extra lifetime block
};

/// Fraction of S1/2 population that came from P1/2(-1/2) after a pi pulse of
/// duration t_p_ns starting from D3/2(+3/2), followed by drive-free decay.
double double_excitation_error(const AtomSpec& atom, double t_p_ns, const DoubleExcitationOptions& opts = {});

struct ErrorPoint {
    double t_p_ns;
    double epsilon_d;
};

struct ErrorCurve {
    std::vector<ErrorPoint> points;
};

/// Pointwise double_excitation_error; grid points are evaluated concurrently
/// and returned in grid order.
ErrorCurve scan_pulse_durations(const AtomSpec& atom, std::span<const double> t_p_grid_ns,
                                const DoubleExcitationOptions& opts = {});

/// CSV with header `t_p_ns,epsilon_d`, 12 significant digits.
void write_csv(std::ostream& os, const ErrorCurve& curve);

}  // namespace ipw
