#include "ipw/bloch_dynamics.hpp"

#include <cmath>
#include <future>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "ipw/errors.hpp"

namespace ipw {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};

// Required ratio of the fixed step to the lifetime.
constexpr double kMaxStepPerLifetime = 1.0 / 200.0;
// Largest accepted phase advance of the drive per step.
constexpr double kMaxDrivePhasePerStep = std::numbers::pi / 20.0;

int sink_index(const Sublevel& upper, const Sublevel& lower) {
    const bool down = lower.mj.twice() < 0;
    const bool good = upper.mj.twice() > 0;
    if (good) return static_cast<int>(down ? Sink::DownGood : Sink::UpGood);
    return static_cast<int>(down ? Sink::DownBad : Sink::UpBad);
}

void check_initial(const DynamicState& s) {
    if (std::abs(s.total_probability() - 1.0) > 1e-9) {
        std::ostringstream os;
        os << std::setprecision(15) << "initial state not normalized: trace + sinks = " << s.total_probability();
        throw ValidationError(os.str());
    }
    if ((s.rho - s.rho.adjoint()).cwiseAbs().maxCoeff() > 1e-9) {
        throw ValidationError("initial density matrix is not Hermitian");
    }
    for (double v : s.sinks) {
        if (v < 0.0) throw ValidationError("initial sink population is negative");
    }
}

}  // namespace

int coherent_index(const Sublevel& s) {
    const int tm = s.mj.twice();
    switch (s.term) {
        case Term::D32: return (tm + 3) / 2;
        case Term::P12: return tm < 0 ? level::P_m12 : level::P_p12;
        case Term::S12: break;
    }
    throw ValidationError("S1/2 sublevels are not part of the coherent block");
}

PulseSpec PulseSpec::pi_pulse(double t_p_ns, double detuning_per_ns) {
    PulseSpec p;
    p.t_p_ns = t_p_ns;
    p.omega_per_ns = std::numbers::pi / t_p_ns;
    p.detuning_per_ns = detuning_per_ns;
    p.validate();
    return p;
}

void PulseSpec::validate() const {
    if (!(t_p_ns > 0.0) || !std::isfinite(t_p_ns)) throw ValidationError("pulse.t_p_ns must be > 0");
    if (!(omega_per_ns >= 0.0) || !std::isfinite(omega_per_ns)) throw ValidationError("pulse.omega must be >= 0");
    if (!std::isfinite(detuning_per_ns)) throw ValidationError("pulse.detuning must be finite");
}

DynamicState DynamicState::pure(int coherent_level) {
    if (coherent_level < 0 || coherent_level >= level::count) throw ValidationError("coherent level out of range");
    DynamicState s;
    s.rho(coherent_level, coherent_level) = 1.0;
    return s;
}

double DynamicState::bad_fraction() const {
    const double total = sink_total();
    if (!(total > 0.0)) throw NumericalError("no population reached S1/2");
    return (sink(Sink::DownBad) + sink(Sink::UpBad)) / total;
}

BlochSystem::BlochSystem(const AtomSpec& atom, const PulseSpec& pulse) {
    atom.validate();
    pulse.validate();

    // sigma- 650 nm drive couples D3/2(m) to P1/2(m - 1). Relative Rabi
    // amplitudes follow the square roots of the CG weights, normalized to the
    // D3/2(+3/2) <-> |e> channel.
    const auto upper_e = Sublevel{Term::P12, HalfInt::from_twice(1)};
    double reference = 0.0;
    for (const auto& ch : atom.channels) {
        if (ch.lower.term == Term::D32 && ch.q == -1 && ch.upper == upper_e) reference = ch.cg2;
    }
    if (!(reference > 0.0)) throw ValidationError("atom model lacks the D3/2(+3/2) <-> P1/2(+1/2) channel");

    for (const auto& ch : atom.channels) {
        if (ch.lower.term != Term::D32 || ch.q != -1) continue;
        const double rabi = pulse.omega_per_ns * std::sqrt(ch.cg2 / reference);
        const int p = coherent_index(ch.upper);
        const int d = coherent_index(ch.lower);
        hamiltonian_(p, d) = 0.5 * rabi;
        hamiltonian_(d, p) = 0.5 * rabi;
        max_rate_ = std::max(max_rate_, std::hypot(rabi, pulse.detuning_per_ns));
    }
    hamiltonian_(level::P_m12, level::P_m12) = -pulse.detuning_per_ns;
    hamiltonian_(level::P_p12, level::P_p12) = -pulse.detuning_per_ns;
    max_rate_ = std::max(max_rate_, std::abs(pulse.detuning_per_ns));

    for (const Sublevel& upper : sublevels(Term::P12)) {
        const int u = coherent_index(upper);
        for (const auto& dc : decay_channels(upper, atom)) {
            const auto& lower = dc.channel.lower;
            if (lower.term == Term::S12) {
                jumps_.push_back(Jump{u, -1, sink_index(upper, lower), dc.rate_per_ns});
            } else {
                jumps_.push_back(Jump{u, coherent_index(lower), -1, dc.rate_per_ns});
            }
            loss_[static_cast<std::size_t>(u)] += dc.rate_per_ns;
        }
    }
}

BlochSystem::Derivative BlochSystem::derivative(const DensityMatrix6& rho, bool drive_on) const {
    Derivative d;
    if (drive_on) {
        d.drho = -kI * (hamiltonian_ * rho - rho * hamiltonian_);
    } else {
        // Without the drive only the diagonal detuning term remains.
        const auto diag = hamiltonian_.diagonal();
        for (int i = 0; i < level::count; ++i) {
            for (int j = 0; j < level::count; ++j) d.drho(i, j) = -kI * (diag(i) - diag(j)) * rho(i, j);
        }
    }
    for (int i = 0; i < level::count; ++i) {
        for (int j = 0; j < level::count; ++j) {
            d.drho(i, j) -= 0.5 * (loss_[static_cast<std::size_t>(i)] + loss_[static_cast<std::size_t>(j)]) * rho(i, j);
        }
    }
    d.dsinks.fill(0.0);
    for (const Jump& jump : jumps_) {
        const double flow = jump.rate * rho(jump.upper, jump.upper).real();
        if (jump.lower >= 0) {
            d.drho(jump.lower, jump.lower) += flow;
        } else {
            d.dsinks[static_cast<std::size_t>(jump.sink)] += flow;
        }
    }
    return d;
}

void BlochSystem::step(DynamicState& state, double dt_ns, bool drive_on) const {
    const DensityMatrix6& rho = state.rho;
    const Derivative k1 = derivative(rho, drive_on);
    const Derivative k2 = derivative(rho + (0.5 * dt_ns) * k1.drho, drive_on);
    const Derivative k3 = derivative(rho + (0.5 * dt_ns) * k2.drho, drive_on);
    const Derivative k4 = derivative(rho + dt_ns * k3.drho, drive_on);
    state.rho += (dt_ns / 6.0) * (k1.drho + 2.0 * k2.drho + 2.0 * k3.drho + k4.drho);
    for (std::size_t s = 0; s < state.sinks.size(); ++s) {
        state.sinks[s] += (dt_ns / 6.0) * (k1.dsinks[s] + 2.0 * k2.dsinks[s] + 2.0 * k3.dsinks[s] + k4.dsinks[s]);
    }
    state.t_ns += dt_ns;
}

void BlochSystem::funnel_excited(DynamicState& state) const {
    std::array<double, level::count> excited{};
    for (int p : {level::P_m12, level::P_p12}) excited[static_cast<std::size_t>(p)] = state.rho(p, p).real();
    for (const Jump& jump : jumps_) {
        const double share = excited[static_cast<std::size_t>(jump.upper)] * jump.rate /
                             loss_[static_cast<std::size_t>(jump.upper)];
        if (jump.lower >= 0) {
            state.rho(jump.lower, jump.lower) += share;
        } else {
            state.sinks[static_cast<std::size_t>(jump.sink)] += share;
        }
    }
    for (int p : {level::P_m12, level::P_p12}) {
        state.rho.row(p).setZero();
        state.rho.col(p).setZero();
    }
}

std::vector<DynamicState> evolve(const AtomSpec& atom, const PulseSpec& pulse, const DynamicState& initial,
                                 double dt_ns, double t_end_ns, int record_every) {
    const BlochSystem system(atom, pulse);
    check_initial(initial);
    if (!(dt_ns > 0.0)) throw ValidationError("dt must be > 0");
    if (dt_ns > atom.tau_e_ns * kMaxStepPerLifetime * (1.0 + 1e-12)) {
        throw ValidationError("dt exceeds tau_e/200");
    }
    if (dt_ns * system.max_drive_rate() > kMaxDrivePhasePerStep) {
        throw ValidationError("dt under-resolves the drive: dt * sqrt(Omega^2 + Delta^2) > pi/20");
    }
    if (!(t_end_ns >= pulse.t_p_ns)) throw ValidationError("t_end must be >= t_p");
    if (record_every < 1) throw ValidationError("record_every must be >= 1");

    std::vector<DynamicState> trajectory{initial};
    DynamicState state = initial;
    long long counter = 0;
    bool last_recorded = true;

    auto run = [&](double span, bool drive_on) {
        if (span <= 0.0) return;
        const double start = state.t_ns;
        const long long n = static_cast<long long>(std::ceil(span / dt_ns - 1e-9));
        const double h = span / static_cast<double>(n);
        for (long long i = 0; i < n; ++i) {
            system.step(state, h, drive_on);
            last_recorded = ++counter % record_every == 0;
            if (last_recorded) trajectory.push_back(state);
        }
        state.t_ns = start + span;
        if (last_recorded) trajectory.back().t_ns = state.t_ns;
    };
    run(pulse.t_p_ns, true);
    run(t_end_ns - pulse.t_p_ns, false);
    if (!last_recorded) trajectory.push_back(state);
    return trajectory;
}

double double_excitation_error(const AtomSpec& atom, double t_p_ns, const DoubleExcitationOptions& opts) {
    if (!(t_p_ns > 0.0) || !std::isfinite(t_p_ns)) throw ValidationError("t_p must be > 0");
    if (opts.min_steps_per_pulse < 20 || opts.steps_per_lifetime < 200 || !(opts.decay_lifetimes >= 15.0) ||
        !(opts.convergence > 0.0)) {
        throw ValidationError("double excitation options out of range");
    }
    const PulseSpec pulse = PulseSpec::pi_pulse(t_p_ns);
    const BlochSystem system(atom, pulse);
    const double tau = atom.tau_e_ns;

    DynamicState state = DynamicState::pure(level::D_p32);

    const double dt_pulse = std::min(t_p_ns / opts.min_steps_per_pulse, tau / opts.steps_per_lifetime);
    const long long n_pulse = static_cast<long long>(std::ceil(t_p_ns / dt_pulse - 1e-9));
    const double h_pulse = t_p_ns / static_cast<double>(n_pulse);
    for (long long i = 0; i < n_pulse; ++i) system.step(state, h_pulse, true);

    const double h_free = tau / opts.steps_per_lifetime;
    auto free_lifetimes = [&](double lifetimes) {
        const long long n = static_cast<long long>(std::llround(lifetimes * opts.steps_per_lifetime));
        for (long long i = 0; i < n; ++i) system.step(state, h_free, false);
    };
    free_lifetimes(opts.decay_lifetimes);

    constexpr int kMaxExtraBlocks = 200;
    int blocks = 0;
    for (;; ++blocks) {
        const double before = state.sink_total();
        free_lifetimes(1.0);
        if (state.sink_total() - before <= opts.convergence) break;
        if (blocks == kMaxExtraBlocks) throw NumericalError("S-sink totals failed to converge after the pulse");
    }
    system.funnel_excited(state);
    return state.bad_fraction();
}

ErrorCurve scan_pulse_durations(const AtomSpec& atom, std::span<const double> t_p_grid_ns,
                                const DoubleExcitationOptions& opts) {
    if (t_p_grid_ns.empty()) throw ValidationError("pulse-duration grid is empty");
    for (double t : t_p_grid_ns) {
        if (!(t > 0.0) || !std::isfinite(t)) throw ValidationError("pulse-duration grid must be positive");
    }
    atom.validate();

    std::vector<std::future<double>> jobs;
    jobs.reserve(t_p_grid_ns.size());
    for (double t : t_p_grid_ns) {
        jobs.push_back(std::async(std::launch::async, [&atom, &opts, t] { return double_excitation_error(atom, t, opts); }));
    }
    ErrorCurve curve;
    for (std::size_t i = 0; i < jobs.size(); ++i) curve.points.push_back(ErrorPoint{t_p_grid_ns[i], jobs[i].get()});
    return curve;
}

void write_csv(std::ostream& os, const ErrorCurve& curve) {
    const auto flags = os.flags();
    const auto precision = os.precision();
    os << "t_p_ns,epsilon_d\n" << std::setprecision(12);
    for (const auto& p : curve.points) os << p.t_p_ns << ',' << p.epsilon_d << '\n';
    os.flags(flags);
    os.precision(precision);
}

}  // namespace ipw
