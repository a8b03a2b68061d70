#include "ipw/entanglement_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "ipw/errors.hpp"

namespace ipw {

namespace {

using Matrix2c = Eigen::Matrix2cd;
constexpr std::complex<double> kI{0.0, 1.0};

Matrix2c pauli_x() {
    Matrix2c m;
    m << 0.0, 1.0, 1.0, 0.0;
    return m;
}

Matrix2c pauli_y() {
    Matrix2c m;
    m << 0.0, -kI, kI, 0.0;
    return m;
}

// exp(-i angle/2 (cos(phase) X + sin(phase) Y))
Matrix2c rotation(double angle, double phase) {
    return std::cos(angle / 2) * Matrix2c::Identity() -
           kI * std::sin(angle / 2) * (std::cos(phase) * pauli_x() + std::sin(phase) * pauli_y());
}

// Atom is the left (slow) factor, photon the right (fast) one.
Matrix4c kron(const Matrix2c& atom, const Matrix2c& photon) {
    Matrix4c out;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int p = 0; p < 2; ++p)
                for (int q = 0; q < 2; ++q) out(2 * a + p, 2 * b + q) = atom(a, b) * photon(p, q);
    return out;
}

struct ConditionalOutcome {
    double p_apd[2];
    double p_up[2];  // conditional, after readout and contrast
};

ConditionalOutcome measure(const IonPhotonState& state, double photon_rotation, std::optional<double> atom_phase,
                           const ErrorBudget& budget) {
    const Matrix2c atom_op = atom_phase ? rotation(std::numbers::pi / 2, *atom_phase) : Matrix2c::Identity();
    const Matrix4c u = kron(atom_op, rotation(photon_rotation, 0.0));
    const Matrix4c rho = u * state.rho * u.adjoint();

    ConditionalOutcome out{};
    for (int photon = 0; photon < 2; ++photon) {
        const double down = rho(photon, photon).real();
        const double up = rho(2 + photon, 2 + photon).real();
        const double p = down + up;
        if (!(p > 1e-15)) {
            throw DataError(std::string("conditioning on APD") + (photon == 0 ? "1" : "2") +
                            " which has zero click probability");
        }
        double p_up = up / p;
        if (atom_phase) p_up = 0.5 + budget.rotation_contrast * (p_up - 0.5);
        p_up = budget.readout_err + (1.0 - 2.0 * budget.readout_err) * p_up;
        out.p_apd[photon] = p;
        out.p_up[photon] = std::clamp(p_up, 0.0, 1.0);
    }
    return out;
}

std::vector<FringePoint> fringe(const IonPhotonState& state, std::span<const double> grid, const ErrorBudget& budget,
                                bool x_basis) {
    state.validate();
    budget.validate();
    std::vector<FringePoint> out;
    out.reserve(grid.size());
    for (double s : grid) {
        const auto m = x_basis ? measure(state, std::numbers::pi / 2, s, budget) : measure(state, s, std::nullopt, budget);
        out.push_back(FringePoint{s, m.p_up[0], m.p_up[1], m.p_apd[0], m.p_apd[1]});
    }
    return out;
}

struct FitPoint {
    double phase;
    double p_up;
    double weight;  // shots behind p_up; variance p(1-p)/weight
};

struct AmplitudeFit {
    double amplitude;
    double variance;
};

// Least squares y = m + a cos(phase) + b sin(phase), weighted by shots, with
// binomial sandwich covariance.
AmplitudeFit fit_fixed_period(const std::vector<FitPoint>& pts, bool exact) {
    std::set<long long> distinct;
    for (const auto& p : pts) {
        const double wrapped = std::remainder(p.phase, 2.0 * std::numbers::pi);
        distinct.insert(std::llround(wrapped * 1e9));
    }
    if (distinct.size() < 3) throw DataError("sinusoid fit needs at least three distinct phases");

    Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    for (const auto& p : pts) {
        const Eigen::Vector3d x(1.0, std::cos(p.phase), std::sin(p.phase));
        normal += p.weight * x * x.transpose();
        rhs += p.weight * p.p_up * x;
    }
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(normal);
    if (!lu.isInvertible()) throw DataError("sinusoid fit is degenerate");
    const Eigen::Matrix3d inv = lu.inverse();
    const Eigen::Vector3d beta = inv * rhs;

    Eigen::Matrix3d meat = Eigen::Matrix3d::Zero();
    if (!exact) {
        for (const auto& p : pts) {
            const Eigen::Vector3d x(1.0, std::cos(p.phase), std::sin(p.phase));
            const double var = p.p_up * (1.0 - p.p_up) / p.weight;
            meat += (p.weight * p.weight * var) * x * x.transpose();
        }
    }
    const Eigen::Matrix3d cov = inv * meat * inv;
    const double a = beta(1);
    const double b = beta(2);
    const double amp = std::hypot(a, b);
    if (!std::isfinite(amp)) throw DataError("sinusoid fit produced a non-finite amplitude");
    double var = 0.0;
    if (amp > 0.0) var = (a * a * cov(1, 1) + b * b * cov(2, 2) + 2.0 * a * b * cov(1, 2)) / (amp * amp);
    else var = 0.5 * (cov(1, 1) + cov(2, 2));
    return AmplitudeFit{amp, std::max(var, 0.0)};
}

FidelityEstimate combine(double population, double population_var, const AmplitudeFit& apd1, const AmplitudeFit& apd2) {
    FidelityEstimate est{};
    est.population = population;
    est.contrast = apd1.amplitude + apd2.amplitude;
    const double contrast_sigma = std::sqrt(apd1.variance + apd2.variance);
    if (!(est.contrast <= 1.0 + 5.0 * contrast_sigma + 1e-9)) {
        std::ostringstream os;
        os << "fitted x-fringe contrast " << est.contrast << " is unbounded (> 1)";
        throw DataError(os.str());
    }
    est.fidelity = 0.5 * population + 0.5 * est.contrast;
    est.sigma = 0.5 * std::sqrt(population_var + contrast_sigma * contrast_sigma);
    return est;
}

bool is_zero_setting(double v) { return std::abs(v) < 1e-12; }

}  // namespace

void IonPhotonState::validate() const {
    if (std::abs(rho.trace().real() - 1.0) > 1e-12 || std::abs(rho.trace().imag()) > 1e-12) {
        throw ValidationError("ion-photon state trace differs from 1");
    }
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw ValidationError("ion-photon state is not Hermitian");
    const Eigen::SelfAdjointEigenSolver<Matrix4c> eig(rho);
    if (eig.eigenvalues().minCoeff() < -1e-10) throw ValidationError("ion-photon state is not positive semidefinite");
}

double IonPhotonState::fidelity() const {
    using namespace pair_basis;
    return 0.5 * (rho(DownH, DownH).real() + rho(UpV, UpV).real()) + rho(DownH, UpV).real();
}

IonPhotonState IonPhotonState::target() {
    using namespace pair_basis;
    IonPhotonState s;
    s.rho(DownH, DownH) = s.rho(UpV, UpV) = s.rho(DownH, UpV) = s.rho(UpV, DownH) = 0.5;
    return s;
}

IonPhotonState IonPhotonState::werner(double w) {
    if (!(w >= -1.0 / 3.0 && w <= 1.0)) throw ValidationError("Werner weight must lie in [-1/3, 1]");
    IonPhotonState s = target();
    s.rho = w * s.rho + (1.0 - w) * 0.25 * Matrix4c::Identity();
    return s;
}

void ErrorBudget::validate() const {
    for (double v : {depol, readout_err, rotation_contrast}) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("error budget entries must lie in [0, 1]");
    }
}

IonPhotonState build_state(const CollectionProbabilities& probs, double kappa, const ErrorBudget& budget) {
    using namespace pair_basis;
    probs.validate();
    budget.validate();
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw ValidationError("kappa must lie in [0, 1]");
    IonPhotonState s;
    const double coherence = kappa * std::sqrt(probs.p_sigma_H * probs.p_pi);
    s.rho(DownH, DownH) = probs.p_sigma_H;
    s.rho(UpV, UpV) = probs.p_pi;
    s.rho(DownH, UpV) = s.rho(UpV, DownH) = coherence;
    s.rho(DownV, DownV) = probs.p_sigma_V;
    // Renormalize away the quadrature-level deviation of the sum from 1.
    s.rho /= s.rho.trace().real();
    s.rho = (1.0 - budget.depol) * s.rho + budget.depol * 0.25 * Matrix4c::Identity();
    s.validate();
    return s;
}

double fit_depolarization(const CollectionProbabilities& probs, double kappa, double target_fidelity) {
    const double f0 = build_state(probs, kappa, ErrorBudget{}).fidelity();
    if (!(target_fidelity >= 0.25 && target_fidelity <= f0)) {
        throw ValidationError("target fidelity must lie between 1/4 and the mixing-limited fidelity");
    }
    // F(p) = (1 - p) F0 + p/4
    return (f0 - target_fidelity) / (f0 - 0.25);
}

std::vector<FringePoint> fringe_z(const IonPhotonState& state, std::span<const double> psi_grid,
                                  const ErrorBudget& budget) {
    return fringe(state, psi_grid, budget, false);
}

std::vector<FringePoint> fringe_x(const IonPhotonState& state, std::span<const double> phi_grid,
                                  const ErrorBudget& budget) {
    return fringe(state, phi_grid, budget, true);
}

void write_csv(std::ostream& os, std::span<const FringePoint> fringe_points) {
    const auto flags = os.flags();
    const auto precision = os.precision();
    os << "setting_value,p_up_apd1,p_up_apd2\n" << std::setprecision(12);
    for (const auto& p : fringe_points) os << p.setting << ',' << p.p_up_apd1 << ',' << p.p_up_apd2 << '\n';
    os.flags(flags);
    os.precision(precision);
}

std::array<std::array<double, 2>, 2> outcome_probabilities(const IonPhotonState& state, double photon_rotation,
                                                           std::optional<double> atom_phase,
                                                           const ErrorBudget& budget) {
    const auto m = measure(state, photon_rotation, atom_phase, budget);
    std::array<std::array<double, 2>, 2> p{};
    for (int apd = 0; apd < 2; ++apd) {
        p[apd][0] = m.p_apd[apd] * m.p_up[apd];
        p[apd][1] = m.p_apd[apd] * (1.0 - m.p_up[apd]);
    }
    return p;
}

CountsTable simulate_measurements(const IonPhotonState& state, std::span<const MeasurementSettings> settings,
                                  const ErrorBudget& budget) {
    state.validate();
    budget.validate();
    CountsTable table;
    for (std::size_t i = 0; i < settings.size(); ++i) {
        const auto& s = settings[i];
        if (s.shots < 1) throw ValidationError("shots must be >= 1");
        const auto p = outcome_probabilities(state, s.photon_rotation, s.atom_phase, budget);
        const std::array<double, 3> cumulative = {p[0][0], p[0][0] + p[0][1], p[0][0] + p[0][1] + p[1][0]};

        std::seed_seq seq{static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32),
                          static_cast<std::uint32_t>(i)};
        std::mt19937_64 engine(seq);
        std::array<std::uint64_t, 4> n{};
        for (std::uint64_t shot = 0; shot < s.shots; ++shot) {
            const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
            const auto k = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                                    cumulative.begin());
            ++n[k];
        }
        const double value = s.atom_phase ? *s.atom_phase : s.photon_rotation;
        table.push_back(CountsRow{value, 1, n[0], n[1]});
        table.push_back(CountsRow{value, 2, n[2], n[3]});
    }
    return table;
}

std::vector<MeasurementSettings> z_protocol(std::span<const double> psi_grid, std::uint64_t shots, std::uint64_t seed) {
    std::vector<MeasurementSettings> out;
    for (double psi : psi_grid) out.push_back(MeasurementSettings{psi, std::nullopt, shots, seed});
    return out;
}

std::vector<MeasurementSettings> x_protocol(std::span<const double> phi_grid, std::uint64_t shots, std::uint64_t seed) {
    std::vector<MeasurementSettings> out;
    for (double phi : phi_grid) out.push_back(MeasurementSettings{std::numbers::pi / 2, phi, shots, seed});
    return out;
}

void write_csv(std::ostream& os, const CountsTable& counts) {
    const auto flags = os.flags();
    const auto precision = os.precision();
    os << "setting_value,apd,atom_up,atom_down\n" << std::setprecision(17);
    for (const auto& r : counts) os << r.setting_value << ',' << r.apd << ',' << r.atom_up << ',' << r.atom_down << '\n';
    os.flags(flags);
    os.precision(precision);
}

CountsTable read_counts_csv(std::istream& is) {
    CountsTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        if (!have_header) {
            if (line != "setting_value,apd,atom_up,atom_down") {
                throw DataError("counts table line " + std::to_string(line_no) + ": unexpected header");
            }
            have_header = true;
            continue;
        }
        std::istringstream fields(line);
        CountsRow row;
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(fields >> row.setting_value >> c1 >> row.apd >> c2 >> row.atom_up >> c3 >> row.atom_down) || c1 != ',' ||
            c2 != ',' || c3 != ',' || (row.apd != 1 && row.apd != 2)) {
            throw DataError("counts table line " + std::to_string(line_no) + ": malformed row '" + line + "'");
        }
        table.push_back(row);
    }
    if (!have_header) throw DataError("counts table: missing header");
    return table;
}

FidelityEstimate estimate_fidelity(const CountsTable& z_counts, const CountsTable& x_counts) {
    double good = 0.0;
    double total = 0.0;
    for (const auto& r : z_counts) {
        if (!is_zero_setting(r.setting_value)) continue;
        good += static_cast<double>(r.apd == 1 ? r.atom_down : r.atom_up);
        total += static_cast<double>(r.atom_up + r.atom_down);
    }
    if (!(total > 0.0)) throw DataError("z-basis counts lack the psi = 0 setting");
    const double population = good / total;

    std::vector<FitPoint> per_apd[2];
    for (const auto& r : x_counts) {
        const double n = static_cast<double>(r.atom_up + r.atom_down);
        if (n == 0.0) continue;
        per_apd[r.apd - 1].push_back(FitPoint{r.setting_value, static_cast<double>(r.atom_up) / n, n});
    }
    return combine(population, population * (1.0 - population) / total, fit_fixed_period(per_apd[0], false),
                   fit_fixed_period(per_apd[1], false));
}

FidelityEstimate estimate_fidelity_exact(const IonPhotonState& state, std::span<const double> phi_grid,
                                         const ErrorBudget& budget) {
    state.validate();
    budget.validate();
    const auto z = outcome_probabilities(state, 0.0, std::nullopt, budget);
    const double population = z[0][1] + z[1][0];

    std::vector<FitPoint> per_apd[2];
    for (const auto& p : fringe_x(state, phi_grid, budget)) {
        per_apd[0].push_back(FitPoint{p.setting, p.p_up_apd1, 1.0});
        per_apd[1].push_back(FitPoint{p.setting, p.p_up_apd2, 1.0});
    }
    return combine(population, 0.0, fit_fixed_period(per_apd[0], true), fit_fixed_period(per_apd[1], true));
}

}  // namespace ipw
