#include "ipw/radiation_geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "ipw/errors.hpp"
#include "ipw/quadrature.hpp"

namespace ipw {

namespace {

using std::numbers::pi;
constexpr std::complex<double> kI{0.0, 1.0};

EmissionAmplitude amplitude_unchecked(int q, double theta, double phi) {
    EmissionAmplitude a;
    a.q = q;
    if (q == 0) {
        a.theta = kI * std::sqrt(3.0 / (8.0 * pi)) * std::sin(theta);
        a.phi = 0.0;
        return a;
    }
    const double sign = q > 0 ? 1.0 : -1.0;
    const std::complex<double> prefactor = kI * std::polar(1.0, sign * phi) * std::sqrt(3.0 / (16.0 * pi));
    a.theta = prefactor * std::cos(theta);
    a.phi = prefactor * (sign * kI);
    return a;
}

struct EmissionWeights {
    double sigma;  // |e> -> S1/2(-1/2), q = +1
    double pi;     // |e> -> S1/2(+1/2), q = 0
};

EmissionWeights weights_from(const AtomSpec& atom) {
    EmissionWeights w{0.0, 0.0};
    const Sublevel e{Term::P12, HalfInt::from_twice(1)};
    for (const auto& ch : atom.channels) {
        if (!(ch.upper == e) || ch.lower.term != Term::S12) continue;
        if (ch.q == 1) w.sigma = ch.cg2;
        if (ch.q == 0) w.pi = ch.cg2;
    }
    if (!(w.sigma > 0.0 && w.pi > 0.0)) throw ValidationError("atom model lacks the |e> -> S1/2 sigma+/pi channels");
    return w;
}

// Integral of f(theta, phi) sin(theta) over the aperture.
template <std::size_t N, class F>
quad::Result<N> integrate_aperture(const ApertureSpec& aperture, F&& f, double abs_tol) {
    auto integrand = [&f](double theta, double phi) {
        auto v = f(theta, phi);
        const double jacobian = std::sin(theta);
        for (auto& x : v) x *= jacobian;
        return v;
    };
    auto lo = [&aperture](double theta) { return -aperture.phi_half_width(theta); };
    auto hi = [&aperture](double theta) { return aperture.phi_half_width(theta); };
    quad::Options opts;
    opts.abs_tol = abs_tol;
    return quad::integrate_nested<N>(integrand, aperture.theta_min(), aperture.theta_max(), lo, hi, opts);
}

void check_tolerance(double tol) {
    if (!(tol > 0.0 && tol <= 1e-3)) throw ValidationError("quadrature tolerance must lie in (0, 1e-3]");
}

}  // namespace

ApertureSpec ApertureSpec::circular(double alpha1) {
    ApertureSpec a{ApertureKind::circular, alpha1, alpha1};
    a.validate();
    return a;
}

ApertureSpec ApertureSpec::slit(double alpha1, double alpha2) {
    ApertureSpec a{ApertureKind::slit, alpha1, alpha2};
    a.validate();
    return a;
}

ApertureSpec ApertureSpec::from_numerical_aperture(double na) {
    if (!(na > 0.0 && na <= 1.0)) throw ValidationError("numerical aperture must lie in (0, 1]");
    return circular(std::asin(na));
}

void ApertureSpec::validate() const {
    if (!(alpha1 > 0.0 && alpha1 <= pi)) throw ValidationError("aperture alpha1 must lie in (0, pi]");
    if (kind == ApertureKind::slit && !(alpha2 > 0.0 && alpha2 <= alpha1)) {
        throw ValidationError("slit alpha2 must lie in (0, alpha1]");
    }
}

double ApertureSpec::theta_min() const {
    const double half = kind == ApertureKind::slit ? std::min(alpha1, alpha2) : alpha1;
    return std::max(0.0, pi / 2 - half);
}

double ApertureSpec::theta_max() const {
    const double half = kind == ApertureKind::slit ? std::min(alpha1, alpha2) : alpha1;
    return std::min(pi, pi / 2 + half);
}

double ApertureSpec::phi_half_width(double theta) const {
    if (theta < theta_min() || theta > theta_max()) return 0.0;
    // Cone condition about +x: sin(theta) cos(phi) >= cos(alpha1).
    const double c = std::cos(alpha1);
    const double s = std::sin(theta);
    if (s <= 0.0) return c <= 0.0 ? pi : 0.0;
    const double ratio = c / s;
    if (ratio >= 1.0) return 0.0;
    if (ratio <= -1.0) return pi;
    return std::acos(ratio);
}

EmissionAmplitude pattern_amplitude(int q, double theta, double phi) {
    if (q < -1 || q > 1) throw ValidationError("pattern_amplitude: q must be -1, 0 or +1");
    if (!(theta >= 0.0 && theta <= pi)) throw ValidationError("pattern_amplitude: theta outside [0, pi]");
    if (!(phi >= 0.0 && phi < 2.0 * pi)) throw ValidationError("pattern_amplitude: phi outside [0, 2pi)");
    return amplitude_unchecked(q, theta, phi);
}

double solid_angle(const ApertureSpec& aperture) {
    aperture.validate();
    if (aperture.kind == ApertureKind::circular) return 2.0 * pi * (1.0 - std::cos(aperture.alpha1));
    auto strip = [&aperture](double theta) { return 2.0 * aperture.phi_half_width(theta) * std::sin(theta); };
    quad::Options opts;
    opts.abs_tol = 1e-13;
    return quad::integrate_scalar(strip, aperture.theta_min(), aperture.theta_max(), opts).value[0];
}

void CollectionProbabilities::validate() const {
    for (double p : {p_sigma_H, p_sigma_V, p_pi}) {
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("collection probability outside [0, 1]");
    }
    if (std::abs(p_sigma_H + p_sigma_V + p_pi - 1.0) > 1e-6) {
        throw ValidationError("collection probabilities do not sum to 1");
    }
    if (!(solid_angle > 0.0 && solid_angle <= 4.0 * pi * (1.0 + 1e-12))) {
        throw ValidationError("solid angle outside (0, 4pi]");
    }
}

CollectionProbabilities collection_probabilities(const ApertureSpec& aperture, double tol, const AtomSpec& atom) {
    aperture.validate();
    check_tolerance(tol);
    const EmissionWeights w = weights_from(atom);

    const double omega = solid_angle(aperture);
    // Probabilities are ratios against a total of order omega / 4pi.
    const double scale = omega / (4.0 * pi);

    auto channels = [&w](double theta, double phi) {
        const EmissionAmplitude sigma = amplitude_unchecked(+1, theta, phi);
        const EmissionAmplitude pi_amp = amplitude_unchecked(0, theta, phi);
        return std::array<double, 3>{w.sigma * std::norm(sigma.phi), w.sigma * std::norm(sigma.theta),
                                     w.pi * pi_amp.intensity()};
    };
    const auto r = integrate_aperture<3>(aperture, channels, 0.25 * tol * scale);

    const double total = r.value[0] + r.value[1] + r.value[2];
    if (!(total > 0.0)) throw NumericalError("aperture collects no light");

    CollectionProbabilities probs;
    probs.p_sigma_H = r.value[0] / total;
    probs.p_sigma_V = r.value[1] / total;
    probs.p_pi = r.value[2] / total;
    probs.solid_angle = omega;
    probs.collected = total;
    probs.error = r.error / total;
    if (probs.error > tol) throw NumericalError("collection probability quadrature missed its tolerance");
    probs.validate();
    return probs;
}

double coherence_overlap(const ApertureSpec& aperture, double tol) {
    aperture.validate();
    check_tolerance(tol);
    const double scale = solid_angle(aperture) / (4.0 * pi);
    auto fields = [](double theta, double phi) {
        const std::complex<double> h = amplitude_unchecked(+1, theta, phi).phi;
        const std::complex<double> v = amplitude_unchecked(0, theta, phi).theta;
        const std::complex<double> cross = h * std::conj(v);
        return std::array<double, 4>{cross.real(), cross.imag(), std::norm(h), std::norm(v)};
    };
    const auto r = integrate_aperture<4>(aperture, fields, 0.25 * tol * scale);
    const double denom = std::sqrt(r.value[2] * r.value[3]);
    if (!(denom > 0.0)) throw NumericalError("aperture collects no light");
    return std::min(1.0, std::hypot(r.value[0], r.value[1]) / denom);
}

MixingFidelity mixing_fidelity(const CollectionProbabilities& probs, double kappa) {
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw ValidationError("kappa must lie in [0, 1]");
    probs.validate();
    const double f = 0.5 * (probs.p_sigma_H + probs.p_pi) + kappa * std::sqrt(probs.p_sigma_H * probs.p_pi);
    return MixingFidelity{f, 1.0 - f};
}

namespace {

TradeoffCurve sweep(int n_points, double tol, auto&& aperture_at) {
    if (n_points < 2) throw ValidationError("trade-off curve needs at least 2 points");
    check_tolerance(tol);
    std::vector<std::future<TradeoffPoint>> jobs;
    for (int i = 0; i < n_points; ++i) {
        const double fraction = 1e-3 + (1.0 - 1e-3) * static_cast<double>(i) / (n_points - 1);
        const ApertureSpec aperture = aperture_at(fraction);
        jobs.push_back(std::async(std::launch::async, [aperture, tol] {
            const auto probs = collection_probabilities(aperture, tol);
            return TradeoffPoint{probs.solid_angle, mixing_fidelity(probs).epsilon, aperture.alpha1,
                                 aperture.kind == ApertureKind::slit ? aperture.alpha2 : aperture.alpha1};
        }));
    }
    TradeoffCurve curve;
    for (auto& job : jobs) curve.points.push_back(job.get());
    return curve;
}

}  // namespace

TradeoffCurve tradeoff_curve(double alpha1, int n_points, double tol) {
    ApertureSpec::circular(alpha1);
    return sweep(n_points, tol, [alpha1](double f) { return ApertureSpec::slit(alpha1, f * alpha1); });
}

TradeoffCurve circular_tradeoff_curve(double alpha1_max, int n_points, double tol) {
    ApertureSpec::circular(alpha1_max);
    return sweep(n_points, tol, [alpha1_max](double f) { return ApertureSpec::circular(f * alpha1_max); });
}

double solve_slit_for_solid_angle(double alpha1, double omega_target) {
    const double full = solid_angle(ApertureSpec::circular(alpha1));
    if (!(omega_target > 0.0 && omega_target <= full + 1e-12)) {
        throw ValidationError("target solid angle outside (0, solid_angle(circular alpha1)]");
    }
    if (std::abs(omega_target - full) <= 1e-12) return alpha1;

    constexpr double kTolerance = 1e-10;  // sr, tighter than the 1e-9 contract
    double lo = 0.0;
    double hi = alpha1;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double residual = solid_angle(ApertureSpec::slit(alpha1, mid)) - omega_target;
        if (std::abs(residual) <= kTolerance) return mid;
        (residual < 0.0 ? lo : hi) = mid;
        if (hi - lo < 1e-15) return mid;
    }
    throw NumericalError("slit bisection failed to converge");
}

double circular_alpha_for_solid_angle(double omega) {
    if (!(omega > 0.0 && omega <= 4.0 * pi)) throw ValidationError("solid angle outside (0, 4pi]");
    return std::acos(std::clamp(1.0 - omega / (2.0 * pi), -1.0, 1.0));
}

void write_csv(std::ostream& os, const TradeoffCurve& curve) {
    const auto flags = os.flags();
    const auto precision = os.precision();
    os << "solid_angle_sr,solid_angle_fraction,epsilon\n" << std::setprecision(12);
    for (const auto& p : curve.points) os << p.solid_angle << ',' << p.solid_angle / (4.0 * pi) << ',' << p.epsilon << '\n';
    os.flags(flags);
    os.precision(precision);
}

}  // namespace ipw
