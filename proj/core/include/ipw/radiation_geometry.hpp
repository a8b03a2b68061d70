#pragma once

#include <complex>
#include <iosfwd>
#include <vector>

#include "ipw/atomic_model.hpp"

namespace ipw {

// Quantization axis is z; light is collected about +x. Directions use the
// polar angle theta from z and azimuth phi from x.

enum class ApertureKind { circular, slit };

struct ApertureSpec {
    ApertureKind kind = ApertureKind::circular;
    double alpha1 = 0.0;  // cone half-angle about +x
    double alpha2 = 0.0;  // slit half-range about theta = pi/2 (slit only)

    static ApertureSpec circular(double alpha1);
    static ApertureSpec slit(double alpha1, double alpha2);
    /// Circular cone with half-angle asin(na).
    static ApertureSpec from_numerical_aperture(double na);

    void validate() const;
    /// Polar range admitted by the aperture, intersected with [0, pi].
    double theta_min() const;
    double theta_max() const;
    /// Azimuthal half-width of the aperture at polar angle theta; the
    /// admitted azimuths are [-phi_half_width, +phi_half_width].
    double phi_half_width(double theta) const;
};

/// Far-field vector amplitude split into theta-hat (V) and phi-hat (H) parts.
struct EmissionAmplitude {
    int q = 0;
    std::complex<double> theta;
    std::complex<double> phi;
    double intensity() const { return std::norm(theta) + std::norm(phi); }
};

/// Dipole emission amplitude of a Delta m = q decay:
///   pi       = i sqrt(3/8pi) sin(theta) theta-hat
///   sigma+/- = i e^{+/- i phi} sqrt(3/16pi) (cos(theta) theta-hat +/- i phi-hat)
/// Throws ValidationError for theta outside [0, pi], phi outside [0, 2pi) or |q| > 1.
EmissionAmplitude pattern_amplitude(int q, double theta, double phi);

/// Solid angle passed by the aperture in steradians.
double solid_angle(const ApertureSpec& aperture);

struct CollectionProbabilities {
    double p_sigma_H = 0.0;
    double p_sigma_V = 0.0;
    double p_pi = 0.0;
    double solid_angle = 0.0;
    // CG-weighted emission probability landing in the aperture (before
    // normalization); equals solid_angle / 4pi for an isotropic total.
    double collected = 0.0;
    double error = 0.0;  // quadrature error estimate on the probabilities

    void validate() const;
};

/// CG-weighted sigma+/pi collection probabilities from |e> = P1/2(+1/2) toward
/// S1/2, with H = phi-hat and V = theta-hat, normalized to sum to 1.
/// `tol` is the absolute accuracy on each probability, in (0, 1e-3].
CollectionProbabilities collection_probabilities(const ApertureSpec& aperture, double tol = 1e-10,
                                                 const AtomSpec& atom = AtomSpec::barium138());

/// Normalized overlap between the collected sigma_H and pi_V amplitude
/// fields, including the e^{i phi} phase of the sigma+ pattern. 1 for an
/// infinitesimal on-axis aperture.
double coherence_overlap(const ApertureSpec& aperture, double tol = 1e-10);

struct MixingFidelity {
    double fidelity;
    double epsilon;
};

/// F = (pH + ppi)/2 + kappa sqrt(pH ppi); epsilon = 1 - F.
MixingFidelity mixing_fidelity(const CollectionProbabilities& probs, double kappa = 1.0);

struct TradeoffPoint {
    double solid_angle;
    double epsilon;
    double alpha1;
    double alpha2;
};

struct TradeoffCurve {
    std::vector<TradeoffPoint> points;
};

/// Slit sweep at fixed alpha1: alpha2 runs from alpha1 * 1e-3 up to alpha1.
TradeoffCurve tradeoff_curve(double alpha1, int n_points, double tol = 1e-10);

/// Pure circular sweep: alpha1 runs from alpha1_max * 1e-3 up to alpha1_max.
TradeoffCurve circular_tradeoff_curve(double alpha1_max, int n_points, double tol = 1e-10);

/// Slit half-range that passes `omega_target` steradians through a cone of
/// half-angle alpha1, to 1e-9 sr. Throws ValidationError if the target is not
/// in (0, solid_angle(circular alpha1)].
double solve_slit_for_solid_angle(double alpha1, double omega_target);

/// Circular half-angle passing `omega` steradians.
double circular_alpha_for_solid_angle(double omega);

/// CSV with header `solid_angle_sr,solid_angle_fraction,epsilon`.
void write_csv(std::ostream& os, const TradeoffCurve& curve);

}  // namespace ipw
