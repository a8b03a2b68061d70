#pragma once

#include <string>
#include <vector>

namespace ipw {

/// Angular momentum quantum number stored as twice its value, so that
/// half-integers are exact.
class HalfInt {
public:
    constexpr HalfInt() = default;

    static constexpr HalfInt from_twice(int twice) { return HalfInt(twice); }

    /// Throws ValidationError unless `value` is an integer or half-integer.
    static HalfInt from_double(double value);

    constexpr int twice() const { return twice_; }
    constexpr double value() const { return 0.5 * twice_; }
    constexpr bool is_integer() const { return twice_ % 2 == 0; }

    constexpr HalfInt operator-() const { return HalfInt(-twice_); }
    friend constexpr HalfInt operator+(HalfInt a, HalfInt b) { return HalfInt(a.twice_ + b.twice_); }
    friend constexpr HalfInt operator-(HalfInt a, HalfInt b) { return HalfInt(a.twice_ - b.twice_); }
    friend constexpr auto operator<=>(HalfInt, HalfInt) = default;

    std::string str() const;

private:
    constexpr explicit HalfInt(int twice) : twice_(twice) {}
    int twice_ = 0;
};

enum class Term { S12, P12, D32 };
enum class Wavelength { nm493, nm650 };

HalfInt total_j(Term term);
const char* to_string(Term term);

struct Sublevel {
    Term term = Term::S12;
    HalfInt mj;

    /// Validates |mJ| <= J and that mJ - J is an integer.
    static Sublevel make(Term term, HalfInt mj);

    friend bool operator==(const Sublevel&, const Sublevel&) = default;
    std::string str() const;
};

/// All Zeeman sublevels of a term, ordered by increasing mJ.
std::vector<Sublevel> sublevels(Term term);

struct TransitionChannel {
    Sublevel upper;
    Sublevel lower;
    int q = 0;  // mJ(upper) - mJ(lower): +1 sigma+, 0 pi, -1 sigma-
    double cg2 = 0.0;
    Wavelength wavelength = Wavelength::nm493;
};

/// Squared Clebsch-Gordan coefficient |<j_lower m_lower; 1 q | j_upper m_upper>|^2
/// from the closed-form Racah expression. Zero when m_upper != m_lower + q or
/// the triangle rule fails. Throws ValidationError for negative j, |q| > 1 or
/// |m| > j.
double clebsch_gordan_sq(HalfInt j_lower, HalfInt m_lower, int q, HalfInt j_upper, HalfInt m_upper);

/// Convenience overload; arguments must be integers or half-integers.
double clebsch_gordan_sq(double j_lower, double m_lower, int q, double j_upper, double m_upper);

/// 138Ba+ S1/2, P1/2, D3/2 model. Times in nanoseconds.
struct AtomSpec {
    double tau_e_ns = 10.0;
    double branch_s = 0.75;  // P1/2 -> S1/2 fraction; the rest goes to D3/2
    std::vector<TransitionChannel> channels;

    /// Builds the default barium model with every P1/2 -> {S1/2, D3/2}
    /// dipole channel and computed CG weights.
    static AtomSpec barium138(double tau_e_ns = 10.0, double branch_s = 0.75);

    void validate() const;
    double gamma_per_ns() const { return 1.0 / tau_e_ns; }
};

struct DecayChannel {
    TransitionChannel channel;
    double rate_per_ns = 0.0;
};

/// Decay channels out of a P1/2 sublevel with rate Gamma * branch * cg2.
/// Throws ValidationError if `upper` is not a P1/2 sublevel.
std::vector<DecayChannel> decay_channels(const Sublevel& upper, const AtomSpec& atom);

}  // namespace ipw
