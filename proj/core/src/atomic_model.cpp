#include "ipw/atomic_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "ipw/errors.hpp"

namespace ipw {

namespace {

double factorial(int n) {
    static const auto table = [] {
        std::array<double, 64> t{};
        t[0] = 1.0;
        for (std::size_t i = 1; i < t.size(); ++i) t[i] = t[i - 1] * static_cast<double>(i);
        return t;
    }();
    if (n < 0 || n >= static_cast<int>(table.size())) {
        throw ValidationError("factorial argument out of range: " + std::to_string(n));
    }
    return table[static_cast<std::size_t>(n)];
}

// (a + b + ...)/2 for twice-stored values; callers guarantee evenness.
int half(int twice_sum) { return twice_sum / 2; }

bool triangle(int tj1, int tj2, int tj3) {
    return tj3 <= tj1 + tj2 && tj3 >= std::abs(tj1 - tj2) && (tj1 + tj2 + tj3) % 2 == 0;
}

void check_pair(HalfInt j, HalfInt m, const char* what) {
    if (j.twice() < 0) throw ValidationError(std::string(what) + ": negative j");
    if (std::abs(m.twice()) > j.twice() || (j.twice() - m.twice()) % 2 != 0) {
        throw ValidationError(std::string(what) + ": m=" + m.str() + " incompatible with j=" + j.str());
    }
}

// Signed <j1 m1; j2 m2 | J M> from the Racah closed form, all arguments twice-stored.
double clebsch_gordan_twice(int tj1, int tm1, int tj2, int tm2, int tJ, int tM) {
    if (tm1 + tm2 != tM || !triangle(tj1, tj2, tJ)) return 0.0;

    const double prefactor =
        std::sqrt((tJ + 1) * factorial(half(tJ + tj1 - tj2)) * factorial(half(tJ - tj1 + tj2)) *
                  factorial(half(tj1 + tj2 - tJ)) / factorial(half(tj1 + tj2 + tJ) + 1));
    const double norm = std::sqrt(factorial(half(tJ + tM)) * factorial(half(tJ - tM)) *
                                  factorial(half(tj1 - tm1)) * factorial(half(tj1 + tm1)) *
                                  factorial(half(tj2 - tm2)) * factorial(half(tj2 + tm2)));

    // Every factorial argument below must be nonnegative.
    const int k_min = std::max({0, half(tj2 - tJ - tm1), half(tj1 - tJ + tm2)});
    const int k_max = std::min({half(tj1 + tj2 - tJ), half(tj1 - tm1), half(tj2 + tm2)});
    double sum = 0.0;
    for (int k = k_min; k <= k_max; ++k) {
        const double denom = factorial(k) * factorial(half(tj1 + tj2 - tJ) - k) *
                             factorial(half(tj1 - tm1) - k) * factorial(half(tj2 + tm2) - k) *
                             factorial(half(tJ - tj2 + tm1) + k) * factorial(half(tJ - tj1 - tm2) + k);
        sum += ((k % 2 == 0) ? 1.0 : -1.0) / denom;
    }
    return prefactor * norm * sum;
}

}  // namespace

HalfInt HalfInt::from_double(double value) {
    const double twice = 2.0 * value;
    const double rounded = std::round(twice);
    if (!std::isfinite(value) || std::abs(twice - rounded) > 1e-9 || std::abs(rounded) > 1e6) {
        std::ostringstream os;
        os << "not an integer or half-integer: " << value;
        throw ValidationError(os.str());
    }
    return HalfInt(static_cast<int>(rounded));
}

std::string HalfInt::str() const {
    if (is_integer()) return std::to_string(twice_ / 2);
    return std::to_string(twice_) + "/2";
}

HalfInt total_j(Term term) {
    switch (term) {
        case Term::S12:
        case Term::P12: return HalfInt::from_twice(1);
        case Term::D32: return HalfInt::from_twice(3);
    }
    throw ValidationError("unknown term");
}

const char* to_string(Term term) {
    switch (term) {
        case Term::S12: return "S1/2";
        case Term::P12: return "P1/2";
        case Term::D32: return "D3/2";
    }
    return "?";
}

Sublevel Sublevel::make(Term term, HalfInt mj) {
    const HalfInt j = total_j(term);
    if (std::abs(mj.twice()) > j.twice() || (j.twice() - mj.twice()) % 2 != 0) {
        throw ValidationError(std::string("invalid mJ=") + mj.str() + " for " + to_string(term));
    }
    return Sublevel{term, mj};
}

std::string Sublevel::str() const { return std::string(to_string(term)) + "(" + mj.str() + ")"; }

std::vector<Sublevel> sublevels(Term term) {
    const int tj = total_j(term).twice();
    std::vector<Sublevel> out;
    for (int tm = -tj; tm <= tj; tm += 2) out.push_back(Sublevel{term, HalfInt::from_twice(tm)});
    return out;
}

double clebsch_gordan_sq(HalfInt j_lower, HalfInt m_lower, int q, HalfInt j_upper, HalfInt m_upper) {
    if (q < -1 || q > 1) throw ValidationError("photon q must be -1, 0 or +1");
    check_pair(j_lower, m_lower, "lower level");
    check_pair(j_upper, m_upper, "upper level");
    const double c = clebsch_gordan_twice(j_lower.twice(), m_lower.twice(), 2, 2 * q, j_upper.twice(),
                                          m_upper.twice());
    return c * c;
}

double clebsch_gordan_sq(double j_lower, double m_lower, int q, double j_upper, double m_upper) {
    return clebsch_gordan_sq(HalfInt::from_double(j_lower), HalfInt::from_double(m_lower), q,
                             HalfInt::from_double(j_upper), HalfInt::from_double(m_upper));
}

AtomSpec AtomSpec::barium138(double tau_e_ns, double branch_s) {
    AtomSpec atom;
    atom.tau_e_ns = tau_e_ns;
    atom.branch_s = branch_s;
    for (const Sublevel& upper : sublevels(Term::P12)) {
        for (Term lower_term : {Term::S12, Term::D32}) {
            for (const Sublevel& lower : sublevels(lower_term)) {
                const int twice_q = upper.mj.twice() - lower.mj.twice();
                if (std::abs(twice_q) > 2) continue;
                const int q = twice_q / 2;
                const double cg2 = clebsch_gordan_sq(total_j(lower_term), lower.mj, q, total_j(Term::P12), upper.mj);
                if (cg2 == 0.0) continue;
                atom.channels.push_back(TransitionChannel{
                    upper, lower, q, cg2, lower_term == Term::S12 ? Wavelength::nm493 : Wavelength::nm650});
            }
        }
    }
    atom.validate();
    return atom;
}

void AtomSpec::validate() const {
    if (!(tau_e_ns > 0.0) || !std::isfinite(tau_e_ns)) throw ValidationError("atom.tau_e_ns must be > 0");
    if (!(branch_s > 0.0 && branch_s < 1.0)) throw ValidationError("atom.branch_s must lie in (0, 1)");
    for (const auto& ch : channels) {
        if (ch.upper.term != Term::P12) throw ValidationError("channel upper level must be P1/2");
        if (ch.q != (ch.upper.mj - ch.lower.mj).twice() / 2 || (ch.upper.mj - ch.lower.mj).twice() % 2 != 0) {
            throw ValidationError("channel q inconsistent with mJ difference");
        }
        if (ch.cg2 < 0.0 || ch.cg2 > 1.0) throw ValidationError("channel cg2 outside [0, 1]");
    }
}

std::vector<DecayChannel> decay_channels(const Sublevel& upper, const AtomSpec& atom) {
    if (upper.term != Term::P12) {
        throw ValidationError("decay_channels: " + upper.str() + " is not a P1/2 sublevel");
    }
    std::vector<DecayChannel> out;
    for (const auto& ch : atom.channels) {
        if (!(ch.upper == upper)) continue;
        const double branch = ch.lower.term == Term::S12 ? atom.branch_s : 1.0 - atom.branch_s;
        out.push_back(DecayChannel{ch, atom.gamma_per_ns() * branch * ch.cg2});
    }
    return out;
}

}  // namespace ipw
