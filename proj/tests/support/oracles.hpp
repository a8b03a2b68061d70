#pragma once

// Reference implementations used only by the tests. None of them call into
// ipw_core, so agreement with the library is a genuine cross-check.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

namespace oracle {

// |<j1 m1; 1 q | j m>|^2 by diagonalizing J^2 = J1^2 + J2^2 + 2 J1z J2z + J1+ J2- + J1- J2+
// inside the fixed-M product subspace. All angular momenta are passed as twice their value.
inline double cg2_by_diagonalization(int tj1, int tm1, int q, int tj, int tm) {
    if (tm != tm1 + 2 * q) return 0.0;
    const int tM = tm;
    struct Product {
        int tma;
        int qb;
    };
    std::vector<Product> basis;
    for (int tma = -tj1; tma <= tj1; tma += 2) {
        for (int qb = -1; qb <= 1; ++qb) {
            if (tma + 2 * qb == tM) basis.push_back({tma, qb});
        }
    }
    const double j1 = 0.5 * tj1;
    const auto n = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd j2op = Eigen::MatrixXd::Zero(n, n);
    auto ladder = [](double j, double m, int dir) { return std::sqrt(j * (j + 1) - m * (m + dir)); };
    for (Eigen::Index a = 0; a < n; ++a) {
        const double ma = 0.5 * basis[a].tma;
        const double qa = basis[a].qb;
        j2op(a, a) = j1 * (j1 + 1) + 2.0 + 2.0 * ma * qa;
        for (Eigen::Index b = 0; b < n; ++b) {
            const double mb = 0.5 * basis[b].tma;
            const double qbb = basis[b].qb;
            // J1+ J2-
            if (basis[a].tma == basis[b].tma + 2 && basis[a].qb == basis[b].qb - 1) {
                j2op(a, b) += ladder(j1, mb, +1) * ladder(1.0, qbb, -1);
            }
            // J1- J2+
            if (basis[a].tma == basis[b].tma - 2 && basis[a].qb == basis[b].qb + 1) {
                j2op(a, b) += ladder(j1, mb, -1) * ladder(1.0, qbb, +1);
            }
        }
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(j2op);
    const double j = 0.5 * tj;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (std::abs(eig.eigenvalues()(k) - j * (j + 1)) < 1e-9) {
            for (Eigen::Index a = 0; a < n; ++a) {
                if (basis[a].tma == tm1 && basis[a].qb == q) return eig.eigenvectors()(a, k) * eig.eigenvectors()(a, k);
            }
        }
    }
    return 0.0;
}

// Direct 10-level Lindblad model: 4 D3/2, 2 P1/2 and the four S1/2 sinks as
// real levels, standard D[L] dissipators, integrated with adaptive dopri5.
// Level order: D(-3/2), D(-1/2), D(+1/2), D(+3/2), P(-1/2), P(+1/2),
// S down good, S up good, S down bad, S up bad.
struct LindbladResult {
    double epsilon_d;
    double good_ratio;  // S down good / S up good
    double s_total;
    double trace;
};

class Lindblad10 {
public:
    using Mat = Eigen::Matrix<std::complex<double>, 10, 10>;
    using State = std::vector<double>;

    Lindblad10(double tau_ns, double branch_s, double omega_per_ns) {
        const double gamma = 1.0 / tau_ns;
        const double gs = gamma * branch_s;
        const double gd = gamma * (1.0 - branch_s);
        // Standard squared CG values for P1/2 -> S1/2 and P1/2 -> D3/2.
        add_jump(5, 6, gs * 2.0 / 3.0);
        add_jump(5, 7, gs * 1.0 / 3.0);
        add_jump(4, 9, gs * 2.0 / 3.0);
        add_jump(4, 8, gs * 1.0 / 3.0);
        add_jump(5, 3, gd * 1.0 / 2.0);
        add_jump(5, 2, gd * 1.0 / 3.0);
        add_jump(5, 1, gd * 1.0 / 6.0);
        add_jump(4, 0, gd * 1.0 / 2.0);
        add_jump(4, 1, gd * 1.0 / 3.0);
        add_jump(4, 2, gd * 1.0 / 6.0);
        // sigma- couplings D(+3/2) <-> P(+1/2) and D(+1/2) <-> P(-1/2); the
        // second is weaker by sqrt(1/6 / 1/2).
        drive_ = Mat::Zero();
        drive_(5, 3) = drive_(3, 5) = 0.5 * omega_per_ns;
        drive_(4, 2) = drive_(2, 4) = 0.5 * omega_per_ns / std::sqrt(3.0);
    }

    void rhs(const State& x, State& dxdt, bool drive_on) const {
        const Mat rho = unpack(x);
        Mat d = Mat::Zero();
        if (drive_on) d += std::complex<double>(0.0, -1.0) * (drive_ * rho - rho * drive_);
        for (const auto& [l, ldl] : jumps_) d += l * rho * l.adjoint() - 0.5 * (ldl * rho + rho * ldl);
        dxdt = pack(d);
    }

    LindbladResult run(double t_p_ns, double t_decay_ns, double tol = 1e-11) const {
        namespace ode = boost::numeric::odeint;
        Mat rho = Mat::Zero();
        rho(3, 3) = 1.0;
        State x = pack(rho);
        auto stepper = ode::make_controlled(tol, tol, ode::runge_kutta_dopri5<State>());
        ode::integrate_adaptive(stepper, [this](const State& s, State& ds, double) { rhs(s, ds, true); }, x, 0.0,
                                t_p_ns, t_p_ns / 100.0);
        ode::integrate_adaptive(stepper, [this](const State& s, State& ds, double) { rhs(s, ds, false); }, x, t_p_ns,
                                t_p_ns + t_decay_ns, 0.1);
        const Mat out = unpack(x);
        const double good = out(6, 6).real() + out(7, 7).real();
        const double bad = out(8, 8).real() + out(9, 9).real();
        return LindbladResult{bad / (good + bad), out(6, 6).real() / out(7, 7).real(), good + bad, out.trace().real()};
    }

private:
    void add_jump(int from, int to, double rate) {
        Mat l = Mat::Zero();
        l(to, from) = std::sqrt(rate);
        jumps_.push_back({l, l.adjoint() * l});
    }

    static State pack(const Mat& m) {
        State x(200);
        for (int i = 0; i < 10; ++i)
            for (int j = 0; j < 10; ++j) {
                x[2 * (10 * i + j)] = m(i, j).real();
                x[2 * (10 * i + j) + 1] = m(i, j).imag();
            }
        return x;
    }

    static Mat unpack(const State& x) {
        Mat m;
        for (int i = 0; i < 10; ++i)
            for (int j = 0; j < 10; ++j) m(i, j) = {x[2 * (10 * i + j)], x[2 * (10 * i + j) + 1]};
        return m;
    }

    struct JumpOp {
        Mat l;
        Mat ldl;
    };
    Mat drive_;
    std::vector<JumpOp> jumps_;
};

// Rejection sampling of the collection probabilities. Directions are drawn
// uniformly in the cone of half-angle alpha1 about +x and kept when the polar
// angle from z also lies within pi/2 +/- alpha2. Intensities are the
// CG-weighted dipole patterns: sigma+ (2/3) splits into phi-hat 3/16pi and
// theta-hat 3/16pi cos^2, pi (1/3) is theta-hat 3/8pi sin^2.
struct McCollection {
    std::array<double, 3> p;   // sigma_H, sigma_V, pi
    std::array<double, 3> se;  // standard errors (delta method for the ratio)
    double solid_angle;
    double solid_angle_se;
    std::uint64_t accepted;
};

inline McCollection mc_collection(double alpha1, double alpha2, std::uint64_t samples, std::uint64_t seed) {
    using std::numbers::pi;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double c1 = std::cos(alpha1);
    const double cap = 2.0 * pi * (1.0 - c1);
    const double kH = (2.0 / 3.0) * 3.0 / (16.0 * pi);
    const double kPi = (1.0 / 3.0) * 3.0 / (8.0 * pi);

    // Running sums of f_i, f_tot, f_i^2, f_i f_tot, f_tot^2 over all samples
    // (rejected samples contribute zeros).
    std::array<double, 3> s{}, s2{}, sxt{};
    double st = 0.0, st2 = 0.0;
    std::uint64_t accepted = 0;
    for (std::uint64_t k = 0; k < samples; ++k) {
        const double cb = 1.0 - uni(rng) * (1.0 - c1);
        const double sb = std::sqrt(std::max(0.0, 1.0 - cb * cb));
        const double g = 2.0 * pi * uni(rng);
        const double nz = sb * std::sin(g);
        const double theta = std::acos(std::clamp(nz, -1.0, 1.0));
        if (std::abs(theta - pi / 2) > alpha2) continue;
        ++accepted;
        const std::array<double, 3> f = {kH, kH * nz * nz, kPi * (1.0 - nz * nz)};
        const double t = f[0] + f[1] + f[2];
        for (int i = 0; i < 3; ++i) {
            s[i] += f[i];
            s2[i] += f[i] * f[i];
            sxt[i] += f[i] * t;
        }
        st += t;
        st2 += t * t;
    }
    McCollection out{};
    const double n = static_cast<double>(samples);
    const double mt = st / n;
    for (int i = 0; i < 3; ++i) {
        const double r = s[i] / st;
        out.p[i] = r;
        // var(f_i - r f_tot) / (n mean(f_tot)^2)
        const double m2 = s2[i] / n - 2.0 * r * sxt[i] / n + r * r * st2 / n;
        const double mean = s[i] / n - r * mt;
        out.se[i] = std::sqrt(std::max(0.0, m2 - mean * mean) / n) / mt;
    }
    const double frac = static_cast<double>(accepted) / n;
    out.solid_angle = cap * frac;
    out.solid_angle_se = cap * std::sqrt(frac * (1.0 - frac) / n);
    out.accepted = accepted;
    return out;
}

// Closed form for a circular cone of half-angle alpha about x: averaging
// cos^2(theta) = sin^2(beta) sin^2(gamma) over the cap gives
// p_sigma_V = (2/3 - c + c^3/3) / (4 (1 - c)), c = cos(alpha).
inline double circular_p_sigma_v(double alpha) {
    const double c = std::cos(alpha);
    return (2.0 / 3.0 - c + c * c * c / 3.0) / (4.0 * (1.0 - c));
}

}  // namespace oracle
