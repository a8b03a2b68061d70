#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "ipw/entanglement_model.hpp"
#include "ipw/errors.hpp"

using namespace ipw;
using std::numbers::pi;

namespace {

CollectionProbabilities probs_of(double h, double v, double p) {
    CollectionProbabilities c;
    c.p_sigma_H = h;
    c.p_sigma_V = v;
    c.p_pi = p;
    c.solid_angle = 1.0;
    return c;
}

const CollectionProbabilities kIdeal = probs_of(0.5, 0.0, 0.5);

std::vector<double> phases(int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(2.0 * pi * i / n);
    return out;
}

// Hand expansion for states with populations a = |down H>, b = |up V>,
// v = |down V>, coherence c between |down H> and |up V>, mixed with I/4 at
// weight p. Returns P(up | APD) after the photon rotation and atom analysis.
struct Block {
    double a, b, v;
    std::complex<double> c;
    double p;
};

IonPhotonState state_of(const Block& s) {
    using namespace pair_basis;
    IonPhotonState st;
    st.rho(DownH, DownH) = s.a;
    st.rho(UpV, UpV) = s.b;
    st.rho(DownV, DownV) = s.v;
    st.rho(DownH, UpV) = s.c;
    st.rho(UpV, DownH) = std::conj(s.c);
    st.rho = (1.0 - s.p) * st.rho + s.p * 0.25 * Matrix4c::Identity();
    return st;
}

double x_fringe_by_hand(const Block& s, int apd, double phi, double readout, double contrast) {
    const double sign = apd == 1 ? 1.0 : -1.0;
    const double n = s.a + s.b + s.v;
    const double p_up = 0.5 + sign * (1.0 - s.p) * std::real(std::polar(1.0, phi) * s.c) / ((1.0 - s.p) * n + s.p);
    return readout + (1.0 - 2.0 * readout) * (0.5 + contrast * (p_up - 0.5));
}

double z_fringe_by_hand(const Block& s, int apd, double psi, double readout) {
    const double c2 = std::pow(std::cos(psi / 2), 2);
    const double s2 = std::pow(std::sin(psi / 2), 2);
    double down = 0.0, up = 0.0;
    if (apd == 1) {
        down = (1.0 - s.p) * (s.a * c2 + s.v * s2) + s.p / 4;
        up = (1.0 - s.p) * s.b * s2 + s.p / 4;
    } else {
        down = (1.0 - s.p) * (s.a * s2 + s.v * c2) + s.p / 4;
        up = (1.0 - s.p) * s.b * c2 + s.p / 4;
    }
    return readout + (1.0 - 2.0 * readout) * up / (up + down);
}

CollectionProbabilities random_probs(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double alpha1 = 0.05 + u(rng) * (pi - 0.05);
    if (u(rng) < 0.5) return collection_probabilities(ApertureSpec::circular(alpha1), 1e-9);
    return collection_probabilities(ApertureSpec::slit(alpha1, (0.02 + 0.98 * u(rng)) * alpha1), 1e-9);
}

}  // namespace

TEST_CASE("build_state") {
    const auto psi = build_state(kIdeal, 1.0, ErrorBudget{});
    CHECK((psi.rho - IonPhotonState::target().rho).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(psi.fidelity() == doctest::Approx(1.0));

    for (double p : {0.0, 0.1, 0.37, 1.0}) {
        CHECK(build_state(kIdeal, 1.0, ErrorBudget{p, 0.0, 1.0}).fidelity() == doctest::Approx(1.0 - 0.75 * p).epsilon(1e-14));
    }
    const auto na = collection_probabilities(ApertureSpec::from_numerical_aperture(0.6));
    CHECK(build_state(na, 1.0, ErrorBudget{}).fidelity() == doctest::Approx(0.952762).epsilon(1e-5));

    CHECK_THROWS_AS(build_state(na, 1.2, ErrorBudget{}), ValidationError);
    CHECK_THROWS_AS(build_state(na, 1.0, ErrorBudget{-0.1, 0.0, 1.0}), ValidationError);
    CHECK_THROWS_AS(build_state(probs_of(0.5, 0.4, 0.5), 1.0, ErrorBudget{}), ValidationError);
}

TEST_CASE("build_state properties over random inputs") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 40; ++i) {
        const auto probs = random_probs(rng);
        const double kappa = u(rng);
        const auto zero = build_state(probs, kappa, ErrorBudget{});
        CHECK_NOTHROW(zero.validate());
        CHECK(zero.fidelity() == doctest::Approx(mixing_fidelity(probs, kappa).fidelity).epsilon(1e-12));
        const auto noisy = build_state(probs, kappa, ErrorBudget{u(rng), 0.0, 1.0});
        CHECK_NOTHROW(noisy.validate());
    }
}

TEST_CASE("state validation and Werner states") {
    CHECK(IonPhotonState::werner(0.9).fidelity() == doctest::Approx(0.925));
    CHECK_THROWS_AS(IonPhotonState::werner(1.5), ValidationError);
    IonPhotonState bad;
    bad.rho(0, 0) = 0.5;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = IonPhotonState::target();
    bad.rho(0, 3) = 0.6;
    bad.rho(3, 0) = 0.6;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = IonPhotonState::target();
    bad.rho(0, 3) = 0.5 * std::complex<double>(1.0, 0.1);
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("fit_depolarization") {
    const auto na = collection_probabilities(ApertureSpec::from_numerical_aperture(0.6));
    const double p = fit_depolarization(na, 1.0, 0.884);
    CHECK(p == doctest::Approx(0.097845).epsilon(1e-4));
    CHECK(build_state(na, 1.0, ErrorBudget{p, 0.0, 1.0}).fidelity() == doctest::Approx(0.884).epsilon(1e-12));
    CHECK_THROWS_AS(fit_depolarization(na, 1.0, 0.99), ValidationError);
}

TEST_CASE("fringe_z examples") {
    const auto psi = IonPhotonState::target();
    const std::vector<double> grid = {0.0, pi};
    const auto f = fringe_z(psi, grid, ErrorBudget{});
    CHECK(f[0].p_up_apd1 == doctest::Approx(0.0).scale(1.0));
    CHECK(f[0].p_up_apd2 == doctest::Approx(1.0));
    CHECK(f[1].p_up_apd1 == doctest::Approx(1.0));
    CHECK(f[1].p_up_apd2 == doctest::Approx(0.0).scale(1.0));

    // A pure |down H> state never clicks APD2 at psi = 0.
    IonPhotonState dh;
    dh.rho(pair_basis::DownH, pair_basis::DownH) = 1.0;
    CHECK_THROWS_AS(fringe_z(dh, std::vector<double>{0.0}, ErrorBudget{}), DataError);
}

TEST_CASE("fringes match the hand expansion") {
    const std::vector<Block> blocks = {
        {0.5, 0.5, 0.0, 0.5, 0.0},
        {0.5, 0.4533, 0.0467, 0.47, 0.1},
        {0.3, 0.6, 0.1, std::complex<double>(0.2, -0.25), 0.05},
        {0.45, 0.45, 0.1, std::complex<double>(0.0, 0.3), 0.3},
    };
    const auto grid = phases(13);
    for (const auto& b : blocks) {
        const auto st = state_of(b);
        REQUIRE_NOTHROW(st.validate());
        for (double r : {0.0, 0.03}) {
            for (double k : {1.0, 0.9}) {
                const ErrorBudget budget{0.0, r, k};
                const auto fx = fringe_x(st, grid, budget);
                const auto fz = fringe_z(st, grid, budget);
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    CHECK(fx[i].p_up_apd1 == doctest::Approx(x_fringe_by_hand(b, 1, grid[i], r, k)).epsilon(1e-12));
                    CHECK(fx[i].p_up_apd2 == doctest::Approx(x_fringe_by_hand(b, 2, grid[i], r, k)).epsilon(1e-12));
                    CHECK(fz[i].p_up_apd1 == doctest::Approx(z_fringe_by_hand(b, 1, grid[i], r)).epsilon(1e-12));
                    CHECK(fz[i].p_up_apd2 == doctest::Approx(z_fringe_by_hand(b, 2, grid[i], r)).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("fringe_x amplitudes") {
    const auto grid = phases(64);
    auto amplitude = [](const std::vector<FringePoint>& f) {
        auto [lo, hi] = std::minmax_element(f.begin(), f.end(),
                                            [](const FringePoint& a, const FringePoint& b) { return a.p_up_apd1 < b.p_up_apd1; });
        return 0.5 * (hi->p_up_apd1 - lo->p_up_apd1);
    };
    const auto psi = fringe_x(IonPhotonState::target(), grid, ErrorBudget{});
    CHECK(amplitude(psi) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(psi[0].p_up_apd1 == doctest::Approx(1.0));
    CHECK(psi[32].p_up_apd1 == doctest::Approx(0.0).scale(1.0));

    for (double c : {0.1, 0.3, 0.45}) {
        const Block b{0.5, 0.5, 0.0, c, 0.0};
        CHECK(amplitude(fringe_x(state_of(b), grid, ErrorBudget{})) == doctest::Approx(c).epsilon(1e-12));
    }
    for (double p : {0.1, 0.5}) {
        const auto w = build_state(kIdeal, 1.0, ErrorBudget{p, 0.0, 1.0});
        CHECK(amplitude(fringe_x(w, grid, ErrorBudget{})) == doctest::Approx(0.5 * (1.0 - p)).epsilon(1e-12));
    }
}

TEST_CASE("fringes are 2pi periodic") {
    const auto na = build_state(collection_probabilities(ApertureSpec::from_numerical_aperture(0.6)), 1.0,
                                ErrorBudget{0.1, 0.0, 1.0});
    const std::vector<double> a = {0.3, 1.7, 4.0};
    const std::vector<double> b = {0.3 + 2 * pi, 1.7 + 2 * pi, 4.0 + 2 * pi};
    const ErrorBudget budget{0.0, 0.02, 0.95};
    const auto za = fringe_z(na, a, budget), zb = fringe_z(na, b, budget);
    const auto xa = fringe_x(na, a, budget), xb = fringe_x(na, b, budget);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(za[i].p_up_apd1 == doctest::Approx(zb[i].p_up_apd1).epsilon(1e-12));
        CHECK(xa[i].p_up_apd2 == doctest::Approx(xb[i].p_up_apd2).epsilon(1e-12));
    }
}

TEST_CASE("NA 0.6 z fringe contrast is bounded by the coherence") {
    const auto probs = collection_probabilities(ApertureSpec::from_numerical_aperture(0.6));
    const auto st = build_state(probs, 1.0, ErrorBudget{});
    const auto f = fringe_z(st, phases(64), ErrorBudget{});
    double lo = 1.0, hi = 0.0;
    for (const auto& p : f) {
        lo = std::min(lo, p.p_up_apd1);
        hi = std::max(hi, p.p_up_apd1);
    }
    CHECK(hi - lo <= 2.0 * std::sqrt(probs.p_sigma_H * probs.p_pi));
    // Correlation at psi = 0 is the population part of the fidelity.
    const auto p0 = outcome_probabilities(st, 0.0, std::nullopt, ErrorBudget{});
    CHECK(0.5 * (p0[0][1] + p0[1][0]) + std::sqrt(probs.p_sigma_H * probs.p_pi) ==
          doctest::Approx(mixing_fidelity(probs).fidelity).epsilon(1e-12));
}

TEST_CASE("fringe csv") {
    std::vector<FringePoint> f = {{0.0, 0.0, 1.0, 0.5, 0.5}, {1.5, 0.25, 0.75, 0.5, 0.5}};
    std::ostringstream os;
    write_csv(os, f);
    CHECK(os.str() == "setting_value,p_up_apd1,p_up_apd2\n0,0,1\n1.5,0.25,0.75\n");
}

TEST_CASE("simulate_measurements") {
    const auto st = IonPhotonState::werner(0.7);
    const auto settings = x_protocol(phases(4), 1'000'000, 99);
    const ErrorBudget budget{0.0, 0.01, 0.97};
    const auto a = simulate_measurements(st, settings, budget);
    const auto b = simulate_measurements(st, settings, budget);
    REQUIRE(a.size() == 8);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].atom_up == b[i].atom_up);
        CHECK(a[i].atom_down == b[i].atom_down);
    }
    for (std::size_t s = 0; s < settings.size(); ++s) {
        const auto p = outcome_probabilities(st, settings[s].photon_rotation, settings[s].atom_phase, budget);
        for (int apd = 0; apd < 2; ++apd) {
            const auto& row = a[2 * s + apd];
            CHECK(row.apd == apd + 1);
            CHECK(row.setting_value == *settings[s].atom_phase);
            for (int k = 0; k < 2; ++k) {
                const double n = static_cast<double>(k == 0 ? row.atom_up : row.atom_down);
                const double expected = 1e6 * p[apd][k];
                // 16 cells: 4 sigma keeps the family-wise false alarm near 1e-3.
                CHECK(std::abs(n - expected) <= 4.0 * std::sqrt(expected * (1.0 - p[apd][k])));
            }
        }
    }
    std::vector<MeasurementSettings> zero = {{0.0, std::nullopt, 0, 1}};
    CHECK_THROWS_AS(simulate_measurements(st, zero, ErrorBudget{}), ValidationError);
}

TEST_CASE("standardized counts have unit variance over seeds") {
    const auto st = IonPhotonState::werner(0.7);
    const ErrorBudget budget{0.0, 0.01, 0.97};
    const auto grid = phases(4);
    double sum_z2 = 0.0;
    int cells = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto settings = x_protocol(grid, 100'000, seed);
        const auto rows = simulate_measurements(st, settings, budget);
        for (std::size_t s = 0; s < settings.size(); ++s) {
            const auto p = outcome_probabilities(st, settings[s].photon_rotation, settings[s].atom_phase, budget);
            for (int apd = 0; apd < 2; ++apd) {
                for (int k = 0; k < 2; ++k) {
                    const double n = static_cast<double>(k == 0 ? rows[2 * s + apd].atom_up : rows[2 * s + apd].atom_down);
                    const double e = 1e5 * p[apd][k];
                    sum_z2 += (n - e) * (n - e) / (e * (1.0 - p[apd][k]));
                    ++cells;
                }
            }
        }
    }
    // Mean of 3200 squared standard normals: sd about 0.025 (cells within a
    // setting are correlated, so allow a wide band).
    CHECK(sum_z2 / cells == doctest::Approx(1.0).epsilon(0.12));
}

TEST_CASE("chi-square p-values are uniform over seeds") {
    const auto st = build_state(collection_probabilities(ApertureSpec::from_numerical_aperture(0.6)), 1.0,
                                ErrorBudget{0.1, 0.02, 1.0});
    const double psi = 0.9;
    const auto p = outcome_probabilities(st, psi, std::nullopt, ErrorBudget{0.0, 0.02, 1.0});
    const boost::math::chi_squared chi2(3.0);
    std::vector<double> pvalues;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        std::vector<MeasurementSettings> s = {{psi, std::nullopt, 2000, seed}};
        const auto rows = simulate_measurements(st, s, ErrorBudget{0.0, 0.02, 1.0});
        double x2 = 0.0;
        for (int apd = 0; apd < 2; ++apd) {
            for (int k = 0; k < 2; ++k) {
                const double e = 2000.0 * p[apd][k];
                const double o = static_cast<double>(k == 0 ? rows[apd].atom_up : rows[apd].atom_down);
                x2 += (o - e) * (o - e) / e;
            }
        }
        pvalues.push_back(boost::math::cdf(boost::math::complement(chi2, x2)));
    }
    std::sort(pvalues.begin(), pvalues.end());
    double ks = 0.0;
    const double n = static_cast<double>(pvalues.size());
    for (std::size_t i = 0; i < pvalues.size(); ++i) {
        ks = std::max({ks, (i + 1) / n - pvalues[i], pvalues[i] - i / n});
    }
    // Kolmogorov-Smirnov critical value at the 1% level; the multinomial is
    // discrete, which only makes the statistic conservative here.
    CHECK(ks < 1.63 / std::sqrt(n));
}

TEST_CASE("counts csv round trip") {
    const auto st = IonPhotonState::werner(0.8);
    const auto counts = simulate_measurements(st, z_protocol(std::vector<double>{0.0, 0.1 * pi, 1.0 / 3.0}, 500, 3),
                                              ErrorBudget{});
    std::ostringstream os;
    write_csv(os, counts);
    std::istringstream is("# comment\n" + os.str());
    const auto back = read_counts_csv(is);
    REQUIRE(back.size() == counts.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].setting_value == counts[i].setting_value);
        CHECK(back[i].apd == counts[i].apd);
        CHECK(back[i].atom_up == counts[i].atom_up);
        CHECK(back[i].atom_down == counts[i].atom_down);
    }
    std::istringstream bad("setting_value,apd,atom_up,atom_down\n0,3,1,1\n");
    CHECK_THROWS_AS(read_counts_csv(bad), DataError);
    std::istringstream no_header("0,1,1,1\n");
    CHECK_THROWS_AS(read_counts_csv(no_header), DataError);
}

TEST_CASE("estimate_fidelity closure") {
    const auto grid = phases(8);
    struct Case {
        IonPhotonState state;
        double truth;
    };
    const auto na = collection_probabilities(ApertureSpec::from_numerical_aperture(0.6));
    const double p = fit_depolarization(na, 1.0, 0.884);
    const std::vector<Case> cases = {
        {IonPhotonState::target(), 1.0},
        {build_state(na, 1.0, ErrorBudget{p, 0.0, 1.0}), 0.884},
        {IonPhotonState::werner(0.9), 0.925},
    };
    std::uint64_t seed = 1;
    for (const auto& c : cases) {
        const auto z = simulate_measurements(c.state, z_protocol(std::vector<double>{0.0}, 1'000'000, seed++), ErrorBudget{});
        const auto x = simulate_measurements(c.state, x_protocol(grid, 1'000'000, seed++), ErrorBudget{});
        const auto est = estimate_fidelity(z, x);
        CAPTURE(c.truth);
        CAPTURE(est.fidelity);
        CAPTURE(est.sigma);
        CHECK(est.sigma > 0.0);
        CHECK(est.sigma < 1e-3);
        CHECK(std::abs(est.fidelity - c.truth) <= 3.0 * est.sigma);
    }
}

TEST_CASE("estimator on exact probabilities is a lower bound") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 60; ++i) {
        const auto probs = random_probs(rng);
        const ErrorBudget state_budget{0.5 * u(rng), 0.0, 1.0};
        const auto st = build_state(probs, u(rng), state_budget);
        const ErrorBudget meas{0.0, 0.1 * u(rng), 0.8 + 0.2 * u(rng)};
        const auto est = estimate_fidelity_exact(st, phases(3 + i % 6), meas);
        CHECK(est.fidelity <= st.fidelity() + 1e-9);
        const auto ideal = estimate_fidelity_exact(st, phases(5), ErrorBudget{});
        CHECK(ideal.fidelity == doctest::Approx(st.fidelity()).epsilon(1e-12));
    }
}

TEST_CASE("estimate_fidelity rejects degenerate data") {
    const auto st = IonPhotonState::target();
    const auto z = simulate_measurements(st, z_protocol(std::vector<double>{0.0}, 1000, 1), ErrorBudget{});
    const auto z_off = simulate_measurements(st, z_protocol(std::vector<double>{0.5}, 1000, 1), ErrorBudget{});
    const auto x = simulate_measurements(st, x_protocol(phases(6), 1000, 2), ErrorBudget{});
    const auto x_two = simulate_measurements(st, x_protocol(std::vector<double>{0.0, pi / 2, 2 * pi}, 1000, 2), ErrorBudget{});
    CHECK_NOTHROW(estimate_fidelity(z, x));
    CHECK_THROWS_AS(estimate_fidelity(z_off, x), DataError);
    CHECK_THROWS_AS(estimate_fidelity(z, x_two), DataError);

    // Deterministic outcomes that no bounded sinusoid pair can produce.
    CountsTable wild;
    const std::array<std::uint64_t, 4> up = {100, 0, 0, 100};
    for (int i = 0; i < 4; ++i) {
        wild.push_back({i * pi / 2, 1, up[i], 100 - up[i]});
        wild.push_back({i * pi / 2, 2, 100 - up[i], up[i]});
    }
    CHECK_THROWS_AS(estimate_fidelity(z, wild), DataError);
}
