#include "commands.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ipw/bloch_dynamics.hpp"
#include "ipw/entanglement_model.hpp"
#include "ipw/photon_statistics.hpp"
#include "ipw/radiation_geometry.hpp"

namespace ipw::cli {

namespace fs = std::filesystem;

namespace {

struct Plot {
    std::string xlabel;
    std::string ylabel;
    std::string using_cols = "1:2";
    bool logx = false;
    bool logy = false;
};

class Outputs {
public:
    explicit Outputs(const RunConfig& cfg) : dir_(cfg.out_dir), gnuplot_(cfg.gnuplot) {
        char hash[17];
        std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(cfg)));
        header_ = "# ipw version=" IPW_VERSION " config_hash=" + std::string(hash) + " seed=" + std::to_string(cfg.seed) + "\n";
        fs::create_directories(dir_);
    }

    const std::string& header() const { return header_; }
    fs::path path(const std::string& name) const { return dir_ / name; }

    void csv(const std::string& name, const std::function<void(std::ostream&)>& body, const Plot& plot) const {
        const fs::path file = dir_ / name;
        std::ofstream os(file, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + file.string() + " for writing");
        os << header_;
        body(os);
        os.flush();
        if (!os) throw std::runtime_error("write failed for " + file.string());
        if (gnuplot_) script(file, plot);
    }

private:
    void script(const fs::path& csv_file, const Plot& plot) const {
        fs::path gp = csv_file;
        gp.replace_extension(".gp");
        std::ofstream os(gp, std::ios::binary);
        os << header_ << "set datafile separator ','\n"
           << "set key autotitle columnhead\n"
           << "set xlabel '" << plot.xlabel << "'\n"
           << "set ylabel '" << plot.ylabel << "'\n";
        if (plot.logx) os << "set logscale x\n";
        if (plot.logy) os << "set logscale y\n";
        os << "plot '" << csv_file.filename().string() << "' using " << plot.using_cols << " with linespoints\n";
        if (!os) throw std::runtime_error("write failed for " + gp.string());
    }

    fs::path dir_;
    bool gnuplot_;
    std::string header_;
};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string g(double v) { return format_double(v); }

struct NamedAperture {
    std::string label;
    ApertureSpec spec;
};

// Full cone at the configured NA plus the two stops passing the same
// fraction of its solid angle.
std::array<NamedAperture, 3> stop_apertures(const RunConfig& cfg) {
    const double alpha1 = std::asin(cfg.na);
    const double omega = cfg.stop_fraction * solid_angle(ApertureSpec::circular(alpha1));
    return {NamedAperture{"full", ApertureSpec::circular(alpha1)},
            NamedAperture{"circular_stop", ApertureSpec::circular(circular_alpha_for_solid_angle(omega))},
            NamedAperture{"slit_stop", ApertureSpec::slit(alpha1, solve_slit_for_solid_angle(alpha1, omega))}};
}

SourceModel resolved_source(const RunConfig& cfg) {
    SourceModel s = cfg.source;
    if (cfg.dark_floor_g2 > 0.0) {
        s.dark_rate_hz = dark_rate_for_floor(s, cfg.timing, cfg.window(), cfg.dark_floor_g2);
    }
    if (cfg.target_g2 > 0.0) s.leakage_rate_hz = leakage_rate_for_g2(s, cfg.timing, cfg.window(), cfg.target_g2);
    return s;
}

G2Options g2_options(const RunConfig& cfg) {
    G2Options opts;
    opts.n_norm_peaks = cfg.n_norm_peaks;
    opts.window_offset = cfg.window_offset();
    return opts;
}

void analyze(const RunConfig& cfg, const ClickStream& stream, const Outputs& out, std::ostream& log) {
    const auto opts = g2_options(cfg);
    const auto hist = coincidence_histogram(stream, cfg.timing, cfg.bin_width(), cfg.max_delay_periods * cfg.timing.rep_period);
    out.csv("g2_histogram.csv", [&](std::ostream& os) { write_csv(os, hist); }, Plot{"delay (ps)", "coincidences"});

    const auto windows = cfg.scan_windows();
    const auto scan = g2_window_scan(stream, cfg.timing, windows, opts);
    out.csv("g2_window_scan.csv", [&](std::ostream& os) { write_csv(os, scan); }, Plot{"window (ns)", "g2(0)", "1:2"});

    const auto r = g2_zero(stream, cfg.timing, cfg.window(), opts);
    std::array<std::uint64_t, 2> singles{};
    for (const auto& c : stream) ++singles[c.channel];
    out.csv(
        "g2_summary.csv",
        [&](std::ostream& os) {
            os << "window_ns,g2,g2_sigma,n_zero,n_norm,n_peaks,singles_apd1,singles_apd2\n"
               << g(cfg.window_ns) << ',' << g(r.g2) << ',' << g(r.sigma) << ',' << r.n_zero << ',' << g(r.n_norm)
               << ',' << r.n_peaks << ',' << singles[0] << ',' << singles[1] << '\n';
        },
        Plot{"window (ns)", "g2(0)"});
    log << "g2 window_ns=" << g(cfg.window_ns) << " g2=" << g(r.g2) << " sigma=" << g(r.sigma) << " n_zero=" << r.n_zero
        << " n_norm=" << g(r.n_norm) << "\n";
}

}  // namespace

void cmd_bloch(const RunConfig& cfg, std::ostream& log) {
    const Outputs out(cfg);
    const auto curve = scan_pulse_durations(cfg.atom(), cfg.t_p_grid_ns, cfg.bloch_opts);
    out.csv("bloch_error_curve.csv", [&](std::ostream& os) { write_csv(os, curve); },
            Plot{"pulse duration (ns)", "double-excitation error", "1:2", true, true});
    for (const auto& p : curve.points) log << "bloch t_p_ns=" << g(p.t_p_ns) << " epsilon_d=" << g(p.epsilon_d) << "\n";
}

void cmd_aperture(const RunConfig& cfg, std::ostream& log) {
    const Outputs out(cfg);
    const double alpha1 = std::asin(cfg.na);
    const auto circular = circular_tradeoff_curve(alpha1, cfg.curve_points, cfg.quad_tol);
    const Plot plot{"solid angle fraction", "polarization-mixing error", "2:3"};
    out.csv("aperture_circular.csv", [&](std::ostream& os) { write_csv(os, circular); }, plot);

    std::vector<double> slits = cfg.slit_alpha1;
    if (slits.empty()) slits.push_back(alpha1);
    for (std::size_t k = 0; k < slits.size(); ++k) {
        const auto curve = tradeoff_curve(slits[k], cfg.curve_points, cfg.quad_tol);
        out.csv("aperture_slit_" + std::to_string(k) + ".csv", [&](std::ostream& os) { write_csv(os, curve); }, plot);
    }

    std::ostringstream rows;
    for (const auto& [label, spec] : stop_apertures(cfg)) {
        const auto p = collection_probabilities(spec, cfg.quad_tol);
        const double eps = mixing_fidelity(p).epsilon;
        rows << label << ',' << g(spec.alpha1) << ',' << g(spec.alpha2) << ',' << g(p.solid_angle) << ','
             << g(p.p_sigma_H) << ',' << g(p.p_sigma_V) << ',' << g(p.p_pi) << ',' << g(eps) << '\n';
        log << "aperture " << label << " solid_angle_sr=" << g(p.solid_angle) << " epsilon=" << g(eps) << "\n";
    }
    out.csv(
        "aperture_summary.csv",
        [&](std::ostream& os) {
            os << "aperture,alpha1,alpha2,solid_angle_sr,p_sigma_H,p_sigma_V,p_pi,epsilon\n" << rows.str();
        },
        Plot{"solid angle (sr)", "epsilon", "4:8"});
}

void cmd_g2_simulate(const RunConfig& cfg, std::ostream& log) {
    const Outputs out(cfg);
    const auto source = resolved_source(cfg);
    const auto stream = simulate_stream(source, cfg.timing, cfg.trials, cfg.seed);

    const bool binary = cfg.stream_format == StreamFormat::binary;
    const fs::path file = out.path(binary ? "clicks.bin" : "clicks.csv");
    {
        std::ofstream os(file, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + file.string() + " for writing");
        if (binary) {
            write_binary(os, stream);
        } else {
            os << out.header();
            write_text(os, stream);
        }
        os.flush();
        if (!os) throw std::runtime_error("write failed for " + file.string());
    }

    const double expected = expected_g2(source, cfg.timing, cfg.window(), cfg.window_offset());
    out.csv(
        "g2_source.csv",
        [&](std::ostream& os) {
            os << "trials,clicks,dark_rate_hz,leakage_rate_hz,expected_g2,stream_file\n"
               << cfg.trials << ',' << stream.size() << ',' << g(source.dark_rate_hz) << ','
               << g(source.leakage_rate_hz) << ',' << g(expected) << ',' << file.filename().string() << '\n';
        },
        Plot{"trials", "clicks"});
    log << "g2 simulate clicks=" << stream.size() << " dark_rate_hz=" << g(source.dark_rate_hz)
        << " leakage_rate_hz=" << g(source.leakage_rate_hz) << " expected_g2=" << g(expected) << "\n";

    // Analyze what was written, so the outputs match `g2 analyze` on the file.
    analyze(cfg, read_stream_file(file.string()), out, log);
}

void cmd_g2_analyze(const RunConfig& cfg, const std::string& input, std::ostream& log) {
    const auto stream = read_stream_file(input);
    const Outputs out(cfg);
    analyze(cfg, stream, out, log);
}

void cmd_entangle(const RunConfig& cfg, std::ostream& log) {
    const Outputs out(cfg);
    const auto apertures = stop_apertures(cfg);

    std::array<CollectionProbabilities, 3> probs;
    for (std::size_t i = 0; i < 3; ++i) probs[i] = collection_probabilities(apertures[i].spec, cfg.quad_tol);

    // One shared depolarization weight, fitted on the full aperture.
    const double depol =
        cfg.fit_budget ? fit_depolarization(probs[0], cfg.kappa, cfg.target_full_fidelity) : cfg.budget.depol;
    const ErrorBudget state_budget{depol, 0.0, 1.0};
    const ErrorBudget meas_budget{0.0, cfg.budget.readout_err, cfg.budget.rotation_contrast};

    std::vector<double> psi, phi;
    for (int k = 0; k < cfg.n_psi; ++k) psi.push_back(2.0 * std::numbers::pi * k / cfg.n_psi);
    for (int k = 0; k < cfg.n_phases; ++k) phi.push_back(2.0 * std::numbers::pi * k / cfg.n_phases);

    std::ostringstream rows;
    std::array<double, 3> f_model{};
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& label = apertures[i].label;
        const auto state = build_state(probs[i], cfg.kappa, state_budget);
        f_model[i] = state.fidelity();

        const Plot fringe{"setting (rad)", "P(up | APD)", "1:2"};
        out.csv("entangle_fringe_z_" + label + ".csv",
                [&](std::ostream& os) { write_csv(os, fringe_z(state, psi, meas_budget)); }, fringe);
        out.csv("entangle_fringe_x_" + label + ".csv",
                [&](std::ostream& os) { write_csv(os, fringe_x(state, phi, meas_budget)); }, fringe);

        const auto z = simulate_measurements(state, z_protocol(psi, cfg.shots, splitmix64(cfg.seed ^ splitmix64(2 * i))),
                                             meas_budget);
        const auto x = simulate_measurements(
            state, x_protocol(phi, cfg.shots, splitmix64(cfg.seed ^ splitmix64(2 * i + 1))), meas_budget);
        const Plot counts{"setting (rad)", "atom up counts", "1:3"};
        out.csv("entangle_counts_z_" + label + ".csv", [&](std::ostream& os) { write_csv(os, z); }, counts);
        out.csv("entangle_counts_x_" + label + ".csv", [&](std::ostream& os) { write_csv(os, x); }, counts);

        const auto est = estimate_fidelity(z, x);
        rows << label << ',' << g(apertures[i].spec.alpha1) << ',' << g(apertures[i].spec.alpha2) << ','
             << g(probs[i].solid_angle) << ',' << g(mixing_fidelity(probs[i], cfg.kappa).epsilon) << ',' << g(depol)
             << ',' << g(f_model[i]) << ',' << g(est.fidelity) << ',' << g(est.sigma) << '\n';
        log << "entangle " << label << " f_model=" << g(f_model[i]) << " f_estimated=" << g(est.fidelity)
            << " sigma=" << g(est.sigma) << "\n";
    }
    out.csv(
        "entangle_summary.csv",
        [&](std::ostream& os) {
            os << "aperture,alpha1,alpha2,solid_angle_sr,epsilon_mixing,depol,f_model,f_estimated,f_sigma\n"
               << rows.str();
        },
        Plot{"solid angle (sr)", "fidelity", "4:7"});
    const bool ordered = f_model[2] > f_model[1] && f_model[1] > f_model[0];
    log << "entangle ordering slit_stop>circular_stop>full=" << (ordered ? "yes" : "no") << "\n";
}

}  // namespace ipw::cli
