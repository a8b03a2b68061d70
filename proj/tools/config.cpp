#include "config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ipw/errors.hpp"
#include "ipw/radiation_geometry.hpp"

namespace ipw::cli {

namespace {

Picoseconds from_ns(double ns) { return Picoseconds{static_cast<std::int64_t>(std::llround(ns * 1000.0))}; }
double to_ns(Picoseconds ps) { return static_cast<double>(ps.count()) / 1000.0; }

[[noreturn]] void bad_value(const std::string& key, const std::string& text, const char* expected) {
    throw ValidationError("config key " + key + ": expected " + expected + ", got '" + text + "'");
}

double parse_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) bad_value(key, text, "a finite number");
    return v;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& text) {
    Int v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end) bad_value(key, text, "an integer");
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true") return true;
    if (text == "false") return false;
    bad_value(key, text, "true or false");
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto first = item.find_first_not_of(" \t");
        const auto last = item.find_last_not_of(" \t");
        if (first == std::string::npos) bad_value(key, text, "a comma-separated list of numbers");
        out.push_back(parse_double(key, item.substr(first, last - first + 1)));
    }
    return out;
}

std::string format_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
    return out;
}

struct Key {
    const char* section;
    const char* name;
    const char* doc;
    std::function<void(RunConfig&, const std::string& key, const std::string& text)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define IPW_DOUBLE(sec, nm, field, doc)                                                                         \
    Key {                                                                                                       \
        sec, nm, doc, [](RunConfig& c, const std::string& k, const std::string& t) { c.field = parse_double(k, t); }, \
            [](const RunConfig& c) { return format_double(c.field); }                                          \
    }
#define IPW_INT(sec, nm, field, type, doc)                                                                          \
    Key {                                                                                                           \
        sec, nm, doc, [](RunConfig& c, const std::string& k, const std::string& t) { c.field = parse_int<type>(k, t); }, \
            [](const RunConfig& c) { return std::to_string(c.field); }                                             \
    }
#define IPW_NS(sec, nm, field, doc)                                                                                 \
    Key {                                                                                                           \
        sec, nm, doc, [](RunConfig& c, const std::string& k, const std::string& t) { c.field = from_ns(parse_double(k, t)); }, \
            [](const RunConfig& c) { return format_double(to_ns(c.field)); }                                       \
    }
#define IPW_LIST(sec, nm, field, doc)                                                                             \
    Key {                                                                                                         \
        sec, nm, doc, [](RunConfig& c, const std::string& k, const std::string& t) { c.field = parse_list(k, t); }, \
            [](const RunConfig& c) { return format_list(c.field); }                                              \
    }
#define IPW_BOOL(sec, nm, field, doc)                                                                             \
    Key {                                                                                                         \
        sec, nm, doc, [](RunConfig& c, const std::string& k, const std::string& t) { c.field = parse_bool(k, t); }, \
            [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }                          \
    }

// Keys in [run] and [output] do not enter the config hash.
const std::vector<Key>& run_keys() {
    static const std::vector<Key> keys = {
        IPW_INT("run", "seed", seed, std::uint64_t, "Base seed for every random stream (overridden by --seed)."),
        Key{"output", "dir", "Output directory (overridden by --out).",
            [](RunConfig& c, const std::string&, const std::string& t) { c.out_dir = t; },
            [](const RunConfig& c) { return c.out_dir; }},
        IPW_BOOL("output", "gnuplot", gnuplot, "Also write a gnuplot script next to each CSV."),
    };
    return keys;
}

const std::vector<Key>& model_keys() {
    static const std::vector<Key> keys = {
        IPW_DOUBLE("atom", "tau_e_ns", tau_e_ns, "P1/2 lifetime in ns."),
        IPW_DOUBLE("atom", "branch_s", branch_s, "P1/2 -> S1/2 branching fraction; the rest decays to D3/2."),

        IPW_LIST("bloch", "t_p_grid_ns", t_p_grid_ns, "Pi-pulse durations to scan, ns."),
        IPW_INT("bloch", "min_steps_per_pulse", bloch_opts.min_steps_per_pulse, int, "RK4 steps across the pulse, at least."),
        IPW_INT("bloch", "steps_per_lifetime", bloch_opts.steps_per_lifetime, int, "RK4 steps per lifetime, at least."),
        IPW_DOUBLE("bloch", "decay_lifetimes", bloch_opts.decay_lifetimes, "Drive-free decay blocks, in lifetimes."),
        IPW_DOUBLE("bloch", "convergence", bloch_opts.convergence, "Stop decaying once a block moves the S total by less."),

        IPW_DOUBLE("aperture", "na", na, "Numerical aperture of the full collection cone."),
        IPW_LIST("aperture", "slit_alpha1", slit_alpha1, "Cone half-angles (rad) for slit sweeps; empty uses asin(na)."),
        IPW_INT("aperture", "curve_points", curve_points, int, "Points per trade-off curve."),
        IPW_DOUBLE("aperture", "quad_tol", quad_tol, "Absolute quadrature tolerance on each probability."),
        IPW_DOUBLE("aperture", "stop_fraction", stop_fraction, "Solid angle kept by the circular and slit stops, relative to the cone."),

        IPW_DOUBLE("source", "p_emit", source.p_emit, "Probability of at least one emission per trial."),
        IPW_DOUBLE("source", "p_double", source.p_double, "Probability of two emissions per trial."),
        IPW_DOUBLE("source", "tau_e_ns", source.tau_e_ns, "Emission delay time constant, ns."),
        IPW_DOUBLE("source", "eta", source.eta, "Per-photon detection efficiency."),
        IPW_DOUBLE("source", "dark_rate_hz", source.dark_rate_hz, "Dark count rate per detector; ignored when dark_floor_g2 > 0."),
        IPW_DOUBLE("source", "leakage_rate_hz", source.leakage_rate_hz, "Detected leakage rate during the pulse; ignored when target_g2 > 0."),
        IPW_DOUBLE("source", "dead_time_ns", source.dead_time_ns, "Detector dead time, ns (0 disables)."),
        IPW_DOUBLE("source", "dark_floor_g2", dark_floor_g2, "If > 0, derive dark_rate_hz so darks alone give this g2."),
        IPW_DOUBLE("source", "target_g2", target_g2, "If > 0, derive leakage_rate_hz so the expected g2 hits this value."),

        IPW_NS("timing", "rep_period_ns", timing.rep_period, "Trial repetition period, ns."),
        IPW_NS("timing", "gate_offset_ns", timing.gate_offset, "Detector gate start after the pulse start, ns."),
        IPW_NS("timing", "gate_width_ns", timing.gate_width, "Detector gate width, ns."),
        IPW_NS("timing", "pulse_duration_ns", timing.pulse_duration, "Excitation pulse duration, ns."),

        IPW_INT("g2", "trials", trials, std::int64_t, "Simulated trials."),
        IPW_DOUBLE("g2", "window_ns", window_ns, "Integration window for the g2 summary, ns."),
        IPW_DOUBLE("g2", "window_offset_ns", window_offset_ns, "Window start after the gate opens, ns."),
        IPW_INT("g2", "n_norm_peaks", n_norm_peaks, int, "Cross-gate peaks averaged for normalization."),
        IPW_DOUBLE("g2", "bin_width_ns", bin_width_ns, "Coincidence histogram bin width, ns."),
        IPW_INT("g2", "max_delay_periods", max_delay_periods, int, "Histogram half-range in repetition periods."),
        IPW_LIST("g2", "scan_windows_ns", scan_windows_ns, "Windows for the g2 window scan, ns."),
        Key{"g2", "stream_format", "Click-stream file written by g2 simulate: binary or text.",
            [](RunConfig& c, const std::string& k, const std::string& t) {
                if (t == "binary") c.stream_format = StreamFormat::binary;
                else if (t == "text") c.stream_format = StreamFormat::text;
                else bad_value(k, t, "binary or text");
            },
            [](const RunConfig& c) { return std::string(c.stream_format == StreamFormat::binary ? "binary" : "text"); }},

        IPW_DOUBLE("entangle", "kappa", kappa, "Coherence factor between the sigma and pi fields."),
        IPW_BOOL("entangle", "fit_budget", fit_budget, "Fit depol so the full aperture reaches target_full_fidelity."),
        IPW_DOUBLE("entangle", "target_full_fidelity", target_full_fidelity, "Full-aperture fidelity used by the fit."),
        IPW_DOUBLE("entangle", "depol", budget.depol, "Depolarization weight when fit_budget = false."),
        IPW_DOUBLE("entangle", "readout_err", budget.readout_err, "Symmetric atom readout error."),
        IPW_DOUBLE("entangle", "rotation_contrast", budget.rotation_contrast, "Contrast of the atom analysis pulse."),
        IPW_INT("entangle", "shots", shots, std::uint64_t, "Synthetic shots per measurement setting."),
        IPW_INT("entangle", "n_phases", n_phases, int, "Analysis phases over one period for the x-basis fringe."),
        IPW_INT("entangle", "n_psi", n_psi, int, "Photon rotation angles over one period for the z-basis fringe."),
    };
    return keys;
}

void check(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

}  // namespace

Picoseconds RunConfig::window() const { return from_ns(window_ns); }
Picoseconds RunConfig::window_offset() const { return from_ns(window_offset_ns); }
Picoseconds RunConfig::bin_width() const { return from_ns(bin_width_ns); }

std::vector<Picoseconds> RunConfig::scan_windows() const {
    std::vector<Picoseconds> out;
    for (double w : scan_windows_ns) out.push_back(from_ns(w));
    return out;
}

void RunConfig::validate() const {
    atom().validate();

    check(!t_p_grid_ns.empty(), "bloch: t_p_grid_ns must not be empty");
    for (double t : t_p_grid_ns) check(t > 0.0, "bloch: pulse durations must be > 0");
    check(bloch_opts.min_steps_per_pulse >= 1 && bloch_opts.steps_per_lifetime >= 200,
          "bloch: need min_steps_per_pulse >= 1 and steps_per_lifetime >= 200");
    check(bloch_opts.decay_lifetimes > 0.0 && bloch_opts.convergence > 0.0,
          "bloch: decay_lifetimes and convergence must be > 0");

    check(na > 0.0 && na <= 1.0, "aperture: na must lie in (0, 1]");
    for (double a : slit_alpha1) check(a > 0.0 && a <= std::numbers::pi, "aperture: slit_alpha1 must lie in (0, pi]");
    check(curve_points >= 2, "aperture: curve_points must be >= 2");
    check(quad_tol > 0.0 && quad_tol <= 1e-3, "aperture: quad_tol must lie in (0, 1e-3]");
    check(stop_fraction > 0.0 && stop_fraction < 1.0, "aperture: stop_fraction must lie in (0, 1)");

    source.validate();
    check(dark_floor_g2 >= 0.0 && target_g2 >= 0.0, "source: dark_floor_g2 and target_g2 must be >= 0");
    check(target_g2 == 0.0 || dark_floor_g2 == 0.0 || target_g2 > dark_floor_g2,
          "source: target_g2 must exceed dark_floor_g2");
    timing.validate();

    check(trials >= 1, "g2: trials must be >= 1");
    check(window().count() > 0 && window_offset_ns >= 0.0 && window_offset() + window() <= timing.gate_width,
          "g2: window_offset_ns + window_ns must fit inside the gate");
    check(n_norm_peaks >= 2, "g2: n_norm_peaks must be >= 2");
    check(bin_width().count() > 0, "g2: bin_width_ns must be > 0");
    check(max_delay_periods >= n_norm_peaks / 2 + 1 && max_delay_periods >= 5,
          "g2: max_delay_periods must be >= 5 and cover the normalization peaks");
    check(!scan_windows_ns.empty(), "g2: scan_windows_ns must not be empty");
    for (auto w : scan_windows()) {
        check(w.count() > 0 && window_offset() + w <= timing.gate_width, "g2: scan windows must fit inside the gate");
    }

    check(kappa >= 0.0 && kappa <= 1.0, "entangle: kappa must lie in [0, 1]");
    check(target_full_fidelity > 0.25 && target_full_fidelity <= 1.0,
          "entangle: target_full_fidelity must lie in (0.25, 1]");
    budget.validate();
    check(shots >= 1, "entangle: shots must be >= 1");
    check(n_phases >= 3 && n_psi >= 1, "entangle: need n_phases >= 3 and n_psi >= 1");
}

RunConfig load_config(const std::string& path) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(path, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError("config " + path + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }

    std::map<std::string, const Key*> table;
    for (const auto* keys : {&run_keys(), &model_keys()}) {
        for (const auto& k : *keys) table[std::string(k.section) + "." + k.name] = &k;
    }
    std::set<std::string> sections;
    for (const auto& [name, _] : table) sections.insert(name.substr(0, name.find('.')));

    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) {
            throw ValidationError("config key '" + section + "' appears outside any section");
        }
        if (!sections.count(section)) throw ValidationError("unknown config section [" + section + "]");
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            const auto it = table.find(full);
            if (it == table.end()) throw ValidationError("unknown config key " + full);
            it->second->set(cfg, full, value.data());
        }
    }
    return cfg;
}

std::string canonical_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& k : model_keys()) out += std::string(k.section) + "." + k.name + "=" + k.get(cfg) + "\n";
    return out;
}

std::uint64_t fnv1a64(const std::string& text, std::uint64_t h) {
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(canonical_text(cfg)); }

void write_documented_defaults(std::ostream& os) {
    const RunConfig defaults;
    std::string section;
    bool first = true;
    for (const auto* keys : {&run_keys(), &model_keys()}) {
        for (const auto& k : *keys) {
            if (k.section != section) {
                section = k.section;
                os << (first ? "" : "\n") << "[" << section << "]\n";
                first = false;
            }
            os << "; " << k.doc << "\n" << k.name << " = " << k.get(defaults) << "\n";
        }
    }
}

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace ipw::cli
