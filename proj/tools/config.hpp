#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ipw/atomic_model.hpp"
#include "ipw/bloch_dynamics.hpp"
#include "ipw/entanglement_model.hpp"
#include "ipw/photon_statistics.hpp"

namespace ipw::cli {

enum class StreamFormat { binary, text };

struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "ipw_out";
    bool gnuplot = false;

    // [atom]
    double tau_e_ns = 10.0;
    double branch_s = 0.75;

    // [bloch]
    std::vector<double> t_p_grid_ns = {0.01, 0.1, 0.5, 1, 2, 5, 10, 20, 30, 50, 100};
    DoubleExcitationOptions bloch_opts;

    // [aperture]
    double na = 0.6;
    std::vector<double> slit_alpha1;  // empty: asin(na) only
    int curve_points = 41;
    double quad_tol = 1e-10;
    double stop_fraction = 0.5;  // solid angle kept by the stops, relative to the full cone

    // [source] and [timing]
    SourceModel source;
    double dark_floor_g2 = 3e-5;  // > 0: dark_rate_hz is derived from this floor
    double target_g2 = 8.1e-5;    // > 0: leakage_rate_hz is derived from this target
    ExperimentTiming timing;

    // [g2]
    std::int64_t trials = 316'000;
    double window_ns = 30.0;
    double window_offset_ns = 0.0;
    int n_norm_peaks = 4;
    double bin_width_ns = 5.0;
    int max_delay_periods = 6;
    std::vector<double> scan_windows_ns = {5, 10, 15, 20, 30, 40, 50, 75, 100, 150, 200};
    StreamFormat stream_format = StreamFormat::binary;

    // [entangle]
    double kappa = 1.0;
    bool fit_budget = true;
    double target_full_fidelity = 0.884;
    ErrorBudget budget;  // depol is ignored when fit_budget is set
    std::uint64_t shots = 1'000'000;
    int n_phases = 8;
    int n_psi = 16;

    AtomSpec atom() const { return AtomSpec::barium138(tau_e_ns, branch_s); }
    Picoseconds window() const;
    Picoseconds window_offset() const;
    Picoseconds bin_width() const;
    std::vector<Picoseconds> scan_windows() const;

    /// Checks every section against the owning module's invariants.
    void validate() const;
};

/// Reads a sectioned key = value file over the defaults. Unknown sections or
/// keys, malformed values and keys outside a section throw ValidationError.
RunConfig load_config(const std::string& path);

/// Every key with its effective value in schema order (seed and output
/// settings excluded); the config hash is FNV-1a 64 of this text.
std::string canonical_text(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

/// Commented listing of all keys with defaults; loadable as a config file.
void write_documented_defaults(std::ostream& os);

std::uint64_t fnv1a64(const std::string& text, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string format_double(double v);

}  // namespace ipw::cli
