#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ipw {

using Picoseconds = std::chrono::duration<std::int64_t, std::pico>;

struct ClickRecord {
    std::uint32_t channel = 0;  // 0 = APD1, 1 = APD2
    std::uint64_t time_ps = 0;

    friend bool operator==(const ClickRecord&, const ClickRecord&) = default;
};

/// Orders by time, ties broken by channel.
bool click_less(const ClickRecord& a, const ClickRecord& b);

using ClickStream = std::vector<ClickRecord>;

/// Throws DataError naming the first offending record if the stream is not
/// sorted or has a channel other than 0/1.
void check_stream(std::span<const ClickRecord> stream);

/// Trial k fires its excitation pulse at k * rep_period; detectors are open over
/// [k * rep_period + gate_offset, + gate_width).
struct ExperimentTiming {
    Picoseconds rep_period{26'000'000};
    Picoseconds gate_offset{0};
    Picoseconds gate_width{200'000};
    Picoseconds pulse_duration{10'000};

    void validate() const;
    std::int64_t gate_start_ps(std::int64_t gate) const;
    /// Gate index containing `time_ps`, or -1 when outside every gate.
    std::int64_t gate_of(std::uint64_t time_ps) const;
};

/// Parametric pulsed source with a 50/50 splitter in front of two detectors.
struct SourceModel {
    double p_emit = 1.0;     // P(at least one emission per trial)
    double p_double = 0.0;   // P(two emissions per trial); <= p_emit
    double tau_e_ns = 10.0;  // emission delay after the pulse start is exponential
    double eta = 1.0;        // per-photon detection efficiency
    double dark_rate_hz = 0.0;     // per detector, uniform in the gate
    double leakage_rate_hz = 0.0;  // detected leakage light, both detectors, during the excitation pulse
    double dead_time_ns = 0.0;     // per detector; 0 disables

    void validate() const;
};

/// Deterministic for fixed arguments: trial k draws from its own generator
/// seeded by a hash of (seed, k).
ClickStream simulate_stream(const SourceModel& model, const ExperimentTiming& timing, std::int64_t n_trials,
                            std::uint64_t seed);

struct CoincidenceHistogram {
    Picoseconds bin_width{0};
    Picoseconds max_delay{0};
    std::vector<std::uint64_t> counts;  // bin i covers [-max_delay + i*bin_width, ... + bin_width)

    std::int64_t bin_lower_ps(std::size_t i) const;
    std::uint64_t total() const;
    /// Counts whose bin lower edge lies within +/- gate_width of k * rep_period.
    std::uint64_t peak_integral(const ExperimentTiming& timing, int k) const;
};

/// Histogram of t(APD2) - t(APD1) over all cross-channel pairs with
/// |delay| <= max_delay. max_delay must be a multiple of the repetition
/// period spanning at least five peaks on each side.
CoincidenceHistogram coincidence_histogram(std::span<const ClickRecord> stream, const ExperimentTiming& timing,
                                           Picoseconds bin_width, Picoseconds max_delay);

/// Write as CSV `tau_ps,count` (tau is the bin lower edge).
void write_csv(std::ostream& os, const CoincidenceHistogram& hist);

struct G2Result {
    double g2 = 0.0;
    double sigma = 0.0;
    std::uint64_t n_zero = 0;
    double n_norm = 0.0;
    Picoseconds window{0};
    int n_peaks = 0;
};

/// g2 = n_zero / n_norm. sigma = g2 sqrt(1/n_zero + 1/(n_norm n_peaks)); for
/// n_zero = 0 the one-count upper bound 1/n_norm is reported instead.
/// Throws DataError if n_norm <= 0.
G2Result g2_from_counts(std::uint64_t n_zero, double n_norm, int n_peaks);

struct G2Options {
    int n_norm_peaks = 4;
    Picoseconds window_offset{0};  // window starts this long after the gate opens
};

/// Zero-delay coincidences (both clicks in the same gate, inside the window)
/// normalized by the mean of the nearest n_norm_peaks cross-gate peaks.
G2Result g2_zero(std::span<const ClickRecord> stream, const ExperimentTiming& timing, Picoseconds window,
                 const G2Options& opts = {});

/// Cross-check: n_zero * n_gates / (singles_APD1 * singles_APD2) over the same window.
double g2_singles_product(std::span<const ClickRecord> stream, const ExperimentTiming& timing, Picoseconds window,
                          std::int64_t n_gates, const G2Options& opts = {});

struct WindowScanPoint {
    Picoseconds window{0};
    G2Result g2;
    double collected_fraction = 0.0;  // clicks in window / clicks in gate
};

std::vector<WindowScanPoint> g2_window_scan(std::span<const ClickRecord> stream, const ExperimentTiming& timing,
                                            std::span<const Picoseconds> windows, const G2Options& opts = {});

/// CSV `window_ns,g2,g2_sigma,collected_fraction`.
void write_csv(std::ostream& os, std::span<const WindowScanPoint> scan);

/// Closed-form expectation of the zero-delay over cross-gate coincidence
/// ratio implied by a source model (dead time ignored).
double expected_g2(const SourceModel& model, const ExperimentTiming& timing, Picoseconds window,
                   Picoseconds window_offset = Picoseconds{0});

/// Mean clicks per detector per trial inside the window, as predicted by the model.
double expected_window_clicks(const SourceModel& model, const ExperimentTiming& timing, Picoseconds window,
                              Picoseconds window_offset = Picoseconds{0});

/// Dark rate for which a noise-free single-photon model reaches `target_g2`.
double dark_rate_for_floor(SourceModel model, const ExperimentTiming& timing, Picoseconds window, double target_g2);

/// Leakage rate that lifts expected_g2 to `target_g2`, other fields fixed.
double leakage_rate_for_g2(SourceModel model, const ExperimentTiming& timing, Picoseconds window, double target_g2);

// Click-stream files. Binary: 16-byte header (magic "IPWTAG01", u64 record
// count) followed by 16-byte records (u64 time_ps, u32 channel, u32 zero),
// all little-endian. Text: CSV `channel,time_ps`.
void write_binary(std::ostream& os, std::span<const ClickRecord> stream);
ClickStream read_binary(std::istream& is);
void write_text(std::ostream& os, std::span<const ClickRecord> stream);
ClickStream read_text(std::istream& is);
/// Dispatches on the leading magic bytes.
ClickStream read_stream_file(const std::string& path);

}  // namespace ipw
