#include "ipw/photon_statistics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "ipw/errors.hpp"

namespace ipw {

namespace {

constexpr double kPsPerNs = 1000.0;
constexpr double kSecondsPerPs = 1e-12;
// Larger per-gate Poisson means make the gated picture meaningless anyway.
constexpr double kMaxPoissonMean = 50.0;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Sampling is done by inverse transform from raw engine output so that the
// stream is reproducible across standard-library implementations.
class TrialRng {
public:
    TrialRng(std::uint64_t seed, std::uint64_t trial) : engine_(splitmix64(seed ^ splitmix64(trial))) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double exponential(double mean) { return -mean * std::log1p(-uniform()); }
    bool bernoulli(double p) { return uniform() < p; }
    std::uint32_t fair_bit() { return static_cast<std::uint32_t>(engine_() >> 63); }

    int poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        int k = 0;
        double product = uniform();
        while (product > limit) {
            ++k;
            product *= uniform();
        }
        return k;
    }

private:
    std::mt19937_64 engine_;
};

struct GateCounts {
    std::int64_t gate;
    std::uint64_t c0;
    std::uint64_t c1;
};

void check_window(const ExperimentTiming& timing, Picoseconds window, const G2Options& opts) {
    if (window.count() <= 0) throw ValidationError("g2 window must be > 0");
    if (window > timing.gate_width) throw ValidationError("g2 window exceeds the gate width");
    if (opts.window_offset.count() < 0 || opts.window_offset + window > timing.gate_width) {
        throw ValidationError("g2 window offset places the window outside the gate");
    }
    if (opts.n_norm_peaks < 2) throw ValidationError("n_norm_peaks must be >= 2");
}

// Per-gate click counts inside the window, in ascending gate order.
std::vector<GateCounts> window_counts(std::span<const ClickRecord> stream, const ExperimentTiming& timing,
                                      Picoseconds window, Picoseconds offset) {
    std::vector<GateCounts> out;
    for (const auto& click : stream) {
        const std::int64_t gate = timing.gate_of(click.time_ps);
        if (gate < 0) continue;
        const std::int64_t rel = static_cast<std::int64_t>(click.time_ps) - timing.gate_start_ps(gate);
        if (rel < offset.count() || rel >= offset.count() + window.count()) continue;
        if (out.empty() || out.back().gate != gate) out.push_back(GateCounts{gate, 0, 0});
        (click.channel == 0 ? out.back().c0 : out.back().c1) += 1;
    }
    return out;
}

double exp_probability(double lo_ns, double hi_ns, double tau_ns) {
    if (hi_ns <= lo_ns) return 0.0;
    return std::exp(-std::max(lo_ns, 0.0) / tau_ns) - std::exp(-std::max(hi_ns, 0.0) / tau_ns);
}

struct WindowModel {
    double a;        // P(a given emitted photon clicks on a given detector inside the window)
    double mean_n;   // E[n photons]
    double pairs_n;  // E[n(n-1)]
    double dark;     // dark clicks per detector in the window
    double leak;     // leakage clicks per detector in the window
    double leak_span_s;
    double window_s;
};

WindowModel window_model(const SourceModel& model, const ExperimentTiming& timing, Picoseconds window,
                         Picoseconds offset) {
    model.validate();
    timing.validate();
    G2Options opts;
    opts.window_offset = offset;
    check_window(timing, window, opts);

    const double start_ns = static_cast<double>((timing.gate_offset + offset).count()) / kPsPerNs;
    const double width_ns = static_cast<double>(window.count()) / kPsPerNs;
    const double pulse_ns = static_cast<double>(timing.pulse_duration.count()) / kPsPerNs;

    WindowModel w{};
    w.a = 0.5 * model.eta * exp_probability(start_ns, start_ns + width_ns, model.tau_e_ns);
    w.mean_n = model.p_emit + model.p_double;
    w.pairs_n = 2.0 * model.p_double;
    w.window_s = width_ns * 1e-9;
    w.dark = model.dark_rate_hz * w.window_s;
    w.leak_span_s = std::max(0.0, std::min(start_ns + width_ns, pulse_ns) - std::max(start_ns, 0.0)) * 1e-9;
    w.leak = 0.5 * model.leakage_rate_hz * w.leak_span_s;
    return w;
}

}  // namespace

bool click_less(const ClickRecord& a, const ClickRecord& b) {
    return a.time_ps != b.time_ps ? a.time_ps < b.time_ps : a.channel < b.channel;
}

void check_stream(std::span<const ClickRecord> stream) {
    for (std::size_t i = 0; i < stream.size(); ++i) {
        if (stream[i].channel > 1) {
            throw DataError("record " + std::to_string(i) + ": channel " + std::to_string(stream[i].channel) +
                            " is not 0 or 1");
        }
        if (i > 0 && click_less(stream[i], stream[i - 1])) {
            throw DataError("record " + std::to_string(i) + ": stream not sorted by (time, channel)");
        }
    }
}

void ExperimentTiming::validate() const {
    if (rep_period.count() <= 0 || gate_width.count() <= 0 || pulse_duration.count() <= 0) {
        throw ValidationError("timing: rep_period, gate_width and pulse_duration must be > 0");
    }
    if (gate_offset.count() < 0) throw ValidationError("timing: gate_offset must be >= 0");
    if (!(gate_width < rep_period) || gate_offset + gate_width > rep_period) {
        throw ValidationError("timing: the gate must fit inside one repetition period");
    }
}

std::int64_t ExperimentTiming::gate_start_ps(std::int64_t gate) const {
    return gate * rep_period.count() + gate_offset.count();
}

std::int64_t ExperimentTiming::gate_of(std::uint64_t time_ps) const {
    const auto t = static_cast<std::int64_t>(time_ps) - gate_offset.count();
    if (t < 0) return -1;
    const std::int64_t gate = t / rep_period.count();
    return (t - gate * rep_period.count()) < gate_width.count() ? gate : -1;
}

void SourceModel::validate() const {
    for (double p : {p_emit, p_double, eta}) {
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("source: probabilities must lie in [0, 1]");
    }
    if (p_double > p_emit) throw ValidationError("source: p_double must not exceed p_emit");
    if (!(tau_e_ns > 0.0) || !std::isfinite(tau_e_ns)) throw ValidationError("source: tau_e_ns must be > 0");
    for (double r : {dark_rate_hz, leakage_rate_hz, dead_time_ns}) {
        if (!(r >= 0.0) || !std::isfinite(r)) throw ValidationError("source: rates and dead time must be >= 0");
    }
}

ClickStream simulate_stream(const SourceModel& model, const ExperimentTiming& timing, std::int64_t n_trials,
                            std::uint64_t seed) {
    model.validate();
    timing.validate();
    if (n_trials < 1) throw ValidationError("n_trials must be >= 1");

    const double gate_s = static_cast<double>(timing.gate_width.count()) * kSecondsPerPs;
    const double pulse_s = static_cast<double>(timing.pulse_duration.count()) * kSecondsPerPs;
    const double dark_mean = model.dark_rate_hz * gate_s;
    const double leak_mean = model.leakage_rate_hz * pulse_s;
    if (dark_mean > kMaxPoissonMean || leak_mean > kMaxPoissonMean) {
        throw ValidationError("source: noise rates exceed the gated-count model range");
    }
    const auto dead_ps = static_cast<std::uint64_t>(std::llround(model.dead_time_ns * kPsPerNs));
    const auto tau_ps = model.tau_e_ns * kPsPerNs;

    ClickStream stream;
    std::vector<ClickRecord> trial_clicks;
    for (std::int64_t k = 0; k < n_trials; ++k) {
        TrialRng rng(seed, static_cast<std::uint64_t>(k));
        trial_clicks.clear();
        const std::int64_t pulse_start = k * timing.rep_period.count();
        const std::int64_t gate_start = timing.gate_start_ps(k);
        const std::int64_t gate_end = gate_start + timing.gate_width.count();
        auto keep = [&](std::int64_t t, std::uint32_t channel) {
            if (t >= gate_start && t < gate_end) {
                trial_clicks.push_back(ClickRecord{channel, static_cast<std::uint64_t>(t)});
            }
        };

        const double u = rng.uniform();
        const int photons = u < model.p_double ? 2 : (u < model.p_emit ? 1 : 0);
        for (int i = 0; i < photons; ++i) {
            const auto t = pulse_start + static_cast<std::int64_t>(rng.exponential(tau_ps));
            const bool detected = rng.bernoulli(model.eta);
            const std::uint32_t channel = rng.fair_bit();
            if (detected) keep(t, channel);
        }
        for (std::uint32_t channel = 0; channel < 2; ++channel) {
            const int n = rng.poisson(dark_mean);
            for (int i = 0; i < n; ++i) {
                keep(gate_start + static_cast<std::int64_t>(rng.uniform() * static_cast<double>(timing.gate_width.count())),
                     channel);
            }
        }
        const int leaked = rng.poisson(leak_mean);
        for (int i = 0; i < leaked; ++i) {
            const auto t = pulse_start +
                           static_cast<std::int64_t>(rng.uniform() * static_cast<double>(timing.pulse_duration.count()));
            keep(t, rng.fair_bit());
        }

        std::sort(trial_clicks.begin(), trial_clicks.end(), click_less);
        if (dead_ps > 0) {
            std::array<std::int64_t, 2> last{-1, -1};
            std::erase_if(trial_clicks, [&](const ClickRecord& c) {
                auto& prev = last[c.channel];
                if (prev >= 0 && c.time_ps < static_cast<std::uint64_t>(prev) + dead_ps) return true;
                prev = static_cast<std::int64_t>(c.time_ps);
                return false;
            });
        }
        stream.insert(stream.end(), trial_clicks.begin(), trial_clicks.end());
    }
    return stream;
}

std::int64_t CoincidenceHistogram::bin_lower_ps(std::size_t i) const {
    return -max_delay.count() + static_cast<std::int64_t>(i) * bin_width.count();
}

std::uint64_t CoincidenceHistogram::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::uint64_t CoincidenceHistogram::peak_integral(const ExperimentTiming& timing, int k) const {
    const std::int64_t center = k * timing.rep_period.count();
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const std::int64_t lower = bin_lower_ps(i);
        if (lower >= center - timing.gate_width.count() && lower < center + timing.gate_width.count()) sum += counts[i];
    }
    return sum;
}

CoincidenceHistogram coincidence_histogram(std::span<const ClickRecord> stream, const ExperimentTiming& timing,
                                           Picoseconds bin_width, Picoseconds max_delay) {
    timing.validate();
    check_stream(stream);
    if (bin_width.count() <= 0) throw ValidationError("histogram bin width must be > 0");
    if (max_delay.count() <= 0 || max_delay.count() % timing.rep_period.count() != 0 ||
        max_delay < 5 * timing.rep_period) {
        throw ValidationError("histogram max_delay must be a multiple of rep_period covering at least 5 peaks");
    }

    std::vector<std::int64_t> t0;
    std::vector<std::int64_t> t1;
    for (const auto& c : stream) (c.channel == 0 ? t0 : t1).push_back(static_cast<std::int64_t>(c.time_ps));

    CoincidenceHistogram hist;
    hist.bin_width = bin_width;
    hist.max_delay = max_delay;
    const std::int64_t span = 2 * max_delay.count();
    const auto n_bins = static_cast<std::size_t>((span + bin_width.count() - 1) / bin_width.count());
    hist.counts.assign(n_bins, 0);

    std::size_t lo = 0;
    for (std::int64_t a : t0) {
        while (lo < t1.size() && t1[lo] < a - max_delay.count()) ++lo;
        for (std::size_t j = lo; j < t1.size() && t1[j] <= a + max_delay.count(); ++j) {
            const std::int64_t delay = t1[j] - a;
            auto bin = static_cast<std::size_t>((delay + max_delay.count()) / bin_width.count());
            hist.counts[std::min(bin, n_bins - 1)] += 1;
        }
    }
    return hist;
}

void write_csv(std::ostream& os, const CoincidenceHistogram& hist) {
    os << "tau_ps,count\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i) os << hist.bin_lower_ps(i) << ',' << hist.counts[i] << '\n';
}

G2Result g2_from_counts(std::uint64_t n_zero, double n_norm, int n_peaks) {
    if (!(n_norm > 0.0)) throw DataError("g2 normalization is zero: insufficient cross-gate coincidences");
    if (n_peaks < 1) throw ValidationError("n_peaks must be >= 1");
    G2Result r;
    r.n_zero = n_zero;
    r.n_norm = n_norm;
    r.n_peaks = n_peaks;
    r.g2 = static_cast<double>(n_zero) / n_norm;
    if (n_zero > 0) {
        r.sigma = r.g2 * std::sqrt(1.0 / static_cast<double>(n_zero) + 1.0 / (n_norm * n_peaks));
    } else {
        r.sigma = 1.0 / n_norm;
    }
    return r;
}

G2Result g2_zero(std::span<const ClickRecord> stream, const ExperimentTiming& timing, Picoseconds window,
                 const G2Options& opts) {
    timing.validate();
    check_window(timing, window, opts);
    check_stream(stream);

    const auto gates = window_counts(stream, timing, window, opts.window_offset);
    std::uint64_t n_zero = 0;
    for (const auto& g : gates) n_zero += g.c0 * g.c1;

    auto c1_at = [&gates](std::int64_t gate) -> std::uint64_t {
        const auto it = std::lower_bound(gates.begin(), gates.end(), gate,
                                         [](const GateCounts& g, std::int64_t v) { return g.gate < v; });
        return (it != gates.end() && it->gate == gate) ? it->c1 : 0;
    };
    // Peaks ordered +1, -1, +2, -2, ...
    std::uint64_t cross = 0;
    for (int i = 0; i < opts.n_norm_peaks; ++i) {
        const int k = (i / 2 + 1) * (i % 2 == 0 ? 1 : -1);
        for (const auto& g : gates) {
            if (g.c0 > 0) cross += g.c0 * c1_at(g.gate + k);
        }
    }
    G2Result r = g2_from_counts(n_zero, static_cast<double>(cross) / opts.n_norm_peaks, opts.n_norm_peaks);
    r.window = window;
    return r;
}

double g2_singles_product(std::span<const ClickRecord> stream, const ExperimentTiming& timing, Picoseconds window,
                          std::int64_t n_gates, const G2Options& opts) {
    timing.validate();
    check_window(timing, window, opts);
    check_stream(stream);
    if (n_gates < 1) throw ValidationError("n_gates must be >= 1");
    std::uint64_t n_zero = 0;
    std::uint64_t s0 = 0;
    std::uint64_t s1 = 0;
    for (const auto& g : window_counts(stream, timing, window, opts.window_offset)) {
        n_zero += g.c0 * g.c1;
        s0 += g.c0;
        s1 += g.c1;
    }
    if (s0 == 0 || s1 == 0) throw DataError("singles-product g2: a detector has no clicks in the window");
    return static_cast<double>(n_zero) * static_cast<double>(n_gates) / (static_cast<double>(s0) * static_cast<double>(s1));
}

std::vector<WindowScanPoint> g2_window_scan(std::span<const ClickRecord> stream, const ExperimentTiming& timing,
                                            std::span<const Picoseconds> windows, const G2Options& opts) {
    timing.validate();
    check_stream(stream);
    if (windows.empty()) throw ValidationError("window grid is empty");
    for (std::size_t i = 1; i < windows.size(); ++i) {
        if (!(windows[i] > windows[i - 1])) throw ValidationError("window grid must be strictly increasing");
    }
    std::uint64_t in_gate = 0;
    for (const auto& c : stream) in_gate += timing.gate_of(c.time_ps) >= 0 ? 1 : 0;
    if (in_gate == 0) throw DataError("no clicks inside any gate");

    std::vector<WindowScanPoint> out;
    for (Picoseconds w : windows) {
        WindowScanPoint p;
        p.window = w;
        p.g2 = g2_zero(stream, timing, w, opts);
        std::uint64_t in_window = 0;
        for (const auto& g : window_counts(stream, timing, w, opts.window_offset)) in_window += g.c0 + g.c1;
        p.collected_fraction = static_cast<double>(in_window) / static_cast<double>(in_gate);
        out.push_back(p);
    }
    return out;
}

void write_csv(std::ostream& os, std::span<const WindowScanPoint> scan) {
    const auto flags = os.flags();
    const auto precision = os.precision();
    os << "window_ns,g2,g2_sigma,collected_fraction\n" << std::setprecision(12);
    for (const auto& p : scan) {
        os << static_cast<double>(p.window.count()) / kPsPerNs << ',' << p.g2.g2 << ',' << p.g2.sigma << ','
           << p.collected_fraction << '\n';
    }
    os.flags(flags);
    os.precision(precision);
}

double expected_window_clicks(const SourceModel& model, const ExperimentTiming& timing, Picoseconds window,
                              Picoseconds window_offset) {
    const WindowModel w = window_model(model, timing, window, window_offset);
    return w.mean_n * w.a + w.dark + w.leak;
}

double expected_g2(const SourceModel& model, const ExperimentTiming& timing, Picoseconds window,
                   Picoseconds window_offset) {
    const WindowModel w = window_model(model, timing, window, window_offset);
    const double signal = w.mean_n * w.a;
    const double noise = w.dark + w.leak;
    const double singles = signal + noise;
    if (!(singles > 0.0)) throw DataError("model predicts no clicks in the window");
    // Photon pairs from the same trial, plus signal-noise and noise-noise
    // products; noise is Poisson and independent per detector.
    const double same_gate = w.pairs_n * w.a * w.a + 2.0 * signal * noise + noise * noise;
    return same_gate / (singles * singles);
}

double dark_rate_for_floor(SourceModel model, const ExperimentTiming& timing, Picoseconds window, double target_g2) {
    if (!(target_g2 > 0.0 && target_g2 < 1.0)) throw ValidationError("target g2 must lie in (0, 1)");
    model.p_double = 0.0;
    model.leakage_rate_hz = 0.0;
    model.dark_rate_hz = 0.0;
    const WindowModel w = window_model(model, timing, window, Picoseconds{0});
    const double signal = w.mean_n * w.a;
    if (!(signal > 0.0)) throw ValidationError("model has no signal in the window");
    // (2x + x^2) / (1 + x)^2 = target with x = dark / signal.
    const double x = 1.0 / std::sqrt(1.0 - target_g2) - 1.0;
    return x * signal / w.window_s;
}

double leakage_rate_for_g2(SourceModel model, const ExperimentTiming& timing, Picoseconds window, double target_g2) {
    if (!(target_g2 > 0.0 && target_g2 < 1.0)) throw ValidationError("target g2 must lie in (0, 1)");
    model.leakage_rate_hz = 0.0;
    const WindowModel w = window_model(model, timing, window, Picoseconds{0});
    if (!(w.leak_span_s > 0.0)) throw ValidationError("the g2 window does not overlap the excitation pulse");
    const double signal = w.mean_n * w.a;
    // g2 = 1 - K / (signal + noise)^2 with K = signal^2 - E[n(n-1)] a^2.
    const double k = signal * signal - w.pairs_n * w.a * w.a;
    if (!(k > 0.0)) throw ValidationError("source is not antibunched; leakage cannot set g2");
    const double noise = std::sqrt(k / (1.0 - target_g2)) - signal;
    const double leak = noise - w.dark;
    if (leak < 0.0) throw ValidationError("target g2 is below the floor set by dark counts and double emission");
    return 2.0 * leak / w.leak_span_s;
}

}  // namespace ipw
