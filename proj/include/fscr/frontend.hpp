#pragma once

// Receive hardware model: signal gate and tau-delayed replicator, the
// frequency-switching comb LO, the band-limited coherent front end and the
// ADC. A CW-LO path provides the conventional single-slice baseline.

#include "fscr/channel.hpp"
#include "fscr/errors.hpp"
#include "fscr/io.hpp"
#include "fscr/waveform.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>

namespace fscr {

struct FscrParams {
    double gate_period_s = 50e-6;  // 20 kHz
    double gate_duty = 0.49;
    double gate_rise_s = 100e-9;
    double tau_s = 25e-6;
    std::array<double, 2> lo_offsets_hz{-80e9, 80e9};
    double delayline_km = 5.0;
    double lo_linewidth_hz = 100e3;
    double lo_freq_offset_hz = 0.0;

    [[nodiscard]] double open_duration_s() const { return gate_duty * gate_period_s; }

    void validate() const {
        require(gate_period_s > 0, "FscrParams: gate period must be > 0");
        require(gate_duty > 0 && gate_duty < 1, "FscrParams: duty must be in (0, 1)");
        require(gate_rise_s >= 0 && gate_rise_s < open_duration_s(), "FscrParams: bad gate rise time");
        require(tau_s > open_duration_s(), "FscrParams: tau must exceed the gate opening");
        require(delayline_km >= 0, "FscrParams: delay line length must be >= 0");
        require(lo_linewidth_hz >= 0, "FscrParams: LO linewidth must be >= 0");
    }

    /// Every time constant multiplied by `factor` (duty and ratios unchanged).
    [[nodiscard]] FscrParams time_scaled(double factor) const {
        FscrParams q = *this;
        q.gate_period_s *= factor;
        q.gate_rise_s *= factor;
        q.tau_s *= factor;
        return q;
    }
};

/// Periodic gate transmission at time t: 1 over [open, open + duty*period),
/// raised-cosine edges of width gate_rise_s centered on both boundaries.
inline double gate_window(double t, const FscrParams& p, double open_start_s) {
    const double period = p.gate_period_s;
    const double open = p.open_duration_s();
    double u = std::fmod(t - open_start_s, period);
    if (u < 0) u += period;
    const double v = u < (open + period) / 2 ? u : u - period;
    const double r = p.gate_rise_s;
    if (r <= 0) return (v >= 0 && v < open) ? 1.0 : 0.0;
    auto rc = [](double x) { return 0.5 * (1 - std::cos(std::numbers::pi * x)); };
    if (v < -r / 2 || v > open + r / 2) return 0.0;
    if (v < r / 2) return rc((v + r / 2) / r);
    if (v > open - r / 2) return rc((open + r / 2 - v) / r);
    return 1.0;
}

inline ComplexWaveform gate(const ComplexWaveform& w, const FscrParams& p, double open_start_s) {
    CVec s(w.samples());
    for (std::size_t n = 0; n < s.size(); ++n) s[n] *= gate_window(w.time_of(n), p, open_start_s);
    return w.with_samples(std::move(s));
}

/// w + w delayed by tau (circular).
inline ComplexWaveform replicate_delayed(const ComplexWaveform& w, double tau_s) {
    require(std::abs(tau_s) < w.duration_s(), "replicate_delayed: tau exceeds the record");
    const ComplexWaveform d = fractional_delay(w, tau_s);
    CVec s(w.samples());
    for (std::size_t n = 0; n < s.size(); ++n) s[n] += d[n];
    return w.with_samples(std::move(s));
}

/// Time-domain multiplexer of the FSCR signal path: the replica travels
/// through a delay line of p.delayline_km fiber (dispersion from `fiber`).
inline ComplexWaveform replicate_delayed(const ComplexWaveform& w, const FscrParams& p,
                                         const ChannelParams& fiber) {
    require(p.open_duration_s() + p.tau_s <= w.duration_s() + 1e-15,
            "replicate_delayed: gate opening plus tau exceeds the record");
    const ComplexWaveform d = apply_cd(fractional_delay(w, p.tau_s), fiber, p.delayline_km, +1);
    CVec s(w.samples());
    for (std::size_t n = 0; n < s.size(); ++n) s[n] += d[n];
    return w.with_samples(std::move(s));
}

namespace detail {

inline ComplexWaveform laser_tone(std::size_t n, double rate_hz, double freq_hz,
                                  const std::vector<double>& phase) {
    CVec s(n);
    const double cps = freq_hz / rate_hz;
    for (std::size_t i = 0; i < n; ++i) {
        const double cyc = std::fmod(cps * static_cast<double>(i), 1.0);
        s[i] = std::polar(1.0, 2 * std::numbers::pi * cyc + phase[i]);
    }
    return ComplexWaveform(std::move(s), rate_hz, 0.0);
}

inline std::size_t record_samples(double duration_s, double rate_hz) {
    const auto n = static_cast<std::size_t>(std::llround(duration_s * rate_hz));
    require(n >= 1, "record duration shorter than one sample");
    return n;
}

}  // namespace detail

/// Frequency-switching LO: the gated line at lo_offsets[0], plus the gated line at
/// lo_offsets[1] delayed by tau. Both lines share one phase-noise process.
inline ComplexWaveform synth_fs_lo(const FscrParams& p, double duration_s, double sim_rate_hz,
                                   std::uint64_t seed, double open_start_s = 0.0) {
    require(sim_rate_hz > 2 * std::max(std::abs(p.lo_offsets_hz[0]), std::abs(p.lo_offsets_hz[1])),
            "synth_fs_lo: sim rate too low for the LO offsets");
    const std::size_t n = detail::record_samples(duration_s, sim_rate_hz);
    const auto phi = wiener_phase(n, p.lo_linewidth_hz, sim_rate_hz, seed);
    const auto lo0 = gate(detail::laser_tone(n, sim_rate_hz, p.lo_offsets_hz[0] + p.lo_freq_offset_hz, phi),
                          p, open_start_s);
    const auto lo1 = fractional_delay(
        gate(detail::laser_tone(n, sim_rate_hz, p.lo_offsets_hz[1] + p.lo_freq_offset_hz, phi), p,
             open_start_s),
        p.tau_s);
    CVec s(lo0.samples());
    for (std::size_t i = 0; i < n; ++i) s[i] += lo1[i];
    return lo0.with_samples(std::move(s));
}

inline ComplexWaveform synth_cw_lo(double duration_s, double sim_rate_hz, double linewidth_hz,
                                   double freq_offset_hz, std::uint64_t seed) {
    const std::size_t n = detail::record_samples(duration_s, sim_rate_hz);
    return detail::laser_tone(n, sim_rate_hz, freq_offset_hz, wiener_phase(n, linewidth_hz, sim_rate_hz, seed));
}

using FrequencyResponse = std::function<cplx(double)>;

/// Analog Butterworth low-pass (minimum phase), unit DC gain.
inline FrequencyResponse butterworth_response(int order, double f3db_hz) {
    require(order >= 1 && f3db_hz > 0, "butterworth_response: bad parameters");
    std::vector<cplx> poles;
    for (int k = 1; k <= order; ++k)
        poles.push_back(std::polar(1.0, std::numbers::pi * (2.0 * k + order - 1) / (2.0 * order)));
    auto eval = [poles](double f, double fc) {
        const cplx s(0.0, f / fc);
        cplx h(1.0);
        for (const auto& pk : poles) h /= (s - pk);
        return h;
    };
    const cplx h0 = eval(0.0, f3db_hz);
    return [eval, f3db_hz, h0](double f) { return eval(f, f3db_hz) / h0; };
}

inline FrequencyResponse flat_response() {
    return [](double) { return cplx(1.0); };
}

/// Coherent front end (hybrids + BPDs) followed by the DSO.
struct FrontEndModel {
    FrequencyResponse response = butterworth_response(4, 90e9);
    double adc_rate_hz = 256e9;
    double adc_bw_hz = 110e9;
    int adc_bits = 8;                    // 0: ideal
    std::array<double, 4> skew_s{};      // XI, XQ, YI, YQ

    void validate() const {
        require(static_cast<bool>(response), "FrontEndModel: missing response");
        require(std::abs(std::abs(response(0.0)) - 1.0) < 1e-9, "FrontEndModel: |response(0)| must be 1");
        require(adc_rate_hz > 0 && adc_bw_hz > 0 && adc_bw_hz <= adc_rate_hz,
                "FrontEndModel: bad ADC rate/bandwidth");
        require(adc_bits >= 0 && adc_bits <= 24, "FrontEndModel: bad ADC bit depth");
    }

    static FrontEndModel ideal(double adc_rate_hz, double adc_bw_hz) {
        FrontEndModel fe;
        fe.response = flat_response();
        fe.adc_rate_hz = adc_rate_hz;
        fe.adc_bw_hz = adc_bw_hz;
        fe.adc_bits = 0;
        return fe;
    }
};

enum class LoMode { CW, FS };

inline std::string to_string(LoMode m) { return m == LoMode::CW ? "CW" : "FS"; }

/// True gate timing, kept for grading only.
struct CaptureTruth {
    double lf_open_start_s = 0;
    double hf_open_start_s = 0;
    double tau_s = 0;
    double gate_period_s = 0;
    double open_duration_s = 0;
};

struct Capture {
    DualPolWaveform wave;
    LoMode mode = LoMode::CW;
    std::optional<CaptureTruth> truth;

    [[nodiscard]] Capture without_truth() const { return Capture{wave, mode, std::nullopt}; }
};

namespace detail {

inline ComplexWaveform skew_lanes(const ComplexWaveform& w, double skew_i, double skew_q) {
    if (skew_i == 0.0 && skew_q == 0.0) return w;
    CVec re(w.size()), im(w.size());
    for (std::size_t n = 0; n < w.size(); ++n) {
        re[n] = w[n].real();
        im[n] = w[n].imag();
    }
    const auto di = fractional_delay(w.with_samples(std::move(re)), skew_i);
    const auto dq = fractional_delay(w.with_samples(std::move(im)), skew_q);
    CVec s(w.size());
    for (std::size_t n = 0; n < w.size(); ++n) s[n] = cplx(di[n].real(), dq[n].real());
    return w.with_samples(std::move(s));
}

inline double quantize(double v, double step, long long levels) {
    auto idx = static_cast<long long>(std::floor(v / step));
    idx = std::clamp(idx, -levels / 2, levels / 2 - 1);
    return (static_cast<double>(idx) + 0.5) * step;
}

}  // namespace detail

/// Mix with the LO, filter by the FE and ADC responses, sample at the ADC
/// rate, apply lane skew, and quantize over +-4 sigma full scale.
inline Capture coherent_receive(const DualPolWaveform& sig, const ComplexWaveform& lo,
                                const FrontEndModel& fe, LoMode mode = LoMode::CW,
                                std::optional<CaptureTruth> truth = std::nullopt) {
    fe.validate();
    require(sig.sample_rate_hz() == lo.sample_rate_hz() && sig.size() == lo.size(),
            "coherent_receive: signal and LO differ in rate or length");
    const double bw = fe.adc_bw_hz;
    auto lane = [&](const ComplexWaveform& s, double skew_i, double skew_q) {
        CVec bb(s.size());
        for (std::size_t n = 0; n < s.size(); ++n) bb[n] = s[n] * std::conj(lo[n]);
        auto w = s.with_samples(std::move(bb));
        w = apply_response(w, [&](double f) {
            return std::abs(f) <= bw ? fe.response(f) : cplx(0.0);
        });
        w = resample(w, fe.adc_rate_hz);
        return detail::skew_lanes(w, skew_i, skew_q);
    };
    auto x = lane(sig.pol_x(), fe.skew_s[0], fe.skew_s[1]);
    auto y = lane(sig.pol_y(), fe.skew_s[2], fe.skew_s[3]);

    if (fe.adc_bits > 0) {
        const double sigma = std::sqrt((energy(x) + energy(y)) / (4.0 * static_cast<double>(x.size())));
        const long long levels = 1LL << fe.adc_bits;
        const double step = sigma > 0 ? 8.0 * sigma / static_cast<double>(levels) : 1.0;
        auto q = [&](const ComplexWaveform& w) {
            CVec s(w.samples());
            for (auto& v : s)
                v = cplx(detail::quantize(v.real(), step, levels), detail::quantize(v.imag(), step, levels));
            return w.with_samples(std::move(s));
        };
        x = q(x);
        y = q(y);
    }
    return Capture{DualPolWaveform(std::move(x), std::move(y)), mode, truth};
}

/// Whole FSCR receive path: gate the signal, add the delay-line replica, mix
/// with the frequency-switching LO, capture.
inline Capture fscr_receive(const DualPolWaveform& sig, const FscrParams& p, const FrontEndModel& fe,
                            const ChannelParams& fiber, std::uint64_t lo_seed, double open_start_s) {
    p.validate();
    const double dur = sig.pol_x().duration_s();
    require(2 * p.tau_s <= dur * (1 + 1e-12), "fscr_receive: record shorter than 2 tau");
    const auto path = [&](const ComplexWaveform& w) {
        return replicate_delayed(gate(w, p, open_start_s), p, fiber);
    };
    const DualPolWaveform s2 = sig.map(path);
    const ComplexWaveform lo = synth_fs_lo(p, dur, sig.sample_rate_hz(), lo_seed, open_start_s);
    CaptureTruth truth{open_start_s, open_start_s + p.tau_s, p.tau_s, p.gate_period_s, p.open_duration_s()};
    return coherent_receive(s2, lo, fe, LoMode::FS, truth);
}

/// Conventional reception: ungated signal, continuous-wave LO.
inline Capture cw_receive(const DualPolWaveform& sig, const FrontEndModel& fe, double lo_linewidth_hz,
                          double lo_freq_offset_hz, std::uint64_t lo_seed) {
    const ComplexWaveform lo = synth_cw_lo(sig.pol_x().duration_s(), sig.sample_rate_hz(), lo_linewidth_hz,
                                           lo_freq_offset_hz, lo_seed);
    return coherent_receive(sig, lo, fe, LoMode::CW);
}

/// Sidecar record describing a capture (written next to its FSCW file).
inline io::KeyValues capture_metadata(const Capture& c) {
    io::KeyValues kv;
    kv["mode"] = to_string(c.mode);
    kv["sample_rate_hz"] = io::format_double(c.wave.sample_rate_hz());
    kv["length"] = std::to_string(c.wave.size());
    if (c.truth) {
        kv["truth.lf_open_start_s"] = io::format_double(c.truth->lf_open_start_s);
        kv["truth.hf_open_start_s"] = io::format_double(c.truth->hf_open_start_s);
        kv["truth.tau_s"] = io::format_double(c.truth->tau_s);
        kv["truth.gate_period_s"] = io::format_double(c.truth->gate_period_s);
        kv["truth.open_duration_s"] = io::format_double(c.truth->open_duration_s);
    }
    return kv;
}

inline Capture capture_from(DualPolWaveform wave, const io::KeyValues& kv) {
    auto get = [&](const std::string& k) -> const std::string& {
        auto it = kv.find(k);
        if (it == kv.end()) throw FormatError("capture metadata: missing " + k);
        return it->second;
    };
    const auto& mode = get("mode");
    if (mode != "CW" && mode != "FS") throw FormatError("capture metadata: bad mode " + mode);
    Capture c{std::move(wave), mode == "CW" ? LoMode::CW : LoMode::FS, std::nullopt};
    if (kv.count("truth.tau_s")) {
        c.truth = CaptureTruth{io::parse_double(get("truth.lf_open_start_s")),
                               io::parse_double(get("truth.hf_open_start_s")),
                               io::parse_double(get("truth.tau_s")),
                               io::parse_double(get("truth.gate_period_s")),
                               io::parse_double(get("truth.open_duration_s"))};
    }
    return c;
}

}  // namespace fscr
