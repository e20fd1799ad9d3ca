#pragma once

// Ideal digital transmitter: root-raised-cosine shaping of a periodic QAM
// frame, synthesized directly in the frequency domain, plus the
// polarization-multiplexing emulator.

#include "fscr/errors.hpp"
#include "fscr/qam.hpp"
#include "fscr/waveform.hpp"

#include <cmath>
#include <numbers>
#include <optional>

namespace fscr {

struct TxConfig {
    double symbol_rate_hz = 288e9;
    double rolloff = 0.05;
    double sim_rate_hz = 640e9;
    double pdme_delay_s = 65.7e-9;
    std::optional<double> tx_bandlimit_hz;

    void validate() const {
        require(symbol_rate_hz > 0, "TxConfig: symbol rate must be > 0");
        require(rolloff >= 0 && rolloff < 1, "TxConfig: rolloff must be in [0, 1)");
        require(sim_rate_hz >= symbol_rate_hz * (1 + rolloff),
                "TxConfig: sim rate below the shaped signal bandwidth");
        require(!tx_bandlimit_hz || *tx_bandlimit_hz > 0, "TxConfig: band limit must be > 0");
    }
};

/// Root-raised-cosine amplitude response (unit passband gain).
inline double rrc_response(double f_hz, double symbol_rate_hz, double rolloff) {
    const double af = std::abs(f_hz);
    const double f1 = (1 - rolloff) * symbol_rate_hz / 2;
    const double f2 = (1 + rolloff) * symbol_rate_hz / 2;
    if (af <= f1) return 1.0;
    if (af > f2) return 0.0;
    const double x = std::numbers::pi / (rolloff * symbol_rate_hz) * (af - f1);
    return std::sqrt(0.5 * (1 + std::cos(x)));
}

/// Number of samples in one frame period; throws unless it is an integer.
inline std::size_t samples_per_frame(std::size_t n_symbols, double symbol_rate_hz, double rate_hz) {
    const double m = static_cast<double>(n_symbols) * rate_hz / symbol_rate_hz;
    const double r = std::round(m);
    require(std::abs(m - r) < 1e-6 * std::max(1.0, m) && r >= 1,
            "frame period is not an integer number of samples at this rate");
    return static_cast<std::size_t>(r);
}

/// One period of the RRC-shaped periodic waveform of `symbols`, unit average power.
inline ComplexWaveform shape_symbols(std::span<const cplx> symbols, double symbol_rate_hz,
                                     double rolloff, double rate_hz) {
    const std::size_t n = symbols.size();
    const std::size_t m = samples_per_frame(n, symbol_rate_hz, rate_hz);
    const CVec a = fft(symbols);
    CVec spec(m, cplx{});
    const double c = static_cast<double>(m) / static_cast<double>(n);
    for (std::size_t k = 0; k < m; ++k) {
        const double f = bin_frequency(k, m, rate_hz);
        const double h = rrc_response(f, symbol_rate_hz, rolloff);
        if (h == 0.0) continue;
        // Bin k sits at integer multiple (k or k-m) of the frame frequency.
        const long long idx = 2 * k < m ? static_cast<long long>(k)
                                        : static_cast<long long>(k) - static_cast<long long>(m);
        const auto r = static_cast<std::size_t>(((idx % static_cast<long long>(n)) + n) % n);
        spec[k] = c * h * a[r];
    }
    CVec s = ifft(spec);
    const double p = energy(s) / static_cast<double>(m);
    require(p > 0, "shape_symbols: zero-power symbol sequence");
    const double g = 1.0 / std::sqrt(p);
    for (auto& v : s) v *= g;
    return ComplexWaveform(std::move(s), rate_hz, 0.0);
}

inline ComplexWaveform modulate(const QamFrame& frame, const TxConfig& cfg) {
    cfg.validate();
    const CVec sym = frame.symbols();
    ComplexWaveform w = shape_symbols(sym, cfg.symbol_rate_hz, cfg.rolloff, cfg.sim_rate_hz);
    if (cfg.tx_bandlimit_hz) {
        const double b = *cfg.tx_bandlimit_hz;
        w = apply_response(w, [b](double f) { return std::abs(f) <= b ? cplx(1) : cplx(0); });
    }
    return w;
}

/// Matched RRC filter and one-sample-per-symbol decimation of a periodic
/// waveform holding exactly `n_symbols` symbols, symbol 0 at the record start.
inline CVec matched_filter_sample(const ComplexWaveform& w, double symbol_rate_hz, double rolloff,
                                  std::size_t n_symbols) {
    const std::size_t m = w.size();
    require(samples_per_frame(n_symbols, symbol_rate_hz, w.sample_rate_hz()) == m,
            "matched_filter_sample: record is not one frame period");
    const CVec s = fft(w.samples());
    CVec folded(n_symbols, cplx{});
    for (std::size_t k = 0; k < m; ++k) {
        const double h = rrc_response(bin_frequency(k, m, w.sample_rate_hz()), symbol_rate_hz, rolloff);
        if (h == 0.0) continue;
        const long long idx = 2 * k < m ? static_cast<long long>(k)
                                        : static_cast<long long>(k) - static_cast<long long>(m);
        const auto r = static_cast<std::size_t>(((idx % static_cast<long long>(n_symbols)) + n_symbols) % n_symbols);
        folded[r] += h * s[k];
    }
    CVec a = ifft(folded);
    const double c = static_cast<double>(n_symbols) / static_cast<double>(m);
    for (auto& v : a) v *= c;
    return a;
}

/// pol_x = wave; pol_y = independently modulated frame2 delayed by the PDME delay.
inline DualPolWaveform polmux(const ComplexWaveform& wave, const QamFrame& frame2, const TxConfig& cfg) {
    ComplexWaveform y = fractional_delay(modulate(frame2, cfg), cfg.pdme_delay_s);
    require(y.size() == wave.size(), "polmux: frame lengths differ");
    return DualPolWaveform(wave, ComplexWaveform(y.samples(), wave.sample_rate_hz(), wave.start_time_s()));
}

/// Periodic extension of a waveform to n samples.
inline ComplexWaveform periodic_extend(const ComplexWaveform& w, std::size_t n) {
    CVec out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = w[i % w.size()];
    return w.with_samples(std::move(out));
}

}  // namespace fscr
