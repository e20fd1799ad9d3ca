#pragma once

// Linear fiber and laser impairments. Fixed order when composed by the
// runner: CD -> phase noise -> (frequency offset, in the LO) -> AWGN.

#include "fscr/errors.hpp"
#include "fscr/waveform.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

namespace fscr {

inline constexpr double kSpeedOfLight = 299'792'458.0;

struct ChannelParams {
    double dispersion_ps_nm_km = 17.0;
    double length_km = 0.0;
    double carrier_wavelength_nm = 1550.12;  // f_c = 193.4 THz
    std::optional<double> snr_db;
    double tx_linewidth_hz = 100e3;
    double lo_linewidth_hz = 100e3;
    double freq_offset_hz = 0.0;
    double pol_rotation_rad = 0.0;

    void validate() const {
        require(length_km >= 0, "ChannelParams: length must be >= 0");
        require(tx_linewidth_hz >= 0 && lo_linewidth_hz >= 0, "ChannelParams: linewidths must be >= 0");
        require(carrier_wavelength_nm > 0, "ChannelParams: wavelength must be > 0");
        require(!snr_db || !std::isnan(*snr_db), "ChannelParams: snr must not be NaN");
    }
};

/// lambda^2 D L / c in s^2: group delay per Hz of baseband frequency.
inline double dispersion_slope_s2(const ChannelParams& p, double length_km) {
    const double lambda = p.carrier_wavelength_nm * 1e-9;
    const double d = p.dispersion_ps_nm_km * 1e-6;  // ps/(nm km) -> s/m^2
    return lambda * lambda * d * (length_km * 1e3) / kSpeedOfLight;
}

/// All-pass quadratic spectral phase exp(sign j pi lambda^2 D L f^2 / c) over `length_km`.
/// `center_hz` is the optical offset of the waveform's baseband (f -> f + center).
inline ComplexWaveform apply_cd(const ComplexWaveform& w, const ChannelParams& p, double length_km,
                                int sign, double center_hz = 0.0) {
    const double k = std::numbers::pi * dispersion_slope_s2(p, length_km) * (sign >= 0 ? 1.0 : -1.0);
    if (k == 0.0) return w;
    return apply_response(w, [k, center_hz](double f) {
        const double fo = f + center_hz;
        const double ph = k * fo * fo;
        return cplx(std::cos(ph), std::sin(ph));
    });
}

inline DualPolWaveform apply_cd(const DualPolWaveform& w, const ChannelParams& p, int sign) {
    return w.map([&](const ComplexWaveform& c) { return apply_cd(c, p, p.length_km, sign); });
}

/// Circular complex Gaussian noise per polarization so that the in-band SNR over
/// `signal_bw_hz` equals snr_db. +infinity leaves the waveform untouched.
inline DualPolWaveform add_awgn(const DualPolWaveform& w, double snr_db, double signal_bw_hz,
                                std::uint64_t seed) {
    require(!std::isnan(snr_db), "add_awgn: snr must not be NaN");
    require(signal_bw_hz > 0 && signal_bw_hz <= w.sample_rate_hz(),
            "add_awgn: signal bandwidth must be in (0, sample rate]");
    if (std::isinf(snr_db) && snr_db > 0) return w;
    std::mt19937_64 rng(seed);
    auto noisy = [&](const ComplexWaveform& c) {
        const double p = mean_power(c);
        const double var = p * c.sample_rate_hz() / (signal_bw_hz * std::pow(10.0, snr_db / 10));
        std::normal_distribution<double> g(0.0, std::sqrt(var / 2));
        CVec s(c.samples());
        for (auto& v : s) {
            const double re = g(rng);
            const double im = g(rng);
            v += cplx(re, im);
        }
        return c.with_samples(std::move(s));
    };
    auto x = noisy(w.pol_x());
    auto y = noisy(w.pol_y());
    return DualPolWaveform(std::move(x), std::move(y));
}

/// Wiener phase trajectory starting at zero, increment variance 2 pi linewidth / rate.
inline std::vector<double> wiener_phase(std::size_t n, double linewidth_hz, double rate_hz,
                                        std::uint64_t seed) {
    require(linewidth_hz >= 0, "wiener_phase: linewidth must be >= 0");
    std::vector<double> phi(n, 0.0);
    if (linewidth_hz == 0.0) return phi;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, std::sqrt(2 * std::numbers::pi * linewidth_hz / rate_hz));
    for (std::size_t i = 1; i < n; ++i) phi[i] = phi[i - 1] + g(rng);
    return phi;
}

inline ComplexWaveform add_phase_noise(const ComplexWaveform& w, double linewidth_hz, std::uint64_t seed) {
    if (linewidth_hz == 0.0) return w;
    const auto phi = wiener_phase(w.size(), linewidth_hz, w.sample_rate_hz(), seed);
    CVec s(w.samples());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= std::polar(1.0, phi[i]);
    return w.with_samples(std::move(s));
}

/// Unitary polarization rotation [cos -sin; sin cos].
inline DualPolWaveform rotate_polarization(const DualPolWaveform& w, double angle_rad) {
    if (angle_rad == 0.0) return w;
    const double c = std::cos(angle_rad), s = std::sin(angle_rad);
    CVec x(w.size()), y(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        x[i] = c * w.pol_x()[i] - s * w.pol_y()[i];
        y[i] = s * w.pol_x()[i] + c * w.pol_y()[i];
    }
    return DualPolWaveform(w.pol_x().with_samples(std::move(x)), w.pol_y().with_samples(std::move(y)));
}

}  // namespace fscr
