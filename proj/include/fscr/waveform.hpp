#pragma once

// Complex-baseband waveform types and the spectral primitives the whole
// pipeline is built on. Every spectral operation is circular over the record.

#include "fscr/errors.hpp"
#include "fscr/fft.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

namespace fscr {

/// Uniformly sampled complex baseband record, relative to the optical carrier.
class ComplexWaveform {
public:
    ComplexWaveform(CVec samples, double sample_rate_hz, double start_time_s = 0.0)
        : samples_(std::move(samples)), rate_(sample_rate_hz), start_(start_time_s) {
        require(rate_ > 0 && std::isfinite(rate_), "ComplexWaveform: sample rate must be > 0");
        require(std::isfinite(start_), "ComplexWaveform: start time must be finite");
        require(!samples_.empty(), "ComplexWaveform: empty record");
        for (const auto& s : samples_)
            require(std::isfinite(s.real()) && std::isfinite(s.imag()),
                    "ComplexWaveform: non-finite sample");
    }

    [[nodiscard]] const CVec& samples() const noexcept { return samples_; }
    [[nodiscard]] double sample_rate_hz() const noexcept { return rate_; }
    [[nodiscard]] double start_time_s() const noexcept { return start_; }
    [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
    [[nodiscard]] double duration_s() const noexcept { return static_cast<double>(size()) / rate_; }
    [[nodiscard]] double time_of(std::size_t n) const noexcept {
        return start_ + static_cast<double>(n) / rate_;
    }
    [[nodiscard]] const cplx& operator[](std::size_t n) const noexcept { return samples_[n]; }

    /// Same timing, new samples (validated).
    [[nodiscard]] ComplexWaveform with_samples(CVec s) const {
        return ComplexWaveform(std::move(s), rate_, start_);
    }

    friend bool operator==(const ComplexWaveform&, const ComplexWaveform&) = default;

private:
    CVec samples_;
    double rate_;
    double start_;
};

/// DFT of a waveform. Bin k sits at center_freq_hz + bin_frequency(k, n, rate).
struct Spectrum {
    CVec bins;
    double bin_spacing_hz;
    double center_freq_hz = 0.0;

    [[nodiscard]] double frequency(std::size_t k) const {
        const auto n = bins.size();
        return center_freq_hz + bin_frequency(k, n, bin_spacing_hz * static_cast<double>(n));
    }
};

/// Paired X/Y polarizations sharing rate and length.
class DualPolWaveform {
public:
    DualPolWaveform(ComplexWaveform x, ComplexWaveform y) : x_(std::move(x)), y_(std::move(y)) {
        require(x_.sample_rate_hz() == y_.sample_rate_hz() && x_.size() == y_.size(),
                "DualPolWaveform: polarizations differ in rate or length");
    }

    [[nodiscard]] const ComplexWaveform& pol_x() const noexcept { return x_; }
    [[nodiscard]] const ComplexWaveform& pol_y() const noexcept { return y_; }
    [[nodiscard]] const ComplexWaveform& pol(int p) const noexcept { return p == 0 ? x_ : y_; }
    [[nodiscard]] double sample_rate_hz() const noexcept { return x_.sample_rate_hz(); }
    [[nodiscard]] std::size_t size() const noexcept { return x_.size(); }

    template <class F>
    [[nodiscard]] DualPolWaveform map(F&& f) const {
        return DualPolWaveform(f(x_), f(y_));
    }

    friend bool operator==(const DualPolWaveform&, const DualPolWaveform&) = default;

private:
    ComplexWaveform x_;
    ComplexWaveform y_;
};

inline double energy(std::span<const cplx> s) {
    double e = 0;
    for (const auto& v : s) e += std::norm(v);
    return e;
}

inline double energy(const ComplexWaveform& w) { return energy(w.samples()); }

inline double mean_power(const ComplexWaveform& w) {
    return energy(w) / static_cast<double>(w.size());
}

inline Spectrum spectrum_of(const ComplexWaveform& w) {
    return Spectrum{fft(w.samples()), w.sample_rate_hz() / static_cast<double>(w.size()), 0.0};
}

/// Multiply by exp(j 2 pi df t), with t the absolute sample time.
inline ComplexWaveform frequency_shift(const ComplexWaveform& w, double df_hz) {
    if (df_hz == 0.0) return w;
    const double base_cycles = std::fmod(df_hz * w.start_time_s(), 1.0);
    const double cycles_per_sample = df_hz / w.sample_rate_hz();
    CVec out(w.size());
    for (std::size_t n = 0; n < w.size(); ++n) {
        const double cyc = base_cycles + std::fmod(cycles_per_sample * static_cast<double>(n), 1.0);
        const double ph = 2.0 * std::numbers::pi * cyc;
        out[n] = w[n] * cplx(std::cos(ph), std::sin(ph));
    }
    return w.with_samples(std::move(out));
}

/// Circular frequency-domain filtering by gain h(f), f in [-rate/2, rate/2).
template <class Response>
ComplexWaveform apply_response(const ComplexWaveform& w, const Response& h) {
    CVec spec = fft(w.samples());
    const auto n = spec.size();
    for (std::size_t k = 0; k < n; ++k) {
        const cplx g = h(bin_frequency(k, n, w.sample_rate_hz()));
        require(std::isfinite(g.real()) && std::isfinite(g.imag()),
                "apply_response: non-finite gain");
        spec[k] *= g;
    }
    return w.with_samples(ifft(spec));
}

/// Circular delay by linear spectral phase. Whole-sample delays are exact rotations.
inline ComplexWaveform fractional_delay(const ComplexWaveform& w, double tau_s) {
    const auto n = w.size();
    const double shift = tau_s * w.sample_rate_hz();
    const double whole = std::round(shift);
    if (std::abs(shift - whole) < 1e-9) {
        auto k = static_cast<long long>(whole) % static_cast<long long>(n);
        if (k < 0) k += static_cast<long long>(n);
        CVec out(w.samples());
        std::rotate(out.begin(), out.end() - k, out.end());
        return w.with_samples(std::move(out));
    }
    CVec spec = fft(w.samples());
    for (std::size_t k = 0; k < n; ++k) {
        const double ph = -2.0 * std::numbers::pi * bin_frequency(k, n, w.sample_rate_hz()) * tau_s;
        spec[k] *= cplx(std::cos(ph), std::sin(ph));
    }
    return w.with_samples(ifft(spec));
}

/// Band-limited (DFT zero-pad / truncate) rate conversion. Output length is
/// round(n * new_rate / rate); the record duration is preserved when that is exact.
inline ComplexWaveform resample(const ComplexWaveform& w, double new_rate_hz) {
    require(new_rate_hz > 0, "resample: new rate must be > 0");
    const auto n = w.size();
    const auto m = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * new_rate_hz / w.sample_rate_hz()));
    require(m >= 1, "resample: output would be empty");
    if (m == n) return ComplexWaveform(w.samples(), new_rate_hz, w.start_time_s());

    const CVec in = fft(w.samples());
    CVec out(m, cplx{});
    const std::size_t c = std::min(n, m);
    const std::size_t pos = (c + 1) / 2;  // bins 0..pos-1
    const std::size_t neg = c / 2;        // bins -1..-neg
    for (std::size_t k = 0; k < pos; ++k) out[k] = in[k];
    for (std::size_t k = 1; k <= neg; ++k) out[m - k] = in[n - k];
    if (c % 2 == 0) {
        // The shared Nyquist bin is ambiguous in sign; split it (up) or fold it (down).
        if (n < m) {
            const cplx half = 0.5 * in[n / 2];
            out[m - c / 2] = half;
            out[c / 2] = half;
        } else {
            out[m / 2] = in[n - m / 2] + in[m / 2];
        }
    }
    const double scale = static_cast<double>(m) / static_cast<double>(n);
    CVec t = ifft(out);
    for (auto& v : t) v *= scale;
    return ComplexWaveform(std::move(t), new_rate_hz, w.start_time_s());
}

/// Value reported by snr_between when the aligned error is exactly zero.
inline constexpr double kSnrSaturationDb = 99.0;

/// Least-squares complex scalar a minimizing |a*test - ref|^2.
inline cplx ls_scalar(std::span<const cplx> ref, std::span<const cplx> test) {
    cplx num{};
    double den = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        num += std::conj(test[i]) * ref[i];
        den += std::norm(test[i]);
    }
    return den > 0 ? num / den : cplx{};
}

/// Data-aided SNR: fit test = b*ref + n and return 10 log10(|b|^2 sum|ref|^2 / sum|n|^2),
/// saturating at kSnrSaturationDb. Fitting ref onto test instead would report 1 + SNR.
inline double snr_between(std::span<const cplx> ref, std::span<const cplx> test) {
    require(ref.size() == test.size(), "snr_between: length mismatch");
    require(ref.size() >= 100, "snr_between: need at least 100 symbols");
    const double e_ref = energy(ref);
    require(e_ref > 0, "snr_between: zero-energy reference");
    cplx num{};
    for (std::size_t i = 0; i < ref.size(); ++i) num += std::conj(ref[i]) * test[i];
    const cplx b = num / e_ref;
    const double sig = std::norm(b) * e_ref;
    double err = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) err += std::norm(test[i] - b * ref[i]);
    if (err <= sig * 1e-24) return kSnrSaturationDb;
    if (sig <= 0) return -kSnrSaturationDb;
    return std::clamp(10.0 * std::log10(sig / err), -kSnrSaturationDb, kSnrSaturationDb);
}

}  // namespace fscr
