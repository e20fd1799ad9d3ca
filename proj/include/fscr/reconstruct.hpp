#pragma once

// Blind offline reconstruction of an FSCR capture: FE correction, burst
// extraction, delay-line dispersion compensation, and frequency stitching of
// the two slices into one wideband waveform. Nothing here reads
// Capture::truth.

#include "fscr/channel.hpp"
#include "fscr/errors.hpp"
#include "fscr/frontend.hpp"
#include "fscr/io.hpp"
#include "fscr/waveform.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

namespace fscr {

/// Largest gain fe_correct applies to any bin (+20 dB).
inline constexpr double kMaxCorrectionGain = 10.0;

/// Undo lane skew and divide by the FE response. Where |H| < 1/kMaxCorrectionGain
/// the inverse is clamped to kMaxCorrectionGain in magnitude.
inline DualPolWaveform fe_correct(const Capture& c, const FrontEndModel& fe) {
    require(static_cast<bool>(fe.response), "fe_correct: missing FE response");
    const auto n = c.wave.size();
    const double rate = c.wave.sample_rate_hz();
    std::vector<cplx> inv(n);
    std::size_t zeros = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const cplx h = fe.response(bin_frequency(k, n, rate));
        const double mag = std::abs(h);
        if (mag < 1e-6) ++zeros;
        if (mag * kMaxCorrectionGain >= 1.0)
            inv[k] = 1.0 / h;
        else
            inv[k] = mag > 0 ? kMaxCorrectionGain * std::conj(h) / mag : cplx{};
    }
    if (2 * zeros > n) throw InvalidArgument("fe_correct: FE response is zero over more than half the band");

    auto lane = [&](const ComplexWaveform& w, double skew_i, double skew_q) {
        const auto deskewed = detail::skew_lanes(w, -skew_i, -skew_q);
        CVec spec = fft(deskewed.samples());
        for (std::size_t k = 0; k < n; ++k) spec[k] *= inv[k];
        return w.with_samples(ifft(spec));
    };
    return DualPolWaveform(lane(c.wave.pol_x(), fe.skew_s[0], fe.skew_s[1]),
                           lane(c.wave.pol_y(), fe.skew_s[2], fe.skew_s[3]));
}

/// Two equal-length windows cut from one gate period.
struct BurstPair {
    DualPolWaveform lf;
    DualPolWaveform hf;
    double lf_start_s = 0;  // estimated gate opening of the LF burst
    double hf_start_s = 0;
    double alignment_confidence = 0;
};

struct BurstDetectConfig {
    double smooth_s = 0;          // envelope smoothing; 0: max(gate rise, 32 samples)
    double trim_margin_s = 0;     // extra trim inside each ramp; 0: 2% of the opening
    std::size_t length_quantum = 1;
    double min_confidence = 0.5;
};

namespace detail {

inline std::vector<double> circular_moving_average(const std::vector<double>& x, std::size_t len) {
    const std::size_t n = x.size();
    len = std::clamp<std::size_t>(len, 1, n);
    std::vector<double> out(n);
    double acc = 0;
    for (std::size_t i = 0; i < len; ++i) acc += x[i];
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < n; ++i) {
        out[(i + half) % n] = acc / static_cast<double>(len);
        acc += x[(i + len) % n] - x[i];
    }
    return out;
}

/// Threshold at half the burst level, where the burst level is the median of the
/// top `occupied` fraction of the envelope. Isodata splits the in-burst fluctuations
/// instead when the gaps are only a few percent of the record.
inline std::pair<double, std::pair<double, double>> burst_threshold(const std::vector<double>& v, double occupied) {
    std::vector<double> s(v);
    const double q = std::clamp(1.0 - 0.5 * occupied, 0.0, 1.0);
    const auto k = std::min(s.size() - 1, static_cast<std::size_t>(q * static_cast<double>(s.size())));
    std::nth_element(s.begin(), s.begin() + static_cast<long>(k), s.end());
    const double t = 0.5 * s[k];
    double s0 = 0, s1 = 0;
    std::size_t n0 = 0, n1 = 0;
    for (double e : v) {
        if (e < t) { s0 += e; ++n0; } else { s1 += e; ++n1; }
    }
    return {t, {n0 ? s0 / static_cast<double>(n0) : 0.0, n1 ? s1 / static_cast<double>(n1) : 0.0}};
}

inline double parabolic_peak(double ym, double y0, double yp) {
    const double den = ym - 2 * y0 + yp;
    if (den >= 0) return 0.0;
    return std::clamp(0.5 * (ym - yp) / den, -0.5, 0.5);
}

inline CVec window_of(const ComplexWaveform& w, std::size_t start, std::size_t len) {
    CVec s(len);
    for (std::size_t i = 0; i < len; ++i) s[i] = w[(start + i) % w.size()];
    return s;
}

}  // namespace detail

/// Delay d (seconds) of b relative to a from their cross-spectrum
/// C[k] = S_a[k] conj(S_b[k]) ~ |S|^2 exp(j 2 pi f d): coarse grid search of the
/// coherent sum, then weighted least squares on the residual phase slope.
inline double estimate_delay(std::span<const cplx> cross, std::span<const double> freqs, double max_delay_s) {
    require(cross.size() == freqs.size() && cross.size() >= 2, "estimate_delay: need >= 2 bins");
    const auto [fmin, fmax] = std::minmax_element(freqs.begin(), freqs.end());
    const double span = *fmax - *fmin;
    require(span > 0, "estimate_delay: zero bandwidth");
    const double step = 1.0 / (8.0 * span);
    const auto ngrid = static_cast<long long>(std::ceil(max_delay_s / step));
    double best_d = 0, best = -1;
    for (long long g = -ngrid; g <= ngrid; ++g) {
        const double d = static_cast<double>(g) * step;
        cplx acc{};
        for (std::size_t k = 0; k < cross.size(); ++k)
            acc += cross[k] * std::polar(1.0, -2 * std::numbers::pi * freqs[k] * d);
        if (std::abs(acc) > best) {
            best = std::abs(acc);
            best_d = d;
        }
    }
    // Residual phase after removing the coarse slope, referenced to its weighted mean.
    cplx mean{};
    std::vector<cplx> r(cross.size());
    for (std::size_t k = 0; k < cross.size(); ++k) {
        r[k] = cross[k] * std::polar(1.0, -2 * std::numbers::pi * freqs[k] * best_d);
        mean += r[k];
    }
    double sw = 0, sf = 0;
    std::vector<double> ph(cross.size()), w(cross.size());
    for (std::size_t k = 0; k < cross.size(); ++k) {
        ph[k] = std::arg(r[k] * std::conj(mean));
        w[k] = std::abs(r[k]);
        sw += w[k];
        sf += w[k] * freqs[k];
    }
    if (sw <= 0) return best_d;
    const double fbar = sf / sw;
    double num = 0, den = 0;
    for (std::size_t k = 0; k < cross.size(); ++k) {
        num += w[k] * (freqs[k] - fbar) * ph[k];
        den += w[k] * (freqs[k] - fbar) * (freqs[k] - fbar);
    }
    return den > 0 ? best_d + num / den / (2 * std::numbers::pi) : best_d;
}

/// Locate the LF and HF bursts of one gate period without side information.
inline BurstPair detect_bursts(const DualPolWaveform& w, const FscrParams& p,
                               const BurstDetectConfig& cfg = {}) {
    const std::size_t n = w.size();
    const double rate = w.sample_rate_hz();
    const double open_samples = p.open_duration_s() * rate;
    require(w.pol_x().duration_s() >= p.gate_period_s * (1 - 1e-9),
            "detect_bursts: record shorter than one gate period");

    std::vector<double> env(n);
    for (std::size_t i = 0; i < n; ++i) env[i] = std::norm(w.pol_x()[i]) + std::norm(w.pol_y()[i]);
    const double smooth_s = cfg.smooth_s > 0 ? cfg.smooth_s : std::max(p.gate_rise_s, 32.0 / rate);
    const auto smooth = detail::circular_moving_average(
        env, static_cast<std::size_t>(std::max(1.0, std::round(smooth_s * rate))));

    const double peak = *std::max_element(smooth.begin(), smooth.end());
    if (!(peak > 0)) throw BurstCountError("detect_bursts: no signal energy");
    const auto [thr, means] = detail::burst_threshold(smooth, std::min(1.0, 2 * open_samples / static_cast<double>(n)));
    if (means.second < 3.0 * means.first) throw BurstCountError("detect_bursts: envelope is not gated");

    // Runs above threshold, scanned circularly from a below-threshold sample.
    std::size_t origin = 0;
    while (origin < n && smooth[origin] >= thr) ++origin;
    if (origin == n) throw BurstCountError("detect_bursts: envelope never closes");
    std::vector<std::pair<std::size_t, std::size_t>> runs;  // (start, length)
    for (std::size_t i = 0; i < n;) {
        const std::size_t idx = (origin + i) % n;
        if (smooth[idx] >= thr) {
            std::size_t len = 0;
            while (i + len < n && smooth[(origin + i + len) % n] >= thr) ++len;
            if (static_cast<double>(len) >= 0.5 * open_samples) runs.emplace_back(idx, len);
            i += len;
        } else {
            ++i;
        }
    }
    if (runs.size() != 2)
        throw BurstCountError("detect_bursts: found " + std::to_string(runs.size()) + " bursts, expected 2");

    // Edge refinement: correlate the raw envelope with one gate opening (power
    // of gate^2 on both the signal and the LO, i.e. gate^4).
    CVec tmpl(n, cplx{}), envc(n);
    const double r = p.gate_rise_s;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        const double tt = t > p.gate_period_s - r ? t - static_cast<double>(n) / rate : t;
        double g = 0;
        if (tt >= -r && tt <= p.open_duration_s() + r) g = gate_window(tt, p, 0.0);
        tmpl[i] = std::pow(g, 4);
        envc[i] = env[i];
    }
    const CVec fe = fft(envc), ft = fft(tmpl);
    CVec prod(n);
    for (std::size_t k = 0; k < n; ++k) prod[k] = fe[k] * std::conj(ft[k]);
    const CVec xc = ifft(prod);  // xc[s] = sum env[m] tmpl[m - s]

    const auto search = static_cast<long long>(std::max(4.0, std::round((r + smooth_s) * rate)) + 8);
    auto refine = [&](std::size_t coarse) {
        long long best = 0;
        double bv = -1e300;
        for (long long d = -search; d <= search; ++d) {
            const auto idx = static_cast<std::size_t>(((static_cast<long long>(coarse) + d) % static_cast<long long>(n) + n) % n);
            if (xc[idx].real() > bv) {
                bv = xc[idx].real();
                best = d;
            }
        }
        const auto at = [&](long long d) {
            return xc[static_cast<std::size_t>(((static_cast<long long>(coarse) + d) % static_cast<long long>(n) + n) % n)].real();
        };
        const double frac = detail::parabolic_peak(at(best - 1), at(best), at(best + 1));
        double s = static_cast<double>(coarse) + static_cast<double>(best) + frac;
        s = std::fmod(s, static_cast<double>(n));
        return s < 0 ? s + static_cast<double>(n) : s;
    };
    double sa = refine(runs[0].first);
    double sb = refine(runs[1].first);

    const auto trim_ramp = static_cast<std::size_t>(std::ceil(r * rate / 2));
    const double margin_s = cfg.trim_margin_s > 0 ? cfg.trim_margin_s : 0.02 * p.open_duration_s();
    const auto margin = static_cast<std::size_t>(std::ceil(margin_s * rate));
    const double usable = open_samples - 2.0 * static_cast<double>(trim_ramp + margin);
    require(usable > 16, "detect_bursts: gate opening too short after trimming");
    std::size_t len = static_cast<std::size_t>(usable);
    len -= len % std::max<std::size_t>(1, cfg.length_quantum);
    require(len > 0, "detect_bursts: window shorter than the length quantum");

    // Which burst is LF: the LF slice was mixed with lo_offsets[0], so its
    // baseband content is displaced by -lo_offsets[0].
    auto centroid = [&](double start) {
        const auto s0 = static_cast<std::size_t>(std::llround(start)) + trim_ramp + margin;
        double num = 0, den = 0;
        for (int pol = 0; pol < 2; ++pol) {
            const CVec spec = fft(detail::window_of(w.pol(pol), s0, len));
            for (std::size_t k = 0; k < len; ++k) {
                const double pw = std::norm(spec[k]);
                num += pw * bin_frequency(k, len, rate);
                den += pw;
            }
        }
        return den > 0 ? num / den : 0.0;
    };
    const double expect = p.lo_offsets_hz[1] - p.lo_offsets_hz[0];  // (-lo0) - (-lo1)
    bool a_is_lf;
    if (expect != 0.0) {
        a_is_lf = (centroid(sa) - centroid(sb)) * expect > 0;
    } else {
        const double dab = std::fmod(sb - sa + static_cast<double>(n), static_cast<double>(n));
        const double dba = static_cast<double>(n) - dab;
        const double tau = p.tau_s * rate;
        a_is_lf = std::abs(dab - tau) <= std::abs(dba - tau);
    }
    if (!a_is_lf) std::swap(sa, sb);

    // Separation from the phase slope of the two slices over their common band.
    const std::size_t lf0 = static_cast<std::size_t>(std::llround(sa)) + trim_ramp + margin;
    double sep = std::fmod(sb - sa + static_cast<double>(n), static_cast<double>(n));
    {
        const auto coarse = static_cast<std::size_t>(std::llround(sep));
        std::vector<cplx> cross;
        std::vector<double> freqs;
        const double lo_band = std::max(p.lo_offsets_hz[0], p.lo_offsets_hz[1]) - 0.45 * rate;
        const double hi_band = std::min(p.lo_offsets_hz[0], p.lo_offsets_hz[1]) + 0.45 * rate;
        if (hi_band - lo_band > 0.02 * rate) {
            CVec acc(len, cplx{});
            std::vector<double> f(len);
            for (int pol = 0; pol < 2; ++pol) {
                auto a = ComplexWaveform(detail::window_of(w.pol(pol), lf0, len), rate);
                auto b = ComplexWaveform(detail::window_of(w.pol(pol), lf0 + coarse, len), rate);
                const CVec sa_ = fft(frequency_shift(a, p.lo_offsets_hz[0]).samples());
                const CVec sb_ = fft(frequency_shift(b, p.lo_offsets_hz[1]).samples());
                for (std::size_t k = 0; k < len; ++k) acc[k] += sa_[k] * std::conj(sb_[k]);
            }
            for (std::size_t k = 0; k < len; ++k) {
                f[k] = bin_frequency(k, len, rate);
                // The shifted spectra wrap; keep bins that are inside both slices.
                const double f_true = f[k];
                if (f_true > lo_band && f_true < hi_band) {
                    cross.push_back(acc[k]);
                    freqs.push_back(f_true);
                }
            }
            if (cross.size() >= 8) {
                const double d = estimate_delay(cross, freqs, 32.0 / rate);
                sep = static_cast<double>(coarse) + d * rate;
            }
        }
    }
    sb = std::fmod(sa + sep, static_cast<double>(n));

    // Confidence: correlation of the smoothed envelope with the two-burst model.
    double conf = 0;
    {
        std::vector<double> model(n);
        const double t0 = w.pol_x().start_time_s();
        for (std::size_t i = 0; i < n; ++i) {
            const double t = t0 + static_cast<double>(i) / rate;
            model[i] = std::max(std::pow(gate_window(t, p, t0 + sa / rate), 4),
                                std::pow(gate_window(t, p, t0 + sb / rate), 4));
        }
        const auto mm = std::accumulate(model.begin(), model.end(), 0.0) / static_cast<double>(n);
        const auto me = std::accumulate(smooth.begin(), smooth.end(), 0.0) / static_cast<double>(n);
        double sxy = 0, sxx = 0, syy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sxy += (model[i] - mm) * (smooth[i] - me);
            sxx += (model[i] - mm) * (model[i] - mm);
            syy += (smooth[i] - me) * (smooth[i] - me);
        }
        conf = (sxx > 0 && syy > 0) ? std::clamp(sxy / std::sqrt(sxx * syy), 0.0, 1.0) : 0.0;
    }
    if (conf < cfg.min_confidence)
        throw LowConfidence("detect_bursts: alignment confidence " + std::to_string(conf));

    const std::size_t hf0 = lf0 + static_cast<std::size_t>(std::llround(sep));
    auto cut = [&](std::size_t start) {
        const double ts = w.pol_x().time_of(start % n);
        return DualPolWaveform(ComplexWaveform(detail::window_of(w.pol_x(), start, len), rate, ts),
                               ComplexWaveform(detail::window_of(w.pol_y(), start, len), rate, ts));
    };
    return BurstPair{cut(lf0), cut(hf0), w.pol_x().start_time_s() + sa / rate,
                     w.pol_x().start_time_s() + sb / rate, conf};
}

/// Undo the delay-line dispersion carried by the HF burst. The burst was mixed
/// down from `hf_offset_hz`, so the dispersion is evaluated at f + hf_offset_hz.
inline DualPolWaveform delayline_cdc(const DualPolWaveform& hf, double delayline_km, const ChannelParams& params,
                                     double hf_offset_hz = 0.0) {
    require(delayline_km >= 0, "delayline_cdc: length must be >= 0");
    return hf.map([&](const ComplexWaveform& w) { return apply_cd(w, params, delayline_km, -1, hf_offset_hz); });
}

struct StitchConfig {
    std::array<double, 2> shifts_hz{-80e9, 80e9};
    double output_rate_hz = 0;      // 0: smallest integer multiple of the burst rate that holds both slices
    double crossfade_width_hz = 0;  // 0: half the overlap band
    double min_overlap_hz = 10e9;
    bool estimate_delay = true;
    bool per_bin_gain = false;      // diagnostics only
};

struct StitchReport {
    cplx gain{1.0, 0.0};
    std::array<double, 2> overlap_band_hz{0, 0};
    double residual_mismatch_db = 0;
    double crossfade_width_hz = 0;
    double residual_delay_s = 0;

    [[nodiscard]] io::KeyValues to_key_values() const {
        return {{"gain_re", io::format_double(gain.real())},
                {"gain_im", io::format_double(gain.imag())},
                {"overlap_lo_hz", io::format_double(overlap_band_hz[0])},
                {"overlap_hi_hz", io::format_double(overlap_band_hz[1])},
                {"residual_mismatch_db", io::format_double(residual_mismatch_db)},
                {"crossfade_width_hz", io::format_double(crossfade_width_hz)},
                {"residual_delay_s", io::format_double(residual_delay_s)}};
    }
};

namespace detail {

// Bins where both slices carry at least a quarter (-6 dB) of their own
// median power; returns the widest contiguous frequency interval.
inline std::array<double, 2> overlap_band(const std::vector<double>& psd_a, const std::vector<double>& psd_b,
                                          const std::vector<double>& freqs, std::array<double, 2> cover_a,
                                          std::array<double, 2> cover_b) {
    // Reference level: median over the occupied bins (>= -30 dB of the peak),
    // since a narrow signal leaves much of a slice's coverage empty.
    auto median_in = [&](const std::vector<double>& psd, std::array<double, 2> c) {
        double peak = 0;
        for (std::size_t k = 0; k < psd.size(); ++k)
            if (freqs[k] >= c[0] && freqs[k] <= c[1]) peak = std::max(peak, psd[k]);
        std::vector<double> v;
        for (std::size_t k = 0; k < psd.size(); ++k)
            if (freqs[k] >= c[0] && freqs[k] <= c[1] && psd[k] >= 1e-3 * peak) v.push_back(psd[k]);
        if (v.empty()) return 0.0;
        std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
        return v[v.size() / 2];
    };
    const double ma = median_in(psd_a, cover_a), mb = median_in(psd_b, cover_b);
    std::vector<std::size_t> order(freqs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto i, auto j) { return freqs[i] < freqs[j]; });
    double best_lo = 0, best_hi = 0, cur_lo = 0;
    bool in = false;
    double last_f = 0;
    for (auto k : order) {
        const double f = freqs[k];
        const bool ok = f >= std::max(cover_a[0], cover_b[0]) && f <= std::min(cover_a[1], cover_b[1]) &&
                        psd_a[k] >= 0.25 * ma && psd_b[k] >= 0.25 * mb && ma > 0 && mb > 0;
        if (ok && !in) {
            cur_lo = f;
            in = true;
        }
        if (!ok && in) {
            if (last_f - cur_lo > best_hi - best_lo) { best_lo = cur_lo; best_hi = last_f; }
            in = false;
        }
        last_f = f;
    }
    if (in && last_f - cur_lo > best_hi - best_lo) { best_lo = cur_lo; best_hi = last_f; }
    return {best_lo, best_hi};
}

inline std::vector<double> smoothed(const std::vector<double>& v, std::size_t len) {
    return circular_moving_average(v, len);
}

}  // namespace detail

/// Shift both slices to their place in the spectrum, align the HF slice in
/// delay and complex gain over the overlap band, and cross-fade them together.
inline std::pair<DualPolWaveform, StitchReport> stitch(const BurstPair& pair, const StitchConfig& cfg = {}) {
    require(pair.lf.size() == pair.hf.size() && pair.lf.sample_rate_hz() == pair.hf.sample_rate_hz(),
            "stitch: LF and HF bursts differ in rate or length");
    require(cfg.shifts_hz[0] <= cfg.shifts_hz[1], "stitch: shifts must be ordered LF then HF");
    const double in_rate = pair.lf.sample_rate_hz();
    const double half = in_rate / 2;
    double out_rate = cfg.output_rate_hz;
    if (out_rate <= 0) {
        const double need = 2 * (std::max(std::abs(cfg.shifts_hz[0]), std::abs(cfg.shifts_hz[1])) + half);
        out_rate = in_rate * std::ceil(need / in_rate - 1e-9);
    }

    // Both slices on a common time axis starting at zero.
    auto prep = [&](const ComplexWaveform& w, double shift) {
        ComplexWaveform base(w.samples(), in_rate, 0.0);
        return frequency_shift(resample(base, out_rate), shift);
    };
    std::array<CVec, 2> s_lf, s_hf;
    for (int pol = 0; pol < 2; ++pol) {
        s_lf[pol] = fft(prep(pair.lf.pol(pol), cfg.shifts_hz[0]).samples());
        s_hf[pol] = fft(prep(pair.hf.pol(pol), cfg.shifts_hz[1]).samples());
    }
    const std::size_t m = s_lf[0].size();
    std::vector<double> freqs(m), psd_lf(m), psd_hf(m);
    for (std::size_t k = 0; k < m; ++k) {
        freqs[k] = bin_frequency(k, m, out_rate);
        psd_lf[k] = std::norm(s_lf[0][k]) + std::norm(s_lf[1][k]);
        psd_hf[k] = std::norm(s_hf[0][k]) + std::norm(s_hf[1][k]);
    }
    const std::size_t smooth_bins = std::max<std::size_t>(1, m / 512);
    const auto band = detail::overlap_band(detail::smoothed(psd_lf, smooth_bins), detail::smoothed(psd_hf, smooth_bins),
                                           freqs, {cfg.shifts_hz[0] - half, cfg.shifts_hz[0] + half},
                                           {cfg.shifts_hz[1] - half, cfg.shifts_hz[1] + half});
    const double overlap = band[1] - band[0];
    if (overlap < cfg.min_overlap_hz)
        throw OverlapTooNarrow("stitch: usable overlap " + std::to_string(overlap / 1e9) + " GHz");

    // Estimate only inside a guard: window leakage blurs the slice edges.
    const double guard = std::max(0.1 * overlap, 2.0 * static_cast<double>(smooth_bins) * out_rate / static_cast<double>(m));
    std::vector<std::size_t> ov;
    for (std::size_t k = 0; k < m; ++k)
        if (freqs[k] >= band[0] + guard && freqs[k] <= band[1] - guard) ov.push_back(k);
    require(!ov.empty(), "stitch: no bins left inside the overlap guard");

    StitchReport rep;
    rep.overlap_band_hz = band;

    if (cfg.estimate_delay) {
        std::vector<cplx> cross(ov.size());
        std::vector<double> f(ov.size());
        for (std::size_t i = 0; i < ov.size(); ++i) {
            const auto k = ov[i];
            cross[i] = s_lf[0][k] * std::conj(s_hf[0][k]) + s_lf[1][k] * std::conj(s_hf[1][k]);
            f[i] = freqs[k];
        }
        rep.residual_delay_s = estimate_delay(cross, f, 4.0 / in_rate);
        for (int pol = 0; pol < 2; ++pol)
            for (std::size_t k = 0; k < m; ++k)
                s_hf[pol][k] *= std::polar(1.0, 2 * std::numbers::pi * freqs[k] * rep.residual_delay_s);
    }

    cplx num{};
    double den = 0;
    for (int pol = 0; pol < 2; ++pol)
        for (auto k : ov) {
            num += s_lf[pol][k] * std::conj(s_hf[pol][k]);
            den += std::norm(s_hf[pol][k]);
        }
    require(den > 0, "stitch: HF slice is empty over the overlap band");
    rep.gain = num / den;

    std::vector<cplx> gains(m, rep.gain);
    if (cfg.per_bin_gain) {
        std::vector<double> nr(m, 0), ni(m, 0), dd(m, 0);
        for (auto k : ov)
            for (int pol = 0; pol < 2; ++pol) {
                const cplx c = s_lf[pol][k] * std::conj(s_hf[pol][k]);
                nr[k] += c.real();
                ni[k] += c.imag();
                dd[k] += std::norm(s_hf[pol][k]);
            }
        const auto w = std::max<std::size_t>(1, ov.size() / 32);
        const auto snr = detail::smoothed(nr, w), sni = detail::smoothed(ni, w), sd = detail::smoothed(dd, w);
        const auto lo_k = ov.front(), hi_k = ov.back();
        for (std::size_t k = 0; k < m; ++k) {
            std::size_t src = k;
            if (freqs[k] < band[0]) src = lo_k;
            if (freqs[k] > band[1]) src = hi_k;
            if (sd[src] > 0) gains[k] = cplx(snr[src], sni[src]) / sd[src];
        }
    }

    double mis_num = 0, mis_den = 0;
    for (int pol = 0; pol < 2; ++pol)
        for (auto k : ov) {
            mis_num += std::norm(s_lf[pol][k] - gains[k] * s_hf[pol][k]);
            mis_den += std::norm(s_lf[pol][k]);
        }
    rep.residual_mismatch_db = mis_den > 0 && mis_num > 0 ? 10 * std::log10(mis_num / mis_den) : -300.0;

    const double center = 0.5 * (band[0] + band[1]);
    const double width = cfg.crossfade_width_hz > 0 ? std::min(cfg.crossfade_width_hz, overlap) : overlap / 2;
    rep.crossfade_width_hz = width;
    auto weight_lf = [&](double f) {
        const double a = center - width / 2;
        if (f <= a) return 1.0;
        if (f >= a + width) return 0.0;
        return 0.5 * (1 + std::cos(std::numbers::pi * (f - a) / width));
    };

    std::array<ComplexWaveform, 2> outs{ComplexWaveform(CVec(1), 1.0), ComplexWaveform(CVec(1), 1.0)};
    for (int pol = 0; pol < 2; ++pol) {
        CVec spec(m);
        for (std::size_t k = 0; k < m; ++k) {
            const double wl = weight_lf(freqs[k]);
            spec[k] = wl * s_lf[pol][k] + (1 - wl) * gains[k] * s_hf[pol][k];
        }
        outs[pol] = ComplexWaveform(ifft(spec), out_rate, pair.lf.pol_x().start_time_s());
    }
    return {DualPolWaveform(std::move(outs[0]), std::move(outs[1])), rep};
}

}  // namespace fscr
