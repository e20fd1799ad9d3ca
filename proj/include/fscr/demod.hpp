#pragma once

// Demodulation: data-aided frame synchronisation, a frequency-domain 2x2
// block-LMS butterfly with pilot-driven phase tracking, the pilot DPLL, and
// SNR/BER/FEC metrics.

#include "fscr/errors.hpp"
#include "fscr/io.hpp"
#include "fscr/qam.hpp"
#include "fscr/tx.hpp"
#include "fscr/waveform.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fscr {

struct EqualizerConfig {
    std::size_t n_taps = 64;          // per filter, at 2 samples/symbol
    std::size_t block_size = 32;      // output symbols per block update
    double step_size = 1.0 / 64;      // decision-directed step, halved after the first pass
    double train_step_size = 1.0 / 8; // step while the training prefix is known
    double train_fraction = 0.05;     // of the frame, at the start of every pass
    int samples_per_symbol = 2;
    int passes = 2;
    double rolloff = 0.05;            // pulse shape of the synchronisation reference
    double loop_bw = 1e-3;            // phase loop bandwidth, fraction of the symbol rate
    double converge_mse = 0.05;       // tail error power (unit-power symbols) for `converged`
    std::size_t edge_guard = 0;       // symbols skipped at both burst edges; 0: 2 * n_taps

    void validate() const {
        require(n_taps >= 1, "EqualizerConfig: n_taps must be >= 1");
        require(block_size >= 1, "EqualizerConfig: block size must be >= 1");
        require(step_size > 0 && step_size < 1, "EqualizerConfig: step size must be in (0, 1)");
        require(train_step_size > 0 && train_step_size < 1, "EqualizerConfig: training step must be in (0, 1)");
        require(train_fraction > 0 && train_fraction < 1, "EqualizerConfig: train fraction must be in (0, 1)");
        require(samples_per_symbol == 2, "EqualizerConfig: only 2 samples/symbol is supported");
        require(passes >= 1, "EqualizerConfig: passes must be >= 1");
        require(loop_bw > 0 && loop_bw < 0.25, "EqualizerConfig: loop bandwidth must be in (0, 0.25)");
    }
};

// ---------------------------------------------------------------------------
// Second-order phase loop

/// Proportional/integral gains of a second-order loop (damping 1/sqrt(2)) with
/// noise bandwidth `bw_per_update` times the update rate.
inline std::pair<double, double> loop_gains(double bw_per_update) {
    const double zeta = std::numbers::sqrt2 / 2;
    const double b = std::min(bw_per_update, 0.25);
    const double wn = 2 * b / (zeta + 1 / (4 * zeta));
    const double d = 1 + 2 * zeta * wn + wn * wn;
    return {4 * zeta * wn / d, 4 * wn * wn / d};
}

inline double wrap_phase(double x) {
    return std::remainder(x, 2 * std::numbers::pi);
}

class PhaseLoop {
public:
    explicit PhaseLoop(double bw_per_symbol) : bw_(bw_per_symbol) {}

    void reset(double theta, double omega = 0.0) {
        theta_ = theta;
        omega_ = omega;
        since_ = 0;
    }
    /// Advance one symbol; returns the phase to use for that symbol.
    double advance() {
        theta_ += omega_;
        ++since_;
        return theta_;
    }
    /// Correct with a measured phase error at the current symbol.
    void update(double err) {
        const double gap = static_cast<double>(std::max<std::size_t>(since_, 1));
        const auto [k1, k2] = loop_gains(bw_ * gap);
        theta_ += k1 * err;
        omega_ += k2 * err / gap;
        since_ = 0;
    }
    [[nodiscard]] double theta() const { return theta_; }
    [[nodiscard]] double omega() const { return omega_; }

private:
    double bw_;
    double theta_ = 0;
    double omega_ = 0;
    std::size_t since_ = 0;
};

/// Root-raised-cosine impulse response at t symbols (unit value scale: peak 1 - b + 4b/pi).
inline double rrc_impulse(double t, double rolloff) {
    const double b = rolloff;
    const double pi = std::numbers::pi;
    if (t == 0.0) return 1 - b + 4 * b / pi;
    if (b > 0 && std::abs(std::abs(t) - 1 / (4 * b)) < 1e-12)
        return b / std::numbers::sqrt2 * ((1 + 2 / pi) * std::sin(pi / (4 * b)) + (1 - 2 / pi) * std::cos(pi / (4 * b)));
    const double x = 4 * b * t;
    return (std::sin(pi * t * (1 - b)) + x * std::cos(pi * t * (1 + b))) / (pi * t * (1 - x * x));
}

// ---------------------------------------------------------------------------
// Frame synchronisation

/// Sample lag (at 2 samples/symbol) of the periodic reference of `frame` in `rx`:
/// rx[n] ~ ref[(n - lag) mod 2N], found from non-coherently combined chunked
/// circular correlations over both received polarizations.
inline std::size_t frame_lag(const DualPolWaveform& rx, const QamFrame& frame, double rolloff) {
    const std::size_t n2 = 2 * frame.total_symbols;
    require(rx.size() >= n2, "frame_lag: record shorter than one frame");
    const CVec sym = frame.symbols();
    const ComplexWaveform ref = shape_symbols(sym, 1.0, rolloff, 2.0);
    CVec rf = fft(ref.samples());
    for (auto& v : rf) v = std::conj(v);

    const std::size_t chunk = std::max<std::size_t>(256, n2 / 8);
    const std::size_t span = std::min(rx.size(), 2 * n2);
    std::vector<double> score(n2, 0.0);
    for (int q = 0; q < 2; ++q) {
        for (std::size_t c0 = 0; c0 + chunk <= span; c0 += chunk) {
            CVec a(n2, cplx{});
            for (std::size_t n = c0; n < c0 + chunk; ++n) a[n % n2] += rx.pol(q)[n];
            CVec af = fft(a);
            for (std::size_t k = 0; k < n2; ++k) af[k] *= rf[k];
            const CVec c = ifft(af);
            for (std::size_t k = 0; k < n2; ++k) score[k] += std::norm(c[k]);
        }
    }
    return static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
}

// ---------------------------------------------------------------------------
// Adaptive equalizer

/// One equalized polarization: N consecutive raw (not phase-corrected) outputs;
/// element i carries frame symbol (first_frame_index + i) mod N.
struct EqualizedPol {
    CVec symbols;
    std::size_t first_frame_index = 0;
    std::vector<double> loop_phase;  // the equalizer's own phase estimate per output
};

struct AeqResult {
    std::array<EqualizedPol, 2> pols;
    bool converged = false;
    double tail_mse = 0;
};

/// Pilot positions (stream indices) and values for an equalized stream.
struct PilotTrack {
    std::vector<std::size_t> positions;
    CVec values;
};

inline PilotTrack pilot_track(const QamFrame& frame, std::size_t first_frame_index, std::size_t n) {
    PilotTrack t;
    const CVec sym = frame.symbols();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = (first_frame_index + i) % frame.total_symbols;
        if (frame.is_pilot(k)) {
            t.positions.push_back(i);
            t.values.push_back(sym[k]);
        }
    }
    return t;
}

/// Reorder a stream that starts at `first_frame_index` into frame order.
inline CVec to_frame_order(std::span<const cplx> stream, std::size_t first_frame_index, std::size_t n) {
    require(stream.size() == n, "to_frame_order: stream must hold exactly one frame");
    CVec out(n);
    for (std::size_t i = 0; i < n; ++i) out[(first_frame_index + i) % n] = stream[i];
    return out;
}

/// 2x2 frequency-domain block-LMS butterfly. Training-aided over the first
/// train_fraction of symbols of each pass, decision-directed afterwards; pilots
/// are always data-aided and drive a per-output phase loop.
inline AeqResult aeq_equalize(const DualPolWaveform& rx, const QamFrame& frame_x, const QamFrame& frame_y,
                              const EqualizerConfig& cfg) {
    cfg.validate();
    require(frame_x.total_symbols == frame_y.total_symbols && frame_x.order == frame_y.order,
            "aeq_equalize: frames must match in length and order");
    const std::size_t nsym = frame_x.total_symbols;
    const std::size_t T = cfg.n_taps;
    const std::size_t B = cfg.block_size;
    const std::size_t S = rx.size();
    const int order = frame_x.order;
    std::size_t F = 1;
    while (F < T + 2 * B) F <<= 1;

    const std::array<const QamFrame*, 2> frames{&frame_x, &frame_y};
    const std::array<CVec, 2> ref{frame_x.symbols(), frame_y.symbols()};

    // Alignment of each output row to its frame.
    std::array<long long, 2> center{}, lag{};
    for (int p = 0; p < 2; ++p) {
        lag[p] = static_cast<long long>(frame_lag(rx, *frames[p], cfg.rolloff));
        const auto half = static_cast<long long>(T / 2);
        center[p] = half - ((half + lag[p]) & 1);
    }
    const auto n2 = static_cast<long long>(2 * nsym);
    auto frame_index = [&](int p, std::size_t m) {
        long long v = 2 * static_cast<long long>(m) + center[p] - lag[p];
        v = ((v % n2) + n2) % n2;
        return static_cast<std::size_t>(v / 2);
    };

    if (S < T + 2) throw InvalidArgument("aeq_equalize: record shorter than the filter");
    const std::size_t m_total = (S - T) / 2 + 1;
    const std::size_t guard = cfg.edge_guard ? cfg.edge_guard : 2 * T;
    require(m_total > 2 * guard + nsym, "aeq_equalize: burst too short to hold one frame plus guards");
    const std::size_t m_begin = guard, m_end = m_total - guard;
    const std::size_t n_train = std::max<std::size_t>(
        B, static_cast<std::size_t>(std::round(cfg.train_fraction * static_cast<double>(nsym))));
    const std::size_t m_out0 = m_begin + (m_end - m_begin - nsym) / 2;

    double pin = 0;
    for (int q = 0; q < 2; ++q) pin += mean_power(rx.pol(q));
    pin /= 2;
    require(pin > 0, "aeq_equalize: zero input power");

    // taps[p][q][k]
    std::array<std::array<CVec, 2>, 2> taps;
    for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q) taps[p][q] = CVec(T, cplx{});
    // Diagonal filters start as the RRC matched filter; the gain is fixed on the first block.
    for (int p = 0; p < 2; ++p)
        for (std::size_t k = 0; k < T; ++k)
            taps[p][p][k] = rrc_impulse((static_cast<double>(k) - static_cast<double>(center[p])) / 2, cfg.rolloff);

    std::array<PhaseLoop, 2> loops{PhaseLoop(cfg.loop_bw), PhaseLoop(cfg.loop_bw)};
    AeqResult res;
    for (int p = 0; p < 2; ++p) {
        res.pols[p].symbols.assign(nsym, cplx{});
        res.pols[p].loop_phase.assign(nsym, 0.0);
        res.pols[p].first_frame_index = frame_index(p, m_out0);
    }

    double tail_err = 0;
    std::size_t tail_count = 0;
    const std::size_t tail_from = m_end - (m_end - m_begin) / 10;

    for (int pass = 0; pass < cfg.passes; ++pass) {
        const bool last = pass + 1 == cfg.passes;
        const double dd_step = pass == 0 ? cfg.step_size : cfg.step_size / 2;
        bool phase_init = false;
        for (std::size_t m0 = m_begin; m0 < m_end; m0 += B) {
            const std::size_t nb = std::min(B, m_end - m0);
            std::array<CVec, 2> xf;
            for (int q = 0; q < 2; ++q) {
                CVec x(F, cplx{});
                for (std::size_t i = 0; i < F && 2 * m0 + i < S; ++i) x[i] = rx.pol(q)[2 * m0 + i];
                xf[q] = fft(x);
            }
            std::array<CVec, 2> y;
            for (int p = 0; p < 2; ++p) {
                CVec acc(F, cplx{});
                for (int q = 0; q < 2; ++q) {
                    CVec g(F, cplx{});
                    for (std::size_t k = 0; k < T; ++k) g[T - 1 - k] = taps[p][q][k];
                    const CVec gf = fft(g);
                    for (std::size_t k = 0; k < F; ++k) acc[k] += gf[k] * xf[q][k];
                }
                const CVec full = ifft(acc);
                y[p].resize(nb);
                for (std::size_t i = 0; i < nb; ++i) y[p][i] = full[T - 1 + 2 * i];
            }

            const bool training = m0 < m_begin + n_train;
            if (!phase_init) {
                // Initial carrier phase (and, on the first pass, filter gain) from
                // the first block of known symbols.
                for (int p = 0; p < 2; ++p) {
                    cplx c{};
                    double e = 0;
                    for (std::size_t i = 0; i < nb; ++i) {
                        c += y[p][i] * std::conj(ref[p][frame_index(p, m0 + i)]);
                        e += std::norm(y[p][i]);
                    }
                    if (pass == 0 && std::abs(c) > 0) {
                        const double g = std::abs(c) / e;
                        for (auto& row : taps[p])
                            for (auto& h : row) h *= g;
                        for (auto& v : y[p]) v *= g;
                    }
                    loops[p].reset(std::arg(c), loops[p].omega());
                }
                phase_init = true;
            }

            std::array<CVec, 2> err;
            for (int p = 0; p < 2; ++p) {
                err[p].assign(nb, cplx{});
                for (std::size_t i = 0; i < nb; ++i) {
                    const std::size_t m = m0 + i;
                    const std::size_t k = frame_index(p, m);
                    const double th = loops[p].advance();
                    const cplx rot = std::polar(1.0, th);
                    const cplx z = y[p][i] * std::conj(rot);
                    const bool known = training || frames[p]->is_pilot(k);
                    const cplx d = known ? ref[p][k] : qam_slice(order, z);
                    if (known) loops[p].update(wrap_phase(std::arg(z * std::conj(d))));
                    err[p][i] = d * rot - y[p][i];
                    if (last && m >= m_out0 && m < m_out0 + nsym) {
                        res.pols[p].symbols[m - m_out0] = y[p][i];
                        res.pols[p].loop_phase[m - m_out0] = th;
                    }
                    if (last && m >= tail_from) {
                        tail_err += std::norm(err[p][i]);
                        ++tail_count;
                    }
                }
            }

            const double mu = (training && pass == 0 ? cfg.train_step_size : dd_step) /
                              (static_cast<double>(nb) * pin);
            for (int p = 0; p < 2; ++p) {
                CVec e(F, cplx{});
                for (std::size_t i = 0; i < nb; ++i) e[2 * i] = err[p][i];
                CVec ef = fft(e);
                for (int q = 0; q < 2; ++q) {
                    CVec prod(F);
                    for (std::size_t k = 0; k < F; ++k) prod[k] = xf[q][k] * std::conj(ef[k]);
                    const CVec r = ifft(prod);  // r[k] = sum_n x[n+k] conj(e[n])
                    for (std::size_t k = 0; k < T; ++k) taps[p][q][k] += mu * std::conj(r[k]);
                }
            }
        }
    }
    res.tail_mse = tail_count ? tail_err / static_cast<double>(tail_count) : 0.0;
    res.converged = res.tail_mse < cfg.converge_mse;
    return res;
}

// ---------------------------------------------------------------------------
// Pilot DPLL

struct DpllResult {
    CVec symbols;
    bool cycle_slip_suspected = false;
};

/// Second-order loop driven by pilot phase errors, run forward and backward
/// and averaged at the pilots; the phase is linearly interpolated across the
/// payload between pilots.
inline DpllResult dpll_recover(std::span<const cplx> symbols, const PilotTrack& pilots, double loop_bw) {
    require(pilots.positions.size() == pilots.values.size(), "dpll_recover: malformed pilot track");
    require(loop_bw > 0 && loop_bw < 0.25, "dpll_recover: loop bandwidth must be in (0, 0.25)");
    DpllResult out;
    out.symbols.assign(symbols.begin(), symbols.end());
    const std::size_t np = pilots.positions.size();
    if (np == 0) return out;

    std::vector<double> meas(np);
    for (std::size_t i = 0; i < np; ++i)
        meas[i] = std::arg(symbols[pilots.positions[i]] * std::conj(pilots.values[i]));

    auto run = [&](bool forward) {
        std::vector<double> th(np);
        PhaseLoop loop(loop_bw);
        const std::size_t first = forward ? 0 : np - 1;
        double omega0 = 0;
        if (np >= 2) {
            const std::size_t second = forward ? 1 : np - 2;
            const double gap = std::abs(static_cast<double>(pilots.positions[second]) -
                                        static_cast<double>(pilots.positions[first]));
            omega0 = wrap_phase(meas[second] - meas[first]) / gap;
        }
        loop.reset(meas[first], omega0);
        th[first] = meas[first];
        for (std::size_t j = 1; j < np; ++j) {
            const std::size_t i = forward ? j : np - 1 - j;
            const std::size_t prev = forward ? i - 1 : i + 1;
            const auto gap = static_cast<std::size_t>(std::abs(static_cast<long long>(pilots.positions[i]) -
                                                               static_cast<long long>(pilots.positions[prev])));
            for (std::size_t g = 0; g < gap; ++g) loop.advance();
            const double e = wrap_phase(meas[i] - loop.theta());
            if (std::abs(e) > std::numbers::pi / 2) out.cycle_slip_suspected = true;
            loop.update(e);
            th[i] = loop.theta();
        }
        return th;
    };
    const auto fwd = run(true);
    const auto bwd = run(false);
    std::vector<double> th(np);
    for (std::size_t i = 0; i < np; ++i) th[i] = fwd[i] + 0.5 * wrap_phase(bwd[i] - fwd[i]);

    const auto n = symbols.size();
    for (std::size_t i = 0; i < n; ++i) {
        double phase;
        const auto it = std::upper_bound(pilots.positions.begin(), pilots.positions.end(), i);
        std::size_t hi = static_cast<std::size_t>(it - pilots.positions.begin());
        if (np == 1) {
            phase = th[0];
        } else {
            // Interpolate (or extrapolate at the ends) between neighbouring pilots.
            hi = std::clamp<std::size_t>(hi, 1, np - 1);
            const std::size_t lo = hi - 1;
            const double t0 = static_cast<double>(pilots.positions[lo]);
            const double t1 = static_cast<double>(pilots.positions[hi]);
            const double p0 = th[lo];
            const double p1 = p0 + (th[hi] - p0);
            phase = p0 + (p1 - p0) * (static_cast<double>(i) - t0) / (t1 - t0);
        }
        out.symbols[i] = symbols[i] * std::polar(1.0, -phase);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metrics and FEC arithmetic

inline constexpr double kHdFecThreshold = 3.15e-3;
inline constexpr double kHdFecOverhead = 0.067;

/// Exact Gray-coded 16QAM bit error rate in AWGN at per-symbol SNR (Es/N0).
inline double theoretical_ber_16qam(double snr_db) {
    require(!std::isnan(snr_db), "theoretical_ber_16qam: snr must not be NaN");
    const double g = std::pow(10.0, snr_db / 10);
    auto q = [](double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); };
    const double a = std::sqrt(g / 5);
    return 0.25 * (3 * q(a) + 2 * q(3 * a) - q(5 * a));
}

/// Information rate after FEC (and optionally pilot) overhead.
inline double net_bit_rate(double symbol_rate_hz, double bits_per_symbol, double fec_oh, double pilot_oh,
                           bool include_pilot) {
    require(fec_oh >= 0 && pilot_oh >= 0, "net_bit_rate: overheads must be >= 0");
    double net = symbol_rate_hz * bits_per_symbol / (1 + fec_oh);
    if (include_pilot) net *= 1 - pilot_oh;
    return net;
}

struct BurstCapacity {
    std::uint64_t symbols;
    std::uint64_t bits;
};

/// Symbols and bits carried by a burst of `duration_s`.
inline BurstCapacity burst_capacity(double duration_s, double symbol_rate_hz, int bits_per_symbol) {
    const auto sym = static_cast<std::uint64_t>(std::llround(duration_s * symbol_rate_hz));
    return {sym, sym * static_cast<std::uint64_t>(bits_per_symbol)};
}

enum class RxMode { CW, FSCR };

inline std::string to_string(RxMode m) { return m == RxMode::CW ? "CW" : "FSCR"; }

struct MetricsRecord {
    RxMode mode = RxMode::CW;
    double symbol_rate_hz = 0;
    std::array<double, 2> snr_db{0, 0};
    double ber = 0;
    double evm = 0;
    double q_db = 0;
    double net_bit_rate_bps = 0;
    bool fec_pass = false;
    std::string error;  // non-empty marks a failed run

    [[nodiscard]] double mean_snr_db() const { return 0.5 * (snr_db[0] + snr_db[1]); }

    friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

inline constexpr const char* kMetricsCsvHeader = "mode,symbol_rate_hz,snr_x_db,snr_y_db,ber,evm,q_db,net_bps,fec_pass";

struct MetricsOptions {
    double fec_threshold = kHdFecThreshold;
    double fec_oh = kHdFecOverhead;
    double pilot_oh = 0.0;
    bool include_pilot = false;
};

/// Metrics of phase-corrected, frame-ordered symbol streams against their frames.
inline MetricsRecord compute_metrics(std::span<const cplx> sym_x, std::span<const cplx> sym_y,
                                     const QamFrame& frame_x, const QamFrame& frame_y, double symbol_rate_hz,
                                     RxMode mode, const MetricsOptions& opt = {}) {
    MetricsRecord r;
    r.mode = mode;
    r.symbol_rate_hz = symbol_rate_hz;
    const std::array<std::span<const cplx>, 2> rx{sym_x, sym_y};
    const std::array<const QamFrame*, 2> fr{&frame_x, &frame_y};
    std::size_t bit_errors = 0, bits = 0;
    double err = 0, ref_e = 0;
    for (int p = 0; p < 2; ++p) {
        const CVec pay = fr[p]->payload_of(rx[p]);
        const auto& ref = fr[p]->payload_symbols;
        require(ref.size() >= 10000, "compute_metrics: need at least 1e4 payload symbols per polarization");
        r.snr_db[p] = snr_between(ref, pay);
        const cplx a = ls_scalar(ref, pay);
        CVec aligned(pay.size());
        for (std::size_t i = 0; i < pay.size(); ++i) {
            aligned[i] = a * pay[i];
            err += std::norm(aligned[i] - ref[i]);
            ref_e += std::norm(ref[i]);
        }
        const Bits dec = demap_bits(fr[p]->order, aligned);
        for (std::size_t i = 0; i < dec.size(); ++i) bit_errors += dec[i] != fr[p]->payload_bits[i];
        bits += dec.size();
    }
    r.ber = std::min(0.5, static_cast<double>(bit_errors) / static_cast<double>(bits));
    r.evm = std::sqrt(err / ref_e);
    r.q_db = r.ber > 0 ? 20 * std::log10(std::numbers::sqrt2 * boost::math::erfc_inv(2 * r.ber))
                       : kSnrSaturationDb;
    r.fec_pass = r.ber < opt.fec_threshold;
    r.net_bit_rate_bps = net_bit_rate(symbol_rate_hz, 2.0 * bits_per_symbol(frame_x.order), opt.fec_oh,
                                      opt.pilot_oh, opt.include_pilot);
    return r;
}

inline std::string to_csv_row(const MetricsRecord& r) {
    std::ostringstream os;
    const bool bad = !r.error.empty();
    auto num = [&](double v) { return bad ? std::string("nan") : io::format_double(v); };
    // Integral rates print as plain integers (288000000000, not 2.88e+11).
    const double rate = r.symbol_rate_hz;
    const bool whole = std::isfinite(rate) && rate == std::round(rate) && std::abs(rate) < 9e15;
    os << to_string(r.mode) << ',' << (whole ? std::to_string(std::llround(rate)) : io::format_double(rate)) << ',' << num(r.snr_db[0]) << ','
       << num(r.snr_db[1]) << ',' << num(r.ber) << ',' << num(r.evm) << ',' << num(r.q_db) << ','
       << num(r.net_bit_rate_bps) << ',' << (bad ? "error" : (r.fec_pass ? "true" : "false"));
    return os.str();
}

inline MetricsRecord parse_csv_row(const std::string& line) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw FormatError("metrics row: expected 9 columns");
    MetricsRecord r;
    if (f[0] == "CW") r.mode = RxMode::CW;
    else if (f[0] == "FSCR") r.mode = RxMode::FSCR;
    else throw FormatError("metrics row: bad mode " + f[0]);
    r.symbol_rate_hz = io::parse_double(f[1]);
    if (f[8] == "error") {
        r.error = "error";
        return r;
    }
    r.snr_db = {io::parse_double(f[2]), io::parse_double(f[3])};
    r.ber = io::parse_double(f[4]);
    r.evm = io::parse_double(f[5]);
    r.q_db = io::parse_double(f[6]);
    r.net_bit_rate_bps = io::parse_double(f[7]);
    if (f[8] != "true" && f[8] != "false") throw FormatError("metrics row: bad fec_pass " + f[8]);
    r.fec_pass = f[8] == "true";
    return r;
}

}  // namespace fscr
