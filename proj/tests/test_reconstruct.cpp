#include "fscr/reconstruct.hpp"

#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>

using namespace fscr;
using Catch::Approx;

namespace {

ComplexWaveform band_noise(std::size_t n, double rate, double half_bw, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    CVec v(n);
    for (auto& s : v) s = {g(rng), g(rng)};
    return apply_response(ComplexWaveform(v, rate),
                          [half_bw](double f) { return std::abs(f) <= half_bw ? cplx(1) : cplx(0); });
}

FscrParams small_gate() {
    FscrParams p;
    p.gate_period_s = 1e-6;
    p.gate_rise_s = 2e-9;
    p.tau_s = 0.5e-6;
    p.lo_offsets_hz = {-4e9, 4e9};
    p.delayline_km = 0;
    p.lo_linewidth_hz = 0;
    return p;
}

double circ_diff(double a, double b, double period) {
    return std::fmod(a - b + 2.5 * period, period) - period / 2;
}

}  // namespace

TEST_CASE("fe_correct undoes the FE response and lane skew", "[reconstruct]") {
    const auto w = band_noise(8192, 32e9, 10e9, 1);
    FrontEndModel fe = FrontEndModel::ideal(32e9, 16e9);
    fe.response = butterworth_response(4, 12e9);
    fe.skew_s = {0, 3e-12, -2e-12, 5e-12};
    const auto lo = synth_cw_lo(w.duration_s(), 32e9, 0, 0, 1);
    const Capture c = coherent_receive(DualPolWaveform(w, w), lo, fe);
    const auto fixed = fe_correct(c, fe);
    CHECK(snr_between(w.samples(), fixed.pol_x().samples()) > 50);
    CHECK(snr_between(w.samples(), fixed.pol_y().samples()) > 50);
    // Without correction the 4th-order roll-off near 10 GHz is visible.
    CHECK(snr_between(w.samples(), c.wave.pol_x().samples()) < 20);
}

TEST_CASE("fe_correct clamps the inverse gain and rejects a dead response", "[reconstruct]") {
    // A unit tone at 0.25 Hz where |H| = 0.01: the inverse would be 100, the clamp gives 10.
    const ComplexWaveform w = frequency_shift(ComplexWaveform(CVec(64, cplx(1)), 1.0), 0.25);
    FrontEndModel fe = FrontEndModel::ideal(1.0, 0.5);
    fe.response = [](double f) { return std::abs(f) < 0.1 ? cplx(1) : cplx(0.01); };
    const auto out = fe_correct(Capture{DualPolWaveform(w, w), LoMode::CW, std::nullopt}, fe);
    CHECK(std::abs(out.pol_x()[5]) == Approx(kMaxCorrectionGain));
    fe.response = [](double f) { return std::abs(f) < 0.1 ? cplx(1) : cplx(0); };
    CHECK_THROWS_AS(fe_correct(Capture{DualPolWaveform(w, w), LoMode::CW, std::nullopt}, fe), InvalidArgument);
}

TEST_CASE("estimate_delay recovers a sub-sample delay from a cross-spectrum", "[reconstruct]") {
    const std::size_t n = 4096;
    const double rate = 10e9;
    const auto a = band_noise(n, rate, 4e9, 2);
    for (double d_samples : {0.0, 0.37, -1.8, 3.25}) {
        const auto b = fractional_delay(a, d_samples / rate);
        const CVec sa = fft(a.samples()), sb = fft(b.samples());
        std::vector<cplx> cross;
        std::vector<double> f;
        for (std::size_t k = 0; k < n; ++k) {
            const double fk = bin_frequency(k, n, rate);
            if (std::abs(fk) < 4e9) {
                cross.push_back(sa[k] * std::conj(sb[k]));
                f.push_back(fk);
            }
        }
        CHECK(estimate_delay(cross, f, 4.0 / rate) * rate == Approx(d_samples).margin(1e-3));
    }
}

TEST_CASE("detect_bursts finds both openings blindly", "[reconstruct]") {
    const FscrParams p = small_gate();
    const double sim = 32e9, adc = 16e9;
    const auto fe = FrontEndModel::ideal(adc, 8e9);
    for (double open : {0.005e-6, 0.2e-6, 0.45e-6}) {
        INFO("open " << open);
        const auto x = band_noise(32000, sim, 6e9, 3);
        const auto y = band_noise(32000, sim, 6e9, 4);
        const Capture c = fscr_receive(DualPolWaveform(x, y), p, fe, ChannelParams{}, 9, open);
        const BurstPair bp = detect_bursts(fe_correct(c.without_truth(), fe), p);
        CHECK(std::abs(circ_diff(bp.lf_start_s, c.truth->lf_open_start_s, p.gate_period_s)) * adc < 4);
        CHECK(std::abs(circ_diff(bp.hf_start_s, c.truth->hf_open_start_s, p.gate_period_s)) * adc < 4);
        CHECK(std::abs(circ_diff(bp.hf_start_s - bp.lf_start_s, p.tau_s, p.gate_period_s)) * adc < 0.5);
        CHECK(bp.lf.size() == bp.hf.size());
        // Gaps are 2% of the record, so in-burst envelope fluctuation caps the correlation near 0.6-0.7.
        CHECK(bp.alignment_confidence > BurstDetectConfig{}.min_confidence);
    }
}

TEST_CASE("detect_bursts rejects an ungated record", "[reconstruct]") {
    const auto x = band_noise(16000, 16e9, 6e9, 5);
    CHECK_THROWS_AS(detect_bursts(DualPolWaveform(x, x), small_gate()), BurstCountError);
}

TEST_CASE("delay-line CDC inverts the replica dispersion at the HF offset", "[reconstruct]") {
    ChannelParams fiber;
    fiber.dispersion_ps_nm_km = 17 * 64;
    const auto w = band_noise(8192, 32e9, 10e9, 6);
    // The replica is dispersed in the optical domain, then mixed down by +4 GHz.
    const auto dispersed = frequency_shift(apply_cd(w, fiber, 5, +1), -4e9);
    const auto fixed = delayline_cdc(DualPolWaveform(dispersed, dispersed), 5, fiber, 4e9);
    const auto back = frequency_shift(fixed.pol_x(), 4e9);
    CHECK(snr_between(w.samples(), back.samples()) > 50);
}

TEST_CASE("stitch joins two shifted slices with an unknown gain and delay", "[reconstruct]") {
    const double out_rate = 64e9, in_rate = 32e9, shift = 8e9, half_bw = 14e9;
    const std::size_t n = 32768;
    std::array<ComplexWaveform, 2> ref{band_noise(n, out_rate, 20e9, 7), band_noise(n, out_rate, 20e9, 8)};
    auto slice = [&](const ComplexWaveform& r, double s) {
        const auto base = frequency_shift(r, -s);
        const auto lim = apply_response(base, [&](double f) { return std::abs(f) <= half_bw ? cplx(1) : cplx(0); });
        return resample(lim, in_rate);
    };
    const cplx g = std::polar(0.7, 2.1);
    auto hf_of = [&](const ComplexWaveform& r) {
        const auto s = fractional_delay(slice(r, shift), 0.3 / in_rate);
        CVec v(s.samples());
        for (auto& z : v) z *= g;
        return s.with_samples(v);
    };
    BurstPair bp{DualPolWaveform(slice(ref[0], -shift), slice(ref[1], -shift)),
                 DualPolWaveform(hf_of(ref[0]), hf_of(ref[1]))};
    StitchConfig cfg;
    cfg.shifts_hz = {-shift, shift};
    cfg.min_overlap_hz = 5e9;
    const auto [out, rep] = stitch(bp, cfg);
    REQUIRE(out.size() == n);
    CHECK(out.sample_rate_hz() == out_rate);
    CHECK(rep.overlap_band_hz[1] - rep.overlap_band_hz[0] == Approx(2 * (half_bw - shift)).epsilon(0.05));
    // A baseband delay d of the HF slice is, after the +shift, a delay d plus a carrier phase 2 pi shift d.
    const cplx expect_gain = 1.0 / (g * std::polar(1.0, 2 * std::numbers::pi * shift * 0.3 / in_rate));
    CHECK(std::abs(rep.gain - expect_gain) < 1e-3);
    CHECK(rep.residual_delay_s * in_rate == Approx(0.3).margin(1e-3));
    CHECK(rep.residual_mismatch_db < -40);
    CHECK(snr_between(ref[0].samples(), out.pol_x().samples()) > 40);
    CHECK(snr_between(ref[1].samples(), out.pol_y().samples()) > 40);

    cfg.min_overlap_hz = 20e9;
    CHECK_THROWS_AS(stitch(bp, cfg), OverlapTooNarrow);

    const auto kv = rep.to_key_values();
    CHECK(io::parse_double(kv.at("gain_re")) == rep.gain.real());
}
