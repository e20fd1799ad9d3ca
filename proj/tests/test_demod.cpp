#include "fscr/channel.hpp"
#include "fscr/demod.hpp"

#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>

using namespace fscr;
using Catch::Approx;

namespace {

constexpr std::size_t kN = 4095;

// Two periods of the 2-sample/symbol RRC waveform of each frame, symbol 0 at `lag` samples.
DualPolWaveform two_sps(const QamFrame& fx, const QamFrame& fy, std::size_t lag) {
    auto one = [&](const QamFrame& f) {
        const auto w = shape_symbols(f.symbols(), 1.0, 0.05, 2.0);
        return fractional_delay(periodic_extend(w, 4 * kN), double(lag) / 2.0);
    };
    return DualPolWaveform(one(fx), one(fy));
}

// SNR of an equalized, phase-recovered stream against its frame.
double stream_snr(const EqualizedPol& ep, const QamFrame& f, double loop_bw = 1e-3) {
    const auto track = pilot_track(f, ep.first_frame_index, ep.symbols.size());
    const DpllResult d = dpll_recover(ep.symbols, track, loop_bw);
    const CVec ordered = to_frame_order(d.symbols, ep.first_frame_index, f.total_symbols);
    return snr_between(f.symbols(), ordered);
}

EqualizerConfig test_eq() {
    EqualizerConfig c;
    c.edge_guard = 0;
    return c;
}

}  // namespace

TEST_CASE("closed-form 16QAM BER agrees with Monte Carlo", "[demod]") {
    std::mt19937_64 rng(11);
    const QamFrame f = generate_qam_frame(16, 250000, 0.0, 3);
    for (double snr_db : {8.0, 12.0, 14.0}) {
        const double sigma = std::sqrt(std::pow(10.0, -snr_db / 10) / 2);
        std::normal_distribution<double> g(0.0, sigma);
        CVec rx(f.payload_symbols);
        for (auto& z : rx) z += cplx(g(rng), g(rng));
        const Bits b = demap_bits(16, rx);
        std::size_t errs = 0;
        for (std::size_t i = 0; i < b.size(); ++i) errs += b[i] != f.payload_bits[i];
        const double mc = double(errs) / double(b.size());
        CHECK(mc == Approx(theoretical_ber_16qam(snr_db)).epsilon(0.06));
    }
    // Monotone and bounded.
    CHECK(theoretical_ber_16qam(10) > theoretical_ber_16qam(11));
    CHECK(theoretical_ber_16qam(-30) < 0.5);
}

TEST_CASE("net rate and burst capacity arithmetic", "[demod]") {
    CHECK(net_bit_rate(288e9, 8, 0.067, 0.0079, false) == Approx(288e9 * 8 / 1.067));
    CHECK(net_bit_rate(288e9, 8, 0.067, 0.0079, true) == Approx(288e9 * 8 / 1.067 * (1 - 0.0079)));
    const auto cap = burst_capacity(25e-6, 288e9, 8);
    CHECK(cap.symbols == 7'200'000u);
    CHECK(cap.bits == 57'600'000u);
    CHECK_THROWS_AS(net_bit_rate(1, 1, -0.1, 0, false), InvalidArgument);
}

TEST_CASE("RRC impulse equals the inverse transform of the RRC response", "[demod]") {
    const double b = 0.05;
    for (double t : {0.0, 0.5, 1.3, 1.0 / (4 * b), 7.25}) {
        // Trapezoid over [-(1+b)/2, (1+b)/2] with unit symbol rate.
        const int n = 200000;
        const double lim = (1 + b) / 2;
        double acc = 0;
        for (int i = 0; i <= n; ++i) {
            const double f = -lim + 2 * lim * i / n;
            const double w = (i == 0 || i == n) ? 0.5 : 1.0;
            acc += w * rrc_response(f, 1.0, b) * std::cos(2 * std::numbers::pi * f * t);
        }
        acc *= 2 * lim / n;
        CHECK(rrc_impulse(t, b) == Approx(acc).margin(1e-5));
    }
}

TEST_CASE("phase loop: gains, wrapping, frequency pull-in", "[demod]") {
    const auto [k1, k2] = loop_gains(1e-3);
    CHECK(k1 > 0);
    CHECK(k2 > 0);
    CHECK(k2 < k1);
    CHECK(std::abs(wrap_phase(3 * std::numbers::pi)) == Approx(std::numbers::pi).margin(1e-12));
    CHECK(wrap_phase(2.5 * std::numbers::pi) == Approx(0.5 * std::numbers::pi).margin(1e-12));
    CHECK(std::abs(wrap_phase(-7.0)) <= std::numbers::pi);

    PhaseLoop loop(0.01);
    loop.reset(0.0);
    const double omega = 2e-3;
    double err = 0;
    for (int i = 1; i <= 20000; ++i) {
        loop.advance();
        err = wrap_phase(omega * i + 0.4 - loop.theta());
        loop.update(err);
    }
    CHECK(std::abs(err) < 1e-6);
    CHECK(loop.omega() == Approx(omega).epsilon(1e-4));
}

TEST_CASE("frame_lag finds the symbol-0 position", "[demod]") {
    const QamFrame fx = generate_qam_frame(16, kN, 0.0079, 1);
    const QamFrame fy = generate_qam_frame(16, kN, 0.0079, 2);
    for (std::size_t lag : {0u, 1u, 777u, 8000u}) {
        const auto rx = two_sps(fx, fy, lag);
        CHECK(frame_lag(rx, fx, 0.05) == lag);
        CHECK(frame_lag(rx, fy, 0.05) == lag);
    }
}

TEST_CASE("pilot track and frame reordering", "[demod]") {
    const QamFrame f = generate_qam_frame(16, kN, 0.0079, 4);
    const CVec sym = f.symbols();
    CVec stream(kN);
    for (std::size_t i = 0; i < kN; ++i) stream[i] = sym[(100 + i) % kN];
    CHECK(to_frame_order(stream, 100, kN) == sym);
    const auto t = pilot_track(f, 100, kN);
    CHECK(t.positions.size() == f.pilot_count());
    for (std::size_t j = 0; j < t.positions.size(); ++j) CHECK(stream[t.positions[j]] == t.values[j]);
}

TEST_CASE("equalizer: clean input converges to a near-perfect output", "[demod][aeq]") {
    const QamFrame fx = generate_qam_frame(16, kN, 0.0079, 5);
    const QamFrame fy = generate_qam_frame(16, kN, 0.0079, 6);
    const auto rx = two_sps(fx, fy, 321);
    const AeqResult r = aeq_equalize(rx, fx, fy, test_eq());
    CHECK(r.converged);
    CHECK(stream_snr(r.pols[0], fx) > 25);
    CHECK(stream_snr(r.pols[1], fy) > 25);
}

TEST_CASE("equalizer separates a 45 degree polarization rotation", "[demod][aeq]") {
    const QamFrame fx = generate_qam_frame(16, kN, 0.0079, 7);
    const QamFrame fy = generate_qam_frame(16, kN, 0.0079, 8);
    const auto rx = rotate_polarization(two_sps(fx, fy, 50), std::numbers::pi / 4);
    const AeqResult r = aeq_equalize(rx, fx, fy, test_eq());
    CHECK(r.converged);
    CHECK(stream_snr(r.pols[0], fx) > 25);
    CHECK(stream_snr(r.pols[1], fy) > 25);
}

TEST_CASE("equalizer removes 3-tap ISI with AWGN", "[demod][aeq]") {
    const QamFrame fx = generate_qam_frame(16, kN, 0.0079, 9);
    const QamFrame fy = generate_qam_frame(16, kN, 0.0079, 10);
    const auto clean = two_sps(fx, fy, 10);
    auto isi = [](const ComplexWaveform& w) {
        const std::size_t n = w.size();
        CVec out(n);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = w[i] + cplx(0.3, 0) * w[(i + n - 1) % n] + cplx(0, 0.15) * w[(i + n - 2) % n];
        return w.with_samples(out);
    };
    auto rx = clean.map(isi);
    rx = add_awgn(rx, 20.0, 1.0, 12);
    const AeqResult r = aeq_equalize(rx, fx, fy, test_eq());
    CHECK(r.converged);
    // 20 dB loaded at the input: the output must land close to it.
    CHECK(stream_snr(r.pols[0], fx) > 18);
    CHECK(stream_snr(r.pols[1], fy) > 18);
}

TEST_CASE("equalizer rejects a record shorter than one frame", "[demod][aeq]") {
    const QamFrame fx = generate_qam_frame(16, kN, 0.0079, 5);
    const auto rx = two_sps(fx, fx, 0);
    const DualPolWaveform shortrx(ComplexWaveform(CVec(rx.pol_x().samples().begin(), rx.pol_x().samples().begin() + 6000), 2.0),
                                  ComplexWaveform(CVec(rx.pol_y().samples().begin(), rx.pol_y().samples().begin() + 6000), 2.0));
    CHECK_THROWS_AS(aeq_equalize(shortrx, fx, fx, test_eq()), InvalidArgument);
    EqualizerConfig bad;
    bad.samples_per_symbol = 1;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("DPLL leaves ideal symbols alone", "[demod][dpll]") {
    const QamFrame f = generate_qam_frame(16, kN, 0.0079, 13);
    const CVec sym = f.symbols();
    const auto t = pilot_track(f, 0, kN);
    const DpllResult d = dpll_recover(sym, t, 1e-3);
    CHECK(!d.cycle_slip_suspected);
    for (std::size_t i = 0; i < kN; ++i) CHECK(std::abs(d.symbols[i] - sym[i]) < 1e-12);
}

TEST_CASE("DPLL removes a 10 MHz offset at 36 GBd", "[demod][dpll]") {
    const QamFrame f = generate_qam_frame(16, 16380, 0.0079, 14);
    const CVec sym = f.symbols();
    const double omega = 2 * std::numbers::pi * 10e6 / 36e9;
    CVec rx(sym.size());
    for (std::size_t i = 0; i < sym.size(); ++i) rx[i] = sym[i] * std::polar(1.0, omega * double(i) + 0.7);
    const DpllResult d = dpll_recover(rx, pilot_track(f, 0, sym.size()), 1e-3);
    CHECK(!d.cycle_slip_suspected);
    // Residual phase slope by least squares.
    double sx = 0, sy = 0, sxx = 0, sxy = 0, worst = 0;
    const double n = double(sym.size());
    for (std::size_t i = 0; i < sym.size(); ++i) {
        const double e = std::arg(d.symbols[i] * std::conj(sym[i]));
        worst = std::max(worst, std::abs(e));
        sx += double(i);
        sy += e;
        sxx += double(i) * double(i);
        sxy += double(i) * e;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(std::abs(slope) < 1e-4);
    CHECK(worst < 0.05);
}

TEST_CASE("metrics on a perfect stream", "[demod][metrics]") {
    const QamFrame fx = generate_qam_frame(16, 16380, 0.0079, 15);
    const QamFrame fy = generate_qam_frame(16, 16380, 0.0079, 16);
    const MetricsRecord r = compute_metrics(fx.symbols(), fy.symbols(), fx, fy, 288e9, RxMode::FSCR);
    CHECK(r.ber == 0.0);
    CHECK(r.fec_pass);
    CHECK(r.q_db == kSnrSaturationDb);
    CHECK(r.snr_db[0] == kSnrSaturationDb);
    CHECK(r.evm < 1e-12);
    CHECK(r.net_bit_rate_bps == Approx(288e9 * 8 / 1.067));

    const QamFrame small = generate_qam_frame(16, 4095, 0.0079, 1);
    CHECK_THROWS_AS(compute_metrics(small.symbols(), small.symbols(), small, small, 1, RxMode::CW), InvalidArgument);
}

TEST_CASE("metrics BER and Q track injected noise", "[demod][metrics]") {
    const QamFrame fx = generate_qam_frame(16, 65520, 0.0079, 17);
    const QamFrame fy = generate_qam_frame(16, 65520, 0.0079, 18);
    std::mt19937_64 rng(3);
    const double snr_db = 14.0;
    std::normal_distribution<double> g(0.0, std::sqrt(std::pow(10.0, -snr_db / 10) / 2));
    auto noisy = [&](const QamFrame& f) {
        CVec s = f.symbols();
        for (auto& z : s) z = z * std::polar(1.0, 0.2) + cplx(g(rng), g(rng));
        return s;
    };
    const MetricsRecord r = compute_metrics(noisy(fx), noisy(fy), fx, fy, 36e9, RxMode::CW);
    CHECK(r.mean_snr_db() == Approx(snr_db).margin(0.1));
    CHECK(r.ber == Approx(theoretical_ber_16qam(snr_db)).epsilon(0.1));
    // Q from BER: BER = Q(10^(q/20)) for the Gaussian tail.
    CHECK(0.5 * std::erfc(std::pow(10.0, r.q_db / 20) / std::numbers::sqrt2) == Approx(r.ber).epsilon(1e-9));
    CHECK(r.evm == Approx(std::pow(10.0, -r.mean_snr_db() / 20)).epsilon(0.02));
}

TEST_CASE("metrics CSV rows round trip", "[demod][metrics]") {
    MetricsRecord r;
    r.mode = RxMode::FSCR;
    r.symbol_rate_hz = 288e9;
    r.snr_db = {17.312345678, 16.9};
    r.ber = 2.0e-3;
    r.evm = 0.137;
    r.q_db = 9.25;
    r.net_bit_rate_bps = net_bit_rate(288e9, 8, 0.067, 0, false);
    r.fec_pass = true;
    const std::string row = to_csv_row(r);
    CHECK(parse_csv_row(row) == r);
    CHECK(row.rfind("FSCR,288000000000,", 0) == 0);

    MetricsRecord bad;
    bad.mode = RxMode::CW;
    bad.symbol_rate_hz = 144e9;
    bad.error = "stitch failed";
    const std::string brow = to_csv_row(bad);
    CHECK(brow == "CW,144000000000,nan,nan,nan,nan,nan,nan,error");
    CHECK(to_csv_row(parse_csv_row(brow)) == brow);

    CHECK_THROWS_AS(parse_csv_row("CW,1,2"), FormatError);
    CHECK_THROWS_AS(parse_csv_row("XX,1,2,3,4,5,6,7,true"), FormatError);
    CHECK_THROWS_AS(parse_csv_row("CW,1,2,3,4,5,6,7,maybe"), FormatError);
}
