#include "fscr/qam.hpp"
#include "fscr/tx.hpp"

#include <catch_amalgamated.hpp>

#include <bit>
#include <numbers>
#include <set>

using namespace fscr;
using Catch::Approx;

TEST_CASE("16QAM Gray map: unit power, distinct points, neighbours differ by one bit", "[qam]") {
    const CVec map = gray_map(16);
    double p = 0;
    for (const auto& z : map) p += std::norm(z);
    CHECK(p / 16 == Approx(1.0));

    const double dmin = 2.0 / std::sqrt(10.0);
    int neighbour_pairs = 0;
    for (unsigned a = 0; a < 16; ++a)
        for (unsigned b = a + 1; b < 16; ++b) {
            const double d = std::abs(map[a] - map[b]);
            CHECK(d > dmin * 0.999);
            if (d < dmin * 1.001) {
                ++neighbour_pairs;
                CHECK(std::popcount(a ^ b) == 1);
            }
        }
    CHECK(neighbour_pairs == 24);  // 4x4 grid: 2 * 4 * 3 edges
}

TEST_CASE("QPSK map and decisions invert the map", "[qam]") {
    for (int order : {4, 16}) {
        const CVec map = gray_map(order);
        for (unsigned p = 0; p < unsigned(order); ++p) {
            CHECK(qam_decide(order, map[p]) == p);
            // A perturbation below half the minimum distance keeps the decision.
            CHECK(qam_decide(order, map[p] + cplx(0.3, -0.3) / std::sqrt(10.0)) == p);
        }
    }
    CHECK_THROWS_AS(bits_per_symbol(8), InvalidArgument);
}

TEST_CASE("frame layout: pilots, payload, bits", "[qam]") {
    const QamFrame f = generate_qam_frame(16, 16380, 0.0079, 42);
    CHECK(f.pilot_spacing == 127);
    CHECK(f.pilot_count() == 128);
    CHECK(f.payload_symbols.size() == 16380 - 128);
    CHECK(f.payload_bits.size() == 4 * f.payload_symbols.size());

    const CVec all = f.symbols();
    REQUIRE(all.size() == 16380);
    std::size_t pilots = 0;
    for (std::size_t k = 0; k < all.size(); ++k) {
        if (f.is_pilot(k)) {
            ++pilots;
            CHECK(std::abs(std::norm(all[k]) - 1.0) < 1e-12);  // QPSK pilots
        } else {
            CHECK(all[k] == f.payload_symbols[f.payload_index(k)]);
        }
    }
    CHECK(pilots == 128);
    CHECK(f.payload_of(all) == f.payload_symbols);
    CHECK(demap_bits(16, f.payload_symbols) == f.payload_bits);

    // Deterministic per seed, different across seeds.
    CHECK(generate_qam_frame(16, 16380, 0.0079, 42).payload_bits == f.payload_bits);
    CHECK(generate_qam_frame(16, 16380, 0.0079, 43).payload_bits != f.payload_bits);

    CHECK_THROWS_AS(generate_qam_frame(16, 500, 0.0, 1), InvalidArgument);
    CHECK_THROWS_AS(generate_qam_frame(16, 2000, 0.2, 1), InvalidArgument);
}

TEST_CASE("payload bits are balanced", "[qam]") {
    const QamFrame f = generate_qam_frame(16, 100000, 0.0, 9);
    std::size_t ones = 0;
    for (auto b : f.payload_bits) ones += b;
    CHECK(double(ones) / double(f.payload_bits.size()) == Approx(0.5).margin(0.005));
}

TEST_CASE("RRC response: passband, Nyquist symmetry, stopband", "[tx]") {
    const double rs = 100e9, b = 0.05;
    CHECK(rrc_response(0, rs, b) == 1.0);
    CHECK(rrc_response(0.55 * rs, rs, b) == 0.0);
    CHECK(rrc_response(rs / 2, rs, b) == Approx(std::sqrt(0.5)));
    // Raised-cosine (squared) folds to one around rs/2.
    for (double x : {0.0, 0.3, 0.7, 1.0}) {
        const double d = x * b * rs / 2;
        const double a = rrc_response(rs / 2 - d, rs, b), c = rrc_response(rs / 2 + d, rs, b);
        CHECK(a * a + c * c == Approx(1.0));
    }
}

TEST_CASE("shaped frame is unit power, band-limited and ISI-free after the matched filter", "[tx]") {
    const QamFrame f = generate_qam_frame(16, 4095, 0.0079, 3);
    TxConfig cfg;
    cfg.symbol_rate_hz = 36e9;
    cfg.sim_rate_hz = 80e9;
    const ComplexWaveform w = modulate(f, cfg);
    CHECK(w.size() == samples_per_frame(4095, 36e9, 80e9));
    CHECK(mean_power(w) == Approx(1.0));

    const Spectrum s = spectrum_of(w);
    double out_of_band = 0;
    for (std::size_t k = 0; k < s.bins.size(); ++k)
        if (std::abs(s.frequency(k)) > 1.05 * 36e9 / 2 + s.bin_spacing_hz) out_of_band += std::norm(s.bins[k]);
    CHECK(out_of_band < 1e-20 * energy(s.bins));

    const CVec rx = matched_filter_sample(w, 36e9, 0.05, 4095);
    CHECK(snr_between(f.symbols(), rx) > 90.0);

    CHECK_THROWS_AS(samples_per_frame(4095, 36e9, 81e9), InvalidArgument);
}

TEST_CASE("polmux delays an independent frame by the PDME delay", "[tx]") {
    const QamFrame f1 = generate_qam_frame(16, 2048, 0.0, 1);
    const QamFrame f2 = generate_qam_frame(16, 2048, 0.0, 2);
    TxConfig cfg;
    cfg.symbol_rate_hz = 32e9;
    cfg.sim_rate_hz = 64e9;
    cfg.pdme_delay_s = 10.0 / 32e9;  // ten symbols
    const ComplexWaveform x = modulate(f1, cfg);
    const DualPolWaveform d = polmux(x, f2, cfg);
    CHECK(d.pol_x() == x);
    const CVec y = matched_filter_sample(d.pol_y(), 32e9, 0.05, 2048);
    const CVec ref = f2.symbols();
    CVec shifted(2048);
    for (std::size_t i = 0; i < 2048; ++i) shifted[(i + 10) % 2048] = ref[i];
    CHECK(snr_between(shifted, y) > 80.0);

    const auto ext = periodic_extend(x, 3 * x.size());
    CHECK(ext[x.size() + 5] == x[5]);
    CHECK(ext[2 * x.size() + 7] == x[7]);
}
