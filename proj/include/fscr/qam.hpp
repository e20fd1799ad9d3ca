#pragma once

// Gray-mapped square QAM (QPSK and 16QAM) and pilot-bearing frames.

#include "fscr/errors.hpp"
#include "fscr/fft.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace fscr {

using Bits = std::vector<std::uint8_t>;

inline int bits_per_symbol(int order) {
    require(order == 4 || order == 16, "QAM order must be 4 or 16");
    return order == 4 ? 2 : 4;
}

namespace detail {

// Per-dimension Gray levels: index = Gray bit pattern (MSB first).
inline double pam_level(int order, unsigned pattern) {
    if (order == 4) return pattern ? 1.0 : -1.0;
    static constexpr double kLevels[4] = {-3.0, -1.0, 3.0, 1.0};  // 00 01 10 11
    return kLevels[pattern];
}

inline double qam_norm(int order) { return order == 4 ? std::sqrt(2.0) : std::sqrt(10.0); }

// Nearest per-dimension Gray pattern for an unnormalized coordinate.
inline unsigned pam_slice(int order, double v) {
    if (order == 4) return v >= 0 ? 1u : 0u;
    if (v < -2) return 0b00;
    if (v < 0) return 0b01;
    if (v < 2) return 0b11;
    return 0b10;
}

}  // namespace detail

/// Constellation point for a bit pattern (MSB first: I bits then Q bits). Unit average power.
inline cplx qam_point(int order, unsigned pattern) {
    const int half = bits_per_symbol(order) / 2;
    const unsigned mask = (1u << half) - 1;
    const double re = detail::pam_level(order, (pattern >> half) & mask);
    const double im = detail::pam_level(order, pattern & mask);
    return cplx(re, im) / detail::qam_norm(order);
}

/// Pattern -> point table for the whole constellation.
inline CVec gray_map(int order) {
    CVec map(static_cast<std::size_t>(order));
    for (unsigned p = 0; p < static_cast<unsigned>(order); ++p) map[p] = qam_point(order, p);
    return map;
}

/// Hard decision: nearest constellation pattern.
inline unsigned qam_decide(int order, cplx z) {
    const int half = bits_per_symbol(order) / 2;
    const double s = detail::qam_norm(order);
    return (detail::pam_slice(order, z.real() * s) << half) | detail::pam_slice(order, z.imag() * s);
}

inline cplx qam_slice(int order, cplx z) { return qam_point(order, qam_decide(order, z)); }

/// Payload symbols plus known pilots placed at indices 0, s, 2s, ... (floor(total/s) of them).
struct QamFrame {
    int order = 16;
    std::size_t total_symbols = 0;
    std::size_t pilot_spacing = 0;  // 0: no pilots
    Bits payload_bits;
    CVec payload_symbols;
    CVec pilot_symbols;
    CVec gray_map;

    [[nodiscard]] std::size_t pilot_count() const {
        return pilot_spacing ? total_symbols / pilot_spacing : 0;
    }
    [[nodiscard]] bool is_pilot(std::size_t k) const {
        return pilot_spacing && k % pilot_spacing == 0 && k / pilot_spacing < pilot_count();
    }
    /// Payload index of frame position k (k must not be a pilot).
    [[nodiscard]] std::size_t payload_index(std::size_t k) const {
        if (!pilot_spacing) return k;
        const std::size_t before = std::min(pilot_count(), k / pilot_spacing + 1);
        return k - before;
    }
    /// Full frame in transmission order.
    [[nodiscard]] CVec symbols() const {
        CVec out(total_symbols);
        std::size_t pi = 0, di = 0;
        for (std::size_t k = 0; k < total_symbols; ++k)
            out[k] = is_pilot(k) ? pilot_symbols[pi++] : payload_symbols[di++];
        return out;
    }
    /// Extract payload positions from a frame-ordered stream.
    [[nodiscard]] CVec payload_of(std::span<const cplx> frame_ordered) const {
        require(frame_ordered.size() == total_symbols, "payload_of: length mismatch");
        CVec out;
        out.reserve(payload_symbols.size());
        for (std::size_t k = 0; k < total_symbols; ++k)
            if (!is_pilot(k)) out.push_back(frame_ordered[k]);
        return out;
    }
};

inline QamFrame generate_qam_frame(int order, std::size_t n_symbols, double pilot_oh,
                                   std::uint64_t seed) {
    const int bps = bits_per_symbol(order);
    require(n_symbols >= 1000, "generate_qam_frame: need at least 1000 symbols");
    require(pilot_oh >= 0 && pilot_oh < 0.1, "generate_qam_frame: pilot overhead must be in [0, 0.1)");

    QamFrame f;
    f.order = order;
    f.total_symbols = n_symbols;
    f.pilot_spacing = pilot_oh > 0 ? static_cast<std::size_t>(std::lround(1.0 / pilot_oh)) : 0;
    f.gray_map = gray_map(order);

    std::mt19937_64 rng(seed);
    const std::size_t n_payload = n_symbols - f.pilot_count();
    f.payload_bits.resize(n_payload * static_cast<std::size_t>(bps));
    f.payload_symbols.resize(n_payload);
    for (std::size_t i = 0; i < n_payload; ++i) {
        unsigned pattern = 0;
        for (int b = 0; b < bps; ++b) {
            const auto bit = static_cast<std::uint8_t>(rng() >> 63);
            f.payload_bits[i * bps + b] = bit;
            pattern = (pattern << 1) | bit;
        }
        f.payload_symbols[i] = f.gray_map[pattern];
    }
    f.pilot_symbols.resize(f.pilot_count());
    for (auto& p : f.pilot_symbols) p = qam_point(4, static_cast<unsigned>(rng() >> 62));
    return f;
}

/// Gray-demap hard decisions to bits (MSB first per symbol).
inline Bits demap_bits(int order, std::span<const cplx> symbols) {
    const int bps = bits_per_symbol(order);
    Bits out(symbols.size() * static_cast<std::size_t>(bps));
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        const unsigned p = qam_decide(order, symbols[i]);
        for (int b = 0; b < bps; ++b) out[i * bps + b] = static_cast<std::uint8_t>((p >> (bps - 1 - b)) & 1u);
    }
    return out;
}

}  // namespace fscr
