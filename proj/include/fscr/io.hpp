#pragma once

// FSCW binary waveform files and the plain-text key/value sidecar records.
//
// FSCW layout (all little-endian):
//   "FSCW" | u32 version (=1) | u32 pol_count (1 or 2) | f64 sample_rate_hz
//   | f64 start_time_s | u64 length | pol_count x length x (f64 re, f64 im)

#include "fscr/errors.hpp"
#include "fscr/waveform.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>

namespace fscr::io {

inline constexpr std::array<char, 4> kFscwMagic{'F', 'S', 'C', 'W'};
inline constexpr std::uint32_t kFscwVersion = 1;

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    const U u = std::bit_cast<U>(v);
    std::array<char, sizeof(U)> b{};
    for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xFF);
    os.write(b.data(), b.size());
}

template <class T>
T get_le(std::istream& is) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    std::array<unsigned char, sizeof(U)> b{};
    is.read(reinterpret_cast<char*>(b.data()), b.size());
    if (!is) throw FormatError("FSCW: truncated file");
    U u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) u |= static_cast<U>(b[i]) << (8 * i);
    return std::bit_cast<T>(u);
}

}  // namespace detail

using FscwRecord = std::variant<ComplexWaveform, DualPolWaveform>;

inline void write_fscw(std::ostream& os, std::span<const ComplexWaveform* const> pols) {
    require(pols.size() == 1 || pols.size() == 2, "FSCW: pol_count must be 1 or 2");
    const auto& first = *pols[0];
    os.write(kFscwMagic.data(), kFscwMagic.size());
    detail::put_le<std::uint32_t>(os, kFscwVersion);
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(pols.size()));
    detail::put_le<double>(os, first.sample_rate_hz());
    detail::put_le<double>(os, first.start_time_s());
    detail::put_le<std::uint64_t>(os, first.size());
    for (const auto* p : pols) {
        for (const auto& s : p->samples()) {
            detail::put_le<double>(os, s.real());
            detail::put_le<double>(os, s.imag());
        }
    }
}

inline void write_fscw(std::ostream& os, const ComplexWaveform& w) {
    const ComplexWaveform* p[] = {&w};
    write_fscw(os, p);
}

inline void write_fscw(std::ostream& os, const DualPolWaveform& w) {
    const ComplexWaveform* p[] = {&w.pol_x(), &w.pol_y()};
    write_fscw(os, p);
}

inline FscwRecord read_fscw(std::istream& is) {
    std::array<char, 4> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kFscwMagic) throw FormatError("FSCW: bad magic");
    if (detail::get_le<std::uint32_t>(is) != kFscwVersion)
        throw FormatError("FSCW: unsupported version");
    const auto pols = detail::get_le<std::uint32_t>(is);
    if (pols != 1 && pols != 2) throw FormatError("FSCW: pol_count must be 1 or 2");
    const auto rate = detail::get_le<double>(is);
    const auto start = detail::get_le<double>(is);
    const auto len = detail::get_le<std::uint64_t>(is);
    if (len == 0 || len > (std::uint64_t{1} << 34)) throw FormatError("FSCW: bad length");

    auto read_pol = [&] {
        CVec s(len);
        for (auto& v : s) {
            const double re = detail::get_le<double>(is);
            const double im = detail::get_le<double>(is);
            v = {re, im};
        }
        try {
            return ComplexWaveform(std::move(s), rate, start);
        } catch (const InvalidArgument& e) {
            throw FormatError(std::string("FSCW: ") + e.what());
        }
    };
    auto x = read_pol();
    if (pols == 1) return x;
    auto y = read_pol();
    return DualPolWaveform(std::move(x), std::move(y));
}

inline void save_fscw(const std::string& path, const FscwRecord& rec) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    std::visit([&](const auto& w) { write_fscw(os, w); }, rec);
}

inline FscwRecord load_fscw(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    return read_fscw(is);
}

// ---------------------------------------------------------------------------
// Key/value text records: one "key = value" per line, '#' starts a comment.

using KeyValues = std::map<std::string, std::string>;

/// Shortest round-trippable decimal form of a double.
inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw FormatError("not a number: '" + std::string(s) + "'");
    return v;
}

inline void write_key_values(std::ostream& os, const KeyValues& kv) {
    for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
}

inline KeyValues read_key_values(std::istream& is) {
    KeyValues kv;
    std::string line;
    auto trim = [](std::string_view s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string_view::npos) return std::string{};
        const auto e = s.find_last_not_of(" \t\r");
        return std::string(s.substr(b, e - b + 1));
    };
    while (std::getline(is, line)) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw FormatError("key/value: missing '=' in '" + t + "'");
        kv[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
    }
    return kv;
}

}  // namespace fscr::io
