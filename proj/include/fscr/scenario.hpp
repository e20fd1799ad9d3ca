#pragma once

// Experiment orchestration: scenario config, one end-to-end run per
// (symbol rate, receiver mode), and the symbol-rate sweep.
//
// A physical 20-kHz gate would need ~1e7 symbols per capture. The runner keeps
// every ratio of the gate (duty, tau / period, rise / period) and compresses its
// time constants so that one gate period holds exactly three frames.

#include "fscr/channel.hpp"
#include "fscr/demod.hpp"
#include "fscr/errors.hpp"
#include "fscr/frontend.hpp"
#include "fscr/io.hpp"
#include "fscr/qam.hpp"
#include "fscr/reconstruct.hpp"
#include "fscr/tx.hpp"
#include "fscr/waveform.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <string>
#include <vector>

namespace fscr {

struct Scenario {
    TxConfig tx;
    ChannelParams channel;
    FscrParams fscr;
    FrontEndModel fe;                // response is rebuilt from fe_order / fe_3db_hz
    int fe_order = 4;                // 0: flat
    double fe_3db_hz = 90e9;
    EqualizerConfig eq;
    std::vector<RxMode> modes{RxMode::CW, RxMode::FSCR};
    std::vector<double> symbol_rates_hz{144e9, 192e9, 240e9, 288e9};
    std::uint64_t seed = 1;
    double scale = 1.0;

    int qam_order = 16;
    std::size_t frame_symbols = 16380;
    double pilot_oh = 0.0079;
    double dpll_loop_bw = 1e-3;       // fraction of the symbol rate
    bool delayline_cdc = true;        // ablation switch
    MetricsOptions metrics;

    /// Rebuild derived members (FE response) after editing the plain fields.
    void finalize() {
        fe.response = fe_order > 0 ? butterworth_response(fe_order, fe_3db_hz) : flat_response();
    }

    /// All frequencies divided and all times multiplied by `scale`. Dispersion
    /// is multiplied by scale^2 so the dispersive spread in symbols is unchanged.
    [[nodiscard]] Scenario scaled() const {
        Scenario s = *this;
        const double k = scale;
        s.scale = 1.0;
        s.tx.symbol_rate_hz /= k;
        s.tx.sim_rate_hz /= k;
        s.tx.pdme_delay_s *= k;
        if (s.tx.tx_bandlimit_hz) *s.tx.tx_bandlimit_hz /= k;
        s.channel.dispersion_ps_nm_km *= k * k;
        s.channel.tx_linewidth_hz /= k;
        s.channel.lo_linewidth_hz /= k;
        s.channel.freq_offset_hz /= k;
        s.fscr = fscr.time_scaled(k);
        for (auto& f : s.fscr.lo_offsets_hz) f /= k;
        s.fscr.lo_linewidth_hz /= k;
        s.fscr.lo_freq_offset_hz /= k;
        s.fe_3db_hz /= k;
        s.fe.adc_rate_hz /= k;
        s.fe.adc_bw_hz /= k;
        for (auto& t : s.fe.skew_s) t *= k;
        for (auto& r : s.symbol_rates_hz) r /= k;
        s.finalize();
        return s;
    }

    void validate() const {
        require(scale > 0, "Scenario: scale must be > 0");
        require(!modes.empty(), "Scenario: empty mode set");
        require(!symbol_rates_hz.empty(), "Scenario: empty symbol-rate list");
        require(std::is_sorted(symbol_rates_hz.begin(), symbol_rates_hz.end()),
                "Scenario: symbol rates must be ascending");
        require(frame_symbols >= 1000, "Scenario: frame too short");
        bits_per_symbol(qam_order);
        const Scenario s = scaled();
        for (double r : s.symbol_rates_hz) {
            TxConfig t = s.tx;
            t.symbol_rate_hz = r;
            t.validate();
            samples_per_frame(frame_symbols, r, t.sim_rate_hz);
            samples_per_frame(frame_symbols, r, s.fe.adc_rate_hz);
        }
        s.channel.validate();
        s.fe.validate();
        s.eq.validate();
        require(fe_3db_hz > 0 || fe_order == 0, "Scenario: FE bandwidth must be > 0");
        require(fscr.gate_duty > 0 && fscr.gate_duty < 0.5, "Scenario: gate duty must be in (0, 0.5)");
        require(fscr.gate_rise_s < fscr.open_duration_s(), "Scenario: gate rise exceeds the opening");
        require(fscr.tau_s > fscr.open_duration_s() && fscr.tau_s + fscr.open_duration_s() <= fscr.gate_period_s,
                "Scenario: tau must lie between the opening and period - opening");
        require(pilot_oh >= 0 && pilot_oh < 0.1, "Scenario: pilot overhead must be in [0, 0.1)");
        require(dpll_loop_bw > 0 && dpll_loop_bw < 0.25, "Scenario: DPLL loop bandwidth must be in (0, 0.25)");
    }
};

inline Scenario preset(const std::string& name) {
    Scenario s;
    if (name == "paper") {
        s.scale = 1.0;
    } else if (name == "paper-div-8") {
        s.scale = 8.0;
    } else {
        throw InvalidArgument("unknown preset: " + name);
    }
    s.finalize();
    return s;
}

// ---------------------------------------------------------------------------
// Config file (INI sections mirroring the modules)

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

inline RxMode parse_mode(const std::string& s) {
    if (s == "CW") return RxMode::CW;
    if (s == "FSCR") return RxMode::FSCR;
    throw InvalidArgument("unknown receiver mode: " + s);
}

}  // namespace detail

/// Overlay the keys present in `pt` onto `s`. Unknown keys are rejected.
inline void apply_config(Scenario& s, const boost::property_tree::ptree& pt) {
    using boost::property_tree::ptree;
    auto num = [](const ptree& v) { return io::parse_double(v.get_value<std::string>()); };
    for (const auto& [section, body] : pt) {
        for (const auto& [key, v] : body) {
            const std::string k = section + "." + key;
            const std::string text = v.get_value<std::string>();
            if (k == "run.preset") {
                s.scale = preset(text).scale;
            } else if (k == "run.scale") s.scale = num(v);
            else if (k == "run.seed") s.seed = std::stoull(text);
            else if (k == "run.modes") {
                s.modes.clear();
                for (const auto& m : detail::split_list(text)) s.modes.push_back(detail::parse_mode(m));
            } else if (k == "run.symbol_rates_hz") {
                s.symbol_rates_hz.clear();
                for (const auto& r : detail::split_list(text)) s.symbol_rates_hz.push_back(io::parse_double(r));
            } else if (k == "run.delayline_cdc") s.delayline_cdc = text == "true" || text == "1";
            else if (k == "tx.symbol_rate_hz") s.tx.symbol_rate_hz = num(v);
            else if (k == "tx.rolloff") s.tx.rolloff = num(v);
            else if (k == "tx.sim_rate_hz") s.tx.sim_rate_hz = num(v);
            else if (k == "tx.pdme_delay_s") s.tx.pdme_delay_s = num(v);
            else if (k == "tx.bandlimit_hz") s.tx.tx_bandlimit_hz = num(v);
            else if (k == "frame.qam_order") s.qam_order = std::stoi(text);
            else if (k == "frame.symbols") s.frame_symbols = std::stoull(text);
            else if (k == "frame.pilot_oh") s.pilot_oh = num(v);
            else if (k == "channel.dispersion_ps_nm_km") s.channel.dispersion_ps_nm_km = num(v);
            else if (k == "channel.length_km") s.channel.length_km = num(v);
            else if (k == "channel.carrier_wavelength_nm") s.channel.carrier_wavelength_nm = num(v);
            else if (k == "channel.snr_db") {
                if (text == "none") s.channel.snr_db.reset();
                else s.channel.snr_db = num(v);
            } else if (k == "channel.tx_linewidth_hz") s.channel.tx_linewidth_hz = num(v);
            else if (k == "channel.lo_linewidth_hz") s.channel.lo_linewidth_hz = num(v);
            else if (k == "channel.freq_offset_hz") s.channel.freq_offset_hz = num(v);
            else if (k == "channel.pol_rotation_rad") s.channel.pol_rotation_rad = num(v);
            else if (k == "fscr.gate_period_s") s.fscr.gate_period_s = num(v);
            else if (k == "fscr.gate_duty") s.fscr.gate_duty = num(v);
            else if (k == "fscr.gate_rise_s") s.fscr.gate_rise_s = num(v);
            else if (k == "fscr.tau_s") s.fscr.tau_s = num(v);
            else if (k == "fscr.lo_offset_lf_hz") s.fscr.lo_offsets_hz[0] = num(v);
            else if (k == "fscr.lo_offset_hf_hz") s.fscr.lo_offsets_hz[1] = num(v);
            else if (k == "fscr.delayline_km") s.fscr.delayline_km = num(v);
            else if (k == "fe.order") s.fe_order = std::stoi(text);
            else if (k == "fe.bandwidth_3db_hz") s.fe_3db_hz = num(v);
            else if (k == "fe.adc_rate_hz") s.fe.adc_rate_hz = num(v);
            else if (k == "fe.adc_bw_hz") s.fe.adc_bw_hz = num(v);
            else if (k == "fe.adc_bits") s.fe.adc_bits = std::stoi(text);
            else if (k == "fe.skew_s") {
                const auto parts = detail::split_list(text);
                require(parts.size() == 4, "fe.skew_s needs four values");
                for (std::size_t i = 0; i < 4; ++i) s.fe.skew_s[i] = io::parse_double(parts[i]);
            } else if (k == "eq.n_taps") s.eq.n_taps = std::stoull(text);
            else if (k == "eq.block_size") s.eq.block_size = std::stoull(text);
            else if (k == "eq.step_size") s.eq.step_size = num(v);
            else if (k == "eq.train_step_size") s.eq.train_step_size = num(v);
            else if (k == "eq.train_fraction") s.eq.train_fraction = num(v);
            else if (k == "eq.passes") s.eq.passes = std::stoi(text);
            else if (k == "eq.loop_bw") s.eq.loop_bw = num(v);
            else if (k == "eq.dpll_loop_bw") s.dpll_loop_bw = num(v);
            else if (k == "metrics.fec_threshold") s.metrics.fec_threshold = num(v);
            else if (k == "metrics.fec_oh") s.metrics.fec_oh = num(v);
            else if (k == "metrics.include_pilot") s.metrics.include_pilot = text == "true" || text == "1";
            else throw InvalidArgument("unknown config key: " + k);
        }
    }
    s.finalize();
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    boost::property_tree::ptree pt;
    try {
        boost::property_tree::read_ini(path.string(), pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    Scenario s = preset("paper");
    apply_config(s, pt);
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// One run

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Smallest q such that q * ratio is an integer (ratio rational with a small denominator).
inline std::size_t integer_quantum(double ratio) {
    for (std::size_t q = 1; q <= 4096; ++q) {
        const double v = static_cast<double>(q) * ratio;
        if (std::abs(v - std::round(v)) < 1e-9 * std::max(1.0, v)) return q;
    }
    throw InvalidArgument("rate ratio is not a small rational");
}

}  // namespace detail

/// Everything a run produces beyond its metrics (for tests and dumps).
struct RunArtifacts {
    std::optional<DualPolWaveform> tx;
    std::optional<Capture> capture;
    std::optional<BurstPair> bursts;
    std::optional<StitchReport> stitch_report;
    std::optional<DualPolWaveform> equalizer_input;
    AeqResult aeq;
    bool cycle_slip_suspected = false;
};

struct RunOptions {
    bool strip_truth = true;          // reconstruction never sees the gate timing
    bool genie_carrier = false;       // remove phase noise and frequency offset (reference runs)
    std::optional<double> trigger_fraction;  // position of the gate opening within the trigger slack, [0, 1]
};

/// Gate and record geometry of a scaled scenario at one symbol rate.
inline FscrParams compressed_gate(const Scenario& scaled_s, double symbol_rate_hz) {
    const FscrParams& p = scaled_s.fscr;
    const double period = 3.0 * static_cast<double>(scaled_s.frame_symbols) / symbol_rate_hz;
    return p.time_scaled(period / p.gate_period_s);
}

inline MetricsRecord run_once(const Scenario& s, double symbol_rate_hz, RxMode mode, RunArtifacts* art = nullptr,
                              const RunOptions& opt = {}) {
    const Scenario sc = s.scaled();
    const double rs = symbol_rate_hz / s.scale;
    const std::uint64_t base = detail::splitmix(s.seed ^ detail::splitmix(static_cast<std::uint64_t>(
                                                             std::llround(symbol_rate_hz / 1e6))));
    auto seed_of = [&](std::uint64_t tag) { return detail::splitmix(base + tag); };

    TxConfig tx = sc.tx;
    tx.symbol_rate_hz = rs;
    const QamFrame fx = generate_qam_frame(sc.qam_order, sc.frame_symbols, sc.pilot_oh, seed_of(1));
    const QamFrame fy = generate_qam_frame(sc.qam_order, sc.frame_symbols, sc.pilot_oh, seed_of(2));
    const std::size_t frame_len = samples_per_frame(sc.frame_symbols, rs, tx.sim_rate_hz);
    DualPolWaveform sig = polmux(modulate(fx, tx), fy, tx);
    sig = sig.map([&](const ComplexWaveform& w) { return periodic_extend(w, 3 * frame_len); });
    const DualPolWaveform tx_wave = sig;

    ChannelParams ch = sc.channel;
    if (opt.genie_carrier) {
        ch.tx_linewidth_hz = 0;
        ch.lo_linewidth_hz = 0;
        ch.freq_offset_hz = 0;
    }
    sig = apply_cd(sig, ch, +1);
    sig = rotate_polarization(sig, ch.pol_rotation_rad);
    if (ch.tx_linewidth_hz > 0) {
        const std::uint64_t pn = seed_of(3);
        sig = sig.map([&](const ComplexWaveform& w) { return add_phase_noise(w, ch.tx_linewidth_hz, pn); });
    }
    if (ch.snr_db) sig = add_awgn(sig, *ch.snr_db, rs, seed_of(4));

    FscrParams gp = compressed_gate(sc, rs);
    gp.lo_linewidth_hz = ch.lo_linewidth_hz;
    gp.lo_freq_offset_hz = ch.freq_offset_hz;
    const FrontEndModel& fe = sc.fe;

    Capture cap = [&] {
        if (mode == RxMode::CW) return cw_receive(sig, fe, ch.lo_linewidth_hz, ch.freq_offset_hz, seed_of(5));
        // The scope is triggered by the gate drive with a random delay inside the
        // slack, so neither burst straddles the record wrap (where the laser
        // phase walks are discontinuous).
        const double lo_t = gp.gate_rise_s / 2;
        const double hi_t = gp.gate_period_s - gp.tau_s - gp.open_duration_s() - gp.gate_rise_s / 2;
        require(hi_t >= lo_t, "run_once: gate leaves no trigger slack");
        double frac;
        if (opt.trigger_fraction) {
            frac = *opt.trigger_fraction;
        } else {
            std::mt19937_64 g(seed_of(6));
            frac = std::uniform_real_distribution<double>(0.0, 1.0)(g);
        }
        return fscr_receive(sig, gp, fe, ch, seed_of(5), lo_t + frac * (hi_t - lo_t));
    }();
    const Capture blind = opt.strip_truth ? cap.without_truth() : cap;

    const double sps2 = 2 * rs;
    DualPolWaveform eq_in = [&] {
        DualPolWaveform corrected = fe_correct(blind, fe);
        if (mode == RxMode::CW)
            return corrected.map([&](const ComplexWaveform& w) { return resample(w, sps2); });
        BurstDetectConfig bd;
        bd.length_quantum = detail::integer_quantum(sps2 / fe.adc_rate_hz);
        BurstPair pair = detect_bursts(corrected, gp, bd);
        if (art) art->bursts = pair;
        if (s.delayline_cdc) pair.hf = delayline_cdc(pair.hf, gp.delayline_km, ch, gp.lo_offsets_hz[1]);
        StitchConfig st;
        st.shifts_hz = gp.lo_offsets_hz;
        st.min_overlap_hz /= s.scale;
        auto [stitched, rep] = stitch(pair, st);
        if (art) art->stitch_report = rep;
        return stitched.map([&](const ComplexWaveform& w) { return resample(w, sps2); });
    }();
    eq_in = apply_cd(eq_in, ch, -1);

    EqualizerConfig eq = sc.eq;
    eq.rolloff = tx.rolloff;
    if (eq.edge_guard == 0) {
        const double spread = std::abs(dispersion_slope_s2(ch, ch.length_km)) * rs * (1 + tx.rolloff) * rs;
        eq.edge_guard = 2 * eq.n_taps + static_cast<std::size_t>(std::ceil(spread));
    }
    AeqResult aeq = aeq_equalize(eq_in, fx, fy, eq);

    std::array<CVec, 2> ordered;
    bool slip = false;
    const std::array<const QamFrame*, 2> frames{&fx, &fy};
    for (int p = 0; p < 2; ++p) {
        const auto& ep = aeq.pols[p];
        const PilotTrack track = pilot_track(*frames[p], ep.first_frame_index, ep.symbols.size());
        DpllResult d = dpll_recover(ep.symbols, track, s.dpll_loop_bw);
        slip = slip || d.cycle_slip_suspected;
        ordered[p] = to_frame_order(d.symbols, ep.first_frame_index, sc.frame_symbols);
    }
    MetricsRecord rec = compute_metrics(ordered[0], ordered[1], fx, fy, symbol_rate_hz, mode, s.metrics);

    if (art) {
        art->tx = tx_wave;
        art->capture = cap;
        art->equalizer_input = eq_in;
        art->aeq = std::move(aeq);
        art->cycle_slip_suspected = slip;
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepOptions {
    std::filesystem::path out_dir;     // empty: nothing written
    bool dump_stages = false;
    bool parallel = true;
};

inline std::string rate_tag(double rate_hz) {
    return std::to_string(static_cast<long long>(std::llround(rate_hz / 1e9))) + "GBd";
}

inline void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << kMetricsCsvHeader << '\n';
    for (const auto& r : rows) f << to_csv_row(r) << '\n';
}

inline std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot read " + path.string());
    std::string line;
    if (!std::getline(f, line) || line != kMetricsCsvHeader) throw FormatError("metrics.csv: bad header");
    std::vector<MetricsRecord> rows;
    while (std::getline(f, line))
        if (!line.empty()) rows.push_back(parse_csv_row(line));
    return rows;
}

inline void write_plot_data(const std::filesystem::path& path, const std::vector<MetricsRecord>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << "symbol_rate_gbaud\tmode\tsnr_db\n";
    for (const auto& r : rows)
        f << io::format_double(r.symbol_rate_hz / 1e9) << '\t' << to_string(r.mode) << '\t'
          << (r.error.empty() ? io::format_double(r.mean_snr_db()) : std::string("nan")) << '\n';
}

inline void dump_run(const std::filesystem::path& dir, const std::string& tag, const RunArtifacts& a) {
    std::filesystem::create_directories(dir);
    if (a.tx) io::save_fscw(dir / (tag + "_tx.fscw"), *a.tx);
    if (a.capture) {
        io::save_fscw(dir / (tag + "_capture.fscw"), a.capture->wave);
        std::ofstream m(dir / (tag + "_capture.meta"), std::ios::binary);
        io::write_key_values(m, capture_metadata(*a.capture));
    }
    if (a.equalizer_input) io::save_fscw(dir / (tag + "_eq_input.fscw"), *a.equalizer_input);
    if (a.stitch_report) {
        std::ofstream m(dir / (tag + "_stitch.meta"), std::ios::binary);
        io::write_key_values(m, a.stitch_report->to_key_values());
    }
}

/// One row per (rate, mode): rates ascending, CW before FSCR. Failed runs give
/// error rows; the sweep carries on.
inline std::vector<MetricsRecord> sweep(const Scenario& s, const SweepOptions& opt = {}) {
    s.validate();
    std::vector<RxMode> modes = s.modes;
    std::sort(modes.begin(), modes.end());
    modes.erase(std::unique(modes.begin(), modes.end()), modes.end());

    struct Job {
        double rate;
        RxMode mode;
    };
    std::vector<Job> jobs;
    for (double r : s.symbol_rates_hz)
        for (RxMode m : modes) jobs.push_back({r, m});

    auto run_job = [&](const Job& j) {
        RunArtifacts art;
        try {
            MetricsRecord rec = run_once(s, j.rate, j.mode, opt.dump_stages ? &art : nullptr);
            if (opt.dump_stages && !opt.out_dir.empty())
                dump_run(opt.out_dir / "dumps", rate_tag(j.rate) + "_" + to_string(j.mode), art);
            return rec;
        } catch (const std::exception& e) {
            MetricsRecord rec;
            rec.mode = j.mode;
            rec.symbol_rate_hz = j.rate;
            rec.error = e.what();
            return rec;
        }
    };

    std::vector<MetricsRecord> rows(jobs.size());
    if (opt.parallel) {
        std::vector<std::future<MetricsRecord>> fut;
        for (const auto& j : jobs) fut.push_back(std::async(std::launch::async, run_job, j));
        for (std::size_t i = 0; i < jobs.size(); ++i) rows[i] = fut[i].get();
    } else {
        for (std::size_t i = 0; i < jobs.size(); ++i) rows[i] = run_job(jobs[i]);
    }

    if (!opt.out_dir.empty()) {
        std::filesystem::create_directories(opt.out_dir);
        write_metrics_csv(opt.out_dir / "metrics.csv", rows);
        write_plot_data(opt.out_dir / "plotdata.tsv", rows);
    }
    return rows;
}

}  // namespace fscr
