#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vitals/csv.hpp"
#include "vitals/error.hpp"
#include "vitals/ingest.hpp"
#include "vitals/png_io.hpp"
#include "vitals/preprocess.hpp"
#include "vitals/rng.hpp"
#include "vitals/types.hpp"

namespace vitals {

// Piecewise-linear profile over session time (seconds), constant-extended
// outside the knot range. HR profiles integrate exactly (linear segments
// integrate to quadratics), which the waveform phase relies on.
struct PiecewiseLinear {
    std::vector<std::pair<double, double>> knots; // (t_seconds, value), t strictly increasing

    static PiecewiseLinear constant(double v) { return PiecewiseLinear{{{0.0, v}}}; }

    void validate() const {
        require(!knots.empty(), ErrorKind::Input, "profile needs at least one knot");
        for (std::size_t i = 1; i < knots.size(); ++i)
            require(knots[i - 1].first < knots[i].first, ErrorKind::Input,
                    "profile knots must have strictly increasing times");
    }

    double value(double t) const {
        if (t <= knots.front().first) return knots.front().second;
        if (t >= knots.back().first) return knots.back().second;
        std::size_t k = 0;
        while (knots[k + 1].first <= t) ++k; // t < last knot, so this terminates
        const auto& [t0, v0] = knots[k];
        const auto& [t1, v1] = knots[k + 1];
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
    }

    // Integral of the profile from 0 to t, constant-extended at both ends.
    double integral(double t) const {
        double acc = 0.0;
        double prev_t = 0.0;
        double prev_v = knots.front().second;
        if (t <= knots.front().first) return knots.front().second * t;
        if (knots.front().first > 0.0) {
            acc += knots.front().second * knots.front().first;
            prev_t = knots.front().first;
        }
        for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
            const double t1 = knots[k + 1].first;
            const double v0 = knots[k].second;
            const double v1 = knots[k + 1].second;
            if (t <= t1) {
                const double vt = value(t);
                acc += (v0 + vt) * 0.5 * (t - prev_t);
                return acc;
            }
            acc += (v0 + v1) * 0.5 * (t1 - prev_t);
            prev_t = t1;
            prev_v = v1;
        }
        acc += prev_v * (t - prev_t);
        return acc;
    }

    double min_value() const {
        double m = knots.front().second;
        for (const auto& [t, v] : knots) m = std::min(m, v);
        return m;
    }
    double max_value() const {
        double m = knots.front().second;
        for (const auto& [t, v] : knots) m = std::max(m, v);
        return m;
    }
};

// Calibration of the linear ratio-of-ratios model:
//   SpO2 = 110 - 25 * R,  R = (AC/DC)_red / (AC/DC)_green
// so R in [0.4, 1.2] spans SpO2 in [80, 100].
inline constexpr double kSpo2Intercept = 110.0;
inline constexpr double kSpo2Slope = 25.0;

inline double ratio_for_spo2(double spo2) { return (kSpo2Intercept - spo2) / kSpo2Slope; }
inline double spo2_for_ratio(double r) { return kSpo2Intercept - kSpo2Slope * r; }

struct SynthConfig {
    PiecewiseLinear hr_profile = PiecewiseLinear::constant(70.0);   // BPM
    PiecewiseLinear spo2_profile = PiecewiseLinear::constant(95.0); // percent
    double noise_std = 0.0; // pixel gaussian noise, [0,1] intensity units
    int frame_size = 64;
    double duration_s = 30.0;
    std::uint64_t seed = 0;
    double roi_fraction = 0.6;
    double acdc_green = 0.04;      // face green-channel AC/DC
    double finger_amp_scale = 3.0; // finger AC amplification vs face
    bool amp_couples_spo2 = false; // make pulsatile amplitude track SpO2

    void validate() const {
        hr_profile.validate();
        spo2_profile.validate();
        require(hr_profile.min_value() >= 40.0 && hr_profile.max_value() <= 190.0,
                ErrorKind::Input, "HR profile must stay within [40,190] BPM");
        require(spo2_profile.min_value() >= 80.0 && spo2_profile.max_value() <= 100.0,
                ErrorKind::Input, "SpO2 profile must stay within [80,100]");
        require(duration_s >= 10.0, ErrorKind::Input, "duration must be >= 10 s");
        require(frame_size >= 16, ErrorKind::Input, "frame size must be >= 16");
        require(noise_std >= 0.0, ErrorKind::Input, "noise std must be >= 0");
        require(roi_fraction > 0.0 && roi_fraction <= 1.0, ErrorKind::Input,
                "roi fraction must be in (0,1]");
        require(acdc_green > 0.0 && acdc_green < 0.2, ErrorKind::Input,
                "green AC/DC must be in (0,0.2)");
        require(finger_amp_scale > 0.0, ErrorKind::Input, "finger amp scale must be positive");
    }
};

// Cardiac phase in radians at time t: 2*pi/60 * integral of HR(u) du.
inline double bvp_phase(const PiecewiseLinear& hr_profile, double t_seconds) {
    return 2.0 * 3.14159265358979323846 / 60.0 * hr_profile.integral(t_seconds);
}

// Raw (unnormalized) pulse waveform: fundamental plus a 0.3-weight second
// harmonic standing in for the dicrotic notch.
inline double bvp_waveform_at(const PiecewiseLinear& hr_profile, double t_seconds,
                              double phase_offset) {
    const double phi = phase_offset + bvp_phase(hr_profile, t_seconds);
    return std::sin(phi) + 0.3 * std::sin(2.0 * phi);
}

// Unit-variance BVP waveform sampled at fs for `duration_s` seconds. The
// seed only randomizes the starting phase.
inline std::vector<double> gen_bvp(const PiecewiseLinear& hr_profile, double fs,
                                   double duration_s, std::uint64_t seed) {
    hr_profile.validate();
    require(hr_profile.min_value() >= 40.0 && hr_profile.max_value() <= 190.0, ErrorKind::Input,
            "HR profile must stay within [40,190] BPM");
    require(fs > 0.0 && duration_s > 0.0, ErrorKind::Input, "fs and duration must be positive");
    Rng rng(mix_seed(seed, {0x627670ULL}));
    const double phase0 = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * fs));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = bvp_waveform_at(hr_profile, static_cast<double>(i) / fs, phase0);
    const double sd = population_std(out);
    if (sd > 0.0)
        for (auto& v : out) v /= sd;
    return out;
}

namespace synthdetail {

inline std::int64_t video_timestamp_ms(std::size_t frame_index) {
    return static_cast<std::int64_t>(
        std::llround(static_cast<double>(frame_index) * 1000.0 / 60.0));
}

// Box-Muller pair so pixel noise costs one log/sqrt per two draws.
class GaussianSource {
public:
    explicit GaussianSource(Rng rng) : rng_(rng) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double two_pi = 6.283185307179586476925286766559;
        double u1 = 0.0;
        do {
            u1 = rng_.uniform01();
        } while (u1 <= 0.0);
        const double u2 = rng_.uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(two_pi * u2);
        has_spare_ = true;
        return r * std::cos(two_pi * u2);
    }

private:
    Rng rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct StreamPlan {
    Roi roi;
    std::array<double, 3> base; // DC intensity inside the ROI
    std::vector<double> static_field; // per-pixel DC component (dither/texture), H*W*3
};

// Static per-pixel field: inside the ROI the base color plus a sub-quantum
// dither (one 8-bit step peak-to-peak) so quantization averages out of the
// spatial mean; outside, an unstructured texture.
inline StreamPlan make_stream_plan(int size, const Roi& roi, const std::array<double, 3>& base,
                                   Rng rng) {
    StreamPlan plan;
    plan.roi = roi;
    plan.base = base;
    plan.static_field.resize(static_cast<std::size_t>(size) * size * 3);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const bool inside = x >= roi.x && x < roi.x + roi.w && y >= roi.y && y < roi.y + roi.h;
            for (int c = 0; c < 3; ++c) {
                const std::size_t i = (static_cast<std::size_t>(y) * size + x) * 3 + c;
                plan.static_field[i] = inside
                                           ? base[static_cast<std::size_t>(c)] +
                                                 rng.uniform(-0.5, 0.5) / 255.0
                                           : rng.uniform(0.2, 0.8);
            }
        }
    return plan;
}

inline std::uint8_t quantize(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

} // namespace synthdetail

struct SessionSummary {
    std::filesystem::path dir;
    std::size_t frames = 0;
    std::size_t bvp_samples = 0;
    std::size_t spo2_samples = 0;
    std::size_t rr_samples = 0;
};

// Render one session to disk in the exact ingest layout. Inside the signal
// ROI every channel carries base_c * (1 + acdc_c(t) * s(t)) where the
// red/green AC/DC ratio encodes SpO2 through the documented linear model;
// the finger stream is full-frame with `finger_amp_scale` times the face
// amplitude. Ground truth: bvp.csv at 20 Hz, spo2.csv at 1 Hz rounded to
// integer percent, rr.csv at 50 Hz.
inline SessionSummary render_session(const SynthConfig& config,
                                     const std::filesystem::path& session_dir) {
    namespace fs = std::filesystem;
    config.validate();
    std::error_code ec;
    fs::create_directories(session_dir / "face", ec);
    fs::create_directories(session_dir / "finger", ec);
    require(!ec, ErrorKind::Io, "cannot create " + session_dir.string());

    const int size = config.frame_size;
    const std::size_t n_frames =
        static_cast<std::size_t>(std::llround(config.duration_s * 60.0));

    // Waveform at the (rounded) video timestamps, unit variance over the clip.
    Rng phase_rng(mix_seed(config.seed, {0x627670ULL}));
    const double phase0 = phase_rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    std::vector<double> wave(n_frames);
    std::vector<std::int64_t> frame_ts(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        frame_ts[i] = synthdetail::video_timestamp_ms(i);
        wave[i] = bvp_waveform_at(config.hr_profile, static_cast<double>(frame_ts[i]) / 1000.0,
                                  phase0);
    }
    {
        const double sd = population_std(wave);
        if (sd > 0.0)
            for (auto& v : wave) v /= sd;
    }

    const std::array<double, 3> face_base{0.72, 0.50, 0.42};
    const std::array<double, 3> finger_base{0.62, 0.30, 0.26};
    const Roi face_roi = centered_roi(size, size, config.roi_fraction);
    const Roi finger_roi = full_frame_roi(size, size);

    synthdetail::StreamPlan face_plan = synthdetail::make_stream_plan(
        size, face_roi, face_base, Rng(mix_seed(config.seed, {0xface, 0x57a71cULL})));
    synthdetail::StreamPlan finger_plan = synthdetail::make_stream_plan(
        size, finger_roi, finger_base, Rng(mix_seed(config.seed, {0xf1a9e4ULL, 0x57a71cULL})));

    synthdetail::GaussianSource face_noise(Rng(mix_seed(config.seed, {0xface, 0x4015eULL})));
    synthdetail::GaussianSource finger_noise(
        Rng(mix_seed(config.seed, {0xf1a9e4ULL, 0x4015eULL})));

    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(size) * size * 3);

    auto render_stream = [&](const synthdetail::StreamPlan& plan, double amp_scale,
                             synthdetail::GaussianSource& noise, const fs::path& dir) {
        CsvWriter ts_csv(dir / kFrameTimestampCsv);
        ts_csv.row({"frame_index", "timestamp_ms"});
        for (std::size_t i = 0; i < n_frames; ++i) {
            const double t = static_cast<double>(frame_ts[i]) / 1000.0;
            const double spo2 = config.spo2_profile.value(t);
            const double amp_factor =
                config.amp_couples_spo2 ? 1.0 + 0.08 * (spo2 - 92.0) : 1.0;
            const double acdc_g = config.acdc_green * amp_factor * amp_scale;
            const double acdc_r = ratio_for_spo2(spo2) * acdc_g;
            const double acdc_b = 0.6 * acdc_g;
            const std::array<double, 3> sig{plan.base[0] * acdc_r * wave[i],
                                            plan.base[1] * acdc_g * wave[i],
                                            plan.base[2] * acdc_b * wave[i]};
            const Roi& roi = plan.roi;
            for (int y = 0; y < size; ++y) {
                const bool row_in = y >= roi.y && y < roi.y + roi.h;
                for (int x = 0; x < size; ++x) {
                    const bool inside = row_in && x >= roi.x && x < roi.x + roi.w;
                    const std::size_t base_i = (static_cast<std::size_t>(y) * size + x) * 3;
                    for (int c = 0; c < 3; ++c) {
                        double v = plan.static_field[base_i + c];
                        if (inside) v += sig[static_cast<std::size_t>(c)];
                        if (config.noise_std > 0.0) v += config.noise_std * noise.next();
                        pixels[base_i + c] = synthdetail::quantize(v);
                    }
                }
            }
            write_png_rgb8(dir / frame_file_name(static_cast<std::int64_t>(i)), size, size,
                           pixels.data());
            ts_csv.row({std::to_string(i), std::to_string(frame_ts[i])});
        }
        ts_csv.flush_and_check(dir.string());
    };

    render_stream(face_plan, 1.0, face_noise, session_dir / "face");
    render_stream(finger_plan, config.finger_amp_scale, finger_noise, session_dir / "finger");

    SessionSummary summary;
    summary.dir = session_dir;
    summary.frames = n_frames;

    const std::int64_t last_video_ms = frame_ts.back();

    // BVP at 20 Hz, unit variance over its own samples.
    {
        std::size_t n = static_cast<std::size_t>(config.duration_s * 20.0) + 1;
        while (static_cast<std::int64_t>(n - 1) * 50 < last_video_ms) ++n;
        std::vector<double> values(n);
        for (std::size_t i = 0; i < n; ++i)
            values[i] = bvp_waveform_at(config.hr_profile, static_cast<double>(i) / 20.0, phase0);
        const double sd = population_std(values);
        if (sd > 0.0)
            for (auto& v : values) v /= sd;
        CsvWriter w(session_dir / "bvp.csv");
        w.row({"timestamp_ms", "value"});
        for (std::size_t i = 0; i < n; ++i)
            w.row({std::to_string(i * 50), format_double(values[i])});
        w.flush_and_check("bvp.csv");
        summary.bvp_samples = n;
    }

    // SpO2 at 1 Hz, integer percent.
    {
        std::size_t n = static_cast<std::size_t>(config.duration_s) + 1;
        while (static_cast<std::int64_t>(n - 1) * 1000 < last_video_ms) ++n;
        CsvWriter w(session_dir / "spo2.csv");
        w.row({"timestamp_ms", "value"});
        for (std::size_t i = 0; i < n; ++i) {
            const double v = config.spo2_profile.value(static_cast<double>(i));
            w.row({std::to_string(i * 1000), std::to_string(std::llround(v))});
        }
        w.flush_and_check("spo2.csv");
        summary.spo2_samples = n;
    }

    // Respiration placeholder: 0.25 Hz sine at 50 Hz. Ingested and stored,
    // never predicted.
    {
        std::size_t n = static_cast<std::size_t>(config.duration_s * 50.0) + 1;
        while (static_cast<std::int64_t>(n - 1) * 20 < last_video_ms) ++n;
        CsvWriter w(session_dir / "rr.csv");
        w.row({"timestamp_ms", "value"});
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / 50.0;
            w.row({std::to_string(i * 20),
                   format_double(std::sin(2.0 * 3.14159265358979323846 * 0.25 * t))});
        }
        w.flush_and_check("rr.csv");
        summary.rr_samples = n;
    }
    return summary;
}

// The documented inversion oracle: per window, per channel, the ROI-mean
// trace's (population std / mean) estimates AC/DC; the red/green ratio maps
// back through spo2_for_ratio. Exact up to quantization for noiseless clips.
inline std::vector<double> invert_spo2_from_frames(const TimestampedFrameSequence& seq,
                                                   const Roi& roi, std::size_t window_frames,
                                                   std::size_t hop_frames) {
    require(window_frames >= 2 && hop_frames >= 1, ErrorKind::Input, "bad inversion window");
    require(seq.size() >= window_frames, ErrorKind::Input, "sequence shorter than window");
    validate_roi(roi, seq.height(), seq.width());

    // ROI-mean traces per channel.
    std::vector<std::array<double, 3>> trace(seq.size());
    const double inv_count = 1.0 / (static_cast<double>(roi.w) * roi.h);
    for (std::size_t f = 0; f < seq.size(); ++f) {
        std::array<double, 3> acc{0.0, 0.0, 0.0};
        for (int y = roi.y; y < roi.y + roi.h; ++y)
            for (int x = roi.x; x < roi.x + roi.w; ++x)
                for (int c = 0; c < 3; ++c) acc[static_cast<std::size_t>(c)] +=
                    seq.intensity(f, y, x, c);
        for (int c = 0; c < 3; ++c) trace[f][static_cast<std::size_t>(c)] =
            acc[static_cast<std::size_t>(c)] * inv_count;
    }

    std::vector<double> out;
    for (std::size_t start = 0; start + window_frames <= seq.size(); start += hop_frames) {
        std::array<double, 2> dc{0.0, 0.0}; // red, green
        for (std::size_t f = start; f < start + window_frames; ++f) {
            dc[0] += trace[f][0];
            dc[1] += trace[f][1];
        }
        dc[0] /= static_cast<double>(window_frames);
        dc[1] /= static_cast<double>(window_frames);
        std::array<double, 2> var{0.0, 0.0};
        for (std::size_t f = start; f < start + window_frames; ++f) {
            const double dr = trace[f][0] - dc[0];
            const double dg = trace[f][1] - dc[1];
            var[0] += dr * dr;
            var[1] += dg * dg;
        }
        const double ac_r = std::sqrt(var[0] / static_cast<double>(window_frames));
        const double ac_g = std::sqrt(var[1] / static_cast<double>(window_frames));
        require(ac_g > 0.0 && dc[0] > 0.0 && dc[1] > 0.0, ErrorKind::Degenerate,
                "inversion window has no green AC component");
        const double ratio = (ac_r / dc[0]) / (ac_g / dc[1]);
        out.push_back(spo2_for_ratio(ratio));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Protocol-shaped datasets
// ---------------------------------------------------------------------------

// Per-state profiles mirroring the collection protocol: rest, post-exercise
// (SpO2 dips below 92), rest, post-exercise with supplemental oxygen (SpO2
// recovers). Subject variation comes from the per-(subject,state) RNG.
inline SynthConfig protocol_state_config(const SynthConfig& base, std::uint64_t master_seed,
                                         std::size_t subject_index, ProtocolState state) {
    SynthConfig cfg = base;
    cfg.seed = mix_seed(master_seed, {0x5e551011ULL, subject_index,
                                      static_cast<std::uint64_t>(state)});
    Rng rng(mix_seed(cfg.seed, {0x9c0f11eULL}));
    const double dur = cfg.duration_s;
    const double u1 = rng.uniform01(), u2 = rng.uniform01(), u3 = rng.uniform01();
    switch (state) {
        case ProtocolState::State1:
        case ProtocolState::State3: {
            const double hr0 = 60.0 + 10.0 * u1;
            const double sp0 = 94.0 + 2.0 * u2;
            cfg.hr_profile = PiecewiseLinear{{{0.0, hr0}, {dur, hr0 + 3.0 + 3.0 * u3}}};
            cfg.spo2_profile = PiecewiseLinear{{{0.0, sp0}, {dur, sp0 + 0.5}}};
            break;
        }
        case ProtocolState::State2: {
            const double hr0 = 142.0 + 12.0 * u1;
            const double hr1 = 88.0 + 6.0 * u2;
            const double dip = 87.0 + 1.5 * u3; // below the 92 hypoxemia line
            cfg.hr_profile =
                PiecewiseLinear{{{0.0, hr0}, {0.45 * dur, hr1 + 2.0}, {dur, hr1}}};
            cfg.spo2_profile =
                PiecewiseLinear{{{0.0, 93.5}, {0.35 * dur, dip}, {dur, 91.0 + u1}}};
            break;
        }
        case ProtocolState::State4: {
            const double hr0 = 126.0 + 10.0 * u1;
            const double hr1 = 82.0 + 6.0 * u2;
            const double peak = 96.0 + 1.0 * u3; // oxygen recovery
            cfg.hr_profile =
                PiecewiseLinear{{{0.0, hr0}, {0.5 * dur, hr1 + 2.0}, {dur, hr1}}};
            cfg.spo2_profile =
                PiecewiseLinear{{{0.0, 91.5}, {0.4 * dur, peak}, {dur, peak + 0.5}}};
            break;
        }
    }
    return cfg;
}

inline std::string synth_subject_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "s%02llu", static_cast<unsigned long long>(index));
    return buf;
}

struct DatasetSummary {
    std::filesystem::path root;
    std::size_t sessions = 0;
    std::size_t frames = 0;
};

// Full protocol mirror: n_subjects x the requested states.
inline DatasetSummary gen_dataset(const std::filesystem::path& root, std::size_t n_subjects,
                                  const std::vector<ProtocolState>& states,
                                  const SynthConfig& config_template) {
    require(n_subjects >= 2, ErrorKind::Input, "dataset needs at least 2 subjects");
    require(!states.empty(), ErrorKind::Input, "dataset needs at least one state");
    DatasetSummary summary;
    summary.root = root;
    for (std::size_t s = 0; s < n_subjects; ++s) {
        for (ProtocolState state : states) {
            SynthConfig cfg =
                protocol_state_config(config_template, config_template.seed, s, state);
            const auto dir = root / synth_subject_id(s) / to_string(state);
            SessionSummary session = render_session(cfg, dir);
            summary.sessions += 1;
            summary.frames += session.frames;
        }
    }
    return summary;
}

inline std::vector<ProtocolState> all_protocol_states() {
    return {ProtocolState::State1, ProtocolState::State2, ProtocolState::State3,
            ProtocolState::State4};
}

} // namespace vitals
