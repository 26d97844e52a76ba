#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "vitals/dsp.hpp"
#include "vitals/error.hpp"
#include "vitals/ingest.hpp"
#include "vitals/rng.hpp"

namespace vitals {

// Heart-rate band: 36..198 BPM. Wide enough for the post-exercise plateau
// sessions, narrow enough to reject respiration and flicker.
inline constexpr double kHrBandLoHz = 0.6;
inline constexpr double kHrBandHiHz = 3.3;

// Zero-padding floor for the HR periodogram; 60 Hz / 2^18 bins = 0.014 BPM
// resolution.
inline constexpr std::size_t kHrFftMinLength = 1u << 18;

struct HrEstimate {
    double bpm = 0.0;
    double peak_power_ratio = 0.0; // peak bin power / total in-band power
};

// Zero-phase bandpass by FFT masking: remove the mean, transform on a
// power-of-two buffer at least twice the signal length, zero every bin
// outside [lo_hz, hi_hz], inverse transform, truncate. Length preserved.
inline std::vector<double> bandpass(const std::vector<double>& signal, double fs, double lo_hz,
                                    double hi_hz) {
    require(!signal.empty(), ErrorKind::Input, "bandpass needs a non-empty signal");
    require(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fs / 2.0, ErrorKind::Input,
            "band must satisfy 0 < lo < hi < fs/2");

    const std::size_t n = signal.size();
    const std::size_t n_fft = next_pow2(2 * n);
    double mean = 0.0;
    for (double v : signal) mean += v;
    mean /= static_cast<double>(n);

    std::vector<std::complex<double>> buf(n_fft, {0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) buf[i] = {signal[i] - mean, 0.0};
    fft_inplace(buf, false);

    for (std::size_t k = 0; k <= n_fft / 2; ++k) {
        const double f = static_cast<double>(k) * fs / static_cast<double>(n_fft);
        if (f < lo_hz || f > hi_hz) {
            buf[k] = {0.0, 0.0};
            if (k != 0 && k != n_fft / 2) buf[n_fft - k] = {0.0, 0.0};
        }
    }
    fft_inplace(buf, true);

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real();
    return out;
}

// Heart rate as the argmax of a zero-padded periodogram restricted to the
// band; requires at least five seconds of signal.
inline HrEstimate estimate_hr_fft(const std::vector<double>& bvp, double fs,
                                  double lo_hz = kHrBandLoHz, double hi_hz = kHrBandHiHz) {
    require(fs > 0.0, ErrorKind::Input, "sampling rate must be positive");
    require(static_cast<double>(bvp.size()) >= 5.0 * fs, ErrorKind::Input,
            "HR estimation needs at least 5 s of signal (" + std::to_string(bvp.size()) +
                " samples at " + std::to_string(fs) + " Hz)");
    require(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fs / 2.0, ErrorKind::Input,
            "band must satisfy 0 < lo < hi < fs/2");

    const std::size_t n_fft = std::max(kHrFftMinLength, next_pow2(bvp.size()));
    double mean = 0.0;
    for (double v : bvp) mean += v;
    mean /= static_cast<double>(bvp.size());
    std::vector<double> centered(bvp.size());
    for (std::size_t i = 0; i < bvp.size(); ++i) centered[i] = bvp[i] - mean;

    auto spectrum = fft_real_padded(centered, n_fft);

    double peak_power = -1.0;
    double total_power = 0.0;
    std::size_t peak_bin = 0;
    const std::size_t k_lo =
        static_cast<std::size_t>(std::ceil(lo_hz * static_cast<double>(n_fft) / fs));
    const std::size_t k_hi =
        static_cast<std::size_t>(std::floor(hi_hz * static_cast<double>(n_fft) / fs));
    for (std::size_t k = k_lo; k <= k_hi && k < n_fft / 2; ++k) {
        const double p = std::norm(spectrum[k]);
        total_power += p;
        if (p > peak_power) {
            peak_power = p;
            peak_bin = k;
        }
    }
    require(peak_bin != 0, ErrorKind::Input, "no spectral content inside the band");

    HrEstimate est;
    est.bpm = 60.0 * static_cast<double>(peak_bin) * fs / static_cast<double>(n_fft);
    est.peak_power_ratio = total_power > 0.0 ? peak_power / total_power : 0.0;
    return est;
}

// ---------------------------------------------------------------------------
// Error metrics
// ---------------------------------------------------------------------------

inline double mae(const std::vector<double>& pred, const std::vector<double>& gt) {
    require(pred.size() == gt.size(), ErrorKind::Input, "MAE length mismatch");
    require(!pred.empty(), ErrorKind::Input, "MAE needs at least one pair");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - gt[i]);
    return acc / static_cast<double>(pred.size());
}

inline double mape(const std::vector<double>& pred, const std::vector<double>& gt) {
    require(pred.size() == gt.size(), ErrorKind::Input, "MAPE length mismatch");
    require(!pred.empty(), ErrorKind::Input, "MAPE needs at least one pair");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        require(gt[i] != 0.0, ErrorKind::Input, "MAPE undefined for zero ground truth");
        acc += std::abs(pred[i] - gt[i]) / std::abs(gt[i]);
    }
    return acc / static_cast<double>(pred.size()) * 100.0;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size(), ErrorKind::Input, "Pearson length mismatch");
    require(x.size() >= 2, ErrorKind::Input, "Pearson needs at least 2 pairs");
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    require(sxx > 0.0 && syy > 0.0, ErrorKind::Degenerate,
            "Pearson undefined for constant input");
    double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Split protocol
// ---------------------------------------------------------------------------

enum class SplitMode {
    IntraRandom, // seeded 80/20 session split, no validation set
    StateSplit,  // subject-disjoint test; states {1,3,4} train, state 2 validation
};

inline const char* to_string(SplitMode m) {
    return m == SplitMode::IntraRandom ? "intra_random" : "state_split";
}

inline SplitMode split_mode_from_string(const std::string& s) {
    if (s == "intra_random") return SplitMode::IntraRandom;
    if (s == "state_split") return SplitMode::StateSplit;
    raise(ErrorKind::Format, "unknown split mode '" + s + "'");
}

struct SplitResult {
    std::vector<std::size_t> train; // indices into the session list
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

// Splits session indices by their metadata. StateSplit holds out
// `test_fraction` of the subjects entirely, then uses states {1,3,4} of the
// remaining subjects for training and state 2 for validation. IntraRandom is
// a seeded 80/20 session split with no validation set.
inline SplitResult split_protocol(const std::vector<SessionMeta>& sessions, SplitMode mode,
                                  std::uint64_t seed, double test_fraction = 0.2) {
    require(!sessions.empty(), ErrorKind::Input, "split needs at least one session");
    require(test_fraction > 0.0 && test_fraction < 1.0, ErrorKind::Range,
            "test fraction must be in (0,1)");
    SplitResult result;
    Rng rng(mix_seed(seed, {0x73706c6974ULL}));

    if (mode == SplitMode::IntraRandom) {
        std::vector<std::size_t> order(sessions.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        std::size_t n_test = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(sessions.size())));
        n_test = std::clamp<std::size_t>(n_test, 1, sessions.size() - 1);
        result.test.assign(order.begin(), order.begin() + static_cast<long>(n_test));
        result.train.assign(order.begin() + static_cast<long>(n_test), order.end());
        std::sort(result.test.begin(), result.test.end());
        std::sort(result.train.begin(), result.train.end());
        return result;
    }

    std::set<std::string> subject_set;
    for (const auto& s : sessions) subject_set.insert(s.subject_id);
    std::vector<std::string> subjects(subject_set.begin(), subject_set.end());
    require(subjects.size() >= 2, ErrorKind::Input,
            "state split needs at least 2 subjects for a disjoint test set");
    rng.shuffle(subjects);
    std::size_t n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(subjects.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, subjects.size() - 1);
    std::set<std::string> test_subjects(subjects.begin(),
                                        subjects.begin() + static_cast<long>(n_test));

    for (std::size_t i = 0; i < sessions.size(); ++i) {
        const SessionMeta& meta = sessions[i];
        if (test_subjects.count(meta.subject_id)) {
            result.test.push_back(i);
        } else if (meta.state == ProtocolState::State2) {
            result.val.push_back(i);
        } else {
            result.train.push_back(i);
        }
    }
    require(!result.train.empty(), ErrorKind::Input, "state split produced an empty train set");
    return result;
}

// Round half to even at the given number of decimals (the report precision).
inline double round_half_even(double v, int decimals) {
    double scale = std::pow(10.0, decimals);
    double scaled = v * scale;
    double r = std::nearbyint(scaled); // FE_TONEAREST: ties to even
    return r / scale;
}

} // namespace vitals
