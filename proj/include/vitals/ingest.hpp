#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "vitals/csv.hpp"
#include "vitals/error.hpp"
#include "vitals/png_io.hpp"
#include "vitals/types.hpp"

namespace vitals {

// On-disk session layout (all CSVs UTF-8, LF, '.' decimals):
//
//   <subject>/<state>/face/frame_%06d.png
//   <subject>/<state>/face/frames_timestamp.csv   header: frame_index,timestamp_ms
//   <subject>/<state>/finger/...                  same schema
//   <subject>/<state>/bvp.csv                     header: timestamp_ms,value
//   <subject>/<state>/spo2.csv
//   <subject>/<state>/rr.csv

inline constexpr const char* kFrameTimestampCsv = "frames_timestamp.csv";
inline constexpr const char* kFrameTimestampHeader = "frame_index,timestamp_ms";
inline constexpr const char* kSignalHeader = "timestamp_ms,value";

inline std::string frame_file_name(std::int64_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%06lld.png", static_cast<long long>(index));
    return buf;
}

// One recording with every stream on the 60 Hz video clock. All five streams
// share identical timestamps after synchronize().
struct SynchronizedSession {
    SessionMeta meta;
    TimestampedFrameSequence face;
    TimestampedFrameSequence finger;
    SignalSeries bvp_60hz;
    SignalSeries spo2_60hz;
    SignalSeries rr_60hz;

    std::size_t length() const { return face.size(); }
};

// Fixed-length training window cut from a synchronized session.
struct Chunk {
    Tensor face_clip;   // [T,H,W,3] intensities in [0,1]
    Tensor finger_clip; // [T,H,W,3]
    std::vector<double> bvp_label;
    std::vector<double> spo2_label;
    SessionMeta meta;
    std::size_t start_index = 0;
};

inline TimestampedFrameSequence load_frame_sequence(const std::filesystem::path& dir,
                                                    Modality modality,
                                                    double nominal_fps = 60.0) {
    namespace fs = std::filesystem;
    const fs::path csv_path = dir / kFrameTimestampCsv;
    require(fs::exists(csv_path), ErrorKind::Format,
            "missing " + std::string(kFrameTimestampCsv) + " in " + dir.string());
    auto rows = read_two_column_csv(csv_path, kFrameTimestampHeader);

    std::size_t png_count = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") ++png_count;
    }
    require(png_count == rows.size(), ErrorKind::Integrity,
            dir.string() + ": " + std::to_string(png_count) + " frame files but " +
                std::to_string(rows.size()) + " timestamp rows");

    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });

    std::vector<std::vector<std::uint8_t>> frames;
    std::vector<Timestamp> timestamps;
    frames.reserve(rows.size());
    timestamps.reserve(rows.size());
    int height = -1, width = -1;
    for (const auto& [index, ts_value] : rows) {
        RgbImage img = read_png_rgb8(dir / frame_file_name(index));
        if (height < 0) {
            height = img.height;
            width = img.width;
        } else {
            require(img.height == height && img.width == width, ErrorKind::Integrity,
                    dir.string() + ": frames disagree on resolution");
        }
        frames.push_back(std::move(img.pixels));
        timestamps.push_back({static_cast<std::int64_t>(ts_value)});
    }
    // The sequence constructor re-checks monotonicity and reports duplicates.
    return TimestampedFrameSequence(modality, height, width, std::move(frames),
                                    std::move(timestamps), nominal_fps);
}

inline SignalSeries load_signal_csv(const std::filesystem::path& path, SignalKind kind,
                                    double nominal_hz) {
    auto rows = read_two_column_csv(path, kSignalHeader);
    std::vector<double> values;
    std::vector<Timestamp> timestamps;
    values.reserve(rows.size());
    timestamps.reserve(rows.size());
    for (const auto& [ts, value] : rows) {
        timestamps.push_back({ts});
        values.push_back(value);
    }
    return SignalSeries(kind, std::move(values), std::move(timestamps), nominal_hz);
}

// Piecewise-linear interpolation of `series` at exactly `target_timestamps`.
// Requests outside [first, last] source timestamp are refused rather than
// extrapolated.
inline SignalSeries resample_linear(const SignalSeries& series, double target_hz,
                                    const std::vector<Timestamp>& target_timestamps) {
    require(series.size() >= 2, ErrorKind::Input, "resample needs at least 2 source samples");
    const auto& ts = series.timestamps();
    const auto& vs = series.values();

    std::vector<double> out;
    out.reserve(target_timestamps.size());
    std::size_t seg = 0; // current source segment [seg, seg+1]
    for (const Timestamp& t : target_timestamps) {
        require(t >= ts.front() && t <= ts.back(), ErrorKind::Range,
                "resample target " + std::to_string(t.millis) +
                    " ms outside source range [" + std::to_string(ts.front().millis) + ", " +
                    std::to_string(ts.back().millis) + "] ms");
        while (seg + 2 < ts.size() && ts[seg + 1] < t) ++seg;
        if (t == ts[seg]) {
            out.push_back(vs[seg]);
            continue;
        }
        if (t == ts[seg + 1]) {
            out.push_back(vs[seg + 1]);
            continue;
        }
        const double t0 = static_cast<double>(ts[seg].millis);
        const double t1 = static_cast<double>(ts[seg + 1].millis);
        const double a = (static_cast<double>(t.millis) - t0) / (t1 - t0);
        out.push_back(vs[seg] + (vs[seg + 1] - vs[seg]) * a);
    }
    return SignalSeries(series.kind(), std::move(out), target_timestamps, target_hz);
}

namespace detail {

// Nearest element of `haystack` for each of `needles` (both sorted).
inline std::vector<std::size_t> nearest_indices(const std::vector<Timestamp>& needles,
                                                const std::vector<Timestamp>& haystack) {
    std::vector<std::size_t> out;
    out.reserve(needles.size());
    std::size_t j = 0;
    for (const Timestamp& t : needles) {
        while (j + 1 < haystack.size() &&
               std::llabs(haystack[j + 1].millis - t.millis) <=
                   std::llabs(haystack[j].millis - t.millis))
            ++j;
        out.push_back(j);
    }
    return out;
}

} // namespace detail

// Align all five streams onto the face camera clock. Finger frames are
// matched nearest-neighbor within `tolerance_ms` and re-stamped; signals are
// linearly resampled onto the master timestamps; master samples outside the
// common time range are trimmed.
inline SynchronizedSession synchronize(const SessionMeta& meta,
                                       const TimestampedFrameSequence& face,
                                       const TimestampedFrameSequence& finger,
                                       const SignalSeries& bvp, const SignalSeries& spo2,
                                       const SignalSeries& rr,
                                       std::int64_t tolerance_ms = 25) {
    require(face.size() >= 2 && finger.size() >= 2, ErrorKind::Input,
            "synchronize needs at least 2 frames per stream");
    require(bvp.size() >= 2 && spo2.size() >= 2 && rr.size() >= 2, ErrorKind::Input,
            "synchronize needs at least 2 samples per signal");

    const std::int64_t start = std::max({face.timestamps().front().millis,
                                         finger.timestamps().front().millis,
                                         bvp.first_timestamp().millis,
                                         spo2.first_timestamp().millis,
                                         rr.first_timestamp().millis});
    const std::int64_t end = std::min({face.timestamps().back().millis,
                                       finger.timestamps().back().millis,
                                       bvp.last_timestamp().millis,
                                       spo2.last_timestamp().millis,
                                       rr.last_timestamp().millis});
    require(end - start >= 1000, ErrorKind::Input,
            "streams overlap for less than 1 s (" + std::to_string(end - start) + " ms)");

    // Master clock: face timestamps inside the common range.
    std::vector<std::size_t> face_keep;
    std::vector<Timestamp> master;
    for (std::size_t i = 0; i < face.size(); ++i) {
        const Timestamp t = face.timestamps()[i];
        if (t.millis >= start && t.millis <= end) {
            face_keep.push_back(i);
            master.push_back(t);
        }
    }
    require(master.size() >= 2, ErrorKind::Input, "no usable master timestamps after trimming");

    auto finger_match = detail::nearest_indices(master, finger.timestamps());
    std::vector<std::pair<std::int64_t, std::int64_t>> gaps;
    for (std::size_t i = 0; i < master.size(); ++i) {
        const std::int64_t gap =
            std::llabs(finger.timestamps()[finger_match[i]].millis - master[i].millis);
        if (gap > tolerance_ms) gaps.emplace_back(master[i].millis, gap);
    }
    if (!gaps.empty()) {
        std::string msg = "finger stream has no frame within " + std::to_string(tolerance_ms) +
                          " ms of " + std::to_string(gaps.size()) + " master timestamp(s); first at " +
                          std::to_string(gaps.front().first) + " ms (nearest " +
                          std::to_string(gaps.front().second) + " ms away), last at " +
                          std::to_string(gaps.back().first) + " ms";
        raise(ErrorKind::SyncGap, msg);
    }

    TimestampedFrameSequence face_sync = face.select(face_keep, master);
    TimestampedFrameSequence finger_sync = finger.select(finger_match, master);

    SignalSeries bvp60 = resample_linear(bvp, face.nominal_fps(), master);
    SignalSeries spo260 = resample_linear(spo2, face.nominal_fps(), master);
    SignalSeries rr60 = resample_linear(rr, face.nominal_fps(), master);

    return SynchronizedSession{meta, std::move(face_sync), std::move(finger_sync),
                               std::move(bvp60), std::move(spo260), std::move(rr60)};
}

// Cut fixed-length windows: floor((N - chunk_len) / stride) + 1 chunks, label
// slices indexed identically to the frame slices.
inline std::vector<Chunk> chunk_session(const SynchronizedSession& session,
                                        std::size_t chunk_len, std::size_t stride) {
    const std::size_t n = session.length();
    require(stride >= 1, ErrorKind::Input, "stride must be >= 1");
    require(chunk_len >= 2, ErrorKind::Input, "chunk length must be >= 2");
    require(chunk_len <= n, ErrorKind::Input,
            "chunk length " + std::to_string(chunk_len) + " exceeds session length " +
                std::to_string(n));

    std::vector<Chunk> chunks;
    for (std::size_t start = 0; start + chunk_len <= n; start += stride) {
        Chunk c;
        c.face_clip = session.face.clip_tensor(start, chunk_len);
        c.finger_clip = session.finger.clip_tensor(start, chunk_len);
        c.bvp_label.assign(session.bvp_60hz.values().begin() + static_cast<long>(start),
                           session.bvp_60hz.values().begin() + static_cast<long>(start + chunk_len));
        c.spo2_label.assign(session.spo2_60hz.values().begin() + static_cast<long>(start),
                            session.spo2_60hz.values().begin() + static_cast<long>(start + chunk_len));
        c.meta = session.meta;
        c.start_index = start;
        chunks.push_back(std::move(c));
    }
    return chunks;
}

// Load one <subject>/<state> session directory and synchronize it.
inline SynchronizedSession load_session(const std::filesystem::path& session_dir,
                                        std::int64_t tolerance_ms = 25) {
    namespace fs = std::filesystem;
    SessionMeta meta;
    meta.state = protocol_state_from_string(session_dir.filename().string());
    meta.subject_id = session_dir.parent_path().filename().string();

    TimestampedFrameSequence face = load_frame_sequence(session_dir / "face", Modality::Face);
    TimestampedFrameSequence finger =
        load_frame_sequence(session_dir / "finger", Modality::Finger);
    SignalSeries bvp = load_signal_csv(session_dir / "bvp.csv", SignalKind::Bvp, 20.0);
    SignalSeries spo2 = load_signal_csv(session_dir / "spo2.csv", SignalKind::Spo2, 1.0);
    SignalSeries rr = load_signal_csv(session_dir / "rr.csv", SignalKind::Respiration, 50.0);

    meta.duration_s =
        static_cast<double>(face.timestamps().back().millis - face.timestamps().front().millis) /
        1000.0;
    require(meta.duration_s > 0.0, ErrorKind::Validation, "session duration must be positive");
    return synchronize(meta, face, finger, bvp, spo2, rr, tolerance_ms);
}

// All <subject>/<state> directories under a dataset root, sorted.
inline std::vector<std::filesystem::path> list_session_dirs(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    require(fs::exists(root), ErrorKind::Io, "dataset root " + root.string() + " does not exist");
    std::vector<fs::path> dirs;
    for (const auto& subject : fs::directory_iterator(root)) {
        if (!subject.is_directory()) continue;
        for (const auto& state : fs::directory_iterator(subject.path())) {
            if (!state.is_directory()) continue;
            if (fs::exists(state.path() / "bvp.csv")) dirs.push_back(state.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

} // namespace vitals
