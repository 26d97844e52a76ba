#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "test_util.hpp"
#include "vitals/vitals.hpp"

using namespace vitals;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    os << text;
}

// Frame directory with constant-color frames and a timestamp CSV.
void write_frame_dir(const fs::path& dir, const std::vector<std::int64_t>& timestamps,
                     int size = 4, std::uint8_t value = 100) {
    fs::create_directories(dir);
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(size) * size * 3, value);
    std::string csv = std::string(kFrameTimestampHeader) + "\n";
    for (std::size_t i = 0; i < timestamps.size(); ++i) {
        write_png_rgb8(dir / frame_file_name(static_cast<std::int64_t>(i)), size, size,
                       pixels.data());
        csv += std::to_string(i) + "," + std::to_string(timestamps[i]) + "\n";
    }
    write_text(dir / kFrameTimestampCsv, csv);
}

TimestampedFrameSequence make_sequence(Modality m, const std::vector<std::int64_t>& ts,
                                       int size = 4, std::uint8_t value = 100) {
    std::vector<std::vector<std::uint8_t>> frames(
        ts.size(), std::vector<std::uint8_t>(static_cast<std::size_t>(size) * size * 3, value));
    std::vector<Timestamp> stamps;
    for (auto t : ts) stamps.push_back({t});
    return TimestampedFrameSequence(m, size, size, std::move(frames), std::move(stamps), 60.0);
}

SignalSeries ramp_series(SignalKind kind, std::int64_t step_ms, std::size_t n, double hz) {
    std::vector<double> values(n);
    std::vector<Timestamp> ts(n);
    for (std::size_t i = 0; i < n; ++i) {
        values[i] = static_cast<double>(i);
        ts[i] = {static_cast<std::int64_t>(i) * step_ms};
    }
    return SignalSeries(kind, std::move(values), std::move(ts), hz);
}

std::vector<std::int64_t> video_clock(std::size_t n) {
    std::vector<std::int64_t> ts(n);
    for (std::size_t i = 0; i < n; ++i)
        ts[i] = static_cast<std::int64_t>(std::llround(i * 1000.0 / 60.0));
    return ts;
}

} // namespace

TEST(LoadFrames, DirectLoad) {
    const fs::path dir = testutil::fresh_dir("frames_direct");
    write_frame_dir(dir, {0, 17, 33});
    auto seq = load_frame_sequence(dir, Modality::Face);
    EXPECT_EQ(seq.size(), 3u);
    EXPECT_EQ(seq.timestamps()[2].millis, 33);
    EXPECT_EQ(seq.height(), 4);
}

TEST(LoadFrames, MissingCsvIsFormatError) {
    const fs::path dir = testutil::fresh_dir("frames_nocsv");
    fs::create_directories(dir);
    try {
        load_frame_sequence(dir, Modality::Face);
        FAIL() << "expected format error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Format);
    }
}

TEST(LoadFrames, CountMismatchIsIntegrityError) {
    const fs::path dir = testutil::fresh_dir("frames_mismatch");
    write_frame_dir(dir, {0, 17, 33});
    // one extra frame file not covered by the CSV
    std::vector<std::uint8_t> pixels(4 * 4 * 3, 5);
    write_png_rgb8(dir / frame_file_name(3), 4, 4, pixels.data());
    try {
        load_frame_sequence(dir, Modality::Face);
        FAIL() << "expected integrity error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Integrity);
    }
}

TEST(LoadFrames, NonMonotoneTimestampsRejected) {
    const fs::path dir = testutil::fresh_dir("frames_nonmono");
    write_frame_dir(dir, {0, 17, 17});
    EXPECT_THROW(load_frame_sequence(dir, Modality::Face), Error);
}

TEST(LoadSignal, BasicAndErrors) {
    const fs::path dir = testutil::fresh_dir("signal_csv");
    write_text(dir / "bvp.csv", "timestamp_ms,value\n0,0.5\n50,-0.25\n100,1\n");
    auto series = load_signal_csv(dir / "bvp.csv", SignalKind::Bvp, 20.0);
    EXPECT_EQ(series.size(), 3u);
    EXPECT_DOUBLE_EQ(series.values()[1], -0.25);

    write_text(dir / "spo2.csv", "timestamp_ms,value\n0,95\n1000,105\n");
    try {
        load_signal_csv(dir / "spo2.csv", SignalKind::Spo2, 1.0);
        FAIL() << "expected validation error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Validation);
    }

    write_text(dir / "bad.csv", "timestamp_ms,value\n0,0.5\nfifty,1\n");
    try {
        load_signal_csv(dir / "bad.csv", SignalKind::Bvp, 20.0);
        FAIL() << "expected format error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Format);
        EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
    }

    write_text(dir / "badheader.csv", "time,value\n0,1\n");
    EXPECT_THROW(load_signal_csv(dir / "badheader.csv", SignalKind::Bvp, 20.0), Error);
}

TEST(LoadSignal, TwentyHzMinuteFileHas1200Samples) {
    const fs::path dir = testutil::fresh_dir("signal_minute");
    std::string csv = "timestamp_ms,value\n";
    const double hz = 20.0, seconds = 60.0;
    const std::size_t n = static_cast<std::size_t>(hz * seconds); // count = duration x rate
    for (std::size_t i = 0; i < n; ++i)
        csv += std::to_string(i * 50) + "," + format_double(std::sin(0.1 * i)) + "\n";
    write_text(dir / "bvp.csv", csv);
    auto series = load_signal_csv(dir / "bvp.csv", SignalKind::Bvp, hz);
    EXPECT_EQ(series.size(), 1200u);
    EXPECT_DOUBLE_EQ(series.nominal_hz(), 20.0);
}

TEST(Resample, ConstantPreserved) {
    SignalSeries src(SignalKind::Spo2, std::vector<double>(20, 95.0),
                     [] {
                         std::vector<Timestamp> ts;
                         for (int i = 0; i < 20; ++i) ts.push_back({i * 50});
                         return ts;
                     }(),
                     20.0);
    std::vector<Timestamp> target;
    for (int i = 0; i < 57; ++i) target.push_back({i * 16});
    auto out = resample_linear(src, 60.0, target);
    ASSERT_EQ(out.size(), 57u);
    for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 95.0);
}

TEST(Resample, MidpointOfSegment) {
    SignalSeries src(SignalKind::Bvp, {0.0, 1.0}, {{0}, {50}}, 20.0);
    auto out = resample_linear(src, 60.0, {{25}});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_DOUBLE_EQ(out.values()[0], 0.5);
}

TEST(Resample, SineUpsampleMatchesAnalytic) {
    // 1 Hz sine sampled at 20 Hz, resampled to the 60 Hz video clock; oracle
    // is the closed-form sine. Piecewise-linear interpolation has an error
    // floor of (w*h)^2 / 8 ~= 0.0123 for this rate pair, so that is the
    // bound that can actually be promised.
    const double pi = 3.14159265358979323846;
    std::vector<double> values;
    std::vector<Timestamp> ts;
    for (int i = 0; i <= 200; ++i) {
        ts.push_back({i * 50});
        values.push_back(std::sin(2.0 * pi * 1.0 * (i * 50) / 1000.0));
    }
    SignalSeries src(SignalKind::Bvp, values, ts, 20.0);
    std::vector<Timestamp> target;
    for (auto t : video_clock(598)) target.push_back({t});
    auto out = resample_linear(src, 60.0, target);
    double max_err = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double truth = std::sin(2.0 * pi * target[i].millis / 1000.0);
        max_err = std::max(max_err, std::abs(out.values()[i] - truth));
    }
    EXPECT_LT(max_err, 0.0123);
    EXPECT_GT(max_err, 0.0);
}

TEST(Resample, IdentityOnOwnTimestamps) {
    Rng rng(3);
    std::vector<double> values = rng.uniform_vec(-5.0, 5.0, 40);
    std::vector<Timestamp> ts;
    for (int i = 0; i < 40; ++i) ts.push_back({i * 50});
    SignalSeries src(SignalKind::Bvp, values, ts, 20.0);
    auto out = resample_linear(src, 20.0, ts);
    for (std::size_t i = 0; i < values.size(); ++i) EXPECT_EQ(out.values()[i], values[i]);
}

TEST(Resample, OutputBoundedByInputRange) {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> values = rng.uniform_vec(-3.0, 3.0, 15);
        std::vector<Timestamp> ts;
        for (int i = 0; i < 15; ++i) ts.push_back({i * 40});
        SignalSeries src(SignalKind::Bvp, values, ts, 25.0);
        std::vector<Timestamp> target;
        for (int i = 0; i < 100; ++i)
            target.push_back({static_cast<std::int64_t>(rng.below(561))});
        std::sort(target.begin(), target.end());
        target.erase(std::unique(target.begin(), target.end(),
                                 [](Timestamp a, Timestamp b) { return a.millis == b.millis; }),
                     target.end());
        auto out = resample_linear(src, 25.0, target);
        const double lo = *std::min_element(values.begin(), values.end());
        const double hi = *std::max_element(values.begin(), values.end());
        for (double v : out.values()) {
            ASSERT_GE(v, lo - 1e-12);
            ASSERT_LE(v, hi + 1e-12);
        }
    }
}

TEST(Resample, ErrorsOnExtrapolationAndShortInput) {
    SignalSeries src(SignalKind::Bvp, {0.0, 1.0}, {{100}, {200}}, 10.0);
    try {
        resample_linear(src, 10.0, {{99}});
        FAIL() << "expected range error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Range);
    }
    EXPECT_THROW(resample_linear(src, 10.0, {{201}}), Error);
    SignalSeries single(SignalKind::Bvp, {1.0}, {{0}}, 10.0);
    try {
        resample_linear(single, 10.0, {{0}});
        FAIL() << "expected input error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Input);
    }
}

namespace {

SynchronizedSession make_synced(std::size_t n_frames) {
    auto ts = video_clock(n_frames);
    auto face = make_sequence(Modality::Face, ts);
    auto finger = make_sequence(Modality::Finger, ts);
    const std::int64_t last = ts.back();
    auto bvp = ramp_series(SignalKind::Bvp, 50, static_cast<std::size_t>(last / 50) + 2, 20.0);
    auto spo2 =
        SignalSeries(SignalKind::Spo2, std::vector<double>(static_cast<std::size_t>(last / 1000) + 2, 95.0),
                     [&] {
                         std::vector<Timestamp> t;
                         for (std::size_t i = 0; i < static_cast<std::size_t>(last / 1000) + 2; ++i)
                             t.push_back({static_cast<std::int64_t>(i) * 1000});
                         return t;
                     }(),
                     1.0);
    auto rr = ramp_series(SignalKind::Respiration, 20, static_cast<std::size_t>(last / 20) + 2, 50.0);
    SessionMeta meta{"s00", ProtocolState::State1, n_frames / 60.0};
    return synchronize(meta, face, finger, bvp, spo2, rr, 25);
}

} // namespace

TEST(Synchronize, AlreadyAlignedKeepsEverything) {
    auto session = make_synced(120);
    EXPECT_EQ(session.length(), 120u);
    EXPECT_EQ(session.face.timestamps(), session.finger.timestamps());
    EXPECT_EQ(session.bvp_60hz.size(), 120u);
    EXPECT_EQ(session.spo2_60hz.size(), 120u);
    EXPECT_EQ(session.rr_60hz.size(), 120u);
}

TEST(Synchronize, OffsetWithinToleranceMatchesNearest) {
    auto ts = video_clock(120);
    auto face = make_sequence(Modality::Face, ts);
    std::vector<std::int64_t> finger_ts;
    for (auto t : ts) finger_ts.push_back(t + 10);
    auto finger = make_sequence(Modality::Finger, finger_ts);
    auto bvp = ramp_series(SignalKind::Bvp, 50, 45, 20.0);
    auto spo2 = SignalSeries(SignalKind::Spo2, {95, 95, 95, 95}, {{0}, {1000}, {2000}, {3000}}, 1.0);
    auto rr = ramp_series(SignalKind::Respiration, 20, 110, 50.0);
    SessionMeta meta{"s00", ProtocolState::State1, 2.0};
    auto session = synchronize(meta, face, finger, bvp, spo2, rr, 25);
    // master timestamps start at the finger stream's first sample (t=10)
    EXPECT_GE(session.face.timestamps().front().millis, 10);
    EXPECT_EQ(session.face.timestamps(), session.finger.timestamps());
}

TEST(Synchronize, GapBeyondToleranceIsSyncGapError) {
    auto ts = video_clock(120);
    auto face = make_sequence(Modality::Face, ts);
    // drop 100 ms of finger frames mid-stream
    std::vector<std::int64_t> finger_ts;
    for (auto t : ts)
        if (t < 900 || t > 1000) finger_ts.push_back(t);
    auto finger = make_sequence(Modality::Finger, finger_ts);
    auto bvp = ramp_series(SignalKind::Bvp, 50, 45, 20.0);
    auto spo2 = SignalSeries(SignalKind::Spo2, {95, 95, 95, 95}, {{0}, {1000}, {2000}, {3000}}, 1.0);
    auto rr = ramp_series(SignalKind::Respiration, 20, 110, 50.0);
    SessionMeta meta{"s00", ProtocolState::State1, 2.0};
    try {
        synchronize(meta, face, finger, bvp, spo2, rr, 25);
        FAIL() << "expected sync-gap error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SyncGap);
        EXPECT_NE(std::string(e.what()).find("ms"), std::string::npos);
    }
}

TEST(Synchronize, NoOverlapIsInputError) {
    auto face = make_sequence(Modality::Face, video_clock(120));
    std::vector<std::int64_t> late;
    for (auto t : video_clock(120)) late.push_back(t + 100000);
    auto finger = make_sequence(Modality::Finger, late);
    auto bvp = ramp_series(SignalKind::Bvp, 50, 45, 20.0);
    auto spo2 = SignalSeries(SignalKind::Spo2, {95, 95, 95}, {{0}, {1000}, {2000}}, 1.0);
    auto rr = ramp_series(SignalKind::Respiration, 20, 110, 50.0);
    SessionMeta meta{"s00", ProtocolState::State1, 2.0};
    try {
        synchronize(meta, face, finger, bvp, spo2, rr, 25);
        FAIL() << "expected input error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Input);
    }
}

TEST(Synchronize, Idempotent) {
    auto session = make_synced(180);
    auto again = synchronize(session.meta, session.face, session.finger, session.bvp_60hz,
                             session.spo2_60hz, session.rr_60hz, 25);
    EXPECT_EQ(again.length(), session.length());
    EXPECT_EQ(again.face.timestamps(), session.face.timestamps());
    for (std::size_t i = 0; i < session.length(); ++i) {
        ASSERT_EQ(again.bvp_60hz.values()[i], session.bvp_60hz.values()[i]);
        ASSERT_EQ(again.rr_60hz.values()[i], session.rr_60hz.values()[i]);
    }
}

TEST(ChunkSession, CountArithmetic) {
    auto session = make_synced(300);
    auto chunks = chunk_session(session, 128, 128);
    ASSERT_EQ(chunks.size(), 2u);
    EXPECT_EQ(chunks[0].start_index, 0u);
    EXPECT_EQ(chunks[1].start_index, 128u);

    auto session128 = make_synced(128);
    EXPECT_EQ(chunk_session(session128, 128, 128).size(), 1u);

    auto session127 = make_synced(127);
    try {
        chunk_session(session127, 128, 128);
        FAIL() << "expected input error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Input);
    }
}

TEST(ChunkSession, LabelIndexBookkeeping) {
    Rng rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 150 + rng.below(200);
        const std::size_t chunk_len = 32 + rng.below(64);
        const std::size_t stride = 1 + rng.below(chunk_len);
        auto session = make_synced(n);
        auto chunks = chunk_session(session, chunk_len, stride);
        const std::size_t expected = (n - chunk_len) / stride + 1;
        ASSERT_EQ(chunks.size(), expected);
        for (const Chunk& c : chunks) {
            ASSERT_EQ(c.bvp_label.size(), chunk_len);
            ASSERT_EQ(c.spo2_label.size(), chunk_len);
            for (std::size_t i = 0; i < chunk_len; ++i) {
                ASSERT_EQ(c.bvp_label[i], session.bvp_60hz.values()[c.start_index + i]);
                ASSERT_EQ(c.spo2_label[i], session.spo2_60hz.values()[c.start_index + i]);
            }
        }
    }
}
