#include <gtest/gtest.h>

#include "vitals/vitals.hpp"

using namespace vitals;

TEST(Tensor, FillConstructor) {
    Tensor t = tensor_new({2, 3}, 0.0);
    EXPECT_EQ(t.shape(), (std::vector<std::size_t>{2, 3}));
    EXPECT_EQ(t.size(), 6u);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t[i], 0.0);

    Tensor s = tensor_new({1}, 5.0);
    EXPECT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0], 5.0);

    Tensor cube = tensor_new({4, 4, 4}, 1.0);
    EXPECT_EQ(cube.size(), 64u);
    for (std::size_t i = 0; i < cube.size(); ++i) EXPECT_EQ(cube[i], 1.0);
}

TEST(Tensor, RejectsBadShapes) {
    EXPECT_THROW(
        {
            try {
                tensor_new({}, 0.0);
            } catch (const Error& e) {
                EXPECT_EQ(e.kind(), ErrorKind::Dimension);
                throw;
            }
        },
        Error);
    EXPECT_THROW(tensor_new({2, 0}, 0.0), Error);
}

TEST(Tensor, ReshapeRoundTripIsBitExact) {
    Rng rng(11);
    Tensor t = Tensor::from_data({3, 4, 5}, rng.uniform_vec(-10.0, 10.0, 60));
    Tensor r = t.reshape({5, 12}).reshape({60}).reshape({3, 4, 5});
    ASSERT_EQ(r.shape(), t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(r[i], t[i]);
    EXPECT_THROW(t.reshape({7, 7}), Error);
}

TEST(Rng, UniformContract) {
    Rng rng(7);
    EXPECT_TRUE(rng.uniform_vec(0.0, 1.0, 0).empty());

    Rng a(7), b(7);
    EXPECT_EQ(a.uniform_vec(0.0, 1.0, 5), b.uniform_vec(0.0, 1.0, 5));

    Rng c(7);
    auto v = c.uniform_vec(0.0, 1.0, 10000);
    EXPECT_NEAR(mean_of(v), 0.5, 0.02);
    for (double x : v) {
        ASSERT_GE(x, 0.0);
        ASSERT_LT(x, 1.0);
    }
    EXPECT_THROW(c.uniform_vec(1.0, 1.0, 3), Error);
}

TEST(Rng, EqualSeedsProduceEqualLongStreams) {
    Rng a(123456), b(123456);
    for (int i = 0; i < 100000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StateRoundTrip) {
    Rng a(99);
    (void)a.uniform_vec(0.0, 1.0, 37);
    const std::string state = a.state_string();
    Rng b(1);
    b.restore_state(state);
    for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, NormalMoments) {
    Rng rng(5);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.03);
    EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(SignalSeries, RejectsNonMonotoneTimestamps) {
    EXPECT_THROW(SignalSeries(SignalKind::Bvp, {1.0, 2.0}, {{10}, {10}}, 20.0), Error);
    EXPECT_THROW(SignalSeries(SignalKind::Bvp, {1.0, 2.0}, {{10}, {5}}, 20.0), Error);
    EXPECT_THROW(SignalSeries(SignalKind::Bvp, {1.0, 2.0}, {{-1}, {5}}, 20.0), Error);
    EXPECT_NO_THROW(SignalSeries(SignalKind::Bvp, {1.0, 2.0}, {{0}, {50}}, 20.0));
}

TEST(SignalSeries, Spo2RangeValidated) {
    EXPECT_THROW(
        {
            try {
                SignalSeries(SignalKind::Spo2, {95.0, 105.0}, {{0}, {1000}}, 1.0);
            } catch (const Error& e) {
                EXPECT_EQ(e.kind(), ErrorKind::Validation);
                throw;
            }
        },
        Error);
    EXPECT_NO_THROW(SignalSeries(SignalKind::Spo2, {0.0, 100.0}, {{0}, {1000}}, 1.0));
}

TEST(FrameSequence, InvariantsEnforced) {
    std::vector<std::uint8_t> frame(2 * 2 * 3, 128);
    EXPECT_NO_THROW(TimestampedFrameSequence(Modality::Face, 2, 2, {frame, frame},
                                             {{0}, {17}}, 60.0));
    // count mismatch
    EXPECT_THROW(
        TimestampedFrameSequence(Modality::Face, 2, 2, {frame}, {{0}, {17}}, 60.0), Error);
    // wrong frame size
    std::vector<std::uint8_t> small(3, 0);
    EXPECT_THROW(
        TimestampedFrameSequence(Modality::Face, 2, 2, {frame, small}, {{0}, {17}}, 60.0),
        Error);
    // non-monotone
    EXPECT_THROW(
        TimestampedFrameSequence(Modality::Face, 2, 2, {frame, frame}, {{17}, {17}}, 60.0),
        Error);
}

TEST(FrameSequence, IntensityNormalization) {
    std::vector<std::uint8_t> frame = {0, 51, 102, 153, 204, 255, 0, 0, 0, 255, 255, 255};
    TimestampedFrameSequence seq(Modality::Face, 2, 2, {frame}, {{0}}, 60.0);
    EXPECT_DOUBLE_EQ(seq.intensity(0, 0, 0, 0), 0.0);
    EXPECT_DOUBLE_EQ(seq.intensity(0, 0, 0, 1), 51.0 / 255.0);
    EXPECT_DOUBLE_EQ(seq.intensity(0, 1, 1, 2), 1.0);
    Tensor clip = seq.clip_tensor(0, 1);
    EXPECT_EQ(clip.shape(), (std::vector<std::size_t>{1, 2, 2, 3}));
    EXPECT_DOUBLE_EQ(clip[5], 1.0);
}

TEST(Hash, Fnv1aKnownValue) {
    // FNV-1a 64 of empty input is the offset basis.
    Fnv1a h;
    EXPECT_EQ(h.digest(), 0xcbf29ce484222325ULL);
    EXPECT_EQ(hex_u64(0xdeadbeefULL), "00000000deadbeef");
}
