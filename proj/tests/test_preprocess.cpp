#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "vitals/vitals.hpp"

using namespace vitals;

namespace {

Tensor constant_clip(std::size_t t, std::size_t h, std::size_t w, double value) {
    return Tensor({t, h, w, 3}, value);
}

} // namespace

TEST(CropResize, FullFrameSameSizeIsIdentity) {
    Rng rng(2);
    Tensor clip = testutil::random_tensor({3, 8, 8, 3}, rng, 0.0, 1.0);
    Tensor out = crop_and_resize(clip, full_frame_roi(8, 8), 8);
    ASSERT_EQ(out.shape(), clip.shape());
    for (std::size_t i = 0; i < clip.size(); ++i) ASSERT_EQ(out[i], clip[i]);
}

TEST(CropResize, UniformGrayStaysUniform) {
    Tensor clip = constant_clip(2, 12, 16, 0.42);
    Tensor out = crop_and_resize(clip, Roi{3, 2, 9, 8}, 8);
    ASSERT_EQ(out.shape(), (std::vector<std::size_t>{2, 8, 8, 3}));
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_DOUBLE_EQ(out[i], 0.42);
}

TEST(CropResize, BilinearWeightsMatchHandFormula) {
    // 2x2 checkerboard upscaled with corner-aligned sampling; the oracle is
    // the bilinear formula evaluated by hand at x = i/(S-1).
    Tensor clip({1, 2, 2, 3}, 0.0);
    auto set_px = [&clip](int y, int x, double v) {
        for (int c = 0; c < 3; ++c) clip[(static_cast<std::size_t>(y) * 2 + x) * 3 + c] = v;
    };
    set_px(0, 0, 1.0); // a
    set_px(0, 1, 0.0); // b
    set_px(1, 0, 0.0); // c
    set_px(1, 1, 1.0); // d
    const int S = 8;
    Tensor out = crop_and_resize(clip, full_frame_roi(2, 2), S);
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            const double fy = static_cast<double>(y) / (S - 1);
            const double fx = static_cast<double>(x) / (S - 1);
            const double expected = (1.0 - fx) * (1.0 - fy) + fx * fy;
            for (int c = 0; c < 3; ++c)
                ASSERT_NEAR(out[(static_cast<std::size_t>(y) * S + x) * 3 + c], expected, 1e-12)
                    << "at (" << y << "," << x << ")";
        }
}

TEST(CropResize, CommutesWithConstantScaling) {
    Rng rng(17);
    Tensor clip = testutil::random_tensor({2, 10, 10, 3}, rng, 0.0, 0.5);
    Tensor scaled = clip;
    for (auto& v : scaled.values()) v *= 2.0;
    Tensor a = crop_and_resize(scaled, Roi{1, 1, 8, 8}, 8);
    Tensor b = crop_and_resize(clip, Roi{1, 1, 8, 8}, 8);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], 2.0 * b[i], 1e-14);
}

TEST(CropResize, RejectsBadRoiAndSize) {
    Tensor clip = constant_clip(1, 8, 8, 0.5);
    try {
        crop_and_resize(clip, Roi{4, 4, 8, 8}, 8);
        FAIL() << "expected input error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Input);
    }
    EXPECT_THROW(crop_and_resize(clip, Roi{0, 0, 0, 4}, 8), Error);
    EXPECT_THROW(crop_and_resize(clip, full_frame_roi(8, 8), 4), Error);
}

TEST(DiffNormalize, ConstantClipIsZero) {
    Tensor clip = constant_clip(10, 6, 6, 0.7);
    Tensor out = diff_normalize_video(clip);
    ASSERT_EQ(out.dim(0), 9u);
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(out[i], 0.0);
}

TEST(DiffNormalize, TwoFrameUniformStepHitsStdGuard) {
    // d = 0.2 / (0.6 + 1e-7) everywhere; the clip std is then 0, so the
    // guard maps everything to zero.
    Tensor clip({2, 4, 4, 3}, 0.0);
    for (std::size_t i = 0; i < clip.size() / 2; ++i) clip[i] = 0.2;
    for (std::size_t i = clip.size() / 2; i < clip.size(); ++i) clip[i] = 0.4;
    // pre-scaling value sanity, computed by hand
    const double d = (0.4 - 0.2) / (0.4 + 0.2 + kDiffEpsilon);
    EXPECT_NEAR(d, 1.0 / 3.0, 1e-6);
    Tensor out = diff_normalize_video(clip);
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(out[i], 0.0);
}

TEST(DiffNormalize, NoNonFiniteForAnyUnitIntervalInput) {
    Rng rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        Tensor clip = testutil::random_tensor({4, 5, 5, 3}, rng, 0.0, 1.0);
        if (trial % 3 == 0) {
            // adversarial: exact zeros in both frames of a pair
            for (std::size_t i = 0; i < clip.size(); i += 2 + trial % 5) clip[i] = 0.0;
        }
        Tensor out = diff_normalize_video(clip);
        for (std::size_t i = 0; i < out.size(); ++i) ASSERT_TRUE(std::isfinite(out[i]));
    }
}

TEST(DiffNormalize, FrequencyPreserved) {
    // Brightness oscillating at f Hz on a constant base; the spatial mean of
    // the diff-normalized clip must keep its spectral peak at f.
    const double pi = 3.14159265358979323846;
    for (double f_hz : {0.7, 1.5, 2.9}) {
        const std::size_t T = 720; // 12 s at 60 fps
        Tensor clip({T, 4, 4, 3}, 0.0);
        for (std::size_t t = 0; t < T; ++t) {
            const double v = 0.5 + 0.05 * std::sin(2.0 * pi * f_hz * static_cast<double>(t) / 60.0);
            for (std::size_t i = 0; i < 4 * 4 * 3; ++i) clip[t * 48 + i] = v;
        }
        Tensor out = diff_normalize_video(clip);
        std::vector<double> trace(out.dim(0), 0.0);
        for (std::size_t t = 0; t < out.dim(0); ++t) {
            double acc = 0.0;
            for (std::size_t i = 0; i < 48; ++i) acc += out[t * 48 + i];
            trace[t] = acc / 48.0;
        }
        HrEstimate est = estimate_hr_fft(trace, 60.0);
        EXPECT_NEAR(est.bpm, 60.0 * f_hz, 0.2) << "f=" << f_hz;
    }
}

TEST(DiffNormalizeLabel, ConstantIsZero) {
    auto out = diff_normalize_label({3.0, 3.0, 3.0, 3.0});
    ASSERT_EQ(out.size(), 3u);
    for (double v : out) ASSERT_EQ(v, 0.0);
}

TEST(DiffNormalizeLabel, HandComputedAlternatingCase) {
    // [0,1,0,1]: diffs [1,-1,1], population std sqrt(8/9) = 0.9428...
    auto out = diff_normalize_label({0.0, 1.0, 0.0, 1.0});
    ASSERT_EQ(out.size(), 3u);
    EXPECT_NEAR(out[0], 1.0607, 1e-3);
    EXPECT_NEAR(out[1], -1.0607, 1e-3);
    EXPECT_NEAR(out[2], 1.0607, 1e-3);
    EXPECT_THROW(diff_normalize_label({1.0}), Error);
}

TEST(DiffNormalizeLabel, SineKeepsDominantFrequency) {
    const double pi = 3.14159265358979323846;
    const double f = 1.2;
    std::vector<double> label(720);
    for (std::size_t i = 0; i < label.size(); ++i)
        label[i] = std::sin(2.0 * pi * f * static_cast<double>(i) / 60.0);
    auto out = diff_normalize_label(label);
    HrEstimate est = estimate_hr_fft(out, 60.0);
    EXPECT_NEAR(est.bpm, 72.0, 0.2);
}

TEST(Standardize, GuardAndTwoPointAndMoments) {
    auto zeros = standardize({5.0, 5.0, 5.0});
    for (double v : zeros) ASSERT_EQ(v, 0.0);

    auto two = standardize({0.0, 2.0});
    ASSERT_EQ(two.size(), 2u);
    EXPECT_DOUBLE_EQ(two[0], -1.0);
    EXPECT_DOUBLE_EQ(two[1], 1.0);

    Rng rng(31);
    auto data = rng.uniform_vec(-7.0, 3.0, 500);
    auto out = standardize(data);
    EXPECT_LT(std::abs(mean_of(out)), 1e-9);
    EXPECT_NEAR(population_std(out), 1.0, 1e-9);

    EXPECT_THROW(standardize({}), Error);
}

TEST(PrepareChunk, ShapesAndLabels) {
    Rng rng(5);
    Chunk chunk;
    chunk.face_clip = testutil::random_tensor({17, 24, 24, 3}, rng, 0.2, 0.8);
    chunk.finger_clip = testutil::random_tensor({17, 24, 24, 3}, rng, 0.2, 0.8);
    chunk.bvp_label = rng.uniform_vec(-1.0, 1.0, 17);
    chunk.spo2_label = rng.uniform_vec(90.0, 96.0, 17);
    chunk.meta = SessionMeta{"s00", ProtocolState::State2, 10.0};
    chunk.start_index = 34;

    PreprocessParams params;
    params.input_size = 16;
    PreparedChunk prepared = prepare_chunk(chunk, params);
    EXPECT_EQ(prepared.frames, 16u);
    EXPECT_EQ(prepared.size, 16);
    EXPECT_EQ(prepared.face_x.size(), 16u * 16 * 16 * 3);
    EXPECT_EQ(prepared.bvp_y.size(), 16u);
    EXPECT_NEAR(prepared.spo2_y, mean_of(chunk.spo2_label), 1e-12);
    EXPECT_EQ(prepared.start_index, 34u);
}
