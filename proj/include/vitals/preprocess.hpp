#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "vitals/error.hpp"
#include "vitals/ingest.hpp"
#include "vitals/tensor.hpp"

namespace vitals {

// Pixel rectangle; must lie fully inside the frame it is applied to.
struct Roi {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
};

inline Roi full_frame_roi(int height, int width) { return Roi{0, 0, width, height}; }

// Centered square covering `fraction` of the short side. The default signal
// region when no explicit box is configured.
inline Roi centered_roi(int height, int width, double fraction) {
    require(fraction > 0.0 && fraction <= 1.0, ErrorKind::Range,
            "roi fraction must be in (0,1]");
    int side = static_cast<int>(std::floor(fraction * std::min(height, width)));
    if (side < 1) side = 1;
    return Roi{(width - side) / 2, (height - side) / 2, side, side};
}

inline void validate_roi(const Roi& roi, int height, int width) {
    require(roi.w > 0 && roi.h > 0, ErrorKind::Input, "roi must have positive size");
    require(roi.x >= 0 && roi.y >= 0 && roi.x + roi.w <= width && roi.y + roi.h <= height,
            ErrorKind::Input, "roi lies outside the frame");
}

// Crop each frame to `roi`, then resize to out_size x out_size with
// corner-aligned bilinear sampling: output pixel i samples source coordinate
// roi_origin + i * (roi_extent - 1) / (out_size - 1). Deterministic by
// construction so resized clips can be golden-tested.
inline Tensor crop_and_resize(const Tensor& clip, const Roi& roi, int out_size) {
    require(clip.rank() == 4 && clip.dim(3) == 3, ErrorKind::Dimension,
            "expected clip of shape [T,H,W,3], got " + clip.shape_string());
    require(out_size >= 8, ErrorKind::Input, "output size must be >= 8");
    const std::size_t T = clip.dim(0);
    const int H = static_cast<int>(clip.dim(1));
    const int W = static_cast<int>(clip.dim(2));
    validate_roi(roi, H, W);

    const std::size_t S = static_cast<std::size_t>(out_size);
    Tensor out({T, S, S, 3}, 0.0);

    // Precompute sample positions once; they are shared by all frames.
    std::vector<int> x0(S), x1(S), y0(S), y1(S);
    std::vector<double> fx(S), fy(S);
    for (std::size_t i = 0; i < S; ++i) {
        const double sx = (S == 1) ? roi.x + (roi.w - 1) * 0.5
                                   : roi.x + static_cast<double>(i) * (roi.w - 1) /
                                                 static_cast<double>(S - 1);
        const double sy = (S == 1) ? roi.y + (roi.h - 1) * 0.5
                                   : roi.y + static_cast<double>(i) * (roi.h - 1) /
                                                 static_cast<double>(S - 1);
        x0[i] = static_cast<int>(std::floor(sx));
        y0[i] = static_cast<int>(std::floor(sy));
        x1[i] = std::min(x0[i] + 1, roi.x + roi.w - 1);
        y1[i] = std::min(y0[i] + 1, roi.y + roi.h - 1);
        fx[i] = sx - x0[i];
        fy[i] = sy - y0[i];
    }

    const double* src = clip.data();
    double* dst = out.data();
    const std::size_t frame_stride = static_cast<std::size_t>(H) * W * 3;
    for (std::size_t t = 0; t < T; ++t) {
        const double* f = src + t * frame_stride;
        for (std::size_t yy = 0; yy < S; ++yy) {
            const double wy = fy[yy];
            const std::size_t r0 = static_cast<std::size_t>(y0[yy]) * W * 3;
            const std::size_t r1 = static_cast<std::size_t>(y1[yy]) * W * 3;
            for (std::size_t xx = 0; xx < S; ++xx) {
                const double wx = fx[xx];
                const std::size_t c00 = r0 + static_cast<std::size_t>(x0[xx]) * 3;
                const std::size_t c01 = r0 + static_cast<std::size_t>(x1[xx]) * 3;
                const std::size_t c10 = r1 + static_cast<std::size_t>(x0[xx]) * 3;
                const std::size_t c11 = r1 + static_cast<std::size_t>(x1[xx]) * 3;
                for (int c = 0; c < 3; ++c) {
                    const double top = f[c00 + c] * (1.0 - wx) + f[c01 + c] * wx;
                    const double bot = f[c10 + c] * (1.0 - wx) + f[c11 + c] * wx;
                    *dst++ = top * (1.0 - wy) + bot * wy;
                }
            }
        }
    }
    return out;
}

inline constexpr double kDiffEpsilon = 1e-7;

// Differential normalization of a video clip:
//   d(t) = (x(t+1) - x(t)) / (x(t+1) + x(t) + eps)
// followed by division of the whole clip by its own (population) standard
// deviation. Non-finite entries are zeroed; a zero-variance clip maps to all
// zeros. Suppresses static appearance while keeping the pulsatile component.
inline Tensor diff_normalize_video(const Tensor& clip) {
    require(clip.rank() == 4, ErrorKind::Dimension,
            "expected clip of shape [T,H,W,3], got " + clip.shape_string());
    const std::size_t T = clip.dim(0);
    require(T >= 2, ErrorKind::Input, "diff normalization needs at least 2 frames");
    const std::size_t frame = clip.size() / T;

    Tensor out({T - 1, clip.dim(1), clip.dim(2), clip.dim(3)}, 0.0);
    const double* src = clip.data();
    double* dst = out.data();
    for (std::size_t t = 0; t + 1 < T; ++t) {
        const double* a = src + t * frame;
        const double* b = src + (t + 1) * frame;
        double* d = dst + t * frame;
        for (std::size_t i = 0; i < frame; ++i) {
            double v = (b[i] - a[i]) / (b[i] + a[i] + kDiffEpsilon);
            d[i] = std::isfinite(v) ? v : 0.0;
        }
    }

    const double sd = population_std(out.values());
    if (sd == 0.0) {
        out.fill(0.0);
        return out;
    }
    for (auto& v : out.values()) {
        v /= sd;
        if (!std::isfinite(v)) v = 0.0;
    }
    return out;
}

// First difference of a label series divided by its population standard
// deviation; the label-side counterpart of diff_normalize_video.
inline std::vector<double> diff_normalize_label(const std::vector<double>& values) {
    require(values.size() >= 2, ErrorKind::Input, "diff normalization needs at least 2 samples");
    std::vector<double> d(values.size() - 1);
    for (std::size_t i = 0; i + 1 < values.size(); ++i) d[i] = values[i + 1] - values[i];
    const double sd = population_std(d);
    if (sd == 0.0) {
        std::fill(d.begin(), d.end(), 0.0);
        return d;
    }
    for (auto& v : d) v /= sd;
    return d;
}

// Zero-mean unit-variance scaling; constant input maps to zeros.
inline std::vector<double> standardize(const std::vector<double>& values) {
    require(!values.empty(), ErrorKind::Input, "standardize needs at least 1 sample");
    const double m = mean_of(values);
    const double sd = population_std(values);
    std::vector<double> out(values.size(), 0.0);
    if (sd == 0.0) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - m) / sd;
    return out;
}

// Model-ready chunk: diff-normalized clips stored as float32 to halve the
// resident size of a full dataset, widened back to double at the model
// boundary. The SpO2 target is the chunk-mean label in raw percent.
struct PreparedChunk {
    std::size_t frames = 0; // T-1
    int size = 0;           // S
    std::vector<float> face_x;   // [T-1,S,S,3]
    std::vector<float> finger_x; // [T-1,S,S,3]
    std::vector<double> bvp_y;   // [T-1], diff-normalized
    double spo2_y = 0.0;         // percent
    SessionMeta meta;
    std::size_t start_index = 0;
};

struct PreprocessParams {
    Roi face_roi;                 // ignored when face_roi_auto
    bool face_roi_auto = true;    // centered square, face_roi_fraction of short side
    double face_roi_fraction = 0.6;
    bool finger_full_frame = true;
    Roi finger_roi;
    int input_size = 72;
};

inline Roi resolve_face_roi(const PreprocessParams& p, int height, int width) {
    return p.face_roi_auto ? centered_roi(height, width, p.face_roi_fraction) : p.face_roi;
}

inline Roi resolve_finger_roi(const PreprocessParams& p, int height, int width) {
    return p.finger_full_frame ? full_frame_roi(height, width) : p.finger_roi;
}

inline PreparedChunk prepare_chunk(const Chunk& chunk, const PreprocessParams& params) {
    PreparedChunk out;
    const int face_h = static_cast<int>(chunk.face_clip.dim(1));
    const int face_w = static_cast<int>(chunk.face_clip.dim(2));
    const int finger_h = static_cast<int>(chunk.finger_clip.dim(1));
    const int finger_w = static_cast<int>(chunk.finger_clip.dim(2));

    Tensor face = diff_normalize_video(
        crop_and_resize(chunk.face_clip, resolve_face_roi(params, face_h, face_w),
                        params.input_size));
    Tensor finger = diff_normalize_video(
        crop_and_resize(chunk.finger_clip, resolve_finger_roi(params, finger_h, finger_w),
                        params.input_size));

    out.frames = face.dim(0);
    out.size = params.input_size;
    out.face_x.assign(face.values().begin(), face.values().end());
    out.finger_x.assign(finger.values().begin(), finger.values().end());
    out.bvp_y = diff_normalize_label(chunk.bvp_label);
    out.spo2_y = mean_of(chunk.spo2_label);
    out.meta = chunk.meta;
    out.start_index = chunk.start_index;
    return out;
}

inline Tensor widen_clip(const std::vector<float>& data, std::size_t frames, int size) {
    std::vector<double> d(data.begin(), data.end());
    return Tensor::from_data({frames, static_cast<std::size_t>(size),
                              static_cast<std::size_t>(size), 3},
                             std::move(d));
}

} // namespace vitals
