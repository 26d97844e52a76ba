#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vitals/conv3d.hpp"
#include "vitals/error.hpp"
#include "vitals/hash.hpp"
#include "vitals/rng.hpp"
#include "vitals/tensor.hpp"

namespace vitals {

enum class FusionMode { ConcatProject, Sum };
enum class HeadsMode { BvpOnly, Spo2Only, Both };
enum class StreamsMode { FaceOnly, FingerOnly, Both };

inline const char* to_string(FusionMode m) {
    return m == FusionMode::ConcatProject ? "concat_project" : "sum";
}
inline const char* to_string(HeadsMode h) {
    switch (h) {
        case HeadsMode::BvpOnly: return "bvp";
        case HeadsMode::Spo2Only: return "spo2";
        case HeadsMode::Both: return "both";
    }
    return "?";
}
inline const char* to_string(StreamsMode s) {
    switch (s) {
        case StreamsMode::FaceOnly: return "face";
        case StreamsMode::FingerOnly: return "finger";
        case StreamsMode::Both: return "both";
    }
    return "?";
}

inline FusionMode fusion_mode_from_string(const std::string& s) {
    if (s == "concat_project") return FusionMode::ConcatProject;
    if (s == "sum") return FusionMode::Sum;
    raise(ErrorKind::Format, "unknown fusion mode '" + s + "'");
}
inline HeadsMode heads_from_string(const std::string& s) {
    if (s == "bvp" || s == "hr") return HeadsMode::BvpOnly;
    if (s == "spo2") return HeadsMode::Spo2Only;
    if (s == "both" || s == "joint") return HeadsMode::Both;
    raise(ErrorKind::Format, "unknown heads mode '" + s + "'");
}
inline StreamsMode streams_from_string(const std::string& s) {
    if (s == "face") return StreamsMode::FaceOnly;
    if (s == "finger") return StreamsMode::FingerOnly;
    if (s == "both") return StreamsMode::Both;
    raise(ErrorKind::Format, "unknown streams mode '" + s + "'");
}

// Architecture of the dual-stream network. Encoder blocks are
// {conv3d 3x3x3 stride 1 pad 1 -> per-channel scale -> ELU -> 2x2 spatial
// average pool} with the pool omitted after the last block, so the temporal
// extent stays at in_frames throughout.
struct ModelConfig {
    std::size_t in_frames = 127; // chunk length after differencing (T-1)
    int in_size = 72;            // spatial input size S
    std::vector<std::size_t> encoder_channels{16, 32, 32, 64};
    FusionMode fusion_mode = FusionMode::ConcatProject;
    HeadsMode heads = HeadsMode::Both;
    StreamsMode streams = StreamsMode::Both;
    bool share_encoder_weights = false;
    std::size_t spo2_hidden = 0; // 0 -> same as final encoder channel count

    void validate() const {
        require(!encoder_channels.empty(), ErrorKind::Input, "encoder_channels must not be empty");
        require(in_frames >= 8, ErrorKind::Input, "in_frames must be >= 8");
        require(in_size >= 8, ErrorKind::Input, "in_size must be >= 8");
        int s = in_size;
        for (std::size_t i = 0; i + 1 < encoder_channels.size(); ++i) s /= 2;
        require(s >= 1, ErrorKind::Input, "too many pooling stages for in_size");
    }

    std::size_t feature_channels() const { return encoder_channels.back(); }
    std::size_t hidden_units() const {
        return spo2_hidden == 0 ? encoder_channels.back() : spo2_hidden;
    }
    std::size_t block_count() const { return encoder_channels.size(); }
    bool pool_after(std::size_t block) const { return block + 1 < encoder_channels.size(); }
    bool uses_face() const { return streams != StreamsMode::FingerOnly; }
    bool uses_finger() const { return streams != StreamsMode::FaceOnly; }
    bool has_bvp_head() const { return heads != HeadsMode::Spo2Only; }
    bool has_spo2_head() const { return heads != HeadsMode::BvpOnly; }
    bool has_fusion() const {
        return streams == StreamsMode::Both && fusion_mode == FusionMode::ConcatProject;
    }

    // Spatial feature size after all pooling stages.
    int feature_size() const {
        int s = in_size;
        for (std::size_t i = 0; i + 1 < encoder_channels.size(); ++i) s /= 2;
        return s;
    }

    std::string canonical_string() const {
        std::string channels;
        for (std::size_t i = 0; i < encoder_channels.size(); ++i) {
            if (i) channels += ",";
            channels += std::to_string(encoder_channels[i]);
        }
        return "in_frames=" + std::to_string(in_frames) + ";in_size=" + std::to_string(in_size) +
               ";channels=" + channels + ";fusion=" + to_string(fusion_mode) +
               ";heads=" + to_string(heads) + ";streams=" + to_string(streams) +
               ";share=" + (share_encoder_weights ? "1" : "0") +
               ";spo2_hidden=" + std::to_string(hidden_units());
    }

    std::uint64_t hash() const { return fnv1a(canonical_string()); }

    static ModelConfig from_canonical_string(const std::string& s);
};

inline ModelConfig ModelConfig::from_canonical_string(const std::string& s) {
    ModelConfig cfg;
    cfg.encoder_channels.clear();
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t semi = s.find(';', pos);
        if (semi == std::string::npos) semi = s.size();
        std::string item = s.substr(pos, semi - pos);
        pos = semi + 1;
        std::size_t eq = item.find('=');
        require(eq != std::string::npos, ErrorKind::Format, "bad config item '" + item + "'");
        std::string key = item.substr(0, eq);
        std::string value = item.substr(eq + 1);
        if (key == "in_frames") {
            cfg.in_frames = static_cast<std::size_t>(std::stoull(value));
        } else if (key == "in_size") {
            cfg.in_size = std::stoi(value);
        } else if (key == "channels") {
            std::size_t p = 0;
            while (p < value.size()) {
                std::size_t comma = value.find(',', p);
                if (comma == std::string::npos) comma = value.size();
                cfg.encoder_channels.push_back(
                    static_cast<std::size_t>(std::stoull(value.substr(p, comma - p))));
                p = comma + 1;
            }
        } else if (key == "fusion") {
            cfg.fusion_mode = fusion_mode_from_string(value);
        } else if (key == "heads") {
            cfg.heads = heads_from_string(value);
        } else if (key == "streams") {
            cfg.streams = streams_from_string(value);
        } else if (key == "share") {
            cfg.share_encoder_weights = (value == "1");
        } else if (key == "spo2_hidden") {
            cfg.spo2_hidden = static_cast<std::size_t>(std::stoull(value));
        } else {
            raise(ErrorKind::Format, "unknown config key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

struct ConvLayerParams {
    Tensor w; // [C_out, C_in, 3, 3, 3]
    Tensor b; // [C_out]
};

struct BlockParams {
    ConvLayerParams conv;
    Tensor scale; // [C_out], per-channel gain in place of batch norm
};

struct EncoderParams {
    std::vector<BlockParams> blocks;
};

// Complete parameter set plus the seed that produced it. Encoder list holds
// one entry for single-stream or weight-shared configs, two (face, finger)
// otherwise.
struct ModelParams {
    ModelConfig config;
    std::uint64_t seed = 0;
    std::vector<EncoderParams> encoders;
    Tensor fusion_w; // [C_f, 2*C_f] when fusion is ConcatProject with both streams
    Tensor fusion_b; // [C_f]
    Tensor bvp_w;    // [C_f]
    Tensor bvp_b;    // [1]
    Tensor spo2_w1;  // [hidden, C_f]
    Tensor spo2_b1;  // [hidden]
    Tensor spo2_w2;  // [hidden]
    Tensor spo2_b2;  // [1]

    std::size_t face_encoder_index() const { return 0; }
    std::size_t finger_encoder_index() const {
        if (config.streams == StreamsMode::FingerOnly) return 0;
        return (config.share_encoder_weights || config.streams == StreamsMode::FaceOnly) ? 0 : 1;
    }
};

inline std::vector<std::string> encoder_param_prefixes(const ModelConfig& cfg) {
    if (cfg.streams == StreamsMode::FaceOnly) return {"face"};
    if (cfg.streams == StreamsMode::FingerOnly) return {"finger"};
    if (cfg.share_encoder_weights) return {"enc"};
    return {"face", "finger"};
}

// Visit every parameter tensor in a fixed, documented order. Initialization,
// the optimizer, and serialization all rely on this enumeration.
template <typename Params, typename Fn>
void for_each_param(Params& p, Fn&& fn) {
    const auto prefixes = encoder_param_prefixes(p.config);
    for (std::size_t e = 0; e < prefixes.size(); ++e) {
        for (std::size_t b = 0; b < p.encoders[e].blocks.size(); ++b) {
            const std::string base = prefixes[e] + ".block" + std::to_string(b);
            fn(base + ".conv.w", p.encoders[e].blocks[b].conv.w);
            fn(base + ".conv.b", p.encoders[e].blocks[b].conv.b);
            fn(base + ".scale", p.encoders[e].blocks[b].scale);
        }
    }
    if (p.config.has_fusion()) {
        fn("fusion.w", p.fusion_w);
        fn("fusion.b", p.fusion_b);
    }
    if (p.config.has_bvp_head()) {
        fn("bvp.w", p.bvp_w);
        fn("bvp.b", p.bvp_b);
    }
    if (p.config.has_spo2_head()) {
        fn("spo2.w1", p.spo2_w1);
        fn("spo2.b1", p.spo2_b1);
        fn("spo2.w2", p.spo2_w2);
        fn("spo2.b2", p.spo2_b2);
    }
}

// Fan-in-scaled uniform initialization: weights ~ U(-1/sqrt(fan_in),
// +1/sqrt(fan_in)) drawn from the deterministic RNG in enumeration order;
// biases zero, channel scales one.
inline ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParams p;
    p.config = config;
    p.seed = seed;
    Rng rng(seed);

    auto draw = [&rng](std::vector<std::size_t> shape, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Tensor t(shape, 0.0);
        for (auto& v : t.values()) v = rng.uniform(-bound, bound);
        return t;
    };

    const std::size_t n_encoders = encoder_param_prefixes(config).size();
    for (std::size_t e = 0; e < n_encoders; ++e) {
        EncoderParams enc;
        std::size_t c_in = 3;
        for (std::size_t c_out : config.encoder_channels) {
            BlockParams block;
            block.conv.w = draw({c_out, c_in, 3, 3, 3}, c_in * 27);
            block.conv.b = Tensor({c_out}, 0.0);
            block.scale = Tensor({c_out}, 1.0);
            enc.blocks.push_back(std::move(block));
            c_in = c_out;
        }
        p.encoders.push_back(std::move(enc));
    }

    const std::size_t cf = config.feature_channels();
    if (config.has_fusion()) {
        p.fusion_w = draw({cf, 2 * cf}, 2 * cf);
        p.fusion_b = Tensor({cf}, 0.0);
    }
    if (config.has_bvp_head()) {
        p.bvp_w = draw({cf}, cf);
        p.bvp_b = Tensor({1}, 0.0);
    }
    if (config.has_spo2_head()) {
        const std::size_t h = config.hidden_units();
        p.spo2_w1 = draw({h, cf}, cf);
        p.spo2_b1 = Tensor({h}, 0.0);
        p.spo2_w2 = draw({h}, h);
        p.spo2_b2 = Tensor({1}, 0.0);
    }
    return p;
}

// Same structure as `like` with every parameter tensor zeroed; the gradient
// and optimizer-moment container.
inline ModelParams zeros_like(const ModelParams& like) {
    ModelParams z = like;
    for_each_param(z, [](const std::string&, Tensor& t) { t.fill(0.0); });
    return z;
}

// ---------------------------------------------------------------------------
// Layer primitives
// ---------------------------------------------------------------------------

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

inline Tensor elu_forward(const Tensor& x) {
    Tensor out = x;
    for (auto& v : out.values()) v = elu(v);
    return out;
}

// d(elu)/dx recovered from the output: 1 where out > 0, out + 1 elsewhere.
inline void elu_backward_inplace(const Tensor& out, Tensor& grad) {
    const double* o = out.data();
    double* g = grad.data();
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (o[i] <= 0.0) g[i] *= (o[i] + 1.0);
}

inline Tensor channel_scale_forward(const Tensor& x, const Tensor& gamma) {
    const std::size_t C = x.dim(0);
    require(gamma.size() == C, ErrorKind::Dimension, "channel scale length mismatch");
    Tensor out = x;
    const std::size_t plane = x.size() / C;
    double* d = out.data();
    for (std::size_t c = 0; c < C; ++c) {
        const double g = gamma[c];
        for (std::size_t i = 0; i < plane; ++i) d[c * plane + i] *= g;
    }
    return out;
}

inline Tensor avg_pool_spatial2_forward(const Tensor& x) {
    const std::size_t C = x.dim(0), T = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Ho = H / 2, Wo = W / 2;
    require(Ho >= 1 && Wo >= 1, ErrorKind::Dimension, "feature map too small to pool");
    Tensor out({C, T, Ho, Wo}, 0.0);
    const double* src = x.data();
    double* dst = out.data();
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 0; t < T; ++t) {
            const double* plane = src + (c * T + t) * H * W;
            double* oplane = dst + (c * T + t) * Ho * Wo;
            for (std::size_t y = 0; y < Ho; ++y)
                for (std::size_t x2 = 0; x2 < Wo; ++x2) {
                    const double* p = plane + (2 * y) * W + 2 * x2;
                    oplane[y * Wo + x2] = 0.25 * (p[0] + p[1] + p[W] + p[W + 1]);
                }
        }
    return out;
}

inline Tensor avg_pool_spatial2_backward(const Tensor& grad_out, std::size_t H, std::size_t W) {
    const std::size_t C = grad_out.dim(0), T = grad_out.dim(1);
    const std::size_t Ho = grad_out.dim(2), Wo = grad_out.dim(3);
    Tensor grad_in({C, T, H, W}, 0.0);
    const double* g = grad_out.data();
    double* gi = grad_in.data();
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 0; t < T; ++t) {
            const double* gplane = g + (c * T + t) * Ho * Wo;
            double* iplane = gi + (c * T + t) * H * W;
            for (std::size_t y = 0; y < Ho; ++y)
                for (std::size_t x = 0; x < Wo; ++x) {
                    const double v = 0.25 * gplane[y * Wo + x];
                    double* p = iplane + (2 * y) * W + 2 * x;
                    p[0] += v;
                    p[1] += v;
                    p[W] += v;
                    p[W + 1] += v;
                }
        }
    return grad_in;
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

struct BlockCache {
    Tensor conv_in;  // unpadded conv input
    Tensor conv_out; // pre-scale activations (needed for the scale gradient)
    Tensor elu_out;  // post-nonlinearity (pre-pool)
};

struct EncoderCache {
    std::vector<BlockCache> blocks;
};

inline const Stride3 kUnitStride{1, 1, 1};
inline const Pad3 kSamePad{1, 1, 1};

// Runs the block stack on a clip in model layout [3, T, H, W]. Temporal
// length is preserved; spatial extent halves after every pooled block.
inline Tensor encoder_forward(const Tensor& clip, const EncoderParams& enc,
                              const ModelConfig& config, EncoderCache* cache = nullptr) {
    require(clip.rank() == 4 && clip.dim(0) == 3, ErrorKind::Dimension,
            "encoder expects [3,T,H,W], got " + clip.shape_string());
    require(enc.blocks.size() == config.block_count(), ErrorKind::Dimension,
            "encoder params do not match config");
    Tensor x = clip;
    if (cache) cache->blocks.resize(enc.blocks.size());
    for (std::size_t b = 0; b < enc.blocks.size(); ++b) {
        const BlockParams& block = enc.blocks[b];
        Tensor conv_out =
            conv3d_forward(x, block.conv.w, block.conv.b.values(), kUnitStride, kSamePad);
        Tensor scaled = channel_scale_forward(conv_out, block.scale);
        Tensor activated = elu_forward(scaled);
        if (cache) {
            cache->blocks[b].conv_in = std::move(x);
            cache->blocks[b].conv_out = std::move(conv_out);
            cache->blocks[b].elu_out = activated;
        }
        x = config.pool_after(b) ? avg_pool_spatial2_forward(activated) : std::move(activated);
    }
    return x;
}

struct EncoderGrads {
    EncoderParams* target = nullptr;
};

// Backpropagates grad_features through the encoder, accumulating parameter
// gradients into `grads` (same structure as the params). Returns the
// gradient with respect to the input clip.
inline Tensor encoder_backward(Tensor grad_features, const EncoderParams& enc,
                               EncoderParams& grads, const EncoderCache& cache,
                               const ModelConfig& config) {
    Tensor g = std::move(grad_features);
    for (std::size_t bi = enc.blocks.size(); bi-- > 0;) {
        const BlockParams& block = enc.blocks[bi];
        const BlockCache& bc = cache.blocks[bi];
        if (config.pool_after(bi)) {
            g = avg_pool_spatial2_backward(g, bc.elu_out.dim(2), bc.elu_out.dim(3));
        }
        elu_backward_inplace(bc.elu_out, g);
        // channel scale: dgamma_c = sum(conv_out_c * g_c); dx = gamma_c * g
        const std::size_t C = g.dim(0);
        const std::size_t plane = g.size() / C;
        for (std::size_t c = 0; c < C; ++c) {
            const double* co = bc.conv_out.data() + c * plane;
            double* gp = g.data() + c * plane;
            double acc = 0.0;
            const double gamma = block.scale[c];
            for (std::size_t i = 0; i < plane; ++i) {
                acc += co[i] * gp[i];
                gp[i] *= gamma;
            }
            grads.blocks[bi].scale[c] += acc;
        }
        Conv3dGrads cg = conv3d_backward(g, bc.conv_in, block.conv.w, kUnitStride, kSamePad);
        for (std::size_t i = 0; i < cg.grad_weights.size(); ++i)
            grads.blocks[bi].conv.w[i] += cg.grad_weights[i];
        for (std::size_t i = 0; i < cg.grad_bias.size(); ++i)
            grads.blocks[bi].conv.b[i] += cg.grad_bias[i];
        g = std::move(cg.grad_input);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Fusion
// ---------------------------------------------------------------------------

// ConcatProject: channel-concatenate both feature maps and project back to
// C_f channels with a learned 1x1x1 map. Sum: element-wise addition.
inline Tensor fuse(const Tensor& face_feat, const Tensor& finger_feat, const ModelParams& params,
                   FusionMode mode) {
    require(face_feat.shape() == finger_feat.shape(), ErrorKind::Dimension,
            "fusion inputs must share shape: " + face_feat.shape_string() + " vs " +
                finger_feat.shape_string());
    if (mode == FusionMode::Sum) {
        Tensor out = face_feat;
        const double* b = finger_feat.data();
        double* o = out.data();
        for (std::size_t i = 0; i < out.size(); ++i) o[i] += b[i];
        return out;
    }
    const std::size_t C = face_feat.dim(0);
    const std::size_t plane = face_feat.size() / C;
    require(params.fusion_w.rank() == 2 && params.fusion_w.dim(0) == C &&
                params.fusion_w.dim(1) == 2 * C,
            ErrorKind::Dimension, "fusion projection shape mismatch");
    Tensor out({C, face_feat.dim(1), face_feat.dim(2), face_feat.dim(3)}, 0.0);
    double* o = out.data();
    const double* w = params.fusion_w.data();
    for (std::size_t c = 0; c < C; ++c) {
        double* orow = o + c * plane;
        const double bias = params.fusion_b[c];
        for (std::size_t i = 0; i < plane; ++i) orow[i] = bias;
        for (std::size_t k = 0; k < 2 * C; ++k) {
            const double wv = w[c * 2 * C + k];
            const double* src =
                (k < C) ? face_feat.data() + k * plane : finger_feat.data() + (k - C) * plane;
            for (std::size_t i = 0; i < plane; ++i) orow[i] += wv * src[i];
        }
    }
    return out;
}

struct FuseGrads {
    Tensor grad_face;
    Tensor grad_finger;
};

inline FuseGrads fuse_backward(const Tensor& grad_out, const Tensor& face_feat,
                               const Tensor& finger_feat, const ModelParams& params,
                               FusionMode mode, ModelParams& grads) {
    FuseGrads out;
    if (mode == FusionMode::Sum) {
        out.grad_face = grad_out;
        out.grad_finger = grad_out;
        return out;
    }
    const std::size_t C = face_feat.dim(0);
    const std::size_t plane = face_feat.size() / C;
    out.grad_face = Tensor(std::vector<std::size_t>(face_feat.shape()), 0.0);
    out.grad_finger = Tensor(std::vector<std::size_t>(finger_feat.shape()), 0.0);
    const double* g = grad_out.data();
    const double* w = params.fusion_w.data();
    for (std::size_t c = 0; c < C; ++c) {
        const double* grow = g + c * plane;
        double acc_b = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc_b += grow[i];
        grads.fusion_b[c] += acc_b;
        for (std::size_t k = 0; k < 2 * C; ++k) {
            const double wv = w[c * 2 * C + k];
            const double* src =
                (k < C) ? face_feat.data() + k * plane : finger_feat.data() + (k - C) * plane;
            double* dst = (k < C) ? out.grad_face.data() + k * plane
                                  : out.grad_finger.data() + (k - C) * plane;
            double acc_w = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                acc_w += src[i] * grow[i];
                dst[i] += wv * grow[i];
            }
            grads.fusion_w[c * 2 * C + k] += acc_w;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Heads
// ---------------------------------------------------------------------------

// Spatial global-average-pool per time step: [C,T,h,w] -> [C,T].
inline Tensor gap_spatial(const Tensor& feat) {
    const std::size_t C = feat.dim(0), T = feat.dim(1);
    const std::size_t plane = feat.dim(2) * feat.dim(3);
    Tensor out({C, T}, 0.0);
    const double* f = feat.data();
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t t = 0; t < T; ++t) {
            const double* p = f + (c * T + t) * plane;
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += p[i];
            out[c * T + t] = acc / static_cast<double>(plane);
        }
    return out;
}

struct BvpHeadCache {
    Tensor pooled; // [C,T]
};

// Per-frame waveform: one learned linear map over channels, shared across
// time steps.
inline std::vector<double> bvp_head_forward(const Tensor& feat, const ModelParams& params,
                                            BvpHeadCache* cache = nullptr) {
    const std::size_t C = feat.dim(0), T = feat.dim(1);
    require(params.bvp_w.size() == C, ErrorKind::Dimension, "bvp head width mismatch");
    Tensor pooled = gap_spatial(feat);
    std::vector<double> wave(T, params.bvp_b[0]);
    for (std::size_t c = 0; c < C; ++c) {
        const double wv = params.bvp_w[c];
        for (std::size_t t = 0; t < T; ++t) wave[t] += wv * pooled[c * T + t];
    }
    if (cache) cache->pooled = std::move(pooled);
    return wave;
}

inline Tensor bvp_head_backward(const std::vector<double>& grad_wave, const Tensor& feat,
                                const ModelParams& params, const BvpHeadCache& cache,
                                ModelParams& grads) {
    const std::size_t C = feat.dim(0), T = feat.dim(1);
    const std::size_t plane = feat.dim(2) * feat.dim(3);
    Tensor grad_feat(std::vector<std::size_t>(feat.shape()), 0.0);
    double acc_b = 0.0;
    for (double gv : grad_wave) acc_b += gv;
    grads.bvp_b[0] += acc_b;
    for (std::size_t c = 0; c < C; ++c) {
        double acc_w = 0.0;
        const double wv = params.bvp_w[c];
        for (std::size_t t = 0; t < T; ++t) {
            acc_w += cache.pooled[c * T + t] * grad_wave[t];
            const double spread = wv * grad_wave[t] / static_cast<double>(plane);
            double* p = grad_feat.data() + (c * T + t) * plane;
            for (std::size_t i = 0; i < plane; ++i) p[i] += spread;
        }
        grads.bvp_w[c] += acc_w;
    }
    return grad_feat;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Spo2HeadCache {
    std::vector<double> pooled; // [C], pooled over time and space
    std::vector<double> hidden; // tanh activations
    double logit = 0.0;
};

// Global average pool over time and space, then a two-layer perceptron with
// tanh before the final layer. The output logit is squashed to the
// physiological band: prediction = 80 + 20 * sigmoid(o), always in (80,100).
inline double spo2_head_forward(const Tensor& feat, const ModelParams& params,
                                Spo2HeadCache* cache = nullptr) {
    const std::size_t C = feat.dim(0);
    const std::size_t per_channel = feat.size() / C;
    require(params.spo2_w1.rank() == 2 && params.spo2_w1.dim(1) == C, ErrorKind::Dimension,
            "spo2 head width mismatch");
    const std::size_t Hn = params.spo2_w1.dim(0);

    std::vector<double> pooled(C, 0.0);
    const double* f = feat.data();
    for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        const double* p = f + c * per_channel;
        for (std::size_t i = 0; i < per_channel; ++i) acc += p[i];
        pooled[c] = acc / static_cast<double>(per_channel);
    }

    std::vector<double> hidden(Hn, 0.0);
    for (std::size_t h = 0; h < Hn; ++h) {
        double acc = params.spo2_b1[h];
        for (std::size_t c = 0; c < C; ++c) acc += params.spo2_w1[h * C + c] * pooled[c];
        hidden[h] = std::tanh(acc);
    }
    double logit = params.spo2_b2[0];
    for (std::size_t h = 0; h < Hn; ++h) logit += params.spo2_w2[h] * hidden[h];

    if (cache) {
        cache->pooled = std::move(pooled);
        cache->hidden = hidden;
        cache->logit = logit;
    }
    return 80.0 + 20.0 * sigmoid(logit);
}

inline Tensor spo2_head_backward(double grad_pred, const Tensor& feat, const ModelParams& params,
                                 const Spo2HeadCache& cache, ModelParams& grads) {
    const std::size_t C = feat.dim(0);
    const std::size_t per_channel = feat.size() / C;
    const std::size_t Hn = params.spo2_w1.dim(0);

    const double s = sigmoid(cache.logit);
    const double dlogit = grad_pred * 20.0 * s * (1.0 - s);

    grads.spo2_b2[0] += dlogit;
    std::vector<double> dhidden(Hn, 0.0);
    for (std::size_t h = 0; h < Hn; ++h) {
        grads.spo2_w2[h] += cache.hidden[h] * dlogit;
        const double da = params.spo2_w2[h] * dlogit;
        dhidden[h] = da * (1.0 - cache.hidden[h] * cache.hidden[h]); // tanh'
    }
    std::vector<double> dpooled(C, 0.0);
    for (std::size_t h = 0; h < Hn; ++h) {
        grads.spo2_b1[h] += dhidden[h];
        for (std::size_t c = 0; c < C; ++c) {
            grads.spo2_w1[h * C + c] += dhidden[h] * cache.pooled[c];
            dpooled[c] += params.spo2_w1[h * C + c] * dhidden[h];
        }
    }
    Tensor grad_feat(std::vector<std::size_t>(feat.shape()), 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        const double spread = dpooled[c] / static_cast<double>(per_channel);
        double* p = grad_feat.data() + c * per_channel;
        for (std::size_t i = 0; i < per_channel; ++i) p[i] += spread;
    }
    return grad_feat;
}

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

struct ModelEval {
    std::optional<std::vector<double>> bvp;
    std::optional<double> spo2;
};

struct ModelCache {
    Tensor face_in;   // model layout [3,T,H,W]
    Tensor finger_in;
    EncoderCache face_enc;
    EncoderCache finger_enc;
    Tensor face_feat;
    Tensor finger_feat;
    Tensor fused;
    BvpHeadCache bvp;
    Spo2HeadCache spo2;
};

// [T,H,W,3] chunk layout -> [3,T,H,W] model layout.
inline Tensor to_model_layout(const Tensor& clip) {
    require(clip.rank() == 4 && clip.dim(3) == 3, ErrorKind::Dimension,
            "expected [T,H,W,3], got " + clip.shape_string());
    const std::size_t T = clip.dim(0), H = clip.dim(1), W = clip.dim(2);
    Tensor out({3, T, H, W}, 0.0);
    const double* src = clip.data();
    double* dst = out.data();
    const std::size_t thw = T * H * W;
    for (std::size_t i = 0; i < thw; ++i)
        for (std::size_t c = 0; c < 3; ++c) dst[c * thw + i] = src[i * 3 + c];
    return out;
}

inline void validate_model_input(const Tensor& clip, const ModelConfig& config,
                                 const char* which) {
    require(clip.rank() == 4 && clip.dim(3) == 3 && clip.dim(0) == config.in_frames &&
                clip.dim(1) == static_cast<std::size_t>(config.in_size) &&
                clip.dim(2) == static_cast<std::size_t>(config.in_size),
            ErrorKind::Dimension,
            std::string(which) + " clip " + clip.shape_string() + " does not match config [" +
                std::to_string(config.in_frames) + "," + std::to_string(config.in_size) + "," +
                std::to_string(config.in_size) + ",3]");
}

// Runs the streams the config enables and whichever heads it requests.
// Clips are diff-normalized chunks in [T-1,S,S,3] layout; a null pointer
// means the stream is absent.
inline ModelEval model_forward(const Tensor* face_clip, const Tensor* finger_clip,
                               const ModelParams& params, ModelCache* cache = nullptr) {
    const ModelConfig& cfg = params.config;
    require(face_clip != nullptr || finger_clip != nullptr, ErrorKind::Input,
            "model_forward needs at least one stream");
    if (cfg.uses_face())
        require(face_clip != nullptr, ErrorKind::Input, "config requires a face clip");
    if (cfg.uses_finger())
        require(finger_clip != nullptr, ErrorKind::Input, "config requires a finger clip");

    ModelCache local;
    ModelCache& cc = cache ? *cache : local;

    Tensor features;
    if (cfg.streams == StreamsMode::Both) {
        validate_model_input(*face_clip, cfg, "face");
        validate_model_input(*finger_clip, cfg, "finger");
        cc.face_in = to_model_layout(*face_clip);
        cc.finger_in = to_model_layout(*finger_clip);
        cc.face_feat = encoder_forward(cc.face_in, params.encoders[params.face_encoder_index()],
                                       cfg, cache ? &cc.face_enc : nullptr);
        cc.finger_feat =
            encoder_forward(cc.finger_in, params.encoders[params.finger_encoder_index()], cfg,
                            cache ? &cc.finger_enc : nullptr);
        features = fuse(cc.face_feat, cc.finger_feat, params, cfg.fusion_mode);
    } else if (cfg.streams == StreamsMode::FaceOnly) {
        validate_model_input(*face_clip, cfg, "face");
        cc.face_in = to_model_layout(*face_clip);
        features = encoder_forward(cc.face_in, params.encoders[0], cfg,
                                   cache ? &cc.face_enc : nullptr);
    } else {
        validate_model_input(*finger_clip, cfg, "finger");
        cc.finger_in = to_model_layout(*finger_clip);
        features = encoder_forward(cc.finger_in, params.encoders[0], cfg,
                                   cache ? &cc.finger_enc : nullptr);
    }

    ModelEval eval;
    if (cfg.has_bvp_head())
        eval.bvp = bvp_head_forward(features, params, cache ? &cc.bvp : nullptr);
    if (cfg.has_spo2_head())
        eval.spo2 = spo2_head_forward(features, params, cache ? &cc.spo2 : nullptr);
    cc.fused = std::move(features);
    return eval;
}

// Backward pass from head gradients; accumulates into `grads` (built with
// zeros_like). Null gradient pointers skip the corresponding head.
inline void model_backward(const std::vector<double>* grad_bvp, const double* grad_spo2,
                           const ModelParams& params, const ModelCache& cache,
                           ModelParams& grads) {
    const ModelConfig& cfg = params.config;
    Tensor grad_features(std::vector<std::size_t>(cache.fused.shape()), 0.0);
    bool any = false;
    if (grad_bvp != nullptr) {
        require(cfg.has_bvp_head(), ErrorKind::Input, "model has no BVP head");
        Tensor g = bvp_head_backward(*grad_bvp, cache.fused, params, cache.bvp, grads);
        for (std::size_t i = 0; i < grad_features.size(); ++i) grad_features[i] += g[i];
        any = true;
    }
    if (grad_spo2 != nullptr) {
        require(cfg.has_spo2_head(), ErrorKind::Input, "model has no SpO2 head");
        Tensor g = spo2_head_backward(*grad_spo2, cache.fused, params, cache.spo2, grads);
        for (std::size_t i = 0; i < grad_features.size(); ++i) grad_features[i] += g[i];
        any = true;
    }
    if (!any) return;

    if (cfg.streams == StreamsMode::Both) {
        Tensor gface, gfinger;
        if (cfg.fusion_mode == FusionMode::ConcatProject) {
            FuseGrads fg = fuse_backward(grad_features, cache.face_feat, cache.finger_feat,
                                         params, cfg.fusion_mode, grads);
            gface = std::move(fg.grad_face);
            gfinger = std::move(fg.grad_finger);
        } else {
            gface = grad_features;
            gfinger = std::move(grad_features);
        }
        encoder_backward(std::move(gface), params.encoders[params.face_encoder_index()],
                         grads.encoders[params.face_encoder_index()], cache.face_enc, cfg);
        encoder_backward(std::move(gfinger), params.encoders[params.finger_encoder_index()],
                         grads.encoders[params.finger_encoder_index()], cache.finger_enc, cfg);
    } else if (cfg.streams == StreamsMode::FaceOnly) {
        encoder_backward(std::move(grad_features), params.encoders[0], grads.encoders[0],
                         cache.face_enc, cfg);
    } else {
        encoder_backward(std::move(grad_features), params.encoders[0], grads.encoders[0],
                         cache.finger_enc, cfg);
    }
}

} // namespace vitals
