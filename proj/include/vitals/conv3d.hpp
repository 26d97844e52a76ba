#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "vitals/error.hpp"
#include "vitals/tensor.hpp"

namespace vitals {

using Stride3 = std::array<int, 3>;
using Pad3 = std::array<int, 3>;

namespace convdetail {

inline int out_extent(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

// Zero-padded copy of a [C,T,H,W] tensor.
inline Tensor pad_input(const Tensor& input, const Pad3& pad) {
    const int C = static_cast<int>(input.dim(0));
    const int T = static_cast<int>(input.dim(1));
    const int H = static_cast<int>(input.dim(2));
    const int W = static_cast<int>(input.dim(3));
    const int Tp = T + 2 * pad[0], Hp = H + 2 * pad[1], Wp = W + 2 * pad[2];
    Tensor out({static_cast<std::size_t>(C), static_cast<std::size_t>(Tp),
                static_cast<std::size_t>(Hp), static_cast<std::size_t>(Wp)},
               0.0);
    const double* src = input.data();
    double* dst = out.data();
    for (int c = 0; c < C; ++c)
        for (int t = 0; t < T; ++t)
            for (int y = 0; y < H; ++y) {
                const double* s = src + ((static_cast<std::size_t>(c) * T + t) * H + y) * W;
                double* d = dst + ((static_cast<std::size_t>(c) * Tp + t + pad[0]) * Hp + y +
                                   pad[1]) *
                                      Wp +
                            pad[2];
                for (int x = 0; x < W; ++x) d[x] = s[x];
            }
    return out;
}

} // namespace convdetail

// Direct 3D cross-correlation plus bias.
//   input   [C_in, T, H, W]
//   weights [C_out, C_in, kT, kH, kW]
//   output  [C_out, T', H', W']   with  X' = (X + 2*pad - k) / stride + 1
inline Tensor conv3d_forward(const Tensor& input, const Tensor& weights,
                             const std::vector<double>& bias, const Stride3& stride,
                             const Pad3& pad) {
    require(input.rank() == 4, ErrorKind::Dimension,
            "conv3d input must be [C,T,H,W], got " + input.shape_string());
    require(weights.rank() == 5, ErrorKind::Dimension,
            "conv3d weights must be [C_out,C_in,kT,kH,kW], got " + weights.shape_string());
    require(weights.dim(1) == input.dim(0), ErrorKind::Dimension,
            "conv3d channel mismatch: input " + input.shape_string() + " vs weights " +
                weights.shape_string());
    require(bias.size() == weights.dim(0), ErrorKind::Dimension, "conv3d bias length mismatch");
    for (int s : stride) require(s >= 1, ErrorKind::Dimension, "conv3d stride must be >= 1");
    for (int p : pad) require(p >= 0, ErrorKind::Dimension, "conv3d pad must be >= 0");

    const int Cin = static_cast<int>(input.dim(0));
    const int T = static_cast<int>(input.dim(1));
    const int H = static_cast<int>(input.dim(2));
    const int W = static_cast<int>(input.dim(3));
    const int Cout = static_cast<int>(weights.dim(0));
    const int kT = static_cast<int>(weights.dim(2));
    const int kH = static_cast<int>(weights.dim(3));
    const int kW = static_cast<int>(weights.dim(4));

    const int To = convdetail::out_extent(T, kT, stride[0], pad[0]);
    const int Ho = convdetail::out_extent(H, kH, stride[1], pad[1]);
    const int Wo = convdetail::out_extent(W, kW, stride[2], pad[2]);
    require(To >= 1 && Ho >= 1 && Wo >= 1, ErrorKind::Dimension,
            "conv3d kernel does not fit padded input");

    Tensor padded = convdetail::pad_input(input, pad);
    const int Tp = T + 2 * pad[0], Hp = H + 2 * pad[1], Wp = W + 2 * pad[2];
    const double* pin = padded.data();
    const double* w = weights.data();

    Tensor out({static_cast<std::size_t>(Cout), static_cast<std::size_t>(To),
                static_cast<std::size_t>(Ho), static_cast<std::size_t>(Wo)},
               0.0);
    double* o = out.data();

    for (int co = 0; co < Cout; ++co) {
        double* oplane = o + static_cast<std::size_t>(co) * To * Ho * Wo;
        for (std::size_t i = 0; i < static_cast<std::size_t>(To) * Ho * Wo; ++i)
            oplane[i] = bias[static_cast<std::size_t>(co)];
        for (int ci = 0; ci < Cin; ++ci)
            for (int kt = 0; kt < kT; ++kt)
                for (int kh = 0; kh < kH; ++kh) {
                    const double* wrow =
                        w + ((((static_cast<std::size_t>(co) * Cin + ci) * kT + kt) * kH + kh) *
                             kW);
                    for (int t = 0; t < To; ++t) {
                        const int it = t * stride[0] + kt;
                        for (int y = 0; y < Ho; ++y) {
                            const int iy = y * stride[1] + kh;
                            const double* irow =
                                pin + ((static_cast<std::size_t>(ci) * Tp + it) * Hp + iy) * Wp;
                            double* orow = oplane + (static_cast<std::size_t>(t) * Ho + y) * Wo;
                            if (stride[2] == 1 && kW == 3) {
                                const double w0 = wrow[0], w1 = wrow[1], w2 = wrow[2];
                                for (int x = 0; x < Wo; ++x)
                                    orow[x] += irow[x] * w0 + irow[x + 1] * w1 + irow[x + 2] * w2;
                            } else if (stride[2] == 1 && kW == 1) {
                                const double w0 = wrow[0];
                                for (int x = 0; x < Wo; ++x) orow[x] += irow[x] * w0;
                            } else {
                                for (int x = 0; x < Wo; ++x) {
                                    double acc = 0.0;
                                    const double* ir = irow + static_cast<std::size_t>(x) *
                                                                  stride[2];
                                    for (int kw = 0; kw < kW; ++kw) acc += ir[kw] * wrow[kw];
                                    orow[x] += acc;
                                }
                            }
                        }
                    }
                }
    }
    return out;
}

struct Conv3dGrads {
    Tensor grad_input;
    Tensor grad_weights;
    std::vector<double> grad_bias;
};

// Exact gradients of conv3d_forward. `cached_input` is the forward input
// (unpadded); stride and pad must match the forward call.
inline Conv3dGrads conv3d_backward(const Tensor& grad_out, const Tensor& cached_input,
                                   const Tensor& weights, const Stride3& stride,
                                   const Pad3& pad) {
    require(grad_out.rank() == 4 && cached_input.rank() == 4 && weights.rank() == 5,
            ErrorKind::Dimension, "conv3d_backward rank mismatch");
    const int Cin = static_cast<int>(cached_input.dim(0));
    const int T = static_cast<int>(cached_input.dim(1));
    const int H = static_cast<int>(cached_input.dim(2));
    const int W = static_cast<int>(cached_input.dim(3));
    const int Cout = static_cast<int>(weights.dim(0));
    const int kT = static_cast<int>(weights.dim(2));
    const int kH = static_cast<int>(weights.dim(3));
    const int kW = static_cast<int>(weights.dim(4));
    require(static_cast<int>(weights.dim(1)) == Cin, ErrorKind::Dimension,
            "conv3d_backward channel mismatch");

    const int To = convdetail::out_extent(T, kT, stride[0], pad[0]);
    const int Ho = convdetail::out_extent(H, kH, stride[1], pad[1]);
    const int Wo = convdetail::out_extent(W, kW, stride[2], pad[2]);
    require(grad_out.dim(0) == static_cast<std::size_t>(Cout) &&
                grad_out.dim(1) == static_cast<std::size_t>(To) &&
                grad_out.dim(2) == static_cast<std::size_t>(Ho) &&
                grad_out.dim(3) == static_cast<std::size_t>(Wo),
            ErrorKind::Dimension,
            "conv3d_backward grad_out shape " + grad_out.shape_string() + " does not match");

    Tensor padded = convdetail::pad_input(cached_input, pad);
    const int Tp = T + 2 * pad[0], Hp = H + 2 * pad[1], Wp = W + 2 * pad[2];
    const double* pin = padded.data();
    const double* g = grad_out.data();
    const double* w = weights.data();

    Conv3dGrads out;
    out.grad_weights = Tensor(std::vector<std::size_t>(weights.shape()), 0.0);
    out.grad_bias.assign(static_cast<std::size_t>(Cout), 0.0);
    Tensor grad_padded(
        {static_cast<std::size_t>(Cin), static_cast<std::size_t>(Tp),
         static_cast<std::size_t>(Hp), static_cast<std::size_t>(Wp)},
        0.0);
    double* gp = grad_padded.data();
    double* gw = out.grad_weights.data();

    for (int co = 0; co < Cout; ++co) {
        const double* gplane = g + static_cast<std::size_t>(co) * To * Ho * Wo;
        double acc_b = 0.0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(To) * Ho * Wo; ++i)
            acc_b += gplane[i];
        out.grad_bias[static_cast<std::size_t>(co)] = acc_b;

        for (int ci = 0; ci < Cin; ++ci)
            for (int kt = 0; kt < kT; ++kt)
                for (int kh = 0; kh < kH; ++kh) {
                    const std::size_t wbase =
                        (((static_cast<std::size_t>(co) * Cin + ci) * kT + kt) * kH + kh) * kW;
                    const double* wrow = w + wbase;
                    double* gwrow = gw + wbase;
                    for (int t = 0; t < To; ++t) {
                        const int it = t * stride[0] + kt;
                        for (int y = 0; y < Ho; ++y) {
                            const int iy = y * stride[1] + kh;
                            const std::size_t prow_off =
                                ((static_cast<std::size_t>(ci) * Tp + it) * Hp + iy) * Wp;
                            const double* irow = pin + prow_off;
                            double* gprow = gp + prow_off;
                            const double* grow =
                                gplane + (static_cast<std::size_t>(t) * Ho + y) * Wo;
                            if (stride[2] == 1) {
                                for (int kw = 0; kw < kW; ++kw) {
                                    const double wv = wrow[kw];
                                    double acc_w = 0.0;
                                    const double* ir = irow + kw;
                                    double* gr = gprow + kw;
                                    for (int x = 0; x < Wo; ++x) {
                                        acc_w += ir[x] * grow[x];
                                        gr[x] += wv * grow[x];
                                    }
                                    gwrow[kw] += acc_w;
                                }
                            } else {
                                for (int x = 0; x < Wo; ++x) {
                                    const double gv = grow[x];
                                    const std::size_t xoff =
                                        static_cast<std::size_t>(x) * stride[2];
                                    for (int kw = 0; kw < kW; ++kw) {
                                        gwrow[kw] += irow[xoff + kw] * gv;
                                        gprow[xoff + kw] += wrow[kw] * gv;
                                    }
                                }
                            }
                        }
                    }
                }
    }

    // Strip the padding border off the input gradient.
    out.grad_input = Tensor({static_cast<std::size_t>(Cin), static_cast<std::size_t>(T),
                             static_cast<std::size_t>(H), static_cast<std::size_t>(W)},
                            0.0);
    double* gi = out.grad_input.data();
    for (int c = 0; c < Cin; ++c)
        for (int t = 0; t < T; ++t)
            for (int y = 0; y < H; ++y) {
                const double* s = gp + ((static_cast<std::size_t>(c) * Tp + t + pad[0]) * Hp + y +
                                        pad[1]) *
                                           Wp +
                                  pad[2];
                double* d = gi + ((static_cast<std::size_t>(c) * T + t) * H + y) * W;
                for (int x = 0; x < W; ++x) d[x] = s[x];
            }
    return out;
}

} // namespace vitals
