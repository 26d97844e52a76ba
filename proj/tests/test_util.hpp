#pragma once

// Shared test helpers: scratch directories, a brute-force conv3d reference,
// and a content-addressed cache for generated synthetic datasets so repeated
// test runs (and separate test processes) do not re-render footage.

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "vitals/vitals.hpp"

namespace testutil {

namespace fs = std::filesystem;

inline fs::path scratch_root() {
    fs::path root = fs::temp_directory_path() / "vitals_tests";
    fs::create_directories(root);
    return root;
}

// Fresh empty directory for one test.
inline fs::path fresh_dir(const std::string& name) {
    fs::path dir = scratch_root() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Naive 7-loop direct cross-correlation; the conv3d oracle. Kept independent
// of the library implementation on purpose.
inline vitals::Tensor conv3d_reference(const vitals::Tensor& input, const vitals::Tensor& weights,
                                       const std::vector<double>& bias,
                                       const vitals::Stride3& stride, const vitals::Pad3& pad) {
    const int Cin = static_cast<int>(input.dim(0));
    const int T = static_cast<int>(input.dim(1));
    const int H = static_cast<int>(input.dim(2));
    const int W = static_cast<int>(input.dim(3));
    const int Cout = static_cast<int>(weights.dim(0));
    const int kT = static_cast<int>(weights.dim(2));
    const int kH = static_cast<int>(weights.dim(3));
    const int kW = static_cast<int>(weights.dim(4));
    const int To = (T + 2 * pad[0] - kT) / stride[0] + 1;
    const int Ho = (H + 2 * pad[1] - kH) / stride[1] + 1;
    const int Wo = (W + 2 * pad[2] - kW) / stride[2] + 1;

    auto in_at = [&](int c, int t, int y, int x) -> double {
        if (t < 0 || t >= T || y < 0 || y >= H || x < 0 || x >= W) return 0.0;
        return input[((static_cast<std::size_t>(c) * T + t) * H + y) * W + x];
    };
    vitals::Tensor out({static_cast<std::size_t>(Cout), static_cast<std::size_t>(To),
                        static_cast<std::size_t>(Ho), static_cast<std::size_t>(Wo)},
                       0.0);
    for (int co = 0; co < Cout; ++co)
        for (int t = 0; t < To; ++t)
            for (int y = 0; y < Ho; ++y)
                for (int x = 0; x < Wo; ++x) {
                    double acc = bias[static_cast<std::size_t>(co)];
                    for (int ci = 0; ci < Cin; ++ci)
                        for (int kt = 0; kt < kT; ++kt)
                            for (int kh = 0; kh < kH; ++kh)
                                for (int kw = 0; kw < kW; ++kw)
                                    acc += in_at(ci, t * stride[0] - pad[0] + kt,
                                                 y * stride[1] - pad[1] + kh,
                                                 x * stride[2] - pad[2] + kw) *
                                           weights[((((static_cast<std::size_t>(co) * Cin + ci) *
                                                          kT +
                                                      kt) *
                                                         kH +
                                                     kh) *
                                                        kW +
                                                    kw)];
                    out[((static_cast<std::size_t>(co) * To + t) * Ho + y) * Wo + x] = acc;
                }
    return out;
}

inline vitals::Tensor random_tensor(std::vector<std::size_t> shape, vitals::Rng& rng,
                                    double lo = -1.0, double hi = 1.0) {
    vitals::Tensor t(std::move(shape), 0.0);
    for (auto& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

// Generated datasets are deterministic in their config, so cache them by
// hash across tests and processes.
inline fs::path cached_dataset(const std::string& tag, std::size_t subjects,
                               const vitals::SynthConfig& tmpl) {
    vitals::Fnv1a h;
    h.update(tag);
    h.update_pod(subjects);
    h.update_pod(tmpl.seed);
    h.update_pod(tmpl.duration_s);
    h.update_pod(tmpl.noise_std);
    h.update_pod(tmpl.frame_size);
    h.update_pod(tmpl.roi_fraction);
    h.update_pod(tmpl.acdc_green);
    h.update_pod(tmpl.finger_amp_scale);
    h.update_pod(tmpl.amp_couples_spo2);
    const fs::path dir = scratch_root() / ("ds_" + tag + "_" + vitals::hex_u64(h.digest()));
    const fs::path stamp = dir / ".complete";
    if (fs::exists(stamp)) return dir;
    fs::remove_all(dir);
    vitals::gen_dataset(dir, subjects, vitals::all_protocol_states(), tmpl);
    std::ofstream(stamp.string()) << "ok\n";
    return dir;
}

} // namespace testutil
