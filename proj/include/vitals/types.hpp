#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vitals/error.hpp"
#include "vitals/tensor.hpp"

namespace vitals {

// Milliseconds since session start. All stream alignment happens on this
// clock; sub-millisecond precision is discarded at ingestion.
struct Timestamp {
    std::int64_t millis = 0;

    friend bool operator==(Timestamp a, Timestamp b) { return a.millis == b.millis; }
    friend bool operator!=(Timestamp a, Timestamp b) { return a.millis != b.millis; }
    friend bool operator<(Timestamp a, Timestamp b) { return a.millis < b.millis; }
    friend bool operator<=(Timestamp a, Timestamp b) { return a.millis <= b.millis; }
    friend bool operator>(Timestamp a, Timestamp b) { return a.millis > b.millis; }
    friend bool operator>=(Timestamp a, Timestamp b) { return a.millis >= b.millis; }
};

enum class Modality { Face, Finger };
enum class SignalKind { Bvp, Spo2, Respiration };
enum class ProtocolState { State1 = 1, State2 = 2, State3 = 3, State4 = 4 };

inline const char* to_string(Modality m) { return m == Modality::Face ? "face" : "finger"; }

inline const char* to_string(SignalKind k) {
    switch (k) {
        case SignalKind::Bvp: return "bvp";
        case SignalKind::Spo2: return "spo2";
        case SignalKind::Respiration: return "rr";
    }
    return "?";
}

inline const char* to_string(ProtocolState s) {
    switch (s) {
        case ProtocolState::State1: return "state1";
        case ProtocolState::State2: return "state2";
        case ProtocolState::State3: return "state3";
        case ProtocolState::State4: return "state4";
    }
    return "?";
}

inline ProtocolState protocol_state_from_string(const std::string& s) {
    if (s == "state1") return ProtocolState::State1;
    if (s == "state2") return ProtocolState::State2;
    if (s == "state3") return ProtocolState::State3;
    if (s == "state4") return ProtocolState::State4;
    raise(ErrorKind::Format, "unknown protocol state '" + s + "'");
}

struct SessionMeta {
    std::string subject_id;
    ProtocolState state = ProtocolState::State1;
    double duration_s = 0.0;
};

inline void check_monotone(const std::vector<Timestamp>& ts, const char* what) {
    for (std::size_t i = 0; i < ts.size(); ++i) {
        require(ts[i].millis >= 0, ErrorKind::Validation,
                std::string(what) + ": negative timestamp");
        if (i > 0)
            require(ts[i - 1] < ts[i], ErrorKind::Validation,
                    std::string(what) + ": timestamps must be strictly increasing");
    }
}

// One physiological channel. Timestamps strictly increasing; SpO2 values are
// validated against [0, 100] percent at construction.
class SignalSeries {
public:
    SignalSeries(SignalKind kind, std::vector<double> values,
                 std::vector<Timestamp> timestamps, double nominal_hz)
        : kind_(kind),
          values_(std::move(values)),
          timestamps_(std::move(timestamps)),
          nominal_hz_(nominal_hz) {
        require(values_.size() == timestamps_.size(), ErrorKind::Input,
                "signal values/timestamps length mismatch");
        require(nominal_hz_ > 0.0, ErrorKind::Validation, "nominal rate must be positive");
        check_monotone(timestamps_, to_string(kind_));
        if (kind_ == SignalKind::Spo2) {
            for (double v : values_)
                require(v >= 0.0 && v <= 100.0, ErrorKind::Validation,
                        "SpO2 value outside [0,100]");
        }
    }

    SignalKind kind() const noexcept { return kind_; }
    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<Timestamp>& timestamps() const noexcept { return timestamps_; }
    double nominal_hz() const noexcept { return nominal_hz_; }
    std::size_t size() const noexcept { return values_.size(); }

    Timestamp first_timestamp() const {
        require(!timestamps_.empty(), ErrorKind::Input, "empty signal series");
        return timestamps_.front();
    }
    Timestamp last_timestamp() const {
        require(!timestamps_.empty(), ErrorKind::Input, "empty signal series");
        return timestamps_.back();
    }

private:
    SignalKind kind_;
    std::vector<double> values_;
    std::vector<Timestamp> timestamps_;
    double nominal_hz_;
};

// Ordered video frames with per-frame timestamps. Pixels are stored as the
// 8-bit values read from disk and exposed as intensities in [0, 1]
// (value / 255); everything downstream works in the normalized domain.
class TimestampedFrameSequence {
public:
    TimestampedFrameSequence(Modality modality, int height, int width,
                             std::vector<std::vector<std::uint8_t>> frames,
                             std::vector<Timestamp> timestamps, double nominal_fps)
        : modality_(modality),
          height_(height),
          width_(width),
          frames_(std::move(frames)),
          timestamps_(std::move(timestamps)),
          nominal_fps_(nominal_fps) {
        require(height_ > 0 && width_ > 0, ErrorKind::Input, "frame size must be positive");
        require(frames_.size() == timestamps_.size(), ErrorKind::Integrity,
                "frame/timestamp count mismatch");
        require(nominal_fps_ > 0.0, ErrorKind::Validation, "nominal fps must be positive");
        const std::size_t expected = static_cast<std::size_t>(height_) * width_ * 3;
        for (const auto& f : frames_)
            require(f.size() == expected, ErrorKind::Integrity,
                    "all frames must share one height x width");
        check_monotone(timestamps_, to_string(modality_));
    }

    Modality modality() const noexcept { return modality_; }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    double nominal_fps() const noexcept { return nominal_fps_; }
    std::size_t size() const noexcept { return frames_.size(); }
    const std::vector<Timestamp>& timestamps() const noexcept { return timestamps_; }
    const std::vector<std::uint8_t>& frame_bytes(std::size_t i) const { return frames_.at(i); }

    double intensity(std::size_t frame, int y, int x, int c) const {
        const auto& f = frames_[frame];
        return f[(static_cast<std::size_t>(y) * width_ + x) * 3 + c] / 255.0;
    }

    // Frames [begin, begin+count) as a [T,H,W,3] tensor of [0,1] intensities.
    Tensor clip_tensor(std::size_t begin, std::size_t count) const {
        require(begin + count <= frames_.size(), ErrorKind::Input, "clip range out of bounds");
        Tensor out({count, static_cast<std::size_t>(height_),
                    static_cast<std::size_t>(width_), 3},
                   0.0);
        double* dst = out.data();
        for (std::size_t t = 0; t < count; ++t) {
            const auto& f = frames_[begin + t];
            for (std::size_t i = 0; i < f.size(); ++i) *dst++ = f[i] / 255.0;
        }
        return out;
    }

    TimestampedFrameSequence select(const std::vector<std::size_t>& indices,
                                    const std::vector<Timestamp>& new_timestamps) const {
        std::vector<std::vector<std::uint8_t>> frames;
        frames.reserve(indices.size());
        for (std::size_t i : indices) frames.push_back(frames_.at(i));
        return TimestampedFrameSequence(modality_, height_, width_, std::move(frames),
                                        new_timestamps, nominal_fps_);
    }

private:
    Modality modality_;
    int height_;
    int width_;
    std::vector<std::vector<std::uint8_t>> frames_;
    std::vector<Timestamp> timestamps_;
    double nominal_fps_;
};

} // namespace vitals
