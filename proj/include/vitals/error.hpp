#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace vitals {

// Error taxonomy used across the library. Tests match on the kind, not the
// message text.
enum class ErrorKind {
    Dimension,     // tensor/layer shape mismatch
    Range,         // numeric argument outside its admissible interval
    Input,         // structurally invalid input (too short, empty, missing stream)
    Format,        // unparsable or malformed file
    Integrity,     // file contents inconsistent with each other
    Validation,    // value outside its physiological/documented range
    SyncGap,       // stream alignment gap larger than the tolerance
    Compatibility, // persisted artifact does not match the requesting config
    Io,            // filesystem failure
    Divergence,    // non-finite value produced during training
    Degenerate,    // statistic undefined for this input (e.g. constant series)
    Usage,         // bad command-line invocation
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Dimension: return "dimension";
        case ErrorKind::Range: return "range";
        case ErrorKind::Input: return "input";
        case ErrorKind::Format: return "format";
        case ErrorKind::Integrity: return "integrity";
        case ErrorKind::Validation: return "validation";
        case ErrorKind::SyncGap: return "sync-gap";
        case ErrorKind::Compatibility: return "compatibility";
        case ErrorKind::Io: return "io";
        case ErrorKind::Divergence: return "divergence";
        case ErrorKind::Degenerate: return "degenerate";
        case ErrorKind::Usage: return "usage";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message),
          kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) raise(kind, message);
}

} // namespace vitals
