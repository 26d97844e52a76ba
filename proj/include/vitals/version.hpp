#pragma once

namespace vitals {

inline constexpr const char* kVersion = "1.0.0";

} // namespace vitals
