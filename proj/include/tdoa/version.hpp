#pragma once

namespace tdoa {

inline constexpr const char* kVersion = "0.1.0";

// Identifies the random-number scheme baked into simulation results.
// Bump whenever the generator or the draw layout changes.
inline constexpr const char* kGeneratorId = "philox4x32-10/box-muller-v1";

}  // namespace tdoa
