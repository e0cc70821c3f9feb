#pragma once

namespace driftlab {

inline constexpr const char* kVersion = "0.3.1";

}  // namespace driftlab
