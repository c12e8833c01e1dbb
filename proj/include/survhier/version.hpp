#pragma once

namespace survhier {

inline constexpr const char* kVersion = "0.1.0";

} // namespace survhier
