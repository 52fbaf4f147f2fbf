#pragma once

namespace nwband {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace nwband
