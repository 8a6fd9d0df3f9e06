#pragma once

namespace smc {

inline constexpr const char* kLibraryName = "smcsmooth";
inline constexpr const char* kLibraryVersion = "0.1.0";

}  // namespace smc
