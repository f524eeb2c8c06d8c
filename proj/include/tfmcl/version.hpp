#pragma once

namespace tfmcl {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tfmcl
