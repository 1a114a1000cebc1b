#pragma once

namespace coarsemp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace coarsemp
