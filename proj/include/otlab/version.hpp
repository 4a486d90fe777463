#pragma once

namespace otlab {

inline constexpr const char* version = "0.1.0";

}  // namespace otlab
