#pragma once

namespace gorder {

inline constexpr const char* version = "1.0.0";

}  // namespace gorder
