#pragma once

namespace toma {

inline constexpr const char* kVersionTag = "toma-0.1.0";

}  // namespace toma
