#pragma once

namespace lifnet {
inline constexpr const char* kVersion = "0.1.0";
}
