#pragma once

namespace stylo {
inline constexpr const char* kVersion = "0.1.0";
}
