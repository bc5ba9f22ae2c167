#pragma once

namespace qdet {
inline constexpr const char* kVersion = "0.1.0";
}
