#pragma once

namespace mvrfd {
inline constexpr const char* kVersion = "0.1.0";
}
