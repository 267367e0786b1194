#pragma once

namespace dgmod {
inline constexpr const char* kVersion = "0.1.0";
}
