#pragma once

namespace fd {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fd
