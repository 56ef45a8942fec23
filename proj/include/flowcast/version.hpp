#pragma once

namespace flowcast {
inline constexpr const char* kToolVersion = "flowcast 0.1.0";
}
