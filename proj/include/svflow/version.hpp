#pragma once

namespace svf {

inline constexpr const char* kVersion = "0.1.0";

}
