#pragma once

namespace trafficbench {

inline constexpr char kToolVersion[] = "0.1.0";

}  // namespace trafficbench
