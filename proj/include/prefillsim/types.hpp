#pragma once

#include <cstdint>

namespace prefillsim {

// All times are milliseconds, all sizes are token counts, throughout.
using Tokens = std::int64_t;
using RequestId = std::int64_t;

}  // namespace prefillsim
