#pragma once

namespace qpole {

inline constexpr const char *kVersion = "0.1.0";

} // namespace qpole
