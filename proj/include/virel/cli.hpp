#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace virel {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `virel` binary. Artifacts go to --out when given,
/// otherwise the primary artifact is written to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace virel
