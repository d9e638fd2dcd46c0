#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mzalign {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitReplayMismatch = 3;

/// Entry point of the mzalign tool; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mzalign
