#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace oasis::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

/// Runs one invocation. `args` excludes the program name. Logs go to `err`;
/// `in` backs `--text -`.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace oasis::cli
