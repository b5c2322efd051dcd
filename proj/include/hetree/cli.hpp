#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hetree::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kDataError = 3;
inline constexpr int kContract = 4;

// `args` excludes the program name. Results go to `out` unless --out is given;
// diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hetree::cli
