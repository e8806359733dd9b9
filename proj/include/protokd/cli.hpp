#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace protokd {

inline constexpr std::string_view kVersion = "0.1.0";

/// Exit codes: 0 success, 1 data error, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line. `args` excludes the program name. Results go to
/// --out (plus sidecar .manifest.json / .csv files) or to `out` when --out is
/// absent; diagnostics go to `err` as "error: <Code>: <message>".
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace protokd
