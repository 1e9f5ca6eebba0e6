#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace eitnet {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;

/// "2s", "1.5s", "250ms", "40000us" or a bare number of seconds.
std::int64_t parse_duration_us(const std::string& text);

/// Runs one subcommand. Summaries go to `out`; usage text and the single
/// "error: ..." line go to `err`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eitnet
