#pragma once

#include <iosfwd>

namespace fbq::cli {

enum ExitCode : int { kOk = 0, kValidationFailed = 1, kUsage = 2, kDomain = 3 };

/// Entry point of the `fbq` tool; argv[0] is the program name.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fbq::cli
