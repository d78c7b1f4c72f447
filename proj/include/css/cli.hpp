#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace css::cli {

enum ExitCode { ok = 0, usage_error = 1, numeric_failure = 2 };

// "theta2=0.1*theta1" -> 0.1. Accepts "theta2 = c * theta1", "theta2=theta1" and
// "theta2=c*theta1" with any decimal or exponent form of c.
std::optional<double> parse_line_spec(const std::string& spec);

// Runs one subcommand; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

} // namespace css::cli
