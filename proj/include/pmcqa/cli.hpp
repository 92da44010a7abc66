#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pmcqa {

// Command-line driver behind the pmcqa binary. `args` excludes the program
// name. Failures print one line to `err` shaped as
//   pmcqa: <category>: <detail>
// and the return value follows the exit-code mapping in errors.hpp.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Convenience overload bound to stdout/stderr.
int cli_run(const std::vector<std::string>& args);

}  // namespace pmcqa
