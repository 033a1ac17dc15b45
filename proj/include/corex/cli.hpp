#ifndef COREX_CLI_HPP
#define COREX_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace corex::cli {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitData = 2;

constexpr const char* kToolVersion = "1.0.0";

/// Runs one subcommand. `args` excludes the program name, e.g.
/// {"fit", "--matrix", "m.txt", ...}. Returns 0 on success, 1 on usage or
/// validation errors, 2 on data errors. Outputs are only written once every
/// computation has succeeded, and each run writes "<output>.meta.json".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace corex::cli

#endif  // COREX_CLI_HPP
