#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "drr/critic.hpp"
#include "drr/qa_data.hpp"

namespace drr::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

// Entry point shared by main() and the tests. `args` excludes the program
// name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "oracle" | "accept" | "reject" | "constant:accept" | "constant:reject" |
// "linear:<model path>" | "remote:<base url>". `gold` is required for oracle.
std::unique_ptr<Critic> make_critic(std::string_view spec, const Dataset* gold);

}  // namespace drr::cli
