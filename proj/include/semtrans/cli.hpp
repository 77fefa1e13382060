#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace semtrans::cli {

// Exit codes: 0 ok, 1 usage, 2 parse error, 3 transform/analysis error,
// 4 runtime error, 5 check mismatch.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace semtrans::cli
