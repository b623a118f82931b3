#pragma once

#include <string>
#include <vector>

namespace hsk::cli {

// Entry point shared by the binary and the tests. args excludes argv[0].
// Returns 0 on success, 2 for file/format errors, 1 otherwise; failures
// print a single "error <code>: <message>" line on stderr.
int run(std::vector<std::string> args);

// Grid syntax helpers: a value is a decimal or "2^<k>"; a list is
// comma-separated values and/or "<lo>..<hi>" ranges that expand by doubling.
double parse_grid_value(const std::string& text);
std::vector<double> parse_grid_list(const std::string& text);

} // namespace hsk::cli
