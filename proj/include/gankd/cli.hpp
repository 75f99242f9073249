#pragma once

#include <string>
#include <vector>

namespace gankd::cli {

// Dispatches one CLI invocation (args exclude the program name) and maps
// errors to exit codes: 2 config, 3 data, 4 comparability, 5 numeric
// divergence, 1 anything else.
int run_cli(const std::vector<std::string>& args);

// $GANKD_STATE_ROOT, or ./runs when unset. Segmenter caches live under it.
std::string state_root();

} // namespace gankd::cli
