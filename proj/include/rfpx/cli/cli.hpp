#pragma once

#include <ostream>

namespace rfpx::cli {

/// Subcommands: gen-data, stats, train, eval, ablate {sep-resampler,
/// depth-extremes}, sensitivity, gradcheck. Returns 0 on success, 1 on a
/// validation error (including bad usage), 2 on a runtime error.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rfpx::cli
