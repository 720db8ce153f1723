// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace relrule::cli {

/// Runs the command line; returns 0 on success, 2 on a usage error and 1
/// on any other failure (with a message on `err`).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace relrule::cli
