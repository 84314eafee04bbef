// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace chainlens {

/// Exit codes of run_cli.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (args excludes the program name). Results go to
/// `out` or the --out file; failures print one line to `err`:
///   error: <kind>: <message>
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace chainlens
