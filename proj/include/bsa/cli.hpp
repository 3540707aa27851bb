// Copyright (C) 2026 The BSA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace bsa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitTolerance = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by the `bsa` binary and the tests. `args` excludes the
/// program name. Returns 0 on success, 1 on a tolerance failure, 2 on
/// usage/config/I/O errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Version string embedded into reports.
std::string_view version();

}  // namespace bsa::cli
