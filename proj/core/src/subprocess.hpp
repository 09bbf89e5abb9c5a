// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace gestura::detail {

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string out;
  std::string err;
};

/// Runs argv[0] (PATH lookup) with `input` on stdin and collects both output
/// streams. Throws Error{CalculatorFailure} when the process cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv, const std::string& input,
                          double timeout_s);

}  // namespace gestura::detail
