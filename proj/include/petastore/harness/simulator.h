#pragma once

#include <string>
#include <vector>

#include "petastore/core/result.h"
#include "petastore/harness/report.h"
#include "petastore/harness/scenario.h"
#include "petastore/harness/trace.h"

namespace petastore::harness {

struct RunResult {
  MetricsReport report;
  std::vector<TraceEvent> trace;
  // format_trace(trace); identical for identical scenarios.
  std::string trace_text;
};

// Runs the scenario on one logical thread over a simulated clock: masters,
// slaves, tertiary store and lock service all live in-process and are driven
// through their line protocols. kInvalidScenario / kUnknownTarget when the
// scenario does not validate.
Result<RunResult> run_scenario(const Scenario& scenario);

}  // namespace petastore::harness
