#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mutmod/decision.hpp"
#include "mutmod/scenario.hpp"
#include "mutmod/trace.hpp"

namespace mutmod {

struct RunOptions {
  std::uint64_t seed = 0;
  std::optional<AutonomyMode> mode;  // overrides the scenario's initial mode
};

struct LatencyStats {
  std::size_t events = 0;
  double median_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
};

struct RunResult {
  Trace trace;
  StatusCounts proposals;
  std::uint64_t recomputations = 0;
  std::vector<double> latencies_ms;  // wall time per timeline entry

  LatencyStats latency() const;
};

/// Replays the timeline on a virtual clock. Engine diagnostics land in the
/// trace; nothing here depends on wall time except the latency figures.
RunResult run(const Scenario& scenario, const RunOptions& options = {});

/// Nearest-rank percentile (q in [0, 1]) of an unsorted sample.
double percentile(std::vector<double> values, double q);

}  // namespace mutmod
