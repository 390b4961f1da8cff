#include "mutmod/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mutmod/engine.hpp"

namespace mutmod {

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

LatencyStats RunResult::latency() const {
  LatencyStats s;
  s.events = latencies_ms.size();
  if (latencies_ms.empty()) return s;
  s.median_ms = percentile(latencies_ms, 0.5);
  s.p99_ms = percentile(latencies_ms, 0.99);
  s.max_ms = *std::max_element(latencies_ms.begin(), latencies_ms.end());
  return s;
}

RunResult run(const Scenario& scenario, const RunOptions& options) {
  using Clock = std::chrono::steady_clock;
  Engine engine(scenario, options.seed, options.mode);
  engine.initialise();

  RunResult result;
  result.latencies_ms.reserve(scenario.timeline.size());
  for (const auto& entry : scenario.timeline) {
    auto start = Clock::now();
    engine.apply(entry);
    std::chrono::duration<double, std::milli> took = Clock::now() - start;
    result.latencies_ms.push_back(took.count());
  }
  engine.finish();

  result.trace = engine.trace();
  result.proposals = engine.decisions().counts();
  result.recomputations = engine.recomputations();
  return result;
}

}  // namespace mutmod
