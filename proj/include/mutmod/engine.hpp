#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>

#include "mutmod/decision.hpp"
#include "mutmod/error.hpp"
#include "mutmod/inference.hpp"
#include "mutmod/model_store.hpp"
#include "mutmod/perception.hpp"
#include "mutmod/scenario.hpp"
#include "mutmod/trace.hpp"

namespace mutmod {

/// Result of one engine command; failures are also recorded in the trace as
/// diagnostic records.
struct Outcome {
  bool ok = true;
  ErrorCode code{};
  std::string message;
  json detail = json::object();
};

/// Perception, mutual models, inference and decision wired into one
/// serialized loop. Every call is one turn at a virtual timestamp:
/// expire due proposals, apply the command, update abstract variables,
/// evaluate rules, route proposals.
class Engine {
 public:
  using Listener = std::function<void(const json& record)>;

  Engine(const Scenario& scenario, std::uint64_t seed,
         std::optional<AutonomyMode> mode_override = std::nullopt);

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  /// Receives each trace record as it is appended.
  void set_listener(Listener listener) { listener_ = std::move(listener); }

  /// Declarations, initial values and prior posteriors at t=0.
  void initialise();

  Outcome apply(const TimelineEntry& entry);

  Outcome ingest(const RawEvent& event);
  Outcome set_mode(AutonomyMode mode, VirtualTime t);
  Outcome wizard_decide(const ActionTemplate& action, VirtualTime t);
  Outcome resolve_proposal(const std::string& id, ProposalVerdict verdict, VirtualTime t);
  /// Runs a turn with no command (expiry and staleness only).
  Outcome tick(VirtualTime t);

  /// Expires every proposal still pending, each at its own deadline.
  void finish();

  VirtualTime now() const { return now_; }
  const Trace& trace() const { return trace_; }
  const ModelStore& store() const { return store_; }
  const DecisionPipeline& decisions() const { return decisions_; }
  const Inference& inference() const { return inference_; }
  const Perception& perception() const { return perception_; }
  SnapshotRef snapshot() const;
  std::uint64_t recomputations() const { return recomputations_; }

 private:
  template <typename F>
  Outcome turn(VirtualTime t, const char* command, F&& body);

  void record(json r);
  void expire(VirtualTime t);
  void post_turn(VirtualTime t);
  void route(std::vector<Proposal> proposals, VirtualTime t);
  void record_decision(const DecisionRecord& d);
  void record_action(const DecisionRecord& d);
  std::uint64_t turn_seed();

  std::string scenario_name_;
  std::uint64_t seed_;
  ModelStore store_;
  Perception perception_;
  Inference inference_;
  DecisionPipeline decisions_;
  std::vector<InitialValue> initial_values_;
  Trace trace_;
  Listener listener_;
  VirtualTime now_ = 0;
  std::uint64_t turns_ = 0;
  std::uint64_t recomputations_ = 0;
  std::set<SlotKey> changed_;
  bool initialised_ = false;
};

json snapshot_to_json(const ModelSnapshot& snap);

}  // namespace mutmod
