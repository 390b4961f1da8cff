#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "mutmod/bayes_net.hpp"
#include "mutmod/error.hpp"
#include "mutmod/model_store.hpp"

namespace mutmod {

enum class InferenceMethod { Exact, LikelihoodWeighting };

struct InferenceConfig {
  InferenceMethod method = InferenceMethod::Exact;
  std::uint64_t samples = 10000;
};

struct PosteriorUpdate {
  SlotKey node;
  Distribution posterior;
  std::string label;
};

struct InferenceDiagnostic {
  SlotKey node;
  ErrorCode code;
  std::string message;
};

struct UpdateResult {
  std::vector<SlotKey> recomputed;
  std::vector<PosteriorUpdate> updates;
  std::vector<InferenceDiagnostic> diagnostics;
};

/// Keeps the abstract variables of one network in step with the perceived
/// evidence held by a ModelStore.
class Inference {
 public:
  Inference() = default;
  Inference(BayesNet net, InferenceConfig config = {});

  const BayesNet& network() const { return net_; }
  const InferenceConfig& config() const { return config_; }

  /// Fresh values of every perceived node in the network.
  EvidenceSet collect_evidence(const ModelStore& store, VirtualTime now) const;

  /// Abstract nodes whose posterior may move when `changed` nodes change:
  /// Markov-blanket neighbours plus anything d-connected given the evidence.
  std::vector<SlotKey> affected(const std::set<SlotKey>& changed, const EvidenceSet& evidence) const;

  /// Recomputes affected abstract nodes, commits MAP labels at `now` and
  /// publishes posteriors. Evidence that appeared, changed or went stale
  /// since the previous call counts as changed too. On zero-probability
  /// evidence the previous committed value stays and a diagnostic is returned.
  UpdateResult update_on_change(const std::set<SlotKey>& changed, ModelStore& store,
                                VirtualTime now, std::uint64_t seed);

  /// Recomputes every abstract node (used at initialisation).
  UpdateResult recompute_all(ModelStore& store, VirtualTime now, std::uint64_t seed);

 private:
  UpdateResult recompute(const std::vector<SlotKey>& nodes, const EvidenceSet& evidence,
                         ModelStore& store, VirtualTime now, std::uint64_t seed);

  BayesNet net_;
  InferenceConfig config_;
  EvidenceSet last_evidence_;
};

}  // namespace mutmod
