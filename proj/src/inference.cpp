#include "mutmod/inference.hpp"

#include <algorithm>

namespace mutmod {

Inference::Inference(BayesNet net, InferenceConfig config)
    : net_(std::move(net)), config_(config) {}

EvidenceSet Inference::collect_evidence(const ModelStore& store, VirtualTime now) const {
  EvidenceSet ev;
  for (const auto& node : net_.nodes()) {
    if (node.spec.kind != VariableKind::Perceived) continue;
    if (auto v = store.fresh_value(node.ref, now)) ev.emplace(node.ref, v->value);
  }
  return ev;
}

std::vector<SlotKey> Inference::affected(const std::set<SlotKey>& changed,
                                         const EvidenceSet& evidence) const {
  const auto n = net_.size();
  std::vector<bool> observed(n, false);
  for (const auto& [ref, label] : evidence)
    if (auto i = net_.index_of(ref)) observed[*i] = true;

  std::vector<bool> hit(n, false);
  for (const auto& ref : changed) {
    auto c = net_.index_of(ref);
    if (!c) continue;
    auto without = observed;
    without[*c] = false;
    auto reach = net_.d_connected(*c, without);
    for (std::size_t i = 0; i < n; ++i)
      if (reach[i] && i != *c) hit[i] = true;
    for (std::size_t i = 0; i < n; ++i) {
      auto mb = net_.markov_blanket(i);
      if (std::find(mb.begin(), mb.end(), *c) != mb.end()) hit[i] = true;
    }
  }
  std::vector<SlotKey> out;
  for (std::size_t i = 0; i < n; ++i)
    if (hit[i] && net_.node(i).spec.kind == VariableKind::Abstract) out.push_back(net_.node(i).ref);
  return out;
}

UpdateResult Inference::update_on_change(const std::set<SlotKey>& changed, ModelStore& store,
                                         VirtualTime now, std::uint64_t seed) {
  auto evidence = collect_evidence(store, now);
  std::set<SlotKey> all = changed;
  for (const auto& [ref, label] : evidence) {
    auto it = last_evidence_.find(ref);
    if (it == last_evidence_.end() || it->second != label) all.insert(ref);
  }
  for (const auto& [ref, label] : last_evidence_)
    if (!evidence.count(ref)) all.insert(ref);
  last_evidence_ = evidence;
  return recompute(affected(all, evidence), evidence, store, now, seed);
}

UpdateResult Inference::recompute_all(ModelStore& store, VirtualTime now, std::uint64_t seed) {
  auto evidence = collect_evidence(store, now);
  last_evidence_ = evidence;
  std::vector<SlotKey> nodes;
  for (const auto& node : net_.nodes())
    if (node.spec.kind == VariableKind::Abstract) nodes.push_back(node.ref);
  return recompute(nodes, evidence, store, now, seed);
}

UpdateResult Inference::recompute(const std::vector<SlotKey>& nodes, const EvidenceSet& evidence,
                                  ModelStore& store, VirtualTime now, std::uint64_t seed) {
  UpdateResult result;
  result.recomputed = nodes;
  if (nodes.empty()) return result;

  std::map<SlotKey, Distribution> dists;
  if (config_.method == InferenceMethod::Exact) {
    try {
      dists = posteriors(net_, evidence, nodes);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroProbabilityEvidence) throw;
      for (const auto& ref : nodes) result.diagnostics.push_back({ref, e.code(), e.what()});
      return result;
    }
  } else {
    std::uint64_t k = 0;
    for (const auto& ref : nodes) {
      try {
        dists.emplace(ref, approx_posterior(net_, evidence, ref, config_.samples, seed + k++));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::AllZeroWeights) throw;
        result.diagnostics.push_back({ref, e.code(), e.what()});
      }
    }
  }

  for (const auto& ref : nodes) {
    auto it = dists.find(ref);
    if (it == dists.end()) continue;
    auto label = map_value(it->second);
    store.commit_value(ref, label, now, ValueSource::Inference);
    store.publish_posterior(ref, it->second);
    result.updates.push_back({ref, it->second, label});
  }
  return result;
}

}  // namespace mutmod
