#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mutmod/model_store.hpp"

namespace mutmod {

struct CptRow {
  std::vector<std::string> given;  // one label per parent, in parent order
  std::vector<double> probs;       // over the child's domain
};

/// Conditional probability table. Root nodes have no parents and a single
/// row with an empty `given` tuple (the prior).
struct Cpt {
  SlotKey child;
  std::vector<SlotKey> parents;
  std::vector<CptRow> rows;
  int source_line = 0;  // 0 when not loaded from a document
};

using SpecLookup = std::function<const VariableSpec*(const SlotKey&)>;
using EvidenceSet = std::map<SlotKey, std::string>;
using JointRecord = std::map<SlotKey, std::string>;

inline constexpr double kRowTolerance = 1e-9;

/// Validated discrete Bayesian network. Nodes are kept in topological order.
class BayesNet {
 public:
  struct Node {
    SlotKey ref;
    VariableSpec spec;
    std::vector<std::size_t> parents;
    std::vector<std::size_t> children;
    // Row-major: row = mixed-radix index over parent values (first parent
    // most significant), column = child value.
    std::vector<double> table;
  };

  BayesNet() = default;

  static BayesNet build(const std::vector<Cpt>& cpts, const SpecLookup& lookup);

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  std::optional<std::size_t> index_of(const SlotKey& ref) const;
  const Node& node(std::size_t i) const { return nodes_[i]; }

  /// P(node = value | parents as in `assignment`).
  double conditional(std::size_t node, std::size_t value,
                     std::span<const std::size_t> assignment) const;

  std::vector<std::size_t> markov_blanket(std::size_t node) const;

  /// Nodes whose posterior given `evidence` may depend on the value of
  /// `source` (active trails from `source` with the rest of the evidence
  /// observed).
  std::vector<bool> d_connected(std::size_t source, const std::vector<bool>& observed) const;

  std::vector<Cpt> cpts() const;

 private:
  std::vector<Node> nodes_;
  std::map<SlotKey, std::size_t> index_;
};

/// Exact posterior by enumeration over the joint of all non-evidence
/// ancestors of the query and evidence.
Distribution posterior(const BayesNet& net, const EvidenceSet& evidence, const SlotKey& query);

/// One enumeration pass serving several queries.
std::map<SlotKey, Distribution> posteriors(const BayesNet& net, const EvidenceSet& evidence,
                                           const std::vector<SlotKey>& queries);

/// Likelihood-weighting estimate; bit-reproducible for a fixed seed.
Distribution approx_posterior(const BayesNet& net, const EvidenceSet& evidence,
                              const SlotKey& query, std::uint64_t n_samples, std::uint64_t seed);

/// Most probable label; ties go to the earliest label in domain order.
std::string map_value(const Distribution& d);

/// Laplace-smoothed conditional frequencies.
Cpt fit_cpt(const std::vector<JointRecord>& log, const SlotKey& node,
            const std::vector<SlotKey>& parents, double alpha, const SpecLookup& lookup);

}  // namespace mutmod
