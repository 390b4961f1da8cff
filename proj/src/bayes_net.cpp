#include "mutmod/bayes_net.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <random>
#include <set>
#include <sstream>

#include "mutmod/error.hpp"

namespace mutmod {

namespace {

std::string where(const Cpt& cpt) {
  std::string s = cpt.child.to_string();
  if (cpt.source_line > 0) s += " (line " + std::to_string(cpt.source_line) + ")";
  return s;
}

std::string tuple_string(const std::vector<std::string>& given) {
  std::string s = "(";
  for (std::size_t i = 0; i < given.size(); ++i) {
    if (i) s += ",";
    s += given[i];
  }
  return s + ")";
}

// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
double unit_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace

BayesNet BayesNet::build(const std::vector<Cpt>& cpts, const SpecLookup& lookup) {
  std::map<SlotKey, std::size_t> by_child;
  for (std::size_t i = 0; i < cpts.size(); ++i) {
    const auto& cpt = cpts[i];
    if (!lookup(cpt.child))
      throw Error(ErrorCode::UnknownNode, "CPT for undeclared variable " + where(cpt));
    if (!by_child.emplace(cpt.child, i).second)
      throw Error(ErrorCode::DuplicateCpt, "second CPT for " + where(cpt));
  }
  for (const auto& cpt : cpts) {
    std::set<SlotKey> seen;
    for (const auto& p : cpt.parents) {
      if (!lookup(p))
        throw Error(ErrorCode::UnknownNode,
                    "parent " + p.to_string() + " of " + where(cpt) + " is not declared");
      if (!by_child.count(p))
        throw Error(ErrorCode::MissingCpt, "no CPT for " + p.to_string() + ", parent of " + where(cpt));
      if (!seen.insert(p).second)
        throw Error(ErrorCode::ValidationError,
                    "parent " + p.to_string() + " listed twice for " + where(cpt));
    }
  }

  // Kahn's algorithm; ready nodes are taken in declaration order.
  std::vector<std::size_t> indegree(cpts.size(), 0);
  std::vector<std::vector<std::size_t>> kids(cpts.size());
  for (std::size_t i = 0; i < cpts.size(); ++i)
    for (const auto& p : cpts[i].parents) {
      ++indegree[i];
      kids[by_child.at(p)].push_back(i);
    }
  std::vector<std::size_t> topo;
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < cpts.size(); ++i)
    if (indegree[i] == 0) ready.insert(i);
  while (!ready.empty()) {
    auto i = *ready.begin();
    ready.erase(ready.begin());
    topo.push_back(i);
    for (auto k : kids[i])
      if (--indegree[k] == 0) ready.insert(k);
  }
  if (topo.size() != cpts.size()) {
    std::string members;
    for (std::size_t i = 0; i < cpts.size(); ++i)
      if (indegree[i] > 0) members += (members.empty() ? "" : ", ") + cpts[i].child.to_string();
    throw Error(ErrorCode::CycleDetected, "cycle among " + members);
  }

  BayesNet net;
  for (auto i : topo) {
    net.index_.emplace(cpts[i].child, net.nodes_.size());
    Node node;
    node.ref = cpts[i].child;
    node.spec = *lookup(cpts[i].child);
    net.nodes_.push_back(std::move(node));
  }
  for (auto i : topo) {
    const auto& cpt = cpts[i];
    auto& node = net.nodes_[net.index_.at(cpt.child)];
    for (const auto& p : cpt.parents) node.parents.push_back(net.index_.at(p));
    for (auto p : node.parents) net.nodes_[p].children.push_back(net.index_.at(cpt.child));

    const std::size_t card = node.spec.domain.size();
    std::size_t rows = 1;
    for (auto p : node.parents) rows *= net.nodes_[p].spec.domain.size();
    node.table.assign(rows * card, 0.0);
    std::vector<bool> filled(rows, false);
    for (const auto& row : cpt.rows) {
      if (row.given.size() != node.parents.size())
        throw Error(ErrorCode::MissingRow, where(cpt) + ": row " + tuple_string(row.given) +
                                               " does not match " +
                                               std::to_string(node.parents.size()) + " parents");
      std::size_t r = 0;
      for (std::size_t k = 0; k < node.parents.size(); ++k) {
        const auto& pspec = net.nodes_[node.parents[k]].spec;
        auto v = pspec.index_of(row.given[k]);
        if (!v)
          throw Error(ErrorCode::ValueOutOfDomain, where(cpt) + ": row " + tuple_string(row.given) +
                                                       " uses '" + row.given[k] + "' outside " +
                                                       cpt.parents[k].to_string());
        r = r * pspec.domain.size() + *v;
      }
      if (filled[r])
        throw Error(ErrorCode::MissingRow, where(cpt) + ": duplicate row " + tuple_string(row.given));
      if (row.probs.size() != card)
        throw Error(ErrorCode::RowNotNormalized,
                    where(cpt) + ": row " + tuple_string(row.given) + " has " +
                        std::to_string(row.probs.size()) + " entries, domain has " +
                        std::to_string(card));
      double sum = 0.0;
      for (double p : row.probs) {
        if (!(p >= 0.0) || !std::isfinite(p))
          throw Error(ErrorCode::RowNotNormalized,
                      where(cpt) + ": row " + tuple_string(row.given) + " has a negative entry");
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowTolerance) {
        std::ostringstream msg;
        msg.precision(12);
        msg << where(cpt) << ": row " << tuple_string(row.given) << " sums to " << sum;
        throw Error(ErrorCode::RowNotNormalized, msg.str());
      }
      std::copy(row.probs.begin(), row.probs.end(), node.table.begin() + r * card);
      filled[r] = true;
    }
    auto missing = std::find(filled.begin(), filled.end(), false);
    if (missing != filled.end())
      throw Error(ErrorCode::MissingRow,
                  where(cpt) + ": missing row " +
                      std::to_string(missing - filled.begin()) + " of " + std::to_string(rows));
  }
  return net;
}

std::optional<std::size_t> BayesNet::index_of(const SlotKey& ref) const {
  auto it = index_.find(ref);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double BayesNet::conditional(std::size_t i, std::size_t value,
                             std::span<const std::size_t> assignment) const {
  const auto& node = nodes_[i];
  std::size_t r = 0;
  for (auto p : node.parents) r = r * nodes_[p].spec.domain.size() + assignment[p];
  return node.table[r * node.spec.domain.size() + value];
}

std::vector<std::size_t> BayesNet::markov_blanket(std::size_t i) const {
  std::set<std::size_t> mb;
  const auto& node = nodes_[i];
  mb.insert(node.parents.begin(), node.parents.end());
  for (auto c : node.children) {
    mb.insert(c);
    mb.insert(nodes_[c].parents.begin(), nodes_[c].parents.end());
  }
  mb.erase(i);
  return {mb.begin(), mb.end()};
}

std::vector<bool> BayesNet::d_connected(std::size_t source, const std::vector<bool>& observed) const {
  const std::size_t n = nodes_.size();
  // Observed nodes and their ancestors: where v-structures open up.
  std::vector<bool> anc(n, false);
  std::deque<std::size_t> todo;
  for (std::size_t i = 0; i < n; ++i)
    if (observed[i]) todo.push_back(i);
  while (!todo.empty()) {
    auto y = todo.front();
    todo.pop_front();
    if (anc[y]) continue;
    anc[y] = true;
    for (auto p : nodes_[y].parents) todo.push_back(p);
  }

  enum Dir { kUp = 0, kDown = 1 };  // up: arrived from a child
  std::vector<std::array<bool, 2>> visited(n, {false, false});
  std::vector<bool> reach(n, false);
  std::deque<std::pair<std::size_t, Dir>> queue{{source, kUp}};
  while (!queue.empty()) {
    auto [y, d] = queue.front();
    queue.pop_front();
    if (visited[y][d]) continue;
    visited[y][d] = true;
    if (!observed[y]) reach[y] = true;
    if (d == kUp && !observed[y]) {
      for (auto p : nodes_[y].parents) queue.emplace_back(p, kUp);
      for (auto c : nodes_[y].children) queue.emplace_back(c, kDown);
    } else if (d == kDown) {
      if (!observed[y])
        for (auto c : nodes_[y].children) queue.emplace_back(c, kDown);
      if (anc[y])
        for (auto p : nodes_[y].parents) queue.emplace_back(p, kUp);
    }
  }
  return reach;
}

std::vector<Cpt> BayesNet::cpts() const {
  std::vector<Cpt> out;
  for (const auto& node : nodes_) {
    Cpt cpt;
    cpt.child = node.ref;
    for (auto p : node.parents) cpt.parents.push_back(nodes_[p].ref);
    const std::size_t card = node.spec.domain.size();
    const std::size_t rows = node.table.size() / card;
    for (std::size_t r = 0; r < rows; ++r) {
      CptRow row;
      std::size_t rem = r;
      row.given.resize(node.parents.size());
      for (std::size_t k = node.parents.size(); k-- > 0;) {
        const auto& pd = nodes_[node.parents[k]].spec.domain;
        row.given[k] = pd[rem % pd.size()];
        rem /= pd.size();
      }
      row.probs.assign(node.table.begin() + r * card, node.table.begin() + (r + 1) * card);
      cpt.rows.push_back(std::move(row));
    }
    out.push_back(std::move(cpt));
  }
  return out;
}

namespace {

struct ResolvedEvidence {
  std::vector<bool> fixed;
  std::vector<std::size_t> assignment;
};

ResolvedEvidence resolve_evidence(const BayesNet& net, const EvidenceSet& evidence) {
  ResolvedEvidence ev{std::vector<bool>(net.size(), false), std::vector<std::size_t>(net.size(), 0)};
  for (const auto& [ref, label] : evidence) {
    auto i = net.index_of(ref);
    if (!i) throw Error(ErrorCode::UnknownNode, "evidence on " + ref.to_string() + " which is not in the network");
    auto v = net.node(*i).spec.index_of(label);
    if (!v)
      throw Error(ErrorCode::ValueOutOfDomain,
                  "evidence '" + label + "' outside domain of " + ref.to_string());
    ev.fixed[*i] = true;
    ev.assignment[*i] = *v;
  }
  return ev;
}

std::size_t query_index(const BayesNet& net, const SlotKey& query) {
  auto q = net.index_of(query);
  if (!q) throw Error(ErrorCode::UnknownNode, "query " + query.to_string() + " is not in the network");
  return *q;
}

Distribution normalized(const VariableSpec& spec, std::vector<double> weights, ErrorCode on_zero,
                        const std::string& what) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw Error(on_zero, what);
  for (auto& w : weights) w /= total;
  return Distribution{spec.domain, std::move(weights)};
}

class Enumerator {
 public:
  Enumerator(const BayesNet& net, ResolvedEvidence ev, std::vector<std::size_t> order,
             std::vector<std::size_t> queries)
      : net_(net), ev_(std::move(ev)), order_(std::move(order)), queries_(std::move(queries)) {
    for (auto q : queries_) acc_.emplace_back(net_.node(q).spec.domain.size(), 0.0);
  }

  void run() { step(0, 1.0); }
  const std::vector<std::vector<double>>& acc() const { return acc_; }

 private:
  void step(std::size_t k, double weight) {
    if (weight == 0.0) return;
    if (k == order_.size()) {
      for (std::size_t j = 0; j < queries_.size(); ++j) acc_[j][ev_.assignment[queries_[j]]] += weight;
      return;
    }
    auto i = order_[k];
    auto& a = ev_.assignment;
    if (ev_.fixed[i]) {
      step(k + 1, weight * net_.conditional(i, a[i], a));
      return;
    }
    const auto card = net_.node(i).spec.domain.size();
    for (std::size_t v = 0; v < card; ++v) {
      a[i] = v;
      step(k + 1, weight * net_.conditional(i, v, a));
    }
  }

  const BayesNet& net_;
  ResolvedEvidence ev_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> queries_;
  std::vector<std::vector<double>> acc_;
};

}  // namespace

std::map<SlotKey, Distribution> posteriors(const BayesNet& net, const EvidenceSet& evidence,
                                           const std::vector<SlotKey>& queries) {
  auto ev = resolve_evidence(net, evidence);
  std::vector<std::size_t> qs;
  for (const auto& q : queries) qs.push_back(query_index(net, q));

  // Nodes that are not ancestors of a query or evidence node sum out to 1.
  std::vector<bool> keep(net.size(), false);
  std::vector<std::size_t> stack(qs.begin(), qs.end());
  for (std::size_t i = 0; i < net.size(); ++i)
    if (ev.fixed[i]) stack.push_back(i);
  while (!stack.empty()) {
    auto y = stack.back();
    stack.pop_back();
    if (keep[y]) continue;
    keep[y] = true;
    for (auto p : net.node(y).parents) stack.push_back(p);
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < net.size(); ++i)
    if (keep[i]) order.push_back(i);

  Enumerator e(net, std::move(ev), std::move(order), qs);
  e.run();
  std::map<SlotKey, Distribution> out;
  for (std::size_t j = 0; j < qs.size(); ++j) {
    const auto& node = net.node(qs[j]);
    out.emplace(node.ref, normalized(node.spec, e.acc()[j], ErrorCode::ZeroProbabilityEvidence,
                                     "evidence has probability zero under the network"));
  }
  return out;
}

Distribution posterior(const BayesNet& net, const EvidenceSet& evidence, const SlotKey& query) {
  return posteriors(net, evidence, {query}).at(query);
}

Distribution approx_posterior(const BayesNet& net, const EvidenceSet& evidence,
                              const SlotKey& query, std::uint64_t n_samples, std::uint64_t seed) {
  if (n_samples == 0) throw Error(ErrorCode::InvalidArgument, "n_samples must be positive");
  auto ev = resolve_evidence(net, evidence);
  auto q = query_index(net, query);
  std::mt19937_64 gen(seed);
  std::vector<double> acc(net.node(q).spec.domain.size(), 0.0);
  auto& a = ev.assignment;
  for (std::uint64_t s = 0; s < n_samples; ++s) {
    double weight = 1.0;
    for (std::size_t i = 0; i < net.size(); ++i) {
      if (ev.fixed[i]) {
        weight *= net.conditional(i, a[i], a);
        continue;
      }
      const auto card = net.node(i).spec.domain.size();
      double u = unit_uniform(gen);
      double cum = 0.0;
      std::size_t pick = card;
      std::size_t last_nonzero = 0;
      for (std::size_t v = 0; v < card; ++v) {
        double p = net.conditional(i, v, a);
        if (p > 0.0) last_nonzero = v;
        cum += p;
        if (u < cum) {
          pick = v;
          break;
        }
      }
      a[i] = pick == card ? last_nonzero : pick;
    }
    acc[a[q]] += weight;
  }
  return normalized(net.node(q).spec, std::move(acc), ErrorCode::AllZeroWeights,
                    "no sample was consistent with the evidence");
}

std::string map_value(const Distribution& d) {
  if (d.domain.empty()) throw Error(ErrorCode::InvalidArgument, "empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < d.probs.size(); ++i)
    if (d.probs[i] > d.probs[best]) best = i;
  return d.domain[best];
}

Cpt fit_cpt(const std::vector<JointRecord>& log, const SlotKey& node,
            const std::vector<SlotKey>& parents, double alpha, const SpecLookup& lookup) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw Error(ErrorCode::InvalidArgument, "alpha must be a positive real");
  auto spec_of = [&](const SlotKey& ref) -> const VariableSpec& {
    const auto* s = lookup(ref);
    if (!s) throw Error(ErrorCode::UnknownNode, ref.to_string() + " is not declared");
    return *s;
  };
  const auto& child = spec_of(node);
  std::vector<const VariableSpec*> pspecs;
  std::size_t rows = 1;
  for (const auto& p : parents) {
    pspecs.push_back(&spec_of(p));
    rows *= pspecs.back()->domain.size();
  }
  const auto card = child.domain.size();
  std::vector<double> counts(rows * card, 0.0);

  auto label_index = [&](const JointRecord& rec, const SlotKey& ref, const VariableSpec& spec,
                         std::size_t at) {
    auto it = rec.find(ref);
    if (it == rec.end())
      throw Error(ErrorCode::MissingField,
                  "record " + std::to_string(at) + " lacks " + ref.to_string());
    auto v = spec.index_of(it->second);
    if (!v)
      throw Error(ErrorCode::ValueOutOfDomain, "record " + std::to_string(at) + ": '" + it->second +
                                                   "' outside " + ref.to_string());
    return *v;
  };
  for (std::size_t at = 0; at < log.size(); ++at) {
    std::size_t r = 0;
    for (std::size_t k = 0; k < parents.size(); ++k)
      r = r * pspecs[k]->domain.size() + label_index(log[at], parents[k], *pspecs[k], at);
    counts[r * card + label_index(log[at], node, child, at)] += 1.0;
  }

  Cpt cpt;
  cpt.child = node;
  cpt.parents = parents;
  for (std::size_t r = 0; r < rows; ++r) {
    CptRow row;
    row.given.resize(parents.size());
    std::size_t rem = r;
    for (std::size_t k = parents.size(); k-- > 0;) {
      row.given[k] = pspecs[k]->domain[rem % pspecs[k]->domain.size()];
      rem /= pspecs[k]->domain.size();
    }
    double total = 0.0;
    for (std::size_t v = 0; v < card; ++v) total += counts[r * card + v];
    for (std::size_t v = 0; v < card; ++v)
      row.probs.push_back((counts[r * card + v] + alpha) / (total + alpha * static_cast<double>(card)));
    cpt.rows.push_back(std::move(row));
  }
  return cpt;
}

}  // namespace mutmod
