#include "mutmod/decision.hpp"

#include <algorithm>
#include <cmath>

#include "mutmod/error.hpp"

namespace mutmod {

std::string_view to_string(AutonomyMode m) {
  switch (m) {
    case AutonomyMode::Wizard: return "wizard";
    case AutonomyMode::Mixed: return "mixed";
    case AutonomyMode::Autonomous: return "autonomous";
  }
  return "?";
}

std::string_view to_string(RuleScope s) {
  return s == RuleScope::General ? "general" : "activity";
}

std::string_view to_string(ProposalStatus s) {
  switch (s) {
    case ProposalStatus::Pending: return "pending";
    case ProposalStatus::Executed: return "executed";
    case ProposalStatus::Rejected: return "rejected";
    case ProposalStatus::Expired: return "expired";
    case ProposalStatus::Suppressed: return "suppressed";
  }
  return "?";
}

std::string_view to_string(DecisionSource s) {
  return s == DecisionSource::Human ? "human" : "engine";
}

std::string_view to_string(Verdict v) { return v == Verdict::Executed ? "executed" : "rejected"; }

AutonomyMode parse_mode(std::string_view text) {
  if (text == "wizard") return AutonomyMode::Wizard;
  if (text == "mixed") return AutonomyMode::Mixed;
  if (text == "autonomous") return AutonomyMode::Autonomous;
  throw Error(ErrorCode::InvalidArgument, "unknown mode '" + std::string(text) + "'");
}

RuleScope parse_scope(std::string_view text) {
  if (text == "general") return RuleScope::General;
  if (text == "activity") return RuleScope::Activity;
  throw Error(ErrorCode::InvalidArgument, "unknown rule scope '" + std::string(text) + "'");
}

ProposalVerdict parse_verdict(std::string_view text) {
  if (text == "approve") return ProposalVerdict::Approve;
  if (text == "reject") return ProposalVerdict::Reject;
  throw Error(ErrorCode::InvalidArgument, "unknown verdict '" + std::string(text) + "'");
}

std::string ActionTemplate::to_string() const {
  std::string s = verb;
  if (params.empty()) return s;
  s += '{';
  bool first = true;
  for (const auto& [k, v] : params) {
    if (!first) s += ',';
    first = false;
    s += k + "=" + v;
  }
  return s + '}';
}

DecisionPipeline::DecisionPipeline(DecisionConfig config)
    : config_(config), mode_(config.initial_mode) {}

void DecisionPipeline::set_rules(std::vector<DecisionRule> rules, const SpecLookup& lookup) {
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const auto& r = rules[i];
    if (!is_token(r.name))
      throw Error(ErrorCode::ValidationError, "rule name '" + r.name + "' is not a token");
    if (r.action.verb.empty())
      throw Error(ErrorCode::ValidationError, "rule '" + r.name + "' has an empty action verb");
    if (r.cooldown_ms < 0)
      throw Error(ErrorCode::ValidationError, "rule '" + r.name + "' has a negative cooldown");
    for (std::size_t j = 0; j < i; ++j)
      if (rules[j].name == r.name)
        throw Error(ErrorCode::ValidationError, "duplicate rule name '" + r.name + "'");
    r.condition.validate(lookup);
  }
  rules_ = std::move(rules);
  last_fired_.clear();
}

std::vector<Proposal> DecisionPipeline::evaluate_rules(const SnapshotRef& snapshot, VirtualTime now) {
  std::vector<Proposal> out;
  for (const auto& rule : rules_) {
    auto last = last_fired_.find(rule.name);
    if (last != last_fired_.end() && now - last->second < rule.cooldown_ms) continue;
    if (!rule.condition.evaluate(*snapshot)) continue;
    last_fired_[rule.name] = now;
    Proposal p;
    p.id = "p" + std::to_string(next_id_++);
    p.rule = rule.name;
    p.action = rule.action;
    p.created_at = now;
    p.evidence_snapshot = snapshot;
    out.push_back(std::move(p));
  }
  return out;
}

void DecisionPipeline::set_mode(AutonomyMode mode, VirtualTime now) {
  mode_log_.push_back({now, mode_, mode});
  mode_ = mode;
}

Proposal DecisionPipeline::submit_proposal(Proposal p, VirtualTime now) {
  switch (mode_) {
    case AutonomyMode::Wizard:
      p.status = ProposalStatus::Suppressed;
      break;
    case AutonomyMode::Mixed:
      p.status = ProposalStatus::Pending;
      p.expires_at = p.created_at + config_.proposal_expiry_ms;
      break;
    case AutonomyMode::Autonomous:
      p.status = ProposalStatus::Executed;
      log_.push_back(DecisionRecord{now, p.action, DecisionSource::Engine, mode_, p.evidence_snapshot,
                                    Verdict::Executed, false, p.id});
      break;
  }
  creation_order_.push_back(p.id);
  proposals_[p.id] = p;
  return p;
}

DecisionRecord DecisionPipeline::wizard_decide(const ActionTemplate& action, const SnapshotRef& snapshot,
                                               VirtualTime now) {
  if (mode_ == AutonomyMode::Autonomous)
    throw Error(ErrorCode::WrongMode, "human decisions are not accepted in autonomous mode");
  if (action.verb.empty()) throw Error(ErrorCode::InvalidArgument, "action verb is empty");
  DecisionRecord rec{now, action, DecisionSource::Human, mode_, snapshot, Verdict::Executed, false,
                     std::nullopt};
  log_.push_back(rec);
  return rec;
}

std::pair<Proposal, std::optional<DecisionRecord>> DecisionPipeline::resolve_proposal(
    const std::string& id, ProposalVerdict verdict, VirtualTime now) {
  auto it = proposals_.find(id);
  if (it == proposals_.end()) throw Error(ErrorCode::UnknownProposal, "no proposal '" + id + "'");
  auto& p = it->second;
  if (p.status == ProposalStatus::Expired) throw Error(ErrorCode::Expired, "proposal '" + id + "' expired");
  if (p.status != ProposalStatus::Pending)
    throw Error(ErrorCode::AlreadyResolved,
                "proposal '" + id + "' is already " + std::string(to_string(p.status)));
  if (now >= p.expires_at) {
    p.status = ProposalStatus::Expired;
    throw Error(ErrorCode::Expired, "proposal '" + id + "' expired at " + std::to_string(p.expires_at));
  }
  if (mode_ != AutonomyMode::Mixed)
    throw Error(ErrorCode::WrongMode, "proposal verdicts are only accepted in mixed mode");

  DecisionRecord rec{now, p.action, DecisionSource::Engine, mode_, p.evidence_snapshot,
                     Verdict::Executed, true, p.id};
  if (verdict == ProposalVerdict::Approve) {
    p.status = ProposalStatus::Executed;
  } else {
    p.status = ProposalStatus::Rejected;
    rec.verdict = Verdict::Rejected;
  }
  log_.push_back(rec);
  return {p, rec};
}

std::vector<Proposal> DecisionPipeline::expire_due(VirtualTime now) {
  std::vector<Proposal> out;
  for (auto& [id, p] : proposals_)
    if (p.status == ProposalStatus::Pending && p.expires_at <= now) {
      p.status = ProposalStatus::Expired;
      out.push_back(p);
    }
  std::stable_sort(out.begin(), out.end(), [&](const Proposal& a, const Proposal& b) {
    if (a.expires_at != b.expires_at) return a.expires_at < b.expires_at;
    return std::find(creation_order_.begin(), creation_order_.end(), a.id) <
           std::find(creation_order_.begin(), creation_order_.end(), b.id);
  });
  return out;
}

std::vector<Proposal> DecisionPipeline::pending() const {
  std::vector<Proposal> out;
  for (const auto& id : creation_order_) {
    const auto& p = proposals_.at(id);
    if (p.status == ProposalStatus::Pending) out.push_back(p);
  }
  return out;
}

const Proposal* DecisionPipeline::find(const std::string& id) const {
  auto it = proposals_.find(id);
  return it == proposals_.end() ? nullptr : &it->second;
}

StatusCounts DecisionPipeline::counts() const {
  StatusCounts c;
  for (const auto& [id, p] : proposals_) {
    ++c.created;
    switch (p.status) {
      case ProposalStatus::Pending: ++c.pending; break;
      case ProposalStatus::Executed: ++c.executed; break;
      case ProposalStatus::Rejected: ++c.rejected; break;
      case ProposalStatus::Expired: ++c.expired; break;
      case ProposalStatus::Suppressed: ++c.suppressed; break;
    }
  }
  return c;
}

std::vector<double> PolicyTable::row(const std::vector<std::string>& tuple) const {
  const double k = static_cast<double>(actions.size());
  std::vector<double> out(actions.size(), 1.0 / k);
  auto it = counts.find(tuple);
  if (it == counts.end()) return out;
  double total = 0.0;
  for (double c : it->second) total += c;
  for (std::size_t a = 0; a < actions.size(); ++a) out[a] = (it->second[a] + alpha) / (total + alpha * k);
  return out;
}

PolicyTable learn_from_log(const std::vector<DecisionRecord>& records,
                           const std::vector<SlotKey>& features, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw Error(ErrorCode::InvalidArgument, "alpha must be a positive real");
  struct Sample {
    std::vector<std::string> tuple;
    ActionTemplate action;
  };
  std::vector<Sample> samples;
  std::size_t human = 0;
  for (const auto& r : records) {
    ActionTemplate action;
    if (r.source == DecisionSource::Human && r.verdict == Verdict::Executed) {
      action = r.action;
    } else if (r.human_reviewed) {
      action = r.verdict == Verdict::Executed ? r.action : ActionTemplate{std::string(kNoAction), {}};
    } else {
      continue;
    }
    ++human;
    if (!r.snapshot) continue;
    Sample s{{}, action};
    bool complete = true;
    for (const auto& f : features) {
      const auto* v = r.snapshot->value(f);
      if (!v) {
        complete = false;
        break;
      }
      s.tuple.push_back(v->value);
    }
    if (complete) samples.push_back(std::move(s));
  }
  if (human == 0) throw Error(ErrorCode::NoHumanRecords, "no human or human-reviewed decision records");
  if (samples.empty())
    throw Error(ErrorCode::NoHumanRecords, "no human decision record carries every feature value");

  PolicyTable table;
  table.features = features;
  table.alpha = alpha;
  table.actions.push_back(ActionTemplate{std::string(kNoAction), {}});
  for (const auto& s : samples) table.actions.push_back(s.action);
  std::sort(table.actions.begin(), table.actions.end());
  table.actions.erase(std::unique(table.actions.begin(), table.actions.end()), table.actions.end());
  for (const auto& s : samples) {
    auto& row = table.counts[s.tuple];
    row.resize(table.actions.size(), 0.0);
    auto a = std::lower_bound(table.actions.begin(), table.actions.end(), s.action) - table.actions.begin();
    row[static_cast<std::size_t>(a)] += 1.0;
  }
  return table;
}

ActionTemplate select_action_autonomous(const ModelSnapshot& snapshot, const PolicyTable& policy) {
  std::vector<std::string> tuple;
  for (const auto& f : policy.features) {
    const auto* v = snapshot.value(f);
    if (!v) throw Error(ErrorCode::MissingFeature, "feature " + f.to_string() + " has no committed value");
    tuple.push_back(v->value);
  }
  auto row = policy.row(tuple);
  std::size_t best = 0;
  for (std::size_t a = 1; a < row.size(); ++a)
    if (row[a] > row[best]) best = a;
  return policy.actions[best];
}

}  // namespace mutmod
