#pragma once

#include <compare>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mutmod/condition.hpp"
#include "mutmod/model_store.hpp"

namespace mutmod {

enum class AutonomyMode { Wizard, Mixed, Autonomous };
enum class RuleScope { General, Activity };
enum class ProposalStatus { Pending, Executed, Rejected, Expired, Suppressed };
enum class DecisionSource { Human, Engine };
enum class Verdict { Executed, Rejected };
enum class ProposalVerdict { Approve, Reject };

std::string_view to_string(AutonomyMode m);
std::string_view to_string(RuleScope s);
std::string_view to_string(ProposalStatus s);
std::string_view to_string(DecisionSource s);
std::string_view to_string(Verdict v);
AutonomyMode parse_mode(std::string_view text);  // throws InvalidArgument
RuleScope parse_scope(std::string_view text);
ProposalVerdict parse_verdict(std::string_view text);

inline constexpr std::string_view kNoAction = "no_action";

struct ActionTemplate {
  std::string verb;
  std::map<std::string, std::string> params;

  std::string to_string() const;  // "switch_activity{to=drawing}"
  auto operator<=>(const ActionTemplate&) const = default;
};

struct DecisionRule {
  std::string name;
  RuleScope scope = RuleScope::General;
  Condition condition;
  ActionTemplate action;
  VirtualTime cooldown_ms = 0;
};

using SnapshotRef = std::shared_ptr<const ModelSnapshot>;

struct Proposal {
  std::string id;
  std::string rule;
  ActionTemplate action;
  VirtualTime created_at = 0;
  VirtualTime expires_at = 0;  // meaningful while pending
  SnapshotRef evidence_snapshot;
  ProposalStatus status = ProposalStatus::Pending;
};

struct DecisionRecord {
  VirtualTime timestamp = 0;
  ActionTemplate action;
  DecisionSource source = DecisionSource::Human;
  AutonomyMode mode_at_decision = AutonomyMode::Wizard;
  SnapshotRef snapshot;
  Verdict verdict = Verdict::Executed;
  bool human_reviewed = false;  // engine proposal approved or rejected by a human
  std::optional<std::string> proposal_id;
};

struct ModeChange {
  VirtualTime timestamp = 0;
  AutonomyMode from;
  AutonomyMode to;
};

struct StatusCounts {
  std::size_t created = 0, pending = 0, executed = 0, rejected = 0, expired = 0, suppressed = 0;
};

struct DecisionConfig {
  AutonomyMode initial_mode = AutonomyMode::Wizard;
  VirtualTime proposal_expiry_ms = 30000;
};

/// Rule evaluation plus the wizard / mixed / autonomous routing of proposals.
class DecisionPipeline {
 public:
  explicit DecisionPipeline(DecisionConfig config = {});

  /// Validates each rule's condition against declared variables.
  void set_rules(std::vector<DecisionRule> rules, const SpecLookup& lookup);
  const std::vector<DecisionRule>& rules() const { return rules_; }

  /// One proposal per rule whose condition holds and whose cooldown has
  /// elapsed, in rule order. Proposals come back pending; route them with
  /// submit_proposal.
  std::vector<Proposal> evaluate_rules(const SnapshotRef& snapshot, VirtualTime now);

  void set_mode(AutonomyMode mode, VirtualTime now);
  AutonomyMode mode() const { return mode_; }
  const std::vector<ModeChange>& mode_log() const { return mode_log_; }

  /// wizard: suppressed; mixed: pending until verdict or expiry;
  /// autonomous: executed with an engine-sourced record.
  Proposal submit_proposal(Proposal p, VirtualTime now);

  DecisionRecord wizard_decide(const ActionTemplate& action, const SnapshotRef& snapshot,
                               VirtualTime now);

  std::pair<Proposal, std::optional<DecisionRecord>> resolve_proposal(const std::string& id,
                                                                      ProposalVerdict verdict,
                                                                      VirtualTime now);

  /// Expires pending proposals with expires_at <= now, oldest deadline first.
  std::vector<Proposal> expire_due(VirtualTime now);

  /// Pending proposals ordered by deadline.
  std::vector<Proposal> pending() const;
  const Proposal* find(const std::string& id) const;
  const std::vector<DecisionRecord>& log() const { return log_; }
  StatusCounts counts() const;

 private:
  DecisionConfig config_;
  AutonomyMode mode_;
  std::vector<DecisionRule> rules_;
  std::map<std::string, VirtualTime> last_fired_;
  std::map<std::string, Proposal> proposals_;
  std::vector<std::string> creation_order_;
  std::vector<DecisionRecord> log_;
  std::vector<ModeChange> mode_log_;
  std::uint64_t next_id_ = 1;
};

/// P(action | feature tuple), Laplace-smoothed over the action set.
struct PolicyTable {
  std::vector<SlotKey> features;
  std::vector<ActionTemplate> actions;  // sorted; always contains no_action
  double alpha = 1.0;
  std::map<std::vector<std::string>, std::vector<double>> counts;

  std::vector<double> row(const std::vector<std::string>& tuple) const;
};

/// Learns from human-executed and human-reviewed records only; rejected
/// proposals count towards no_action.
PolicyTable learn_from_log(const std::vector<DecisionRecord>& records,
                           const std::vector<SlotKey>& features, double alpha = 1.0);

/// Argmax action for the snapshot's feature tuple, ties to the smallest
/// action. Unseen tuples use the smoothed uniform row.
ActionTemplate select_action_autonomous(const ModelSnapshot& snapshot, const PolicyTable& policy);

}  // namespace mutmod
