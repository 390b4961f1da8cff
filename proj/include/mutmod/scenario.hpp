#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mutmod/bayes_net.hpp"
#include "mutmod/decision.hpp"
#include "mutmod/document.hpp"
#include "mutmod/inference.hpp"
#include "mutmod/model_store.hpp"
#include "mutmod/perception.hpp"

namespace mutmod {

struct VariableDecl {
  ModelChain chain;
  VariableSpec spec;
  int line = 0;
};

struct InitialValue {
  SlotKey slot;
  std::string value;
  int line = 0;
};

enum class EntryKind { Event, SetMode, WizardDecide, Verdict };

struct TimelineEntry {
  VirtualTime t = 0;
  EntryKind kind = EntryKind::Event;
  RawEvent event;                     // Event
  AutonomyMode mode{};                // SetMode
  ActionTemplate action;              // WizardDecide
  std::string proposal_id;            // Verdict
  ProposalVerdict verdict{};          // Verdict
  int line = 0;
};

enum class ExpectationKind { ValueEquals, PosteriorBelow, PosteriorAbove, ActionExecuted, ProposalCreated };

std::string_view to_string(ExpectationKind kind);

struct Expectation {
  VirtualTime at = 0;
  ExpectationKind kind = ExpectationKind::ValueEquals;
  std::optional<SlotKey> slot;  // value / posterior kinds
  std::string label;            // value / posterior kinds
  std::string verb;             // action / proposal kinds
  double bound = 0.0;           // posterior kinds
  int line = 0;

  std::string describe() const;
};

struct Scenario {
  std::string name = "unnamed";
  std::size_t max_order = 2;
  AutonomyMode initial_mode = AutonomyMode::Wizard;
  VirtualTime proposal_expiry_ms = 30000;
  InferenceConfig inference;
  std::vector<std::string> agents;
  std::vector<VariableDecl> variables;
  std::vector<Cpt> cpts;
  std::vector<DecisionRule> rules;
  std::vector<SensorBinding> bindings;
  std::vector<InitialValue> initial_values;
  std::vector<TimelineEntry> timeline;
  std::vector<Expectation> expectations;

  /// Cross-checks every reference; throws ValidationError naming the entity.
  void validate() const;

  /// Store with agents registered and variables declared.
  ModelStore make_store() const;
};

/// Adds the records of `doc` (following include records) to `scenario`.
void apply_document(Scenario& scenario, const Document& doc);

Scenario parse_scenario(std::string_view text, const std::string& origin = "<scenario>",
                        const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

/// Canonical document text for a scenario (round-trips through parse_scenario).
std::string scenario_document(const Scenario& scenario);

/// Shared record readers (also used by trace and wire decoding).
ActionTemplate action_from_json(const json& j);
json action_to_json(const ActionTemplate& a);

}  // namespace mutmod
