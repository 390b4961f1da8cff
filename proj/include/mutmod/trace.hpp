#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mutmod/bayes_net.hpp"
#include "mutmod/decision.hpp"
#include "mutmod/document.hpp"
#include "mutmod/scenario.hpp"

namespace mutmod {

/// Ordered engine record stream. Every record is an object with at least
/// "t" (virtual ms) and "type". Record types: init, declare_agent,
/// declare_variable, commit, notify, posterior, diagnostic, unbound, mode,
/// proposal, disposition, decision, action.
class Trace {
 public:
  void append(json record);
  const std::vector<json>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  /// One compact line per record, keys sorted, shortest round-trip numbers.
  std::string canonical() const;
  /// Hex SHA-256 of canonical().
  std::string digest() const;

  bool operator==(const Trace& other) const { return records_ == other.records_; }

 private:
  std::vector<json> records_;
};

std::string sha256_hex(std::string_view data);

/// Header, records, then a closing {"type":"digest"} line.
std::string trace_document(const Trace& trace);
Trace parse_trace(std::string_view text, const std::string& origin = "<trace>");
void export_trace(const Trace& trace, const std::filesystem::path& path);
Trace import_trace(const std::filesystem::path& path);

struct ExpectationResult {
  Expectation expectation;
  bool passed = false;
  std::string detail;
};

struct CheckReport {
  std::vector<ExpectationResult> results;

  bool all_passed() const;
  std::size_t failures() const;
};

/// Evaluates each expectation against the trace state at its timestamp.
CheckReport check(const Trace& trace, const std::vector<Expectation>& expectations);

/// Variable declarations recorded at initialisation.
std::map<SlotKey, VariableSpec> declared_variables(const Trace& trace);

/// Store state (latest committed values) after each virtual timestamp that
/// carried commits, restricted to records holding every `required` slot.
std::vector<JointRecord> joint_records(const Trace& trace, const std::vector<SlotKey>& required,
                                       std::size_t* skipped = nullptr);

/// Decision records with the committed values at decision time.
std::vector<DecisionRecord> decision_records(const Trace& trace);

json cpt_to_json(const Cpt& cpt);
json policy_to_json(const PolicyTable& policy);
PolicyTable policy_from_json(const json& j);  // throws SchemaViolation

}  // namespace mutmod
