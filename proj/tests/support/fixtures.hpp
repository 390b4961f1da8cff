#pragma once

#include <filesystem>
#include <string>

#include "mutmod/bayes_net.hpp"
#include "mutmod/model_store.hpp"
#include "mutmod/scenario.hpp"

#ifndef MUTMOD_TEST_DATA
#error "MUTMOD_TEST_DATA must point at tests/data"
#endif

namespace fx {

inline std::filesystem::path data(const std::string& name) { return std::filesystem::path(MUTMOD_TEST_DATA) / name; }

inline mutmod::SlotKey key(const std::string& text) { return mutmod::SlotKey::parse(text); }

inline const mutmod::SlotKey kUnderstood = key("[child].understood_pointing");
inline const mutmod::SlotKey kGaze = key("[child].gaze_target");
inline const mutmod::SlotKey kGesture = key("[].robot_gesture");
inline const mutmod::SlotKey kFeedback = key("[child].robot_feedback");

inline mutmod::VariableSpec spec(std::string name, mutmod::VariableKind kind, std::vector<std::string> domain) {
  mutmod::VariableSpec s;
  s.name = std::move(name);
  s.kind = kind;
  s.domain = std::move(domain);
  return s;
}

// Store holding the pointing variables.
inline mutmod::ModelStore pointing_store() {
  using mutmod::VariableKind;
  mutmod::ModelStore store;
  store.register_agent("child");
  store.register_agent("robot");
  store.declare_variable({}, spec("robot_gesture", VariableKind::Perceived, {"pointing", "none"}));
  store.declare_variable({{"child"}}, spec("gaze_target", VariableKind::Perceived, {"object", "hand", "elsewhere"}));
  store.declare_variable({{"child"}}, spec("understood_pointing", VariableKind::Abstract, {"yes", "no"}));
  store.declare_variable({{"child"}}, spec("robot_feedback", VariableKind::Perceived, {"thumbs_up", "thumbs_down"}));
  return store;
}

inline std::vector<mutmod::Cpt> pointing_cpts() {
  return {
      {kUnderstood, {}, {{{}, {0.5, 0.5}}}, 0},
      {kGaze, {kUnderstood}, {{{"yes"}, {0.8, 0.1, 0.1}}, {{"no"}, {0.1, 0.6, 0.3}}}, 0},
  };
}

inline mutmod::BayesNet pointing_net(const mutmod::ModelStore& store) {
  return mutmod::BayesNet::build(pointing_cpts(), [&](const mutmod::SlotKey& k) { return store.find_spec(k); });
}

inline mutmod::Scenario pointing_scenario() { return mutmod::load_scenario(data("pointing.jsonl")); }

}  // namespace fx
