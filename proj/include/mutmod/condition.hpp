#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mutmod/bayes_net.hpp"
#include "mutmod/model_store.hpp"

namespace mutmod {

/// Boolean trigger over a model snapshot.
///
///   P([child].understood_pointing = yes) < 0.3
///   value([child].gaze_target) = hand and not value([].robot_gesture) = none
///
/// Comparisons: `<`, `<=`, `>`, `>=` on posteriors; `=`, `!=` on committed
/// values. Combinators: `and`, `or`, `not`, parentheses (`not` binds
/// tightest, then `and`, then `or`). A slot with no posterior or no committed
/// value makes its comparison false.
class Condition {
 public:
  struct Node;

  Condition() = default;
  static Condition parse(std::string_view text);  // throws ConditionSyntax

  bool evaluate(const ModelSnapshot& snapshot) const;

  /// Every referenced slot must be declared and every label in its domain;
  /// posterior comparisons need abstract variables.
  void validate(const SpecLookup& lookup) const;

  std::vector<SlotKey> references() const;
  const std::string& text() const { return text_; }

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace mutmod
