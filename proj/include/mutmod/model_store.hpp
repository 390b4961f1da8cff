#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mutmod {

using VirtualTime = std::int64_t;  // milliseconds of virtual time

/// True for non-empty tokens of letters, digits, '_' and '-'.
bool is_token(std::string_view s);

/// Observer chain naming a nested model. The empty chain is the engine's
/// own (ego) model; [child] is the child as seen by the engine; [child, robot]
/// is the robot as the child sees it.
struct ModelChain {
  std::vector<std::string> observers;

  std::size_t order() const { return observers.size(); }
  std::string to_string() const;  // "[child,robot]"

  auto operator<=>(const ModelChain&) const = default;
};

/// (chain, variable) address of one value slot; also a Bayesian network node.
struct SlotKey {
  ModelChain chain;
  std::string variable;

  std::string to_string() const;  // "[child].gaze_target"
  static SlotKey parse(std::string_view text);

  auto operator<=>(const SlotKey&) const = default;
};

enum class VariableKind { Perceived, Abstract };
enum class ValueSource { Perception, Inference, Harness };

std::string_view to_string(VariableKind kind);
std::string_view to_string(ValueSource source);
VariableKind parse_variable_kind(std::string_view text);
ValueSource parse_value_source(std::string_view text);

struct VariableSpec {
  std::string name;
  VariableKind kind = VariableKind::Perceived;
  std::vector<std::string> domain;
  std::string description;
  // Values older than this are treated as absent evidence.
  std::optional<VirtualTime> staleness_ms;

  std::optional<std::size_t> index_of(std::string_view label) const;
  void validate() const;  // throws InvalidSpec
};

struct VariableValue {
  std::string value;
  VirtualTime timestamp = 0;
  ValueSource source = ValueSource::Perception;

  bool operator==(const VariableValue&) const = default;
};

/// Probability vector over a variable's domain, in declared domain order.
struct Distribution {
  std::vector<std::string> domain;
  std::vector<double> probs;

  double probability(std::string_view label) const;
  bool operator==(const Distribution&) const = default;
};

struct ModelSnapshot {
  VirtualTime taken_at = 0;
  std::map<SlotKey, VariableValue> entries;
  std::map<SlotKey, Distribution> posteriors;

  const VariableValue* value(const SlotKey& slot) const;
  const Distribution* posterior(const SlotKey& slot) const;

  bool operator==(const ModelSnapshot&) const = default;
};

struct Notification {
  SlotKey slot;
  std::optional<std::string> old_value;
  std::string new_value;
  VirtualTime timestamp = 0;
};

struct CommitResult {
  bool changed = false;
  std::size_t notified = 0;
};

struct StoreConfig {
  std::size_t max_order = 2;
};

struct ModelHandle {
  ModelChain chain;
  std::size_t order = 0;
};

using WatchId = std::uint64_t;
using WatchCallback = std::function<void(const Notification&)>;
/// Sees every accepted commit, including ones that leave the value unchanged,
/// before any watcher is notified.
using CommitObserver = std::function<void(const SlotKey&, const VariableValue&, bool changed)>;

/// Registry of agents and nested models. Single writer; readers take
/// snapshots.
class ModelStore {
 public:
  explicit ModelStore(StoreConfig config = {});

  const StoreConfig& config() const { return config_; }

  void register_agent(const std::string& id);
  bool is_registered(const std::string& id) const;
  const std::set<std::string>& agents() const { return agents_; }

  std::size_t order(const ModelChain& chain) const;
  ModelHandle resolve_model(const ModelChain& chain);

  void declare_variable(const ModelChain& chain, const VariableSpec& spec);
  const VariableSpec& spec(const SlotKey& slot) const;  // throws UnknownVariable
  const VariableSpec* find_spec(const SlotKey& slot) const;
  std::vector<SlotKey> slots() const;

  CommitResult commit_value(const SlotKey& slot, const std::string& value,
                            VirtualTime timestamp, ValueSource source);
  std::optional<VariableValue> get_value(const SlotKey& slot) const;

  /// Latest value unless it is older than the variable's staleness window at
  /// `now`.
  std::optional<VariableValue> fresh_value(const SlotKey& slot,
                                           VirtualTime now) const;

  WatchId watch(const SlotKey& slot, WatchCallback callback);
  WatchId watch_all(WatchCallback callback);
  void unwatch(WatchId id);
  void set_commit_observer(CommitObserver observer) { commit_observer_ = std::move(observer); }

  void publish_posterior(const SlotKey& slot, Distribution posterior);
  void advance_clock(VirtualTime now);
  VirtualTime now() const { return now_; }

  ModelSnapshot snapshot() const;

 private:
  struct Slot {
    VariableSpec spec;
    std::optional<VariableValue> value;
  };
  struct Watcher {
    std::optional<SlotKey> slot;
    WatchCallback callback;
  };

  void check_chain(const ModelChain& chain) const;
  Slot& slot_ref(const SlotKey& slot);
  const Slot& slot_ref(const SlotKey& slot) const;

  StoreConfig config_;
  std::set<std::string> agents_;
  std::map<ModelChain, std::map<std::string, Slot>> models_;
  std::map<SlotKey, Distribution> posteriors_;
  std::map<WatchId, Watcher> watchers_;
  WatchId next_watch_ = 1;
  CommitObserver commit_observer_;
  VirtualTime now_ = 0;
};

}  // namespace mutmod
