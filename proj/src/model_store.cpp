#include "mutmod/model_store.hpp"

#include <algorithm>
#include <utility>

#include "mutmod/error.hpp"

namespace mutmod {

bool is_token(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

std::string ModelChain::to_string() const {
  std::string out = "[";
  for (std::size_t i = 0; i < observers.size(); ++i) {
    if (i) out += ',';
    out += observers[i];
  }
  return out + "]";
}

std::string SlotKey::to_string() const {
  return chain.to_string() + "." + variable;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

SlotKey SlotKey::parse(std::string_view text) {
  text = trim(text);
  auto bad = [&](const char* why) {
    return Error(ErrorCode::InvalidArgument,
                 "malformed node reference '" + std::string(text) + "': " + why);
  };
  if (text.empty() || text.front() != '[') throw bad("expected '['");
  auto close = text.find(']');
  if (close == std::string_view::npos) throw bad("missing ']'");
  SlotKey key;
  auto inner = trim(text.substr(1, close - 1));
  while (!inner.empty()) {
    auto comma = inner.find(',');
    auto part = trim(inner.substr(0, comma));
    if (!is_token(part)) throw bad("bad agent id");
    key.chain.observers.emplace_back(part);
    if (comma == std::string_view::npos) break;
    inner = inner.substr(comma + 1);
    if (trim(inner).empty()) throw bad("trailing ','");
  }
  auto rest = text.substr(close + 1);
  if (rest.empty() || rest.front() != '.') throw bad("expected '.' after chain");
  rest.remove_prefix(1);
  if (!is_token(rest)) throw bad("bad variable name");
  key.variable = std::string(rest);
  return key;
}

std::string_view to_string(VariableKind kind) {
  return kind == VariableKind::Perceived ? "perceived" : "abstract";
}

std::string_view to_string(ValueSource source) {
  switch (source) {
    case ValueSource::Perception: return "perception";
    case ValueSource::Inference: return "inference";
    case ValueSource::Harness: return "harness";
  }
  return "?";
}

VariableKind parse_variable_kind(std::string_view text) {
  if (text == "perceived") return VariableKind::Perceived;
  if (text == "abstract") return VariableKind::Abstract;
  throw Error(ErrorCode::InvalidSpec, "unknown variable kind '" + std::string(text) + "'");
}

ValueSource parse_value_source(std::string_view text) {
  if (text == "perception") return ValueSource::Perception;
  if (text == "inference") return ValueSource::Inference;
  if (text == "harness") return ValueSource::Harness;
  throw Error(ErrorCode::InvalidArgument, "unknown value source '" + std::string(text) + "'");
}

std::optional<std::size_t> VariableSpec::index_of(std::string_view label) const {
  auto it = std::find(domain.begin(), domain.end(), label);
  if (it == domain.end()) return std::nullopt;
  return static_cast<std::size_t>(it - domain.begin());
}

void VariableSpec::validate() const {
  if (!is_token(name))
    throw Error(ErrorCode::InvalidSpec, "variable name '" + name + "' is not a token");
  if (domain.size() < 2)
    throw Error(ErrorCode::InvalidSpec, "variable '" + name + "' needs at least 2 labels");
  for (std::size_t i = 0; i < domain.size(); ++i) {
    if (!is_token(domain[i]))
      throw Error(ErrorCode::InvalidSpec,
                  "variable '" + name + "': label '" + domain[i] + "' is not a token");
    for (std::size_t j = 0; j < i; ++j)
      if (domain[i] == domain[j])
        throw Error(ErrorCode::InvalidSpec,
                    "variable '" + name + "': duplicate label '" + domain[i] + "'");
  }
  if (staleness_ms && *staleness_ms < 0)
    throw Error(ErrorCode::InvalidSpec, "variable '" + name + "': negative staleness");
}

double Distribution::probability(std::string_view label) const {
  for (std::size_t i = 0; i < domain.size(); ++i)
    if (domain[i] == label) return probs[i];
  return 0.0;
}

const VariableValue* ModelSnapshot::value(const SlotKey& slot) const {
  auto it = entries.find(slot);
  return it == entries.end() ? nullptr : &it->second;
}

const Distribution* ModelSnapshot::posterior(const SlotKey& slot) const {
  auto it = posteriors.find(slot);
  return it == posteriors.end() ? nullptr : &it->second;
}

ModelStore::ModelStore(StoreConfig config) : config_(config) {
  models_.emplace(ModelChain{}, std::map<std::string, Slot>{});
}

void ModelStore::register_agent(const std::string& id) {
  if (!is_token(id))
    throw Error(ErrorCode::MalformedAgentId, "malformed agent id '" + id + "'");
  agents_.insert(id);
}

bool ModelStore::is_registered(const std::string& id) const {
  return agents_.count(id) != 0;
}

void ModelStore::check_chain(const ModelChain& chain) const {
  for (const auto& id : chain.observers)
    if (!is_registered(id))
      throw Error(ErrorCode::UnknownAgent, "unknown agent '" + id + "' in chain " + chain.to_string());
}

std::size_t ModelStore::order(const ModelChain& chain) const {
  check_chain(chain);
  return chain.order();
}

ModelHandle ModelStore::resolve_model(const ModelChain& chain) {
  check_chain(chain);
  if (chain.order() > config_.max_order)
    throw Error(ErrorCode::OrderExceeded,
                "chain " + chain.to_string() + " has order " + std::to_string(chain.order()) +
                    " > max_order " + std::to_string(config_.max_order));
  models_.try_emplace(chain);
  return {chain, chain.order()};
}

void ModelStore::declare_variable(const ModelChain& chain, const VariableSpec& spec) {
  spec.validate();
  resolve_model(chain);
  auto& vars = models_.at(chain);
  auto it = vars.find(spec.name);
  if (it == vars.end()) {
    vars.emplace(spec.name, Slot{spec, std::nullopt});
    return;
  }
  const auto& existing = it->second.spec;
  if (existing.kind != spec.kind || existing.domain != spec.domain)
    throw Error(ErrorCode::ConflictingSpec,
                "conflicting redeclaration of " + SlotKey{chain, spec.name}.to_string());
}

ModelStore::Slot& ModelStore::slot_ref(const SlotKey& slot) {
  return const_cast<Slot&>(std::as_const(*this).slot_ref(slot));
}

const ModelStore::Slot& ModelStore::slot_ref(const SlotKey& slot) const {
  auto model = models_.find(slot.chain);
  if (model != models_.end()) {
    auto it = model->second.find(slot.variable);
    if (it != model->second.end()) return it->second;
  }
  throw Error(ErrorCode::UnknownVariable, "unknown variable " + slot.to_string());
}

const VariableSpec& ModelStore::spec(const SlotKey& slot) const {
  return slot_ref(slot).spec;
}

const VariableSpec* ModelStore::find_spec(const SlotKey& slot) const {
  auto model = models_.find(slot.chain);
  if (model == models_.end()) return nullptr;
  auto it = model->second.find(slot.variable);
  return it == model->second.end() ? nullptr : &it->second.spec;
}

std::vector<SlotKey> ModelStore::slots() const {
  std::vector<SlotKey> out;
  for (const auto& [chain, vars] : models_)
    for (const auto& [name, slot] : vars) out.push_back({chain, name});
  return out;
}

CommitResult ModelStore::commit_value(const SlotKey& key, const std::string& value,
                                      VirtualTime timestamp, ValueSource source) {
  auto& slot = slot_ref(key);
  if (!slot.spec.index_of(value))
    throw Error(ErrorCode::ValueOutOfDomain,
                "value '" + value + "' not in domain of " + key.to_string());
  bool source_ok = slot.spec.kind == VariableKind::Perceived
                       ? source != ValueSource::Inference
                       : source == ValueSource::Inference;
  if (!source_ok)
    throw Error(ErrorCode::KindSourceMismatch,
                std::string(to_string(slot.spec.kind)) + " variable " + key.to_string() +
                    " cannot be written by " + std::string(to_string(source)));
  if (timestamp < 0)
    throw Error(ErrorCode::TimestampRegression, "negative timestamp for " + key.to_string());
  if (slot.value && timestamp < slot.value->timestamp)
    throw Error(ErrorCode::TimestampRegression,
                key.to_string() + ": timestamp " + std::to_string(timestamp) +
                    " precedes last commit at " + std::to_string(slot.value->timestamp));

  std::optional<std::string> old;
  if (slot.value) old = slot.value->value;
  slot.value = VariableValue{value, timestamp, source};
  now_ = std::max(now_, timestamp);

  CommitResult result;
  result.changed = !(old && *old == value);
  if (commit_observer_) commit_observer_(key, *slot.value, result.changed);
  if (!result.changed) return result;

  Notification note{key, old, value, timestamp};
  std::vector<WatchId> ids;
  for (const auto& [id, w] : watchers_)
    if (!w.slot || *w.slot == key) ids.push_back(id);
  for (auto id : ids) {
    auto it = watchers_.find(id);
    if (it == watchers_.end()) continue;  // unsubscribed by an earlier callback
    auto callback = it->second.callback;
    callback(note);
    ++result.notified;
  }
  return result;
}

std::optional<VariableValue> ModelStore::get_value(const SlotKey& slot) const {
  return slot_ref(slot).value;
}

std::optional<VariableValue> ModelStore::fresh_value(const SlotKey& key, VirtualTime now) const {
  const auto& slot = slot_ref(key);
  if (!slot.value) return std::nullopt;
  if (slot.spec.staleness_ms && now - slot.value->timestamp > *slot.spec.staleness_ms)
    return std::nullopt;
  return slot.value;
}

WatchId ModelStore::watch(const SlotKey& slot, WatchCallback callback) {
  slot_ref(slot);
  auto id = next_watch_++;
  watchers_.emplace(id, Watcher{slot, std::move(callback)});
  return id;
}

WatchId ModelStore::watch_all(WatchCallback callback) {
  auto id = next_watch_++;
  watchers_.emplace(id, Watcher{std::nullopt, std::move(callback)});
  return id;
}

void ModelStore::unwatch(WatchId id) { watchers_.erase(id); }

void ModelStore::publish_posterior(const SlotKey& slot, Distribution posterior) {
  slot_ref(slot);
  posteriors_[slot] = std::move(posterior);
}

void ModelStore::advance_clock(VirtualTime now) { now_ = std::max(now_, now); }

ModelSnapshot ModelStore::snapshot() const {
  ModelSnapshot snap;
  snap.taken_at = now_;
  for (const auto& [chain, vars] : models_)
    for (const auto& [name, slot] : vars)
      if (slot.value) snap.entries.emplace(SlotKey{chain, name}, *slot.value);
  snap.posteriors = posteriors_;
  return snap;
}

}  // namespace mutmod
