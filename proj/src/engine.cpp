#include "mutmod/engine.hpp"

#include <limits>

namespace mutmod {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

json distribution_json(const Distribution& d) { return {{"domain", d.domain}, {"probs", d.probs}}; }

BayesNet build_net(const Scenario& s, const ModelStore& store) {
  return BayesNet::build(s.cpts, [&](const SlotKey& k) { return store.find_spec(k); });
}

}  // namespace

json snapshot_to_json(const ModelSnapshot& snap) {
  json entries = json::object();
  for (const auto& [k, v] : snap.entries)
    entries[k.to_string()] = {{"value", v.value}, {"t", v.timestamp}, {"source", to_string(v.source)}};
  json posts = json::object();
  for (const auto& [k, d] : snap.posteriors) posts[k.to_string()] = distribution_json(d);
  return {{"taken_at", snap.taken_at}, {"entries", entries}, {"posteriors", posts}};
}

Engine::Engine(const Scenario& scenario, std::uint64_t seed, std::optional<AutonomyMode> mode_override)
    : scenario_name_(scenario.name),
      seed_(seed),
      store_(scenario.make_store()),
      perception_(scenario.bindings),
      inference_(build_net(scenario, store_), scenario.inference),
      decisions_(DecisionConfig{mode_override.value_or(scenario.initial_mode), scenario.proposal_expiry_ms}),
      initial_values_(scenario.initial_values) {
  decisions_.set_rules(scenario.rules, [this](const SlotKey& k) { return store_.find_spec(k); });
  perception_.validate(store_);

  store_.set_commit_observer([this](const SlotKey& slot, const VariableValue& v, bool changed) {
    record({{"t", v.timestamp},
            {"type", "commit"},
            {"node", slot.to_string()},
            {"value", v.value},
            {"source", to_string(v.source)},
            {"changed", changed}});
  });
  store_.watch_all([this](const Notification& n) {
    record({{"t", n.timestamp},
            {"type", "notify"},
            {"node", n.slot.to_string()},
            {"old", n.old_value ? json(*n.old_value) : json(nullptr)},
            {"new", n.new_value}});
    changed_.insert(n.slot);
  });
}

void Engine::record(json r) {
  trace_.append(std::move(r));
  if (listener_) listener_(trace_.records().back());
}

SnapshotRef Engine::snapshot() const { return std::make_shared<const ModelSnapshot>(store_.snapshot()); }

std::uint64_t Engine::turn_seed() { return splitmix64(seed_ ^ splitmix64(turns_)); }

void Engine::initialise() {
  if (initialised_) return;
  initialised_ = true;
  record({{"t", 0},
          {"type", "init"},
          {"scenario", scenario_name_},
          {"seed", seed_},
          {"mode", to_string(decisions_.mode())},
          {"max_order", store_.config().max_order}});
  for (const auto& a : store_.agents()) record({{"t", 0}, {"type", "declare_agent"}, {"id", a}});
  for (const auto& slot : store_.slots()) {
    const auto& spec = store_.spec(slot);
    record({{"t", 0},
            {"type", "declare_variable"},
            {"node", slot.to_string()},
            {"kind", to_string(spec.kind)},
            {"domain", spec.domain}});
  }
  for (const auto& iv : initial_values_) store_.commit_value(iv.slot, iv.value, 0, ValueSource::Harness);
  changed_.clear();

  auto res = inference_.recompute_all(store_, 0, turn_seed());
  changed_.clear();
  recomputations_ += res.recomputed.size();
  for (const auto& u : res.updates) {
    json r = distribution_json(u.posterior);
    r.update({{"t", 0}, {"type", "posterior"}, {"node", u.node.to_string()}, {"map", u.label}});
    record(std::move(r));
  }
  for (const auto& d : res.diagnostics)
    record({{"t", 0}, {"type", "diagnostic"}, {"node", d.node.to_string()},
            {"code", to_string(d.code)}, {"message", d.message}});
  route(decisions_.evaluate_rules(snapshot(), 0), 0);
}

template <typename F>
Outcome Engine::turn(VirtualTime t, const char* command, F&& body) {
  initialise();
  Outcome out;
  auto fail = [&](ErrorCode code, const std::string& message) {
    out.ok = false;
    out.code = code;
    out.message = message;
    record({{"t", now_}, {"type", "diagnostic"}, {"command", command},
            {"code", to_string(code)}, {"message", message}});
  };
  if (t < now_) {
    fail(ErrorCode::TimestampRegression,
         "command at t=" + std::to_string(t) + " precedes engine time " + std::to_string(now_));
    return out;
  }
  ++turns_;
  now_ = t;
  store_.advance_clock(t);
  expire(t);
  try {
    body(out);
  } catch (const Error& e) {
    fail(e.code(), e.what());
  }
  post_turn(t);
  return out;
}

void Engine::expire(VirtualTime t) {
  for (const auto& p : decisions_.expire_due(t))
    record({{"t", p.expires_at}, {"type", "disposition"}, {"id", p.id}, {"status", "expired"}});
}

void Engine::post_turn(VirtualTime t) {
  auto changed = std::move(changed_);
  changed_.clear();
  auto res = inference_.update_on_change(changed, store_, t, turn_seed());
  changed_.clear();
  recomputations_ += res.recomputed.size();
  for (const auto& u : res.updates) {
    json r = distribution_json(u.posterior);
    r.update({{"t", t}, {"type", "posterior"}, {"node", u.node.to_string()}, {"map", u.label}});
    record(std::move(r));
  }
  for (const auto& d : res.diagnostics)
    record({{"t", t}, {"type", "diagnostic"}, {"node", d.node.to_string()},
            {"code", to_string(d.code)}, {"message", d.message}});
  route(decisions_.evaluate_rules(snapshot(), t), t);
}

void Engine::route(std::vector<Proposal> proposals, VirtualTime t) {
  for (auto& p : proposals) {
    record({{"t", t},
            {"type", "proposal"},
            {"id", p.id},
            {"rule", p.rule},
            {"action", action_to_json(p.action)}});
    auto routed = decisions_.submit_proposal(std::move(p), t);
    json disp = {{"t", t}, {"type", "disposition"}, {"id", routed.id}, {"status", to_string(routed.status)}};
    if (routed.status == ProposalStatus::Pending) disp["expires_at"] = routed.expires_at;
    record(std::move(disp));
    if (routed.status == ProposalStatus::Executed) {
      record_decision(decisions_.log().back());
      record_action(decisions_.log().back());
    }
  }
}

void Engine::record_decision(const DecisionRecord& d) {
  json state = json::object();
  if (d.snapshot)
    for (const auto& [k, v] : d.snapshot->entries) state[k.to_string()] = v.value;
  record({{"t", d.timestamp},
          {"type", "decision"},
          {"action", action_to_json(d.action)},
          {"source", to_string(d.source)},
          {"mode", to_string(d.mode_at_decision)},
          {"verdict", to_string(d.verdict)},
          {"human_reviewed", d.human_reviewed},
          {"proposal", d.proposal_id ? json(*d.proposal_id) : json(nullptr)},
          {"state", state}});
}

void Engine::record_action(const DecisionRecord& d) {
  record({{"t", d.timestamp},
          {"type", "action"},
          {"action", action_to_json(d.action)},
          {"source", to_string(d.source)},
          {"human_approved", d.human_reviewed},
          {"proposal", d.proposal_id ? json(*d.proposal_id) : json(nullptr)}});
}

Outcome Engine::ingest(const RawEvent& event) {
  return turn(event.timestamp, "event", [&](Outcome&) {
    auto res = perception_.ingest(event, store_);
    if (res.committed.empty())
      record({{"t", event.timestamp}, {"type", "unbound"}, {"sensor", event.sensor}});
  });
}

Outcome Engine::set_mode(AutonomyMode mode, VirtualTime t) {
  return turn(t, "set_mode", [&](Outcome& out) {
    auto from = decisions_.mode();
    decisions_.set_mode(mode, t);
    record({{"t", t}, {"type", "mode"}, {"from", to_string(from)}, {"to", to_string(mode)}});
    out.detail = {{"mode", to_string(mode)}};
  });
}

Outcome Engine::wizard_decide(const ActionTemplate& action, VirtualTime t) {
  return turn(t, "wizard_decide", [&](Outcome& out) {
    auto d = decisions_.wizard_decide(action, snapshot(), t);
    record_decision(d);
    record_action(d);
    out.detail = {{"action", action_to_json(action)}};
  });
}

Outcome Engine::resolve_proposal(const std::string& id, ProposalVerdict verdict, VirtualTime t) {
  return turn(t, "resolve_proposal", [&](Outcome& out) {
    auto [p, rec] = decisions_.resolve_proposal(id, verdict, t);
    record({{"t", t}, {"type", "disposition"}, {"id", p.id}, {"status", to_string(p.status)}});
    if (rec) {
      record_decision(*rec);
      if (rec->verdict == Verdict::Executed) record_action(*rec);
    }
    out.detail = {{"id", p.id}, {"status", to_string(p.status)}};
  });
}

Outcome Engine::tick(VirtualTime t) {
  return turn(t, "tick", [](Outcome&) {});
}

Outcome Engine::apply(const TimelineEntry& e) {
  switch (e.kind) {
    case EntryKind::Event: {
      auto ev = e.event;
      ev.timestamp = e.t;
      return ingest(ev);
    }
    case EntryKind::SetMode: return set_mode(e.mode, e.t);
    case EntryKind::WizardDecide: return wizard_decide(e.action, e.t);
    case EntryKind::Verdict: return resolve_proposal(e.proposal_id, e.verdict, e.t);
  }
  return {};
}

void Engine::finish() {
  initialise();
  for (const auto& p : decisions_.expire_due(std::numeric_limits<VirtualTime>::max())) {
    now_ = std::max(now_, p.expires_at);
    record({{"t", p.expires_at}, {"type", "disposition"}, {"id", p.id}, {"status", "expired"}});
  }
}

}  // namespace mutmod
