#include "mutmod/scenario.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "mutmod/error.hpp"

namespace mutmod {

std::string_view to_string(ExpectationKind kind) {
  switch (kind) {
    case ExpectationKind::ValueEquals: return "value_equals";
    case ExpectationKind::PosteriorBelow: return "posterior_below";
    case ExpectationKind::PosteriorAbove: return "posterior_above";
    case ExpectationKind::ActionExecuted: return "action_executed";
    case ExpectationKind::ProposalCreated: return "proposal_created";
  }
  return "?";
}

namespace {

ExpectationKind parse_expectation_kind(std::string_view text) {
  for (auto k : {ExpectationKind::ValueEquals, ExpectationKind::PosteriorBelow,
                 ExpectationKind::PosteriorAbove, ExpectationKind::ActionExecuted,
                 ExpectationKind::ProposalCreated})
    if (to_string(k) == text) return k;
  throw Error(ErrorCode::InvalidArgument, "unknown expectation kind '" + std::string(text) + "'");
}

}  // namespace

std::string Expectation::describe() const {
  std::string s = std::string(to_string(kind)) + "(";
  switch (kind) {
    case ExpectationKind::ValueEquals: s += slot->to_string() + " = " + label; break;
    case ExpectationKind::PosteriorBelow:
    case ExpectationKind::PosteriorAbove: {
      s += "P(" + slot->to_string() + " = " + label + ") ";
      s += kind == ExpectationKind::PosteriorBelow ? "< " : "> ";
      s += json(bound).dump();
      break;
    }
    default: s += verb;
  }
  return s + ") at t=" + std::to_string(at);
}

ActionTemplate action_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, "action must be an object");
  auto v = j.find("verb");
  if (v == j.end() || !v->is_string() || !is_token(v->get<std::string>()))
    throw Error(ErrorCode::SchemaViolation, "action needs a token 'verb'");
  ActionTemplate a;
  a.verb = v->get<std::string>();
  if (auto p = j.find("params"); p != j.end()) {
    if (!p->is_object()) throw Error(ErrorCode::SchemaViolation, "action params must be an object");
    for (const auto& [k, val] : p->items()) {
      if (!val.is_string()) throw Error(ErrorCode::SchemaViolation, "action param '" + k + "' must be a string");
      a.params[k] = val.get<std::string>();
    }
  }
  return a;
}

json action_to_json(const ActionTemplate& a) {
  json params = json::object();
  for (const auto& [k, v] : a.params) params[k] = v;
  return {{"verb", a.verb}, {"params", params}};
}

namespace {

class Reader {
 public:
  Reader(const Document& doc, const DocRecord& rec) : doc_(doc), rec_(rec) {}

  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::ValidationError,
                doc_.origin + ":" + std::to_string(rec_.line) + ": " + type() + " record: " + why);
  }

  std::string type() const {
    auto it = rec_.value.find("record");
    return it != rec_.value.end() && it->is_string() ? it->get<std::string>() : "?";
  }

  bool has(const char* key) const { return rec_.value.contains(key); }

  const json& field(const char* key) const {
    auto it = rec_.value.find(key);
    if (it == rec_.value.end()) fail(std::string("missing field '") + key + "'");
    return *it;
  }

  std::string str(const char* key) const {
    const auto& f = field(key);
    if (!f.is_string()) fail(std::string("field '") + key + "' must be a string");
    return f.get<std::string>();
  }

  std::string str_or(const char* key, std::string fallback) const {
    return has(key) ? str(key) : fallback;
  }

  double num(const char* key) const {
    const auto& f = field(key);
    if (!f.is_number()) fail(std::string("field '") + key + "' must be a number");
    return f.get<double>();
  }

  std::int64_t integer(const char* key) const {
    const auto& f = field(key);
    if (!f.is_number_integer()) fail(std::string("field '") + key + "' must be an integer");
    return f.get<std::int64_t>();
  }

  VirtualTime time() const {
    auto t = integer("t");
    if (t < 0) fail("negative timestamp");
    return t;
  }

  SlotKey node(const char* key = "node") const {
    try {
      return SlotKey::parse(str(key));
    } catch (const Error& e) {
      fail(e.what());
    }
  }

  std::vector<std::string> strings(const char* key) const {
    const auto& f = field(key);
    if (!f.is_array()) fail(std::string("field '") + key + "' must be an array");
    std::vector<std::string> out;
    for (const auto& x : f) {
      if (!x.is_string()) fail(std::string("field '") + key + "' must hold strings");
      out.push_back(x.get<std::string>());
    }
    return out;
  }

  template <typename F>
  auto guarded(F&& f) const {
    try {
      return f();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ValidationError) throw;
      fail(std::string(to_string(e.code())) + ": " + e.what());
    }
  }

  int line() const { return rec_.line; }
  const json& raw() const { return rec_.value; }

 private:
  const Document& doc_;
  const DocRecord& rec_;
};

Vec3 vec3(const Reader& r, const json& j) {
  if (!j.is_array() || j.size() != 3) r.fail("positions must be [x, y, z]");
  Vec3 v{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!j[i].is_number()) r.fail("positions must be numeric");
    v[i] = j[i].get<double>();
  }
  return v;
}

SensorBinding read_binding(const Reader& r) {
  SensorBinding b;
  b.sensor = r.str("sensor");
  b.target = r.node();
  std::string kind = r.str_or("kind", r.has("bins") ? "discretized" : r.has("objects") ? "gaze" : "categorical");
  if (kind == "categorical") {
    b.kind = BindingKind::Categorical;
    b.field = r.str("field");
  } else if (kind == "discretized") {
    b.kind = BindingKind::Discretized;
    b.field = r.str("field");
    const auto& bins = r.field("bins");
    if (!bins.is_array()) r.fail("'bins' must be an array");
    for (const auto& bin : bins) {
      if (!bin.is_object() || !bin.contains("label") || !bin["label"].is_string())
        r.fail("each bin needs a 'label'");
      double upper = std::numeric_limits<double>::infinity();
      if (bin.contains("upper") && !bin["upper"].is_null()) {
        if (!bin["upper"].is_number()) r.fail("bin 'upper' must be a number or null");
        upper = bin["upper"].get<double>();
      }
      b.bins.push_back({upper, bin["label"].get<std::string>()});
    }
  } else if (kind == "gaze") {
    b.kind = BindingKind::Gaze;
    b.field = r.str_or("field", "gaze");
    if (r.has("threshold_deg")) b.threshold_deg = r.num("threshold_deg");
    const auto& objs = r.field("objects");
    if (!objs.is_array()) r.fail("'objects' must be an array");
    for (const auto& o : objs) {
      if (!o.is_object() || !o.contains("label") || !o["label"].is_string() || !o.contains("position") ||
          !o.contains("radius") || !o["radius"].is_number())
        r.fail("each object needs label, position and radius");
      b.objects.push_back({o["label"].get<std::string>(), vec3(r, o["position"]), o["radius"].get<double>()});
    }
  } else {
    r.fail("unknown binding kind '" + kind + "'");
  }
  return b;
}

RawEvent read_event(const Reader& r) {
  RawEvent ev;
  ev.timestamp = r.time();
  ev.sensor = r.str("sensor");
  if (r.has("payload")) {
    const auto& p = r.field("payload");
    if (!p.is_object()) r.fail("'payload' must be an object");
    for (const auto& [k, v] : p.items()) {
      if (v.is_number()) ev.payload[k] = v.get<double>();
      else if (v.is_string()) ev.payload[k] = v.get<std::string>();
      else r.fail("payload field '" + k + "' must be a number or a string");
    }
  }
  return ev;
}

void apply_record(Scenario& s, const Document& doc, const DocRecord& rec, std::set<std::filesystem::path>& seen);

void apply_document_impl(Scenario& s, const Document& doc, std::set<std::filesystem::path>& seen) {
  if (doc.kind == "trace")
    throw Error(ErrorCode::ValidationError, doc.origin + ": a trace is not a scenario document");
  for (const auto& rec : doc.records) apply_record(s, doc, rec, seen);
}

void apply_record(Scenario& s, const Document& doc, const DocRecord& rec, std::set<std::filesystem::path>& seen) {
  Reader r(doc, rec);
  auto type = r.str("record");
  if (type == "scenario") {
    s.name = r.str("name");
  } else if (type == "config") {
    if (r.has("max_order")) {
      auto m = r.integer("max_order");
      if (m < 0) r.fail("max_order must be non-negative");
      s.max_order = static_cast<std::size_t>(m);
    }
    if (r.has("mode")) s.initial_mode = r.guarded([&] { return parse_mode(r.str("mode")); });
    if (r.has("proposal_expiry_ms")) {
      s.proposal_expiry_ms = r.integer("proposal_expiry_ms");
      if (s.proposal_expiry_ms <= 0) r.fail("proposal_expiry_ms must be positive");
    }
    if (r.has("inference")) {
      auto m = r.str("inference");
      if (m == "exact") s.inference.method = InferenceMethod::Exact;
      else if (m == "likelihood_weighting") s.inference.method = InferenceMethod::LikelihoodWeighting;
      else r.fail("unknown inference method '" + m + "'");
    }
    if (r.has("samples")) {
      auto n = r.integer("samples");
      if (n <= 0) r.fail("samples must be positive");
      s.inference.samples = static_cast<std::uint64_t>(n);
    }
  } else if (type == "agent") {
    s.agents.push_back(r.str("id"));
  } else if (type == "variable") {
    VariableDecl d;
    auto ref = r.node();
    d.chain = ref.chain;
    d.spec.name = ref.variable;
    d.spec.kind = r.guarded([&] { return parse_variable_kind(r.str("kind")); });
    d.spec.domain = r.strings("domain");
    d.spec.description = r.str_or("description", "");
    if (r.has("staleness_ms")) d.spec.staleness_ms = r.integer("staleness_ms");
    d.line = r.line();
    s.variables.push_back(std::move(d));
  } else if (type == "cpt") {
    Cpt cpt;
    cpt.child = r.node();
    if (r.has("parents"))
      for (const auto& p : r.strings("parents"))
        cpt.parents.push_back(r.guarded([&] { return SlotKey::parse(p); }));
    const auto& rows = r.field("rows");
    if (!rows.is_array()) r.fail("'rows' must be an array");
    for (const auto& row : rows) {
      CptRow cr;
      if (!row.is_object() || !row.contains("probs") || !row["probs"].is_array())
        r.fail("each row needs a 'probs' array");
      for (const auto& p : row["probs"]) {
        if (!p.is_number()) r.fail("probabilities must be numbers");
        cr.probs.push_back(p.get<double>());
      }
      if (row.contains("given")) {
        if (!row["given"].is_array()) r.fail("'given' must be an array");
        for (const auto& g : row["given"]) {
          if (!g.is_string()) r.fail("'given' must hold labels");
          cr.given.push_back(g.get<std::string>());
        }
      }
      cpt.rows.push_back(std::move(cr));
    }
    cpt.source_line = r.line();
    s.cpts.push_back(std::move(cpt));
  } else if (type == "rule") {
    DecisionRule rule;
    rule.name = r.str("name");
    rule.scope = r.guarded([&] { return parse_scope(r.str_or("scope", "general")); });
    rule.condition = r.guarded([&] { return Condition::parse(r.str("when")); });
    rule.action = r.guarded([&] { return action_from_json(r.field("action")); });
    if (r.has("cooldown_ms")) rule.cooldown_ms = r.integer("cooldown_ms");
    s.rules.push_back(std::move(rule));
  } else if (type == "binding") {
    s.bindings.push_back(read_binding(r));
  } else if (type == "initial") {
    s.initial_values.push_back({r.node(), r.str("value"), r.line()});
  } else if (type == "include") {
    auto path = doc.base_dir / r.str("path");
    auto canonical = std::filesystem::weakly_canonical(path);
    if (!seen.insert(canonical).second) r.fail("include cycle through " + path.string());
    auto included = r.guarded([&] { return read_document(path); });
    apply_document_impl(s, included, seen);
    seen.erase(canonical);
  } else if (type == "event") {
    TimelineEntry e;
    e.kind = EntryKind::Event;
    e.event = read_event(r);
    e.t = e.event.timestamp;
    e.line = r.line();
    s.timeline.push_back(std::move(e));
  } else if (type == "set_mode") {
    TimelineEntry e;
    e.kind = EntryKind::SetMode;
    e.t = r.time();
    e.mode = r.guarded([&] { return parse_mode(r.str("mode")); });
    e.line = r.line();
    s.timeline.push_back(std::move(e));
  } else if (type == "wizard_decide") {
    TimelineEntry e;
    e.kind = EntryKind::WizardDecide;
    e.t = r.time();
    e.action = r.guarded([&] { return action_from_json(r.field("action")); });
    e.line = r.line();
    s.timeline.push_back(std::move(e));
  } else if (type == "verdict") {
    TimelineEntry e;
    e.kind = EntryKind::Verdict;
    e.t = r.time();
    e.proposal_id = r.str("proposal");
    e.verdict = r.guarded([&] { return parse_verdict(r.str("verdict")); });
    e.line = r.line();
    s.timeline.push_back(std::move(e));
  } else if (type == "expect") {
    Expectation x;
    x.at = r.time();
    x.kind = r.guarded([&] { return parse_expectation_kind(r.str("kind")); });
    switch (x.kind) {
      case ExpectationKind::ValueEquals:
        x.slot = r.node();
        x.label = r.str("label");
        break;
      case ExpectationKind::PosteriorBelow:
      case ExpectationKind::PosteriorAbove:
        x.slot = r.node();
        x.label = r.str("label");
        x.bound = r.num("bound");
        if (!(x.bound >= 0.0 && x.bound <= 1.0)) r.fail("probability bound outside [0,1]");
        break;
      default:
        x.verb = r.str("verb");
    }
    x.line = r.line();
    s.expectations.push_back(std::move(x));
  } else {
    r.fail("unknown record type '" + type + "'");
  }
}

[[noreturn]] void invalid(const std::string& entity, const Error& e) {
  throw Error(ErrorCode::ValidationError,
              entity + ": " + std::string(to_string(e.code())) + ": " + e.what());
}

std::string at_line(int line) { return line > 0 ? " (line " + std::to_string(line) + ")" : ""; }

}  // namespace

void apply_document(Scenario& scenario, const Document& doc) {
  std::set<std::filesystem::path> seen;
  apply_document_impl(scenario, doc, seen);
}

ModelStore Scenario::make_store() const {
  ModelStore store(StoreConfig{max_order});
  for (const auto& a : agents) {
    try {
      store.register_agent(a);
    } catch (const Error& e) {
      invalid("agent '" + a + "'", e);
    }
  }
  for (const auto& v : variables) {
    try {
      store.declare_variable(v.chain, v.spec);
    } catch (const Error& e) {
      invalid("variable " + SlotKey{v.chain, v.spec.name}.to_string() + at_line(v.line), e);
    }
  }
  return store;
}

void Scenario::validate() const {
  auto store = make_store();
  SpecLookup lookup = [&](const SlotKey& k) { return store.find_spec(k); };

  try {
    BayesNet::build(cpts, lookup);
  } catch (const Error& e) {
    invalid("network", e);
  }
  try {
    DecisionPipeline pipeline;
    pipeline.set_rules(rules, lookup);
  } catch (const Error& e) {
    invalid("rule set", e);
  }
  try {
    Perception perception(bindings);
    perception.validate(store);
  } catch (const Error& e) {
    invalid("sensor bindings", e);
  }
  for (const auto& iv : initial_values) {
    const auto* spec = store.find_spec(iv.slot);
    auto entity = "initial value for " + iv.slot.to_string() + at_line(iv.line);
    if (!spec) throw Error(ErrorCode::ValidationError, entity + ": variable not declared");
    if (spec->kind != VariableKind::Perceived)
      throw Error(ErrorCode::ValidationError, entity + ": abstract variables are set by inference only");
    if (!spec->index_of(iv.value))
      throw Error(ErrorCode::ValidationError, entity + ": '" + iv.value + "' outside the domain");
  }
  VirtualTime last = 0;
  for (const auto& e : timeline) {
    auto entity = "timeline entry" + at_line(e.line);
    if (e.t < last)
      throw Error(ErrorCode::ValidationError,
                  entity + ": timestamp " + std::to_string(e.t) + " precedes " + std::to_string(last));
    last = e.t;
    if (e.kind == EntryKind::Event && !is_token(e.event.sensor))
      throw Error(ErrorCode::ValidationError, entity + ": sensor '" + e.event.sensor + "' is not a token");
  }
  for (const auto& x : expectations) {
    auto entity = "expectation " + x.describe() + at_line(x.line);
    if (!x.slot) continue;
    const auto* spec = store.find_spec(*x.slot);
    if (!spec) throw Error(ErrorCode::ValidationError, entity + ": variable not declared");
    if (!spec->index_of(x.label))
      throw Error(ErrorCode::ValidationError, entity + ": label '" + x.label + "' outside the domain");
  }
}

Scenario parse_scenario(std::string_view text, const std::string& origin,
                        const std::filesystem::path& base_dir) {
  Scenario s;
  apply_document(s, parse_document(text, origin, base_dir));
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  Scenario s;
  apply_document(s, read_document(path));
  s.validate();
  return s;
}

std::string scenario_document(const Scenario& s) {
  std::string out = document_header("scenario") + "\n";
  auto emit = [&](const json& j) { out += j.dump() + "\n"; };
  emit({{"record", "scenario"}, {"name", s.name}});
  json cfg = {{"record", "config"},
              {"max_order", s.max_order},
              {"mode", to_string(s.initial_mode)},
              {"proposal_expiry_ms", s.proposal_expiry_ms},
              {"inference", s.inference.method == InferenceMethod::Exact ? "exact" : "likelihood_weighting"},
              {"samples", s.inference.samples}};
  emit(cfg);
  for (const auto& a : s.agents) emit({{"record", "agent"}, {"id", a}});
  for (const auto& v : s.variables) {
    json j = {{"record", "variable"},
              {"node", SlotKey{v.chain, v.spec.name}.to_string()},
              {"kind", to_string(v.spec.kind)},
              {"domain", v.spec.domain}};
    if (!v.spec.description.empty()) j["description"] = v.spec.description;
    if (v.spec.staleness_ms) j["staleness_ms"] = *v.spec.staleness_ms;
    emit(j);
  }
  for (const auto& c : s.cpts) {
    json parents = json::array();
    for (const auto& p : c.parents) parents.push_back(p.to_string());
    json rows = json::array();
    for (const auto& r : c.rows) rows.push_back({{"given", r.given}, {"probs", r.probs}});
    emit({{"record", "cpt"}, {"node", c.child.to_string()}, {"parents", parents}, {"rows", rows}});
  }
  for (const auto& r : s.rules)
    emit({{"record", "rule"},
          {"name", r.name},
          {"scope", to_string(r.scope)},
          {"when", r.condition.text()},
          {"action", action_to_json(r.action)},
          {"cooldown_ms", r.cooldown_ms}});
  for (const auto& b : s.bindings) {
    json j = {{"record", "binding"}, {"sensor", b.sensor}, {"node", b.target.to_string()}};
    switch (b.kind) {
      case BindingKind::Categorical:
        j["kind"] = "categorical";
        j["field"] = b.field;
        break;
      case BindingKind::Discretized: {
        j["kind"] = "discretized";
        j["field"] = b.field;
        json bins = json::array();
        for (const auto& bin : b.bins) {
          json jb = {{"label", bin.label}};
          jb["upper"] = std::isinf(bin.upper_bound) ? json(nullptr) : json(bin.upper_bound);
          bins.push_back(jb);
        }
        j["bins"] = bins;
        break;
      }
      case BindingKind::Gaze: {
        j["kind"] = "gaze";
        j["threshold_deg"] = b.threshold_deg;
        json objs = json::array();
        for (const auto& o : b.objects)
          objs.push_back({{"label", o.label}, {"position", o.position}, {"radius", o.radius}});
        j["objects"] = objs;
        break;
      }
    }
    emit(j);
  }
  for (const auto& iv : s.initial_values)
    emit({{"record", "initial"}, {"node", iv.slot.to_string()}, {"value", iv.value}});
  for (const auto& e : s.timeline) {
    switch (e.kind) {
      case EntryKind::Event: {
        json payload = json::object();
        for (const auto& [k, v] : e.event.payload)
          payload[k] = std::holds_alternative<double>(v) ? json(std::get<double>(v)) : json(std::get<std::string>(v));
        emit({{"record", "event"}, {"t", e.t}, {"sensor", e.event.sensor}, {"payload", payload}});
        break;
      }
      case EntryKind::SetMode:
        emit({{"record", "set_mode"}, {"t", e.t}, {"mode", to_string(e.mode)}});
        break;
      case EntryKind::WizardDecide:
        emit({{"record", "wizard_decide"}, {"t", e.t}, {"action", action_to_json(e.action)}});
        break;
      case EntryKind::Verdict:
        emit({{"record", "verdict"},
              {"t", e.t},
              {"proposal", e.proposal_id},
              {"verdict", e.verdict == ProposalVerdict::Approve ? "approve" : "reject"}});
        break;
    }
  }
  for (const auto& x : s.expectations) {
    json j = {{"record", "expect"}, {"t", x.at}, {"kind", to_string(x.kind)}};
    if (x.slot) {
      j["node"] = x.slot->to_string();
      j["label"] = x.label;
    } else {
      j["verb"] = x.verb;
    }
    if (x.kind == ExpectationKind::PosteriorBelow || x.kind == ExpectationKind::PosteriorAbove) j["bound"] = x.bound;
    emit(j);
  }
  return out;
}

}  // namespace mutmod
