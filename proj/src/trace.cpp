#include "mutmod/trace.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <memory>

#include "mutmod/error.hpp"

namespace mutmod {

void Trace::append(json record) {
  if (!record.is_object() || !record.contains("t") || !record.contains("type"))
    throw Error(ErrorCode::InvalidArgument, "trace records need 't' and 'type'");
  records_.push_back(std::move(record));
}

std::string Trace::canonical() const {
  std::string out;
  for (const auto& r : records_) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1)
    throw Error(ErrorCode::IoError, "SHA-256 computation failed");
  std::string hex;
  hex.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::string Trace::digest() const { return sha256_hex(canonical()); }

std::string trace_document(const Trace& trace) {
  std::string out = document_header("trace") + "\n";
  out += trace.canonical();
  json tail = {{"type", "digest"}, {"sha256", trace.digest()}, {"records", trace.size()}};
  out += tail.dump() + "\n";
  return out;
}

Trace parse_trace(std::string_view text, const std::string& origin) {
  auto doc = parse_document(text, origin);
  if (doc.kind != "trace") throw Error(ErrorCode::ParseError, origin + ": not a trace document");
  Trace trace;
  std::optional<std::string> expected;
  for (const auto& rec : doc.records) {
    if (rec.value.value("type", "") == "digest") {
      expected = rec.value.value("sha256", "");
      continue;
    }
    if (expected)
      throw Error(ErrorCode::ParseError, origin + ":" + std::to_string(rec.line) + ":1: record after digest line");
    try {
      trace.append(rec.value);
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, origin + ":" + std::to_string(rec.line) + ":1: " + e.what());
    }
  }
  if (expected && *expected != trace.digest())
    throw Error(ErrorCode::ValidationError, origin + ": digest mismatch, trace was modified");
  return trace;
}

void export_trace(const Trace& trace, const std::filesystem::path& path) {
  write_file(path, trace_document(trace));
}

Trace import_trace(const std::filesystem::path& path) {
  return parse_trace(read_file(path), path.string());
}

bool CheckReport::all_passed() const { return failures() == 0; }

std::size_t CheckReport::failures() const {
  std::size_t n = 0;
  for (const auto& r : results)
    if (!r.passed) ++n;
  return n;
}

namespace {

std::string fmt_prob(double p) { return json(p).dump(); }

}  // namespace

CheckReport check(const Trace& trace, const std::vector<Expectation>& expectations) {
  CheckReport report;
  for (const auto& x : expectations) {
    ExpectationResult res{x, false, {}};
    const json* latest = nullptr;
    const json* later = nullptr;
    std::vector<std::string> seen;
    for (const auto& r : trace.records()) {
      auto t = r["t"].get<VirtualTime>();
      const auto& type = r["type"].get_ref<const std::string&>();
      switch (x.kind) {
        case ExpectationKind::ValueEquals:
          if (type == "commit" && r["node"] == x.slot->to_string()) {
            if (t <= x.at) latest = &r;
            else if (!later) later = &r;
          }
          break;
        case ExpectationKind::PosteriorBelow:
        case ExpectationKind::PosteriorAbove:
          if (type == "posterior" && r["node"] == x.slot->to_string()) {
            if (t <= x.at) latest = &r;
            else if (!later) later = &r;
          }
          break;
        case ExpectationKind::ActionExecuted:
        case ExpectationKind::ProposalCreated: {
          const char* want = x.kind == ExpectationKind::ActionExecuted ? "action" : "proposal";
          if (type != want) break;
          const auto& verb = r["action"]["verb"].get_ref<const std::string&>();
          if (t <= x.at && verb == x.verb) {
            if (!latest) latest = &r;
          } else {
            seen.push_back(verb + "@" + std::to_string(t));
          }
          break;
        }
      }
    }

    auto nearest = [&](const std::string& what) {
      if (latest) return "latest " + what + " at t=" + std::to_string((*latest)["t"].get<VirtualTime>());
      if (later) return "no " + what + " by t=" + std::to_string(x.at) + "; first at t=" +
                        std::to_string((*later)["t"].get<VirtualTime>());
      return "no " + what + " recorded";
    };

    switch (x.kind) {
      case ExpectationKind::ValueEquals:
        if (latest) {
          const auto& v = (*latest)["value"].get_ref<const std::string&>();
          res.passed = v == x.label;
          res.detail = "value '" + v + "' (" + nearest("commit") + ")";
        } else {
          res.detail = nearest("commit");
        }
        break;
      case ExpectationKind::PosteriorBelow:
      case ExpectationKind::PosteriorAbove:
        if (latest) {
          double p = 0.0;
          const auto& dom = (*latest)["domain"];
          for (std::size_t i = 0; i < dom.size(); ++i)
            if (dom[i] == x.label) p = (*latest)["probs"][i].get<double>();
          res.passed = x.kind == ExpectationKind::PosteriorBelow ? p < x.bound : p > x.bound;
          res.detail = "P = " + fmt_prob(p) + " (" + nearest("posterior") + ")";
        } else {
          res.detail = nearest("posterior");
        }
        break;
      default:
        res.passed = latest != nullptr;
        if (latest) {
          res.detail = "found at t=" + std::to_string((*latest)["t"].get<VirtualTime>());
        } else {
          std::string list;
          for (const auto& s : seen) list += (list.empty() ? "" : ", ") + s;
          res.detail = "not found; recorded: " + (list.empty() ? std::string("none") : list);
        }
    }
    report.results.push_back(std::move(res));
  }
  return report;
}

std::map<SlotKey, VariableSpec> declared_variables(const Trace& trace) {
  std::map<SlotKey, VariableSpec> out;
  for (const auto& r : trace.records()) {
    if (r["type"] != "declare_variable") continue;
    auto key = SlotKey::parse(r["node"].get<std::string>());
    VariableSpec spec;
    spec.name = key.variable;
    spec.kind = parse_variable_kind(r["kind"].get<std::string>());
    spec.domain = r["domain"].get<std::vector<std::string>>();
    out.emplace(key, std::move(spec));
  }
  return out;
}

std::vector<JointRecord> joint_records(const Trace& trace, const std::vector<SlotKey>& required,
                                       std::size_t* skipped) {
  std::vector<JointRecord> out;
  std::size_t dropped = 0;
  JointRecord state;
  std::optional<VirtualTime> group;
  auto flush = [&] {
    if (!group) return;
    bool complete = true;
    for (const auto& k : required)
      if (!state.count(k)) complete = false;
    if (complete) out.push_back(state);
    else ++dropped;
  };
  for (const auto& r : trace.records()) {
    if (r["type"] != "commit") continue;
    auto t = r["t"].get<VirtualTime>();
    if (group && *group != t) flush();
    group = t;
    state[SlotKey::parse(r["node"].get<std::string>())] = r["value"].get<std::string>();
  }
  flush();
  if (skipped) *skipped = dropped;
  return out;
}

std::vector<DecisionRecord> decision_records(const Trace& trace) {
  std::vector<DecisionRecord> out;
  for (const auto& r : trace.records()) {
    if (r["type"] != "decision") continue;
    DecisionRecord d;
    d.timestamp = r["t"].get<VirtualTime>();
    d.action = action_from_json(r["action"]);
    d.source = r["source"] == "human" ? DecisionSource::Human : DecisionSource::Engine;
    d.mode_at_decision = parse_mode(r["mode"].get<std::string>());
    d.verdict = r["verdict"] == "executed" ? Verdict::Executed : Verdict::Rejected;
    d.human_reviewed = r.value("human_reviewed", false);
    if (r.contains("proposal") && r["proposal"].is_string()) d.proposal_id = r["proposal"].get<std::string>();
    auto snap = std::make_shared<ModelSnapshot>();
    snap->taken_at = d.timestamp;
    for (const auto& [node, value] : r["state"].items())
      snap->entries[SlotKey::parse(node)] = VariableValue{value.get<std::string>(), d.timestamp, ValueSource::Harness};
    d.snapshot = std::move(snap);
    out.push_back(std::move(d));
  }
  return out;
}

json cpt_to_json(const Cpt& cpt) {
  json parents = json::array();
  for (const auto& p : cpt.parents) parents.push_back(p.to_string());
  json rows = json::array();
  for (const auto& r : cpt.rows) rows.push_back({{"given", r.given}, {"probs", r.probs}});
  return {{"record", "cpt"}, {"node", cpt.child.to_string()}, {"parents", parents}, {"rows", rows}};
}

json policy_to_json(const PolicyTable& policy) {
  json features = json::array();
  for (const auto& f : policy.features) features.push_back(f.to_string());
  json actions = json::array();
  for (const auto& a : policy.actions) actions.push_back(action_to_json(a));
  json rows = json::array();
  for (const auto& [tuple, counts] : policy.counts)
    rows.push_back({{"given", tuple}, {"counts", counts}, {"probs", policy.row(tuple)}});
  return {{"record", "policy"}, {"features", features}, {"actions", actions}, {"alpha", policy.alpha}, {"rows", rows}};
}

PolicyTable policy_from_json(const json& j) {
  try {
    PolicyTable p;
    for (const auto& f : j.at("features")) p.features.push_back(SlotKey::parse(f.get<std::string>()));
    for (const auto& a : j.at("actions")) p.actions.push_back(action_from_json(a));
    p.alpha = j.at("alpha").get<double>();
    for (const auto& r : j.at("rows")) {
      auto counts = r.at("counts").get<std::vector<double>>();
      if (counts.size() != p.actions.size()) throw Error(ErrorCode::SchemaViolation, "policy row width mismatch");
      p.counts[r.at("given").get<std::vector<std::string>>()] = std::move(counts);
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("policy: ") + e.what());
  }
}

}  // namespace mutmod
