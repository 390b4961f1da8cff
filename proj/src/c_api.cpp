#include "mutmod/mutmod.h"

#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "mutmod/bayes_net.hpp"
#include "mutmod/decision.hpp"
#include "mutmod/error.hpp"
#include "mutmod/harness.hpp"
#include "mutmod/scenario.hpp"
#include "mutmod/service.hpp"
#include "mutmod/trace.hpp"

using namespace mutmod;

struct mutmod_scenario {
  Scenario scenario;
};

struct mutmod_trace {
  Trace trace;
  LatencyStats latency;
};

struct mutmod_report {
  std::vector<bool> passed;
  std::vector<std::string> lines;
};

struct mutmod_server {
  std::unique_ptr<Service> service;
};

namespace {

thread_local std::string g_last_error;

mutmod_status fail(mutmod_status s, std::string message) {
  g_last_error = std::move(message);
  return s;
}

template <typename F>
mutmod_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return MUTMOD_OK;
  } catch (const Error& e) {
    return fail(static_cast<mutmod_status>(e.code()), e.what());
  } catch (const json::exception& e) {
    return fail(MUTMOD_SCHEMA_VIOLATION, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MUTMOD_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MUTMOD_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw Error(ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

std::optional<AutonomyMode> mode_of(mutmod_mode m) {
  switch (m) {
    case MUTMOD_MODE_SCENARIO: return std::nullopt;
    case MUTMOD_MODE_WIZARD: return AutonomyMode::Wizard;
    case MUTMOD_MODE_MIXED: return AutonomyMode::Mixed;
    case MUTMOD_MODE_AUTONOMOUS: return AutonomyMode::Autonomous;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown mode " + std::to_string(static_cast<int>(m)));
}

std::vector<SlotKey> slot_list(const char* const* names, std::size_t n) {
  if (n) require(names, "name list");
  std::vector<SlotKey> out;
  for (std::size_t i = 0; i < n; ++i) {
    require(names[i], "name");
    out.push_back(SlotKey::parse(names[i]));
  }
  return out;
}

}  // namespace

extern "C" {

const char* mutmod_version(void) { return "1.0.0"; }

const char* mutmod_status_name(mutmod_status status) {
  if (status == MUTMOD_OK) return "Ok";
  if (status == MUTMOD_INTERNAL) return "Internal";
  if (status >= MUTMOD_MALFORMED_AGENT_ID && status <= MUTMOD_BIND_FAILURE)
    return to_string(static_cast<ErrorCode>(status)).data();
  return "Unknown";
}

const char* mutmod_last_error(void) { return g_last_error.c_str(); }

void mutmod_string_free(char* s) { std::free(s); }

mutmod_status mutmod_scenario_load(const char* path, mutmod_scenario** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new mutmod_scenario{load_scenario(path)};
  });
}

mutmod_status mutmod_scenario_parse(const char* text, mutmod_scenario** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new mutmod_scenario{parse_scenario(text)};
  });
}

size_t mutmod_scenario_expectation_count(const mutmod_scenario* s) {
  return s ? s->scenario.expectations.size() : 0;
}

void mutmod_scenario_free(mutmod_scenario* s) { delete s; }

mutmod_status mutmod_run(const mutmod_scenario* s, uint64_t seed, mutmod_mode mode, mutmod_trace** out) {
  return guarded([&] {
    require(s, "scenario");
    require(out, "out");
    auto result = run(s->scenario, RunOptions{seed, mode_of(mode)});
    *out = new mutmod_trace{std::move(result.trace), result.latency()};
  });
}

mutmod_status mutmod_trace_import(const char* path, mutmod_trace** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new mutmod_trace{import_trace(path), {}};
  });
}

mutmod_status mutmod_trace_export(const mutmod_trace* t, const char* path) {
  return guarded([&] {
    require(t, "trace");
    require(path, "path");
    export_trace(t->trace, path);
  });
}

mutmod_status mutmod_trace_digest(const mutmod_trace* t, char** out) {
  return guarded([&] {
    require(t, "trace");
    require(out, "out");
    *out = dup_string(t->trace.digest());
  });
}

mutmod_status mutmod_trace_document(const mutmod_trace* t, char** out) {
  return guarded([&] {
    require(t, "trace");
    require(out, "out");
    *out = dup_string(trace_document(t->trace));
  });
}

size_t mutmod_trace_record_count(const mutmod_trace* t) { return t ? t->trace.size() : 0; }

mutmod_status mutmod_trace_counts(const mutmod_trace* t, mutmod_counts* out) {
  return guarded([&] {
    require(t, "trace");
    require(out, "out");
    std::map<std::string, std::string> status;
    std::size_t created = 0;
    for (const auto& r : t->trace.records()) {
      const auto& type = r.at("type");
      if (type == "proposal") ++created;
      if (type == "disposition") status[r.at("id").get<std::string>()] = r.at("status").get<std::string>();
    }
    mutmod_counts c{};
    c.created = created;
    for (const auto& [id, s] : status) {
      if (s == "pending") ++c.pending;
      else if (s == "executed") ++c.executed;
      else if (s == "rejected") ++c.rejected;
      else if (s == "expired") ++c.expired;
      else if (s == "suppressed") ++c.suppressed;
    }
    *out = c;
  });
}

mutmod_status mutmod_trace_latency(const mutmod_trace* t, mutmod_latency* out) {
  return guarded([&] {
    require(t, "trace");
    require(out, "out");
    *out = {t->latency.events, t->latency.median_ms, t->latency.p99_ms, t->latency.max_ms};
  });
}

void mutmod_trace_free(mutmod_trace* t) { delete t; }

mutmod_status mutmod_check(const mutmod_trace* t, const mutmod_scenario* s, mutmod_report** out) {
  return guarded([&] {
    require(t, "trace");
    require(s, "scenario");
    require(out, "out");
    auto report = check(t->trace, s->scenario.expectations);
    auto* r = new mutmod_report;
    for (const auto& res : report.results) {
      r->passed.push_back(res.passed);
      std::string line = res.passed ? "PASS " : "FAIL ";
      line += res.expectation.describe();
      if (!res.detail.empty()) line += ": " + res.detail;
      r->lines.push_back(std::move(line));
    }
    *out = r;
  });
}

size_t mutmod_report_count(const mutmod_report* r) { return r ? r->lines.size() : 0; }

size_t mutmod_report_failures(const mutmod_report* r) {
  if (!r) return 0;
  std::size_t n = 0;
  for (bool p : r->passed) n += !p;
  return n;
}

int mutmod_report_passed(const mutmod_report* r, size_t i) {
  return r && i < r->passed.size() && r->passed[i] ? 1 : 0;
}

const char* mutmod_report_line(const mutmod_report* r, size_t i) {
  return r && i < r->lines.size() ? r->lines[i].c_str() : nullptr;
}

void mutmod_report_free(mutmod_report* r) { delete r; }

mutmod_status mutmod_fit_cpt(const mutmod_trace* t, const char* node, const char* const* parents,
                             size_t parent_count, double alpha, char** out_json, size_t* used, size_t* skipped) {
  return guarded([&] {
    require(t, "trace");
    require(node, "node");
    require(out_json, "out_json");
    auto child = SlotKey::parse(node);
    auto parent_keys = slot_list(parents, parent_count);
    auto specs = declared_variables(t->trace);
    auto lookup = [&](const SlotKey& k) -> const VariableSpec* {
      auto it = specs.find(k);
      return it == specs.end() ? nullptr : &it->second;
    };
    std::vector<SlotKey> required = parent_keys;
    required.push_back(child);
    std::size_t skip = 0;
    auto records = joint_records(t->trace, required, &skip);
    auto cpt = fit_cpt(records, child, parent_keys, alpha, lookup);
    if (used) *used = records.size();
    if (skipped) *skipped = skip;
    *out_json = dup_string(cpt_to_json(cpt).dump());
  });
}

mutmod_status mutmod_learn_policy(const mutmod_trace* t, const char* const* features, size_t feature_count,
                                  double alpha, char** out_json) {
  return guarded([&] {
    require(t, "trace");
    require(out_json, "out_json");
    auto policy = learn_from_log(decision_records(t->trace), slot_list(features, feature_count), alpha);
    *out_json = dup_string(policy_to_json(policy).dump());
  });
}

mutmod_status mutmod_policy_select(const char* policy_json, const char* state_json, char** out_action_json) {
  return guarded([&] {
    require(policy_json, "policy_json");
    require(state_json, "state_json");
    require(out_action_json, "out_action_json");
    auto policy = policy_from_json(json::parse(policy_json));
    auto state = json::parse(state_json);
    if (!state.is_object()) throw Error(ErrorCode::SchemaViolation, "state must be an object");
    ModelSnapshot snap;
    for (const auto& [k, v] : state.items())
      snap.entries[SlotKey::parse(k)] = VariableValue{v.get<std::string>(), 0, ValueSource::Harness};
    *out_action_json = dup_string(action_to_json(select_action_autonomous(snap, policy)).dump());
  });
}

mutmod_status mutmod_serve_start(const mutmod_scenario* s, uint64_t seed, mutmod_mode mode, const char* address,
                                 uint16_t port, int pace, mutmod_server** out) {
  return guarded([&] {
    require(s, "scenario");
    require(out, "out");
    ServiceOptions opts;
    if (address) opts.address = address;
    opts.port = port;
    opts.pace = pace != 0;
    auto server = std::make_unique<mutmod_server>();
    server->service = std::make_unique<Service>(s->scenario, seed, mode_of(mode), opts);
    server->service->start();
    *out = server.release();
  });
}

uint16_t mutmod_server_port(const mutmod_server* s) { return s ? s->service->port() : 0; }

int mutmod_server_wait_timeline(mutmod_server* s, int64_t timeout_ms) {
  return s && s->service->wait_timeline(std::chrono::milliseconds(timeout_ms)) ? 1 : 0;
}

void mutmod_server_wait_shutdown(mutmod_server* s, int64_t linger_ms) {
  if (!s) return;
  std::optional<std::chrono::milliseconds> linger;
  if (linger_ms >= 0) linger = std::chrono::milliseconds(linger_ms);
  s->service->wait_for_shutdown(linger);
}

mutmod_status mutmod_server_stop(mutmod_server* s, mutmod_trace** out) {
  return guarded([&] {
    require(s, "server");
    s->service->stop();
    if (out) *out = new mutmod_trace{s->service->trace(), {}};
  });
}

void mutmod_server_free(mutmod_server* s) { delete s; }

}  // extern "C"
