// Command-line front end over the C API.
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mutmod/mutmod.h"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitExpectations = 1;
constexpr int kExitError = 2;

int report_error(mutmod_status s) {
  std::cerr << "error: " << mutmod_status_name(s) << ": " << mutmod_last_error() << "\n";
  return kExitError;
}

std::string take(char* s) {
  std::string out = s ? s : "";
  mutmod_string_free(s);
  return out;
}

mutmod_mode parse_mode(const std::string& m) {
  if (m.empty()) return MUTMOD_MODE_SCENARIO;
  if (m == "wizard") return MUTMOD_MODE_WIZARD;
  if (m == "mixed") return MUTMOD_MODE_MIXED;
  return MUTMOD_MODE_AUTONOMOUS;
}

// Prints one line per expectation; returns the number that failed.
std::size_t print_report(const mutmod_report* r) {
  for (std::size_t i = 0; i < mutmod_report_count(r); ++i) std::cout << mutmod_report_line(r, i) << "\n";
  return mutmod_report_failures(r);
}

int finish_trace(mutmod_trace* trace, mutmod_scenario* scenario, const std::string& out_path) {
  if (!out_path.empty()) {
    if (auto s = mutmod_trace_export(trace, out_path.c_str())) return report_error(s);
  }
  char* digest = nullptr;
  if (auto s = mutmod_trace_digest(trace, &digest)) return report_error(s);
  mutmod_counts c{};
  mutmod_trace_counts(trace, &c);
  std::cout << "records " << mutmod_trace_record_count(trace) << " digest " << take(digest) << "\n";
  std::cout << "proposals created " << c.created << " executed " << c.executed << " rejected " << c.rejected
            << " expired " << c.expired << " suppressed " << c.suppressed << " pending " << c.pending << "\n";
  mutmod_latency lat{};
  mutmod_trace_latency(trace, &lat);
  if (lat.events)
    std::cout << "latency median " << lat.median_ms << " ms p99 " << lat.p99_ms << " ms max " << lat.max_ms
              << " ms over " << lat.events << " entries\n";

  mutmod_report* report = nullptr;
  if (auto s = mutmod_check(trace, scenario, &report)) return report_error(s);
  auto failures = print_report(report);
  mutmod_report_free(report);
  return failures ? kExitExpectations : kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mutual-modelling engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mutmod_version());

  std::string scenario_path, trace_path, out_path, mode, node, address = "127.0.0.1";
  std::uint64_t seed = 0;
  std::optional<int> serve_port;
  std::int64_t linger_ms = -1;
  bool no_pace = false;
  std::vector<std::string> names;
  double alpha = 1.0;

  auto* run = app.add_subcommand("run", "replay a scenario and check its expectations");
  run->add_option("scenario", scenario_path, "scenario document")->required();
  run->add_option("--seed", seed, "sampler seed");
  run->add_option("--mode", mode, "override the autonomy mode")
      ->check(CLI::IsMember({"wizard", "mixed", "autonomous"}));
  run->add_option("--trace", out_path, "write the trace here");
  run->add_option("--serve", serve_port, "serve the operator websocket on this port (0 = any)")
      ->check(CLI::Range(0, 65535));
  run->add_option("--address", address, "listen address for --serve");
  run->add_option("--linger", linger_ms, "with --serve: stop this many ms after the timeline ends");
  run->add_flag("--no-pace", no_pace, "with --serve: apply the timeline immediately");

  auto* chk = app.add_subcommand("check", "evaluate a scenario's expectations against a trace");
  chk->add_option("trace", trace_path)->required();
  chk->add_option("scenario", scenario_path)->required();

  auto* fit = app.add_subcommand("fit-cpt", "fit a conditional table from a trace");
  fit->add_option("trace", trace_path)->required();
  fit->add_option("--node", node, "child node, e.g. [child].gaze_target")->required();
  fit->add_option("--parents", names, "parent nodes")->delimiter(',');
  fit->add_option("--alpha", alpha, "Laplace pseudo-count");

  auto* learn = app.add_subcommand("learn-policy", "learn an action policy from a trace's decisions");
  learn->add_option("trace", trace_path)->required();
  learn->add_option("--features", names, "feature nodes")->delimiter(',')->required();
  learn->add_option("--alpha", alpha, "Laplace pseudo-count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitPass : kExitError;
  }

  std::vector<const char*> cnames;
  for (const auto& n : names) cnames.push_back(n.c_str());

  if (*run) {
    if (!serve_port) {
      if (const char* env = std::getenv("MUTMOD_PORT")) {
        try {
          serve_port = std::stoi(env);
        } catch (const std::exception&) {
          std::cerr << "error: MUTMOD_PORT is not a port number\n";
          return kExitError;
        }
      }
    }
    mutmod_scenario* scenario = nullptr;
    if (auto s = mutmod_scenario_load(scenario_path.c_str(), &scenario)) return report_error(s);
    mutmod_trace* trace = nullptr;
    if (serve_port) {
      mutmod_server* server = nullptr;
      auto s = mutmod_serve_start(scenario, seed, parse_mode(mode), address.c_str(),
                                  static_cast<std::uint16_t>(*serve_port), no_pace ? 0 : 1, &server);
      if (s) {
        mutmod_scenario_free(scenario);
        return report_error(s);
      }
      std::cout << "listening on ws://" << address << ":" << mutmod_server_port(server) << std::endl;
      if (linger_ms >= 0) {
        while (!mutmod_server_wait_timeline(server, 1000)) {
        }
      }
      mutmod_server_wait_shutdown(server, linger_ms);
      s = mutmod_server_stop(server, &trace);
      mutmod_server_free(server);
      if (s) {
        mutmod_scenario_free(scenario);
        return report_error(s);
      }
    } else if (auto s = mutmod_run(scenario, seed, parse_mode(mode), &trace)) {
      mutmod_scenario_free(scenario);
      return report_error(s);
    }
    int rc = finish_trace(trace, scenario, out_path);
    mutmod_trace_free(trace);
    mutmod_scenario_free(scenario);
    return rc;
  }

  if (*chk) {
    mutmod_trace* trace = nullptr;
    if (auto s = mutmod_trace_import(trace_path.c_str(), &trace)) return report_error(s);
    mutmod_scenario* scenario = nullptr;
    if (auto s = mutmod_scenario_load(scenario_path.c_str(), &scenario)) {
      mutmod_trace_free(trace);
      return report_error(s);
    }
    mutmod_report* report = nullptr;
    auto s = mutmod_check(trace, scenario, &report);
    mutmod_trace_free(trace);
    mutmod_scenario_free(scenario);
    if (s) return report_error(s);
    auto failures = print_report(report);
    mutmod_report_free(report);
    std::cout << (failures ? "FAILED " : "OK ") << failures << " failing\n";
    return failures ? kExitExpectations : kExitPass;
  }

  mutmod_trace* trace = nullptr;
  if (auto s = mutmod_trace_import(trace_path.c_str(), &trace)) return report_error(s);
  char* out = nullptr;
  mutmod_status s;
  if (*fit) {
    std::size_t used = 0, skipped = 0;
    s = mutmod_fit_cpt(trace, node.c_str(), cnames.data(), cnames.size(), alpha, &out, &used, &skipped);
    if (!s) std::cerr << "fitted from " << used << " records, " << skipped << " skipped\n";
  } else {
    s = mutmod_learn_policy(trace, cnames.data(), cnames.size(), alpha, &out);
  }
  mutmod_trace_free(trace);
  if (s) return report_error(s);
  std::cout << take(out) << "\n";
  return kExitPass;
}
