#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "../support/check.hpp"
#include "../support/fixtures.hpp"
#include "../support/generators.hpp"
#include "mutmod/harness.hpp"
#include "mutmod/trace.hpp"

using namespace mutmod;

namespace {

std::filesystem::path tmp(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "mutmod-tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

Expectation expect(VirtualTime at, ExpectationKind kind, std::string verb) {
  Expectation x;
  x.at = at;
  x.kind = kind;
  x.verb = std::move(verb);
  return x;
}

}  // namespace

TEST_SUITE("trace") {
  TEST_CASE("sha256 of known inputs") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("canonical form sorts keys and pins numbers") {
    Trace t;
    t.append({{"type", "x"}, {"t", 5}, {"b", 0.1}, {"a", 1.0 / 3.0}});
    CHECK(t.canonical() == R"({"a":0.3333333333333333,"b":0.1,"t":5,"type":"x"})" "\n");
    CHECK_CODE(t.append({{"type", "x"}}), ErrorCode::InvalidArgument);
    CHECK_CODE(t.append({{"t", 1}}), ErrorCode::InvalidArgument);
  }

  TEST_CASE("export and import") {
    auto r = run(fx::pointing_scenario());
    auto path = tmp("pointing.trace");
    export_trace(r.trace, path);
    auto first = read_file(path);
    export_trace(r.trace, path);
    CHECK(read_file(path) == first);
    auto back = import_trace(path);
    CHECK(back == r.trace);
    CHECK(back.digest() == r.trace.digest());

    CHECK_CODE(export_trace(r.trace, "/nonexistent-dir/x.trace"), ErrorCode::IoError);
    CHECK_CODE(import_trace(tmp("never-written.trace")), ErrorCode::IoError);

    // tampering is detected through the digest line
    auto text = first;
    auto pos = text.find("\"hand\"");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 6, "\"elsewhere\"");
    CHECK_CODE(parse_trace(text), ErrorCode::ValidationError);
    CHECK_CODE(parse_trace(document_header("scenario") + "\n"), ErrorCode::ParseError);
  }

  TEST_CASE("property: round-trip over generated traces") {
    gen::Rng rng(99);
    for (int i = 0; i < 25; ++i) {
      gen::ScenarioOptions o;
      o.mode = static_cast<AutonomyMode>(gen::uniform(rng, 0, 2));
      o.mode_changes = o.verdict_entries = true;
      auto r = run(gen::random_scenario(rng, o), {rng(), std::nullopt});
      auto back = parse_trace(trace_document(r.trace));
      CHECK(back == r.trace);
      CHECK(back.digest() == r.trace.digest());
    }
  }

  TEST_CASE("check") {
    auto s = fx::pointing_scenario();
    auto r = run(s);
    auto report = check(r.trace, s.expectations);
    CHECK(report.all_passed());
    CHECK(report.results.size() == 7);
    CHECK(check(r.trace, {}).results.empty());
    CHECK(check(r.trace, {}).all_passed());

    auto wizard = run(s, {0, AutonomyMode::Wizard});
    auto exec = expect(2000, ExpectationKind::ActionExecuted, "exaggerate_gesture");
    auto wr = check(wizard.trace, {exec});
    CHECK(wr.failures() == 1);
    CHECK(wr.results[0].detail.find("not found") != std::string::npos);

    // an expectation the trace violates reports exactly that failure
    auto bad = s.expectations;
    bad[1].bound = 0.1;  // P(yes) = 0.142857 is not below 0.1
    auto br = check(r.trace, bad);
    CHECK(br.failures() == 1);
    CHECK_FALSE(br.results[1].passed);
    CHECK(br.results[1].detail.find("0.1428") != std::string::npos);

    // before the evidence arrives the posterior is the prior
    auto early = s.expectations[1];
    early.at = 1100;
    CHECK_FALSE(check(r.trace, {early}).all_passed());
  }

  TEST_CASE("joint and decision records") {
    auto s = fx::pointing_scenario();
    auto r = run(s, {0, AutonomyMode::Wizard});
    auto specs = declared_variables(r.trace);
    CHECK(specs.size() == 4);
    CHECK(specs.at(fx::kUnderstood).kind == VariableKind::Abstract);

    std::size_t skipped = 0;
    auto joint = joint_records(r.trace, {fx::kGaze, fx::kUnderstood}, &skipped);
    REQUIRE(joint.size() == 3);  // t=1200, 3000, 4000
    CHECK(joint[0].at(fx::kGaze) == "hand");
    CHECK(joint[0].at(fx::kUnderstood) == "no");
    CHECK(joint[1].at(fx::kUnderstood) == "yes");
    CHECK(skipped == 2);

    CHECK(decision_records(r.trace).empty());
    auto a = run(s);
    auto decisions = decision_records(a.trace);
    REQUIRE(decisions.size() == 1);
    CHECK(decisions[0].source == DecisionSource::Engine);
    CHECK(decisions[0].snapshot->value(fx::kGaze)->value == "hand");
  }
}
