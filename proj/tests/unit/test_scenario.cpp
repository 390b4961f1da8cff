#include <doctest.h>

#include "../support/check.hpp"
#include "../support/fixtures.hpp"
#include "../support/generators.hpp"
#include "mutmod/document.hpp"
#include "mutmod/scenario.hpp"

using namespace mutmod;

namespace {

const std::string kHeader = R"({"mutmod":"1","kind":"scenario"})";

std::string doc(const std::string& body) { return kHeader + "\n" + body; }

const std::string kBase = R"({"record":"agent","id":"child"}
{"record":"variable","node":"[child].u","kind":"abstract","domain":["yes","no"]}
{"record":"variable","node":"[child].g","kind":"perceived","domain":["a","b"]}
{"record":"cpt","node":"[child].u","rows":[{"probs":[0.5,0.5]}]}
{"record":"cpt","node":"[child].g","parents":["[child].u"],"rows":[{"given":["yes"],"probs":[0.9,0.1]},{"given":["no"],"probs":[0.2,0.8]}]}
{"record":"binding","sensor":"s","node":"[child].g","field":"v"}
)";

}  // namespace

TEST_SUITE("scenario") {
  TEST_CASE("document parsing") {
    auto d = parse_document(kHeader + "\n# comment\n\n{\"record\":\"agent\",\"id\":\"child\"}\n", "t.jsonl");
    CHECK(d.kind == "scenario");
    REQUIRE(d.records.size() == 1);
    CHECK(d.records[0].line == 4);

    CHECK_CODE(parse_document("", "t"), ErrorCode::ParseError);
    CHECK_CODE(parse_document(R"({"kind":"scenario"})", "t"), ErrorCode::ParseError);
    CHECK_CODE(parse_document(R"({"mutmod":"2","kind":"scenario"})", "t"), ErrorCode::ParseError);
    try {
      parse_document(kHeader + "\n{\"record\": }\n", "t.jsonl");
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
      CHECK(std::string(e.what()).find("t.jsonl:2:") != std::string::npos);
    }
    CHECK(document_header("trace") == R"({"kind":"trace","mutmod":"1"})");
  }

  TEST_CASE("canonical pointing scenario loads") {
    auto s = fx::pointing_scenario();
    CHECK(s.name == "pointing");
    CHECK(s.agents.size() == 2);
    CHECK(s.variables.size() == 4);
    CHECK(s.rules.size() == 1);
    CHECK(s.cpts.size() == 2);
    CHECK(s.bindings.size() == 3);
    CHECK(s.initial_mode == AutonomyMode::Autonomous);
    CHECK(s.timeline.size() == 4);
    CHECK(s.expectations.size() == 7);
    CHECK(s.rules[0].cooldown_ms == 5000);
  }

  TEST_CASE("validation errors name the entity") {
    CHECK_CODE(load_scenario(fx::data("bad_rule.jsonl")), ErrorCode::ValidationError);
    try {
      load_scenario(fx::data("bad_rule.jsonl"));
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("[child].misunderstood") != std::string::npos);
    }
    CHECK_CODE(load_scenario(fx::data("bad_syntax.jsonl")), ErrorCode::ParseError);
    CHECK_CODE(load_scenario(fx::data("include_cycle_a.jsonl")), ErrorCode::ValidationError);
    CHECK_CODE(load_scenario(fx::data("missing.jsonl")), ErrorCode::IoError);

    auto decreasing = doc(kBase + R"({"record":"event","t":100,"sensor":"s","payload":{"v":"a"}}
{"record":"event","t":50,"sensor":"s","payload":{"v":"b"}}
)");
    CHECK_CODE(parse_scenario(decreasing), ErrorCode::ValidationError);

    CHECK_CODE(parse_scenario(doc(kBase + R"({"record":"unknown"})")), ErrorCode::ValidationError);
    CHECK_CODE(parse_scenario(doc(kBase + R"({"record":"expect","t":1,"kind":"posterior_below","node":"[child].u","label":"yes","bound":1.5})")),
               ErrorCode::ValidationError);
    CHECK_CODE(parse_scenario(doc(kBase + R"({"record":"initial","node":"[child].u","value":"yes"})")),
               ErrorCode::ValidationError);
    CHECK_CODE(parse_scenario(doc(R"({"record":"agent","id":"child"}
{"record":"variable","node":"[child].u","kind":"abstract","domain":["yes","no"]}
{"record":"cpt","node":"[child].u","rows":[{"probs":[0.5,0.4]}]})")),
               ErrorCode::ValidationError);
    CHECK_CODE(parse_scenario(doc(kBase + R"({"record":"config","mode":"manual"})")), ErrorCode::ValidationError);
  }

  TEST_CASE("writer round-trips through the parser") {
    auto s = fx::pointing_scenario();
    auto text = scenario_document(s);
    auto back = parse_scenario(text);
    CHECK(scenario_document(back) == text);
    CHECK(back.timeline.size() == s.timeline.size());
    CHECK(back.expectations.size() == s.expectations.size());

    gen::Rng rng(8);
    for (int i = 0; i < 20; ++i) {
      gen::ScenarioOptions o;
      o.mode_changes = o.verdict_entries = true;
      auto r = gen::random_scenario(rng, o);
      r.validate();
      auto t = scenario_document(r);
      CHECK(scenario_document(parse_scenario(t)) == t);
    }
  }
}
