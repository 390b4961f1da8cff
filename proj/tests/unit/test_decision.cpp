#include <doctest.h>

#include <random>

#include "../support/check.hpp"
#include "../support/fixtures.hpp"
#include "mutmod/decision.hpp"

using namespace mutmod;

namespace {

DecisionRule exaggerate_rule(VirtualTime cooldown = 5000) {
  return {"exaggerate", RuleScope::General, Condition::parse("P([child].understood_pointing = yes) < 0.3"),
          {"exaggerate_gesture", {}}, cooldown};
}

SnapshotRef snap(double p_yes, VirtualTime at = 0) {
  auto s = std::make_shared<ModelSnapshot>();
  s->taken_at = at;
  s->posteriors[fx::kUnderstood] = {{"yes", "no"}, {p_yes, 1 - p_yes}};
  s->entries[fx::kUnderstood] = {p_yes >= 0.5 ? "yes" : "no", at, ValueSource::Inference};
  return s;
}

DecisionPipeline pipeline(AutonomyMode mode, VirtualTime expiry = 30000) {
  static const ModelStore store = fx::pointing_store();
  DecisionPipeline d(DecisionConfig{mode, expiry});
  d.set_rules({exaggerate_rule()}, [&](const SlotKey& k) { return store.find_spec(k); });
  return d;
}

DecisionRecord human(const std::string& verb, const std::string& understood) {
  auto s = std::make_shared<ModelSnapshot>();
  s->entries[fx::kUnderstood] = {understood, 0, ValueSource::Inference};
  return {0, {verb, {}}, DecisionSource::Human, AutonomyMode::Wizard, s, Verdict::Executed, false, std::nullopt};
}

ModelSnapshot understood(const std::string& v) {
  ModelSnapshot s;
  s.entries[fx::kUnderstood] = {v, 0, ValueSource::Inference};
  return s;
}

}  // namespace

TEST_SUITE("decision") {
  TEST_CASE("rule evaluation and cooldown") {
    auto d = pipeline(AutonomyMode::Autonomous);
    auto ps = d.evaluate_rules(snap(0.142857), 1200);
    REQUIRE(ps.size() == 1);
    CHECK(ps[0].action.verb == "exaggerate_gesture");
    CHECK(ps[0].rule == "exaggerate");
    CHECK(ps[0].created_at == 1200);
    CHECK(d.evaluate_rules(snap(0.142857), 1300).empty());
    CHECK(d.evaluate_rules(snap(0.142857), 6199).empty());
    CHECK(d.evaluate_rules(snap(0.142857), 6200).size() == 1);
    CHECK(pipeline(AutonomyMode::Autonomous).evaluate_rules(snap(0.9), 0).empty());
  }

  TEST_CASE("rule determinism") {
    auto a = pipeline(AutonomyMode::Wizard), b = pipeline(AutonomyMode::Wizard);
    auto s = snap(0.1);
    auto pa = a.evaluate_rules(s, 10), pb = b.evaluate_rules(s, 10);
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i].id == pb[i].id);
      CHECK(pa[i].action == pb[i].action);
    }
  }

  TEST_CASE("rules are validated") {
    auto store = fx::pointing_store();
    SpecLookup lookup = [&](const SlotKey& k) { return store.find_spec(k); };
    DecisionPipeline d;
    DecisionRule r = exaggerate_rule();
    r.condition = Condition::parse("P([child].nothing = yes) < 0.3");
    CHECK_CODE(d.set_rules({r}, lookup), ErrorCode::UnknownVariableInCondition);
    r = exaggerate_rule();
    r.action.verb = "";
    CHECK_THROWS_AS(d.set_rules({r}, lookup), Error);
    r = exaggerate_rule(-1);
    CHECK_THROWS_AS(d.set_rules({r}, lookup), Error);
  }

  TEST_CASE("routing by mode") {
    auto w = pipeline(AutonomyMode::Wizard);
    auto p = w.submit_proposal(w.evaluate_rules(snap(0.1), 0)[0], 0);
    CHECK(p.status == ProposalStatus::Suppressed);
    CHECK(w.log().empty());

    auto m = pipeline(AutonomyMode::Mixed);
    p = m.submit_proposal(m.evaluate_rules(snap(0.1), 100)[0], 100);
    CHECK(p.status == ProposalStatus::Pending);
    CHECK(p.expires_at == 30100);
    CHECK(m.pending().size() == 1);
    CHECK(m.log().empty());

    auto a = pipeline(AutonomyMode::Autonomous);
    p = a.submit_proposal(a.evaluate_rules(snap(0.1), 0)[0], 0);
    CHECK(p.status == ProposalStatus::Executed);
    REQUIRE(a.log().size() == 1);
    CHECK(a.log()[0].source == DecisionSource::Engine);
    CHECK(a.log()[0].verdict == Verdict::Executed);
    CHECK_FALSE(a.log()[0].human_reviewed);
  }

  TEST_CASE("mode changes are logged") {
    auto d = pipeline(AutonomyMode::Wizard);
    d.set_mode(AutonomyMode::Mixed, 10);
    d.set_mode(AutonomyMode::Mixed, 20);
    CHECK(d.mode() == AutonomyMode::Mixed);
    REQUIRE(d.mode_log().size() == 2);
    CHECK(d.mode_log()[0].from == AutonomyMode::Wizard);
    CHECK(d.mode_log()[1].from == AutonomyMode::Mixed);
    CHECK_CODE(parse_mode("manual"), ErrorCode::InvalidArgument);
  }

  TEST_CASE("wizard decisions") {
    auto d = pipeline(AutonomyMode::Wizard);
    auto r = d.wizard_decide({"exaggerate_gesture", {}}, snap(0.1), 50);
    CHECK(r.source == DecisionSource::Human);
    CHECK(r.verdict == Verdict::Executed);
    CHECK(r.snapshot != nullptr);
    d.wizard_decide({"switch_activity", {{"to", "drawing"}}}, snap(0.1), 60);
    REQUIRE(d.log().size() == 2);
    CHECK(d.log()[1].action.to_string() == "switch_activity{to=drawing}");
    auto a = pipeline(AutonomyMode::Autonomous);
    CHECK_CODE(a.wizard_decide({"exaggerate_gesture", {}}, snap(0.1), 0), ErrorCode::WrongMode);
  }

  TEST_CASE("verdicts") {
    auto d = pipeline(AutonomyMode::Mixed);
    auto p = d.submit_proposal(d.evaluate_rules(snap(0.1), 0)[0], 0);
    auto [approved, rec] = d.resolve_proposal(p.id, ProposalVerdict::Approve, 10);
    CHECK(approved.status == ProposalStatus::Executed);
    REQUIRE(rec);
    CHECK(rec->source == DecisionSource::Engine);
    CHECK(rec->human_reviewed);
    CHECK(rec->verdict == Verdict::Executed);
    CHECK_CODE(d.resolve_proposal(p.id, ProposalVerdict::Approve, 11), ErrorCode::AlreadyResolved);
    CHECK_CODE(d.resolve_proposal("p99", ProposalVerdict::Approve, 11), ErrorCode::UnknownProposal);

    auto q = d.submit_proposal(d.evaluate_rules(snap(0.1), 6000)[0], 6000);
    auto [rejected, rrec] = d.resolve_proposal(q.id, ProposalVerdict::Reject, 6001);
    CHECK(rejected.status == ProposalStatus::Rejected);
    CHECK(rrec->verdict == Verdict::Rejected);
    CHECK(d.pending().empty());

    auto e = d.submit_proposal(d.evaluate_rules(snap(0.1), 12000)[0], 12000);
    CHECK(d.expire_due(41999).empty());
    auto expired = d.expire_due(42000);
    REQUIRE(expired.size() == 1);
    CHECK(expired[0].id == e.id);
    CHECK_CODE(d.resolve_proposal(e.id, ProposalVerdict::Approve, 42001), ErrorCode::Expired);

    auto late = d.submit_proposal(d.evaluate_rules(snap(0.1), 50000)[0], 50000);
    CHECK_CODE(d.resolve_proposal(late.id, ProposalVerdict::Approve, 80000), ErrorCode::Expired);

    auto w = d.submit_proposal(d.evaluate_rules(snap(0.1), 90000)[0], 90000);
    d.set_mode(AutonomyMode::Wizard, 90001);
    CHECK_CODE(d.resolve_proposal(w.id, ProposalVerdict::Approve, 90002), ErrorCode::WrongMode);

    auto c = d.counts();
    CHECK(c.created == 5);
    CHECK(c.executed == 1);
    CHECK(c.rejected == 1);
    CHECK(c.expired == 2);
    CHECK(c.pending == 1);
  }

  TEST_CASE("learn and select") {
    std::vector<DecisionRecord> log = {human("exaggerate_gesture", "no"), human("exaggerate_gesture", "no"),
                                       human("exaggerate_gesture", "no"), human("no_action", "yes")};
    auto policy = learn_from_log(log, {fx::kUnderstood}, 1.0);
    REQUIRE(policy.actions.size() == 2);
    CHECK(policy.actions[0].verb == "exaggerate_gesture");
    auto row = policy.row({"no"});
    CHECK(row[0] == doctest::Approx(0.8));
    CHECK(policy.row({"yes"})[1] == doctest::Approx(2.0 / 3.0));
    CHECK(select_action_autonomous(understood("no"), policy).verb == "exaggerate_gesture");
    CHECK(select_action_autonomous(understood("yes"), policy).verb == "no_action");
    // unseen tuple: smoothed uniform row, tie to the smallest action
    CHECK(policy.row({"maybe"})[0] == doctest::Approx(0.5));
    CHECK(select_action_autonomous(understood("maybe"), policy).verb == "exaggerate_gesture");
    CHECK_CODE(select_action_autonomous(ModelSnapshot{}, policy), ErrorCode::MissingFeature);

    CHECK_CODE(learn_from_log({}, {fx::kUnderstood}), ErrorCode::NoHumanRecords);
    auto engine_only = human("exaggerate_gesture", "no");
    engine_only.source = DecisionSource::Engine;
    CHECK_CODE(learn_from_log({engine_only}, {fx::kUnderstood}), ErrorCode::NoHumanRecords);

    // rejected proposals count towards no_action
    auto rejected = engine_only;
    rejected.human_reviewed = true;
    rejected.verdict = Verdict::Rejected;
    auto p2 = learn_from_log({rejected}, {fx::kUnderstood});
    CHECK(select_action_autonomous(understood("no"), p2).verb == "no_action");
  }

  TEST_CASE("property: policy rows normalized, argmax invariant under duplication") {
    std::mt19937_64 rng(5);
    const std::vector<std::string> verbs = {"exaggerate_gesture", "switch_activity", "no_action", "make_big_mistake"};
    const std::vector<std::string> labels = {"yes", "no"};
    for (int round = 0; round < 100; ++round) {
      std::vector<DecisionRecord> log;
      auto n = std::uniform_int_distribution<int>(1, 25)(rng);
      for (int i = 0; i < n; ++i)
        log.push_back(human(verbs[std::uniform_int_distribution<std::size_t>(0, 3)(rng)],
                            labels[std::uniform_int_distribution<std::size_t>(0, 1)(rng)]));
      auto doubled = log;
      doubled.insert(doubled.end(), log.begin(), log.end());
      double alpha = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
      auto p1 = learn_from_log(log, {fx::kUnderstood}, alpha);
      auto p2 = learn_from_log(doubled, {fx::kUnderstood}, alpha);
      for (const auto& l : labels) {
        double sum = 0;
        for (double p : p1.row({l})) sum += p;
        CHECK(std::abs(sum - 1.0) < 1e-9);
        CHECK(select_action_autonomous(understood(l), p1) == select_action_autonomous(understood(l), p2));
      }
    }
  }
}
