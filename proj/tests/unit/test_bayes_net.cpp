#include <doctest.h>

#include <cmath>
#include <map>

#include "../support/check.hpp"
#include "../support/fixtures.hpp"
#include "../support/generators.hpp"
#include "../support/oracles.hpp"
#include "mutmod/bayes_net.hpp"

using namespace mutmod;

namespace {

struct Specs {
  std::map<SlotKey, VariableSpec> specs;
  SpecLookup lookup() const {
    return [this](const SlotKey& k) -> const VariableSpec* {
      auto it = specs.find(k);
      return it == specs.end() ? nullptr : &it->second;
    };
  }
  void add(const std::string& name, std::vector<std::string> domain, VariableKind kind = VariableKind::Abstract) {
    specs[SlotKey{{}, name}] = fx::spec(name, kind, std::move(domain));
  }
};

SlotKey k(const std::string& name) { return SlotKey{{}, name}; }

Specs specs_for(const oracle::Net& net) {
  Specs s;
  for (std::size_t i = 0; i < net.size(); ++i) s.specs[gen::slot_of(net, i)] = gen::spec_of(net, i, VariableKind::Abstract);
  return s;
}

// A -> B deterministic, uniform prior on A.
std::vector<Cpt> deterministic(double prior_a1 = 0.5) {
  return {{k("A"), {}, {{{}, {prior_a1, 1 - prior_a1}}}, 0},
          {k("B"), {k("A")}, {{{"a1"}, {1.0, 0.0}}, {{"a2"}, {0.0, 1.0}}}, 0}};
}

}  // namespace

TEST_SUITE("bayes_net") {
  TEST_CASE("build: pointing chain and validation errors") {
    Specs s;
    s.add("saw", {"yes", "no"}, VariableKind::Perceived);
    s.add("understood", {"yes", "no"});
    s.add("gaze", {"object", "hand", "elsewhere"}, VariableKind::Perceived);
    std::vector<Cpt> ok = {
        {k("gaze"), {k("understood")}, {{{"yes"}, {0.8, 0.1, 0.1}}, {{"no"}, {0.1, 0.6, 0.3}}}, 0},
        {k("understood"), {k("saw")}, {{{"yes"}, {0.7, 0.3}}, {{"no"}, {0.1, 0.9}}}, 0},
        {k("saw"), {}, {{{}, {0.9, 0.1}}}, 0},
    };
    auto net = BayesNet::build(ok, s.lookup());
    REQUIRE(net.size() == 3);
    // topological order
    CHECK(net.node(0).ref == k("saw"));
    CHECK(net.node(2).ref == k("gaze"));

    auto bad = ok;
    bad[2].rows[0].probs = {0.5, 0.4};
    CHECK_CODE(BayesNet::build(bad, s.lookup()), ErrorCode::RowNotNormalized);
    bad = ok;
    bad[2].rows[0].probs = {1.2, -0.2};
    CHECK_CODE(BayesNet::build(bad, s.lookup()), ErrorCode::RowNotNormalized);
    bad = ok;
    bad[2].rows[0].probs = {1.0};
    CHECK_CODE(BayesNet::build(bad, s.lookup()), ErrorCode::RowNotNormalized);

    bad = ok;
    bad.pop_back();
    CHECK_CODE(BayesNet::build(bad, s.lookup()), ErrorCode::MissingCpt);
    bad = ok;
    bad.push_back(ok[2]);
    CHECK_CODE(BayesNet::build(bad, s.lookup()), ErrorCode::DuplicateCpt);
    bad = ok;
    bad[0].child = k("ghost");
    CHECK_CODE(BayesNet::build(bad, s.lookup()), ErrorCode::UnknownNode);
    bad = ok;
    bad[1].rows.pop_back();
    CHECK_CODE(BayesNet::build(bad, s.lookup()), ErrorCode::MissingRow);
    bad = ok;
    bad[1].rows[1].given = {"yes"};
    CHECK_CODE(BayesNet::build(bad, s.lookup()), ErrorCode::MissingRow);
    bad = ok;
    bad[1].rows[1].given = {"maybe"};
    CHECK_CODE(BayesNet::build(bad, s.lookup()), ErrorCode::ValueOutOfDomain);
  }

  TEST_CASE("build: cycles") {
    Specs s;
    s.add("A", {"a1", "a2"});
    s.add("B", {"b1", "b2"});
    std::vector<Cpt> cyc = {{k("A"), {k("B")}, {{{"b1"}, {0.5, 0.5}}, {{"b2"}, {0.5, 0.5}}}, 0},
                            {k("B"), {k("A")}, {{{"a1"}, {0.5, 0.5}}, {{"a2"}, {0.5, 0.5}}}, 0}};
    CHECK_CODE(BayesNet::build(cyc, s.lookup()), ErrorCode::CycleDetected);
    std::vector<Cpt> self = {{k("A"), {k("A")}, {{{"a1"}, {0.5, 0.5}}, {{"a2"}, {0.5, 0.5}}}, 0}};
    CHECK_THROWS_AS(BayesNet::build(self, s.lookup()), Error);
  }

  TEST_CASE("posterior: deterministic inversion and contradiction") {
    Specs s;
    s.add("A", {"a1", "a2"});
    s.add("B", {"b1", "b2"}, VariableKind::Perceived);
    auto net = BayesNet::build(deterministic(), s.lookup());
    auto d = posterior(net, {{k("B"), "b1"}}, k("A"));
    CHECK(d.probs == std::vector<double>{1.0, 0.0});
    for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
      auto a = approx_posterior(net, {{k("B"), "b1"}}, k("A"), 1000, seed);
      CHECK(a.probs == std::vector<double>{1.0, 0.0});
    }

    auto zero = BayesNet::build(deterministic(0.0), s.lookup());
    CHECK_CODE(posterior(zero, {{k("B"), "b1"}}, k("A")), ErrorCode::ZeroProbabilityEvidence);
    CHECK_CODE(approx_posterior(zero, {{k("B"), "b1"}}, k("A"), 100, 1), ErrorCode::AllZeroWeights);
    CHECK_CODE(approx_posterior(net, {}, k("A"), 0, 1), ErrorCode::InvalidArgument);
    CHECK_CODE(posterior(net, {{k("B"), "b9"}}, k("A")), ErrorCode::ValueOutOfDomain);
    CHECK_CODE(posterior(net, {}, k("Z")), ErrorCode::UnknownNode);
  }

  TEST_CASE("posterior: pointing fixture against the hand oracle") {
    auto store = fx::pointing_store();
    auto net = fx::pointing_net(store);
    auto hand = posterior(net, {{fx::kGaze, "hand"}}, fx::kUnderstood);
    CHECK(std::abs(hand.probability("yes") - oracle::kYesGivenHand) < 1e-12);
    CHECK(std::abs(hand.probs[0] + hand.probs[1] - 1.0) < 1e-12);
    auto prior = posterior(net, {}, fx::kUnderstood);
    CHECK(prior.probs == std::vector<double>{0.5, 0.5});
    auto object = posterior(net, {{fx::kGaze, "object"}}, fx::kUnderstood);
    CHECK(std::abs(object.probability("yes") - oracle::kYesGivenObject) < 1e-12);
    CHECK(object.probability("yes") > prior.probability("yes"));
    CHECK(prior.probability("yes") > hand.probability("yes"));

    auto approx = approx_posterior(net, {{fx::kGaze, "hand"}}, fx::kUnderstood, 100000, 42);
    CHECK(std::abs(approx.probability("yes") - oracle::kYesGivenHand) < 0.01);
    CHECK(approx == approx_posterior(net, {{fx::kGaze, "hand"}}, fx::kUnderstood, 100000, 42));
  }

  TEST_CASE("map value") {
    CHECK(map_value({{"yes", "no"}, {0.142857, 0.857143}}) == "no");
    CHECK(map_value({{"yes", "no"}, {0.5, 0.5}}) == "yes");
    CHECK(map_value({{"a", "b", "c"}, {0.0, 0.0, 1.0}}) == "c");
  }

  TEST_CASE("fit_cpt") {
    Specs s;
    s.add("U", {"yes", "no"}, VariableKind::Perceived);
    s.add("G", {"object", "hand", "elsewhere"}, VariableKind::Perceived);
    std::vector<JointRecord> log;
    for (auto v : {"yes", "yes", "yes", "no"}) log.push_back({{k("U"), v}});
    auto c = fit_cpt(log, k("U"), {}, 1.0, s.lookup());
    REQUIRE(c.rows.size() == 1);
    CHECK(c.rows[0].probs[0] == doctest::Approx(4.0 / 6.0));
    CHECK(c.rows[0].probs[1] == doctest::Approx(2.0 / 6.0));

    auto empty = fit_cpt({}, k("G"), {}, 1.0, s.lookup());
    for (double p : empty.rows[0].probs) CHECK(p == doctest::Approx(1.0 / 3.0));

    auto cond = fit_cpt({{{k("U"), "yes"}, {k("G"), "object"}}}, k("G"), {k("U")}, 0.5, s.lookup());
    REQUIRE(cond.rows.size() == 2);
    CHECK(cond.rows[0].given == std::vector<std::string>{"yes"});
    CHECK(cond.rows[0].probs[0] == doctest::Approx(1.5 / 2.5));
    CHECK(cond.rows[1].probs[0] == doctest::Approx(1.0 / 3.0));
    // a fitted table is a valid network table
    CHECK_NOTHROW(BayesNet::build({fit_cpt({}, k("U"), {}, 1.0, s.lookup()), cond}, s.lookup()));

    CHECK_CODE(fit_cpt({{{k("G"), "object"}}}, k("G"), {k("U")}, 1.0, s.lookup()), ErrorCode::MissingField);
    CHECK_CODE(fit_cpt({}, k("G"), {}, 0.0, s.lookup()), ErrorCode::InvalidArgument);
  }

  TEST_CASE("property: fit_cpt rows normalized and strictly positive") {
    gen::Rng rng(21);
    Specs s;
    s.add("P", {"p0", "p1", "p2"}, VariableKind::Perceived);
    s.add("C", {"c0", "c1"}, VariableKind::Perceived);
    for (int round = 0; round < 100; ++round) {
      std::vector<JointRecord> log;
      auto n = gen::uniform(rng, 0, 30);
      for (std::size_t i = 0; i < n; ++i)
        log.push_back({{k("P"), "p" + std::to_string(gen::uniform(rng, 0, 2))},
                       {k("C"), "c" + std::to_string(gen::uniform(rng, 0, 1))}});
      double alpha = gen::real(rng, 0.01, 3.0);
      auto c = fit_cpt(log, k("C"), {k("P")}, alpha, s.lookup());
      CHECK(c.rows.size() == 3);
      for (const auto& row : c.rows) {
        double sum = 0;
        for (double p : row.probs) {
          CHECK(p > 0.0);
          sum += p;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
      }
    }
  }

  TEST_CASE("markov blanket and d-separation on a known graph") {
    // A -> B -> C, A -> D <- E
    Specs s;
    for (auto n : {"A", "B", "C", "D", "E"}) s.add(n, {"0", "1"});
    auto row2 = std::vector<CptRow>{{{"0"}, {0.3, 0.7}}, {{"1"}, {0.6, 0.4}}};
    std::vector<CptRow> row4;
    for (auto a : {"0", "1"})
      for (auto e : {"0", "1"}) row4.push_back({{a, e}, {0.2, 0.8}});
    std::vector<Cpt> cpts = {{k("A"), {}, {{{}, {0.4, 0.6}}}, 0},
                             {k("E"), {}, {{{}, {0.5, 0.5}}}, 0},
                             {k("B"), {k("A")}, row2, 0},
                             {k("C"), {k("B")}, row2, 0},
                             {k("D"), {k("A"), k("E")}, row4, 0}};
    auto net = BayesNet::build(cpts, s.lookup());
    auto idx = [&](const char* n) { return *net.index_of(k(n)); };
    auto mb = net.markov_blanket(idx("A"));
    std::set<std::size_t> got(mb.begin(), mb.end());
    CHECK(got == std::set<std::size_t>{idx("B"), idx("D"), idx("E")});

    std::vector<bool> observed(net.size(), false);
    auto reach = net.d_connected(idx("C"), observed);
    CHECK(reach[idx("A")]);
    CHECK_FALSE(reach[idx("E")]);  // collider D unobserved
    observed[idx("B")] = true;
    reach = net.d_connected(idx("C"), observed);
    CHECK_FALSE(reach[idx("A")]);  // chain blocked by B
    observed[idx("B")] = false;
    observed[idx("D")] = true;
    reach = net.d_connected(idx("E"), observed);
    CHECK(reach[idx("A")]);  // explaining away
  }

  // Property: exact enumeration equals full-joint summation.
  TEST_CASE("property: oracle equivalence on random networks") {
    gen::Rng rng(1234);
    for (int round = 0; round < 40; ++round) {
      gen::NetOptions o;
      o.zero_prob = round % 4 == 0 ? 0.2 : 0.0;
      auto on = gen::random_net(rng, o);
      auto specs = specs_for(on);
      auto net = BayesNet::build(gen::to_cpts(on, rng), specs.lookup());
      for (int q = 0; q < 20; ++q) {
        std::vector<int> ev(on.size(), -1);
        EvidenceSet es;
        for (std::size_t i = 0; i < on.size(); ++i)
          if (gen::coin(rng, 0.4)) {
            ev[i] = static_cast<int>(gen::uniform(rng, 0, on.card[i] - 1));
            es[gen::slot_of(on, i)] = gen::label(i, ev[i]);
          }
        auto query = gen::uniform(rng, 0, on.size() - 1);
        auto expect = oracle::brute_posterior(on, ev, query);
        if (!expect) {
          CHECK_CODE(posterior(net, es, gen::slot_of(on, query)), ErrorCode::ZeroProbabilityEvidence);
          continue;
        }
        auto got = posterior(net, es, gen::slot_of(on, query));
        REQUIRE(got.probs.size() == expect->size());
        for (std::size_t v = 0; v < expect->size(); ++v) CHECK(std::abs(got.probs[v] - (*expect)[v]) < 1e-9);
      }
    }
  }

  // Property: once the query's Markov blanket is observed, evidence elsewhere
  // cannot move its posterior.
  TEST_CASE("property: evidence relevance") {
    gen::Rng rng(77);
    int tested = 0;
    for (int round = 0; round < 150; ++round) {
      gen::NetOptions o;
      o.min_nodes = 3;
      auto on = gen::random_net(rng, o);
      auto specs = specs_for(on);
      auto net = BayesNet::build(gen::to_cpts(on, rng), specs.lookup());
      auto q = gen::uniform(rng, 0, on.size() - 1);
      auto qi = *net.index_of(gen::slot_of(on, q));
      auto mb = net.markov_blanket(qi);
      std::vector<bool> in_mb(net.size(), false);
      for (auto m : mb) in_mb[m] = true;
      std::vector<std::size_t> outside;
      for (std::size_t i = 0; i < net.size(); ++i)
        if (i != qi && !in_mb[i]) outside.push_back(i);
      if (outside.empty()) continue;

      EvidenceSet es;
      for (auto m : mb) es[net.node(m).ref] = net.node(m).spec.domain[gen::uniform(rng, 0, net.node(m).spec.domain.size() - 1)];
      auto target = outside[gen::uniform(rng, 0, outside.size() - 1)];
      const auto& dom = net.node(target).spec.domain;
      std::optional<Distribution> first;
      for (const auto& label : dom) {
        auto e = es;
        e[net.node(target).ref] = label;
        try {
          auto d = posterior(net, e, net.node(qi).ref);
          if (!first) {
            first = d;
            continue;
          }
          for (std::size_t v = 0; v < d.probs.size(); ++v) CHECK(std::abs(d.probs[v] - first->probs[v]) < 1e-12);
          ++tested;
        } catch (const Error&) {
          // zero-probability combination; nothing to compare
        }
      }
    }
    CHECK(tested > 50);
  }

  TEST_CASE("property: sampler reproducibility and convergence") {
    auto store = fx::pointing_store();
    auto net = fx::pointing_net(store);
    EvidenceSet e = {{fx::kGaze, "hand"}};
    double err_small = 0, err_large = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto a = approx_posterior(net, e, fx::kUnderstood, 1000, seed);
      CHECK(a == approx_posterior(net, e, fx::kUnderstood, 1000, seed));
      err_small += std::abs(a.probability("yes") - oracle::kYesGivenHand);
      err_large += std::abs(approx_posterior(net, e, fx::kUnderstood, 100000, seed).probability("yes") -
                            oracle::kYesGivenHand);
    }
    CHECK(err_large < err_small);
  }
}
