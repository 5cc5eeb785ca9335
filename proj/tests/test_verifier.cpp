#include <doctest.h>

#include <cmath>

#include "cmdp/verifier.hpp"
#include "fixtures.hpp"

using namespace cmdp;

namespace {

enum { s0, s1, s2, s3, s4, s5 };

const LemmaCheck* find_check(const LemmaReport& rep, const std::string& name) {
  for (const LemmaCheck& c : rep.checks)
    if (c.name == name) return &c;
  return nullptr;
}

}  // namespace

TEST_CASE("best Markovian policy on the gap instance is worth 2") {
  Instance inst = gen_gap();
  MarkovianResult mk = enumerate_markovian(inst);
  REQUIRE(mk.feasible);
  CHECK(mk.value == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(mk.min_payment_value == doctest::Approx(2.0).epsilon(1e-9));
  MarkovianEvaluation ev = evaluate_markovian(mk.policy, inst);
  CHECK(std::abs(ev.value - mk.value) <= 1e-9);
  CHECK(ev.ic_gap <= 1e-9);
  CHECK(mk.policy.actions[0][s0] == 0);
  CHECK(mk.policy.contracts[0][s0].pay[s1] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(mk.policy.actions[2][s3] == 0);
  CHECK(mk.policy.contracts[2][s3].pay[s4] == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("history-dependent search on the gap instance reaches 9/4") {
  Instance inst = gen_gap();
  OptResult opt = enumerate_opt(inst);
  CHECK(opt.value >= 2.25 - 1e-9);
  REQUIRE(validate_policy(opt.witness, inst).empty());
  ValueTables vt = evaluate(opt.witness, inst);
  CHECK(std::abs(vt.value - opt.value) <= 1e-9);
  CHECK(ic_epsilon(opt.witness, inst, vt).epsilon <= 1e-9);
  CHECK(honesty_residual(opt.witness, inst).max <= 1e-9);
}

TEST_CASE("single-action instance needs no payments") {
  Instance inst = fixtures::single_state(3);
  MarkovianResult mk = enumerate_markovian(inst);
  CHECK(mk.value == doctest::Approx(3.0).epsilon(1e-12));
  for (const auto& row : mk.policy.contracts)
    for (const Contract& p : row) CHECK(p.pay[0] <= 1e-12);
  CHECK(mk.assignments == 1);
}

TEST_CASE("joint Markovian optimum dominates the grid search") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Instance inst = fixtures::toy2(seed);
    EnumConfig coarse;
    coarse.contract_grid_step = 0.25;
    MarkovianResult joint = enumerate_markovian(inst), grid = markovian_grid_search(inst, coarse);
    REQUIRE(joint.feasible);
    CHECK(joint.value >= grid.value - 1e-9);
    CHECK(joint.value >= joint.min_payment_value - 1e-9);
    MarkovianEvaluation ev = evaluate_markovian(grid.policy, inst);
    CHECK(std::abs(ev.value - grid.value) <= 1e-9);
    CHECK(ev.ic_gap <= 1e-9);
  }
}

TEST_CASE("zero rewards give zero optimum") {
  Instance inst = fixtures::toy2();
  for (int t = 0; t < inst.horizon; ++t)
    for (int s = 0; s < inst.num_states; ++s)
      for (int s2 = 0; s2 < inst.num_states; ++s2) inst.r(t, s, s2) = 0.0;
  CHECK(enumerate_opt(inst).value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(enumerate_markovian(inst).value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("folded promise tables equal the history recursion on random policies") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Instance inst = gen_random(seed, 3, 2, 3, 0.3);
    PromiseFormPolicy sigma = random_policy(inst, seed);
    REQUIRE(validate_policy(sigma, inst).empty());
    CHECK(max_table_discrepancy(sigma, inst) <= 1e-9);
  }
}

TEST_CASE("history enumeration covers the supported histories") {
  Instance inst = gen_gap();
  std::vector<HistoryValues> hv = enumerate_values(fixtures::gap_hand_policy(), inst);
  // Root, s1 and s2 after step one, and s3 after each of them.
  CHECK(hv.size() == 5);
  CHECK(hv[0].vp == doctest::Approx(2.25).epsilon(1e-15));
  CHECK_THROWS_AS(enumerate_values(fixtures::gap_hand_policy(), inst, 2), CapExceeded);
}

TEST_CASE("policy lemma checks detect a dishonest promise") {
  Instance inst = gen_gap();
  PromiseFormPolicy sigma = fixtures::gap_hand_policy();
  CHECK(check_policy_lemmas(sigma, inst).all_pass());
  sigma.nodes[1][s2][0].promise = 0.3;
  LemmaReport rep = check_policy_lemmas(sigma, inst);
  const LemmaCheck* c = find_check(rep, "honesty_propagation");
  REQUIRE(c != nullptr);
  CHECK(c->pass);
  CHECK(c->detail.find("0.3") != std::string::npos);
  CHECK(rep.to_json()["checks"].size() == rep.checks.size());
}

TEST_CASE("lemma suite on the gap instance and toy-2 seeds") {
  SuiteOptions opt;
  LemmaReport gap = check_lemma_suite(gen_gap(), opt);
  CHECK_MESSAGE(gap.all_pass(), gap.text());
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    LemmaReport rep = check_lemma_suite(fixtures::toy2(seed), opt);
    CHECK_MESSAGE(rep.all_pass(), rep.text());
  }
}

TEST_CASE("P3 vertex-cover instance has Markovian value 29/60") {
  Instance inst = gen_vertex_cover(GraphSpec::path(3));
  MarkovianResult mk = enumerate_markovian(inst);
  CHECK(std::abs(mk.value - 29.0 / 60.0) <= 1e-9);
}

TEST_CASE("search caps are enforced") {
  EnumConfig cfg;
  cfg.work_cap = 10;
  CHECK_THROWS_AS(enumerate_opt(gen_gap(), cfg), CapExceeded);
  EnumConfig bad;
  bad.contract_grid_step = 0.0;
  CHECK_THROWS_AS(bad.check(), ValidationError);
}
