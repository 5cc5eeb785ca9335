#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "cmdp/model.hpp"
#include "fixtures.hpp"

using namespace cmdp;
using fixtures::temp_path;

TEST_CASE("gap instance is valid with one reward-scale warning") {
  ValidationReport rep = validate_instance(gen_gap());
  CHECK(rep.ok());
  REQUIRE(rep.warnings.size() == 1);
  CHECK(rep.warnings[0].message == "reward 2 exceeds 1");
}

TEST_CASE("transition row summing to 0.9 yields one located violation") {
  Instance inst = fixtures::toy2();
  inst.P(1, 0, 1, 0) = 0.45;
  inst.P(1, 0, 1, 1) = 0.45;
  ValidationReport rep = validate_instance(inst);
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0].rule == "distribution");
  CHECK(rep.violations[0].location == "(h=2,s=0,a=1)");
}

TEST_CASE("missing zero-cost action yields one violation") {
  Instance inst = fixtures::toy2();
  for (int a = 0; a < inst.num_actions; ++a) inst.c(0, 0, a) = 0.5;
  ValidationReport rep = validate_instance(inst);
  REQUIRE(rep.violations.size() == 1);
  CHECK(rep.violations[0].rule == "zero_cost_action");
  CHECK(rep.violations[0].location == "(h=1,s=0)");
}

TEST_CASE("other invariant violations are reported") {
  Instance inst = fixtures::toy2();
  inst.initial = {0.7, 0.2};
  inst.c(0, 1, 0) = 1.5;
  inst.payment_bound = 0.5;
  inst.r(1, 1, 0) = -1.0;
  ValidationReport rep = validate_instance(inst);
  std::vector<std::string> rules;
  for (const Issue& v : rep.violations) rules.push_back(v.rule);
  CHECK(std::count(rules.begin(), rules.end(), "distribution") == 1);
  CHECK(std::count(rules.begin(), rules.end(), "cost_range") == 1);
  CHECK(std::count(rules.begin(), rules.end(), "payment_bound") == 1);
  CHECK(std::count(rules.begin(), rules.end(), "reward_range") == 1);
}

TEST_CASE("instance files round-trip exactly") {
  for (const Instance& inst : {gen_gap(), fixtures::toy2(), gen_random(99, 3, 4, 3, 0.5)}) {
    const std::string path = temp_path("roundtrip.json");
    save_instance(inst, path);
    CHECK(load_instance(path) == inst);
  }
}

TEST_CASE("malformed instance files are rejected") {
  nlohmann::json j = instance_to_json(fixtures::toy2());
  SUBCASE("negative probability") {
    j["transition"][0][0][0] = {-0.5, 1.5};
    CHECK_THROWS_AS(instance_from_json(j), ValidationError);
  }
  SUBCASE("horizon 0") {
    j["horizon"] = 0;
    CHECK_THROWS_AS(instance_from_json(j), ValidationError);
  }
  SUBCASE("schema version mismatch") {
    j["schema_version"] = 2;
    CHECK_THROWS_AS(instance_from_json(j), ValidationError);
  }
  SUBCASE("missing field") {
    j.erase("agent_cost");
    CHECK_THROWS_AS(instance_from_json(j), ValidationError);
  }
  SUBCASE("not json") {
    const std::string path = temp_path("garbage.json");
    std::ofstream(path) << "{ not json";
    CHECK_THROWS_AS(load_instance(path), ValidationError);
  }
}

TEST_CASE("history prefix, suffix and concatenation") {
  Contract p{{0.25, 0.0}}, q{{0.0, 0.5}};
  History tau = History::start(0).extended(p, 0, 1, 1).extended(q, 0, 0, 0).extended(p, 1, 1, 1);
  CHECK(tau.length() == 4);
  CHECK(tau.last_state() == 1);
  for (int h = 1; h <= tau.length(); ++h) CHECK(concat(tau.prefix(h), tau.suffix(h)) == tau);
  History a = tau.prefix(2), b = tau.suffix(2).prefix(2), c = tau.suffix(3);
  CHECK(concat(concat(a, b), c) == concat(a, concat(b, c)));
  CHECK(concat(concat(a, b), c) == tau);
  CHECK_THROWS_AS(concat(a, History::start(0)), ValidationError);
  CHECK_THROWS_AS(tau.prefix(5), ValidationError);
}

TEST_CASE("history well-formedness") {
  Instance inst = fixtures::toy2();
  std::string why;
  History tau = History::start(0).extended(Contract::zero(2), 0, 1, 1);
  CHECK(history_well_formed(tau, inst, &why));
  History bad = tau;
  bad.actions[0] = 5;
  CHECK_FALSE(history_well_formed(bad, inst, &why));
  CHECK(why == "action index out of range");
  History longer = tau.extended(Contract::zero(2), 0, 0, 0).extended(Contract::zero(2), 0, 0, 0);
  CHECK_FALSE(history_well_formed(longer, inst, &why));
}

TEST_CASE("contracts respect the payment bound") {
  CHECK(Contract{{0.0, 1.0}}.within_bound(1.0));
  CHECK_FALSE(Contract{{0.0, 1.0 + 1e-9}}.within_bound(1.0));
  CHECK_FALSE(Contract{{-1e-9, 0.0}}.within_bound(1.0));
  CHECK(same_contract(Contract{{0.5, 0.25}}, Contract{{0.5, 0.25 + 1e-13}}));
  CHECK_FALSE(same_contract(Contract{{0.5, 0.25}}, Contract{{0.5, 0.26}}));
}

TEST_CASE("reachability and duplicate actions on the gap instance") {
  Instance inst = gen_gap();
  auto reach = reachable_states(inst);
  CHECK(reach[0] == std::vector<char>{1, 0, 0, 0, 0, 0});
  CHECK(reach[1] == std::vector<char>{0, 1, 1, 0, 0, 0});
  CHECK(reach[2] == std::vector<char>{0, 0, 0, 1, 0, 0});
  CHECK(reach[3] == std::vector<char>{0, 0, 0, 0, 1, 1});
  CHECK(action_representatives(inst, 0, 0) == std::vector<int>{0, 1, 1});
  CHECK(action_representatives(inst, 2, 3) == std::vector<int>{0, 1, 2});
}
