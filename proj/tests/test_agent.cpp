#include <doctest.h>

#include <cmath>

#include "cmdp/agent.hpp"
#include "cmdp/converter.hpp"
#include "cmdp/dp_solver.hpp"
#include "fixtures.hpp"

using namespace cmdp;

namespace {

constexpr AgentTie kTies[] = {AgentTie::Recommendation, AgentTie::Principal, AgentTie::Adversarial,
                              AgentTie::Lexicographic};

}  // namespace

TEST_CASE("an IC policy's best response plays the recommendation") {
  Instance inst = gen_gap();
  PromiseFormPolicy sigma = fixtures::gap_hand_policy();
  AgentPolicy br = best_response(sigma, inst);
  auto reach = reachable_nodes(sigma, inst);
  for (int t = 0; t < 3; ++t)
    for (int s = 0; s < 6; ++s)
      for (std::size_t i = 0; i < sigma.nodes[t][s].size(); ++i)
        if (reach[t][s][i])
          for (std::size_t e = 0; e < sigma.nodes[t][s][i].menu.size(); ++e)
            CHECK(br.play(t, s, static_cast<int>(i), static_cast<int>(e)) == sigma.nodes[t][s][i].menu[e].action);
  ExactValue ev = exact_value(sigma, br, inst);
  CHECK(ev.principal == doctest::Approx(2.25).epsilon(1e-15));
  CHECK(ev.histories == 1);
}

TEST_CASE("without payment the agent skips the costly action at s3") {
  Instance inst = gen_gap();
  PromiseFormPolicy sigma = fixtures::gap_zero_policy();
  sigma.nodes[2][3][0].menu[0].action = 0;
  for (AgentTie tie : kTies) {
    AgentPolicy br = best_response(sigma, inst, tie);
    CHECK(br.play(2, 3, 0, 0) != 0);
    CHECK(recursive_value(sigma, br, inst).agent >= recursive_value(sigma, recommended_agent(sigma, inst), inst).agent + 0.5 - 1e-12);
  }
}

TEST_CASE("tie-breaking rules agree with the action relabeling") {
  Instance inst = gen_gap();
  PromiseFormPolicy blended = change_contracts(solve(inst, 0.1).policy, 0.1, inst);
  const std::pair<TieRule, AgentTie> pairs[] = {{TieRule::Incumbent, AgentTie::Recommendation},
                                                {TieRule::Principal, AgentTie::Principal}};
  for (auto [rule, tie] : pairs) {
    ActionLabels labels;
    realign_actions(blended, inst, rule, &labels);
    AgentPolicy br = best_response(blended, inst, tie);
    for (int t = 0; t < 3; ++t)
      for (int s = 0; s < 6; ++s)
        for (std::size_t i = 0; i < blended.nodes[t][s].size(); ++i)
          for (std::size_t c = 0; c < blended.nodes[t][s][i].choice.size(); ++c)
            CHECK(labels[t][s][i][c] == br.play(t, s, static_cast<int>(i), blended.nodes[t][s][i].choice[c].entry));
  }
}

TEST_CASE("best response dominates every other agent in agent utility") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Instance inst = fixtures::toy2(seed);
    PromiseFormPolicy sigma = solve(inst, 0.1).policy;
    const double rec = recursive_value(sigma, recommended_agent(sigma, inst), inst).agent;
    double first = 0.0;
    for (AgentTie tie : kTies) {
      AgentPolicy br = best_response(sigma, inst, tie);
      ExactValue rv = recursive_value(sigma, br, inst), ev = exact_value(sigma, br, inst);
      CHECK(rv.agent >= rec - 1e-12);
      CHECK(std::abs(rv.agent - ev.agent) <= 1e-9);
      CHECK(std::abs(rv.principal - ev.principal) <= 1e-9);
      if (tie == AgentTie::Recommendation) first = rv.agent;
      CHECK(std::abs(rv.agent - first) <= 1e-9);
    }
  }
}

TEST_CASE("Monte Carlo on a deterministic-payoff policy has zero spread") {
  Instance inst = gen_gap();
  PromiseFormPolicy sigma = fixtures::gap_hand_policy();
  SimulationResult mc = simulate(sigma, best_response(sigma, inst), inst, 1, 100000);
  CHECK(mc.episodes == 100000);
  CHECK(mc.mean_principal == doctest::Approx(2.25).epsilon(1e-12));
  CHECK(mc.se_principal <= 1e-9);

  Instance one = fixtures::single_state(3);
  PromiseFormPolicy flat = PromiseFormPolicy::empty(3, 1);
  for (int t = 0; t < 3; ++t) flat.nodes[t][0].push_back(fixtures::node(0.0, {fixtures::entry(0, {0.0}, {0})}));
  SimulationResult det = simulate(flat, recommended_agent(flat, one), one, 9, 1000);
  CHECK(det.mean_principal == 3.0);
  CHECK(det.se_principal == 0.0);
  CHECK(det.se_agent == 0.0);
}

TEST_CASE("Monte Carlo estimates agree with the exact expectation") {
  for (std::uint64_t seed : {1, 2, 3}) {
    Instance inst = fixtures::toy2(seed);
    PromiseFormPolicy sigma = solve(inst, 0.1).policy;
    AgentPolicy br = best_response(sigma, inst);
    ExactValue ev = exact_value(sigma, br, inst);
    SimulationResult mc = simulate(sigma, br, inst, seed, 20000);
    CHECK(std::abs(mc.mean_principal - ev.principal) <= 4 * mc.se_principal + 1e-12);
    CHECK(std::abs(mc.mean_agent - ev.agent) <= 4 * mc.se_agent + 1e-12);
  }
}

TEST_CASE("simulation is reproducible from its seed") {
  Instance inst = fixtures::toy2(4);
  PromiseFormPolicy sigma = solve(inst, 0.1).policy;
  AgentPolicy br = best_response(sigma, inst);
  SimulationResult a = simulate(sigma, br, inst, 17, 500, true), b = simulate(sigma, br, inst, 17, 500, true);
  CHECK(a.mean_principal == b.mean_principal);
  REQUIRE(a.trajectories.size() == 500);
  for (std::size_t e = 0; e < 500; ++e) CHECK(trajectory_to_json(a.trajectories[e]) == trajectory_to_json(b.trajectories[e]));
  double total = 0.0;
  for (const Trajectory& tr : a.trajectories) {
    CHECK(tr.steps.size() == 2);
    double sum = 0.0;
    for (const TrajectoryStep& st : tr.steps) sum += st.principal_utility;
    CHECK(std::abs(sum - tr.principal_total) <= 1e-12);
    total += tr.principal_total;
  }
  CHECK(std::abs(total / 500 - a.mean_principal) <= 1e-12);
  CHECK(simulate(sigma, br, inst, 18, 500).trajectories.empty());
}

TEST_CASE("exact enumeration respects its history cap") {
  Instance inst = fixtures::toy2(2);
  PromiseFormPolicy sigma = solve(inst, 0.1).policy;
  AgentPolicy br = best_response(sigma, inst);
  const std::size_t n = exact_value(sigma, br, inst).histories;
  CHECK(n > 1);
  CHECK_THROWS_AS(exact_value(sigma, br, inst, n - 1), CapExceeded);
  CHECK_NOTHROW(exact_value(sigma, br, inst, n));
}
