#pragma once

#include <cstdint>
#include <vector>

#include "cmdp/policy.hpp"

namespace cmdp {

enum class AgentTie {
  Recommendation,  // recommended action, then the principal's best, then lowest index
  Principal,       // principal's best, then the recommended action, then lowest index
  Adversarial,     // principal's worst, then lowest index
  Lexicographic,   // lowest index
};

// Played action and value bookkeeping of one promise node.
struct NodeAgent {
  std::vector<int> played;        // per menu entry
  std::vector<double> agent_q;    // agent's value of the entry under the played actions
  std::vector<double> principal_q;
  double agent_value = 0.0;       // lottery average of agent_q
  double principal_value = 0.0;
};

struct AgentPolicy {
  bool follows_recommendation = false;
  AgentTie tie = AgentTie::Recommendation;
  std::vector<std::vector<std::vector<NodeAgent>>> at;  // [t][s][i]

  int play(int t, int s, int node, int entry) const { return at[t][s][node].played[entry]; }
};

// Agent that maximizes its own cumulative utility against the policy.
AgentPolicy best_response(const PromiseFormPolicy& sigma, const Instance& inst, AgentTie tie = AgentTie::Recommendation);
// Agent that always plays the recommended action.
AgentPolicy recommended_agent(const PromiseFormPolicy& sigma, const Instance& inst);

struct TrajectoryStep {
  int state = 0;
  int node = 0;
  Contract contract;
  int contract_id = 0;
  int recommended = 0;
  int played = 0;
  int next_state = 0;
  double principal_utility = 0.0;  // r(s, s') - p(s')
  double agent_utility = 0.0;      // p(s') - c(s, played)
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  int final_state = 0;
  double principal_total = 0.0;
  double agent_total = 0.0;
};

nlohmann::json trajectory_to_json(const Trajectory& tr);

struct SimulationResult {
  std::vector<Trajectory> trajectories;  // kept only when requested
  double mean_principal = 0.0, se_principal = 0.0;
  double mean_agent = 0.0, se_agent = 0.0;
  long long episodes = 0;
};

// Episode e uses the uniform stream counter_uniform(seed, e, step, draw).
SimulationResult simulate(const PromiseFormPolicy& sigma, const AgentPolicy& agent, const Instance& inst,
                          std::uint64_t seed, long long episodes, bool keep_trajectories = false);

struct ExactValue {
  double principal = 0.0;
  double agent = 0.0;
  std::size_t histories = 0;  // supported complete histories visited
};

// Expectation by depth-first enumeration of every supported history; throws
// CapExceeded past `cap` histories.
ExactValue exact_value(const PromiseFormPolicy& sigma, const AgentPolicy& agent, const Instance& inst,
                       std::size_t cap = 1000000);
// Same expectation through the per-node recursion.
ExactValue recursive_value(const PromiseFormPolicy& sigma, const AgentPolicy& agent, const Instance& inst);

}  // namespace cmdp
