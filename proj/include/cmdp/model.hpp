#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmdp/common.hpp"

namespace cmdp {

// Steps are 0-based throughout the library: step t covers the decision at
// time t + 1 of a horizon-H episode, and t == H denotes the terminal layer.

// Finite-horizon, time-inhomogeneous MDP shared by the principal and the agent.
struct Instance {
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> initial;     // [s]
  std::vector<double> transition;  // [t][s][a][s']
  std::vector<double> reward;      // [t][s][s'], principal reward of the move s -> s'
  std::vector<double> cost;        // [t][s][a], agent cost in [0, 1]
  double payment_bound = 1.0;
  std::vector<std::string> state_names;   // optional metadata
  std::vector<std::string> action_names;  // optional metadata

  // Allocates an all-zero instance of the given dimensions.
  static Instance zeros(int horizon, int num_states, int num_actions, double payment_bound);

  std::size_t p_index(int t, int s, int a, int s2) const {
    return ((static_cast<std::size_t>(t) * num_states + s) * num_actions + a) * num_states + s2;
  }
  std::size_t r_index(int t, int s, int s2) const {
    return (static_cast<std::size_t>(t) * num_states + s) * num_states + s2;
  }
  std::size_t c_index(int t, int s, int a) const {
    return (static_cast<std::size_t>(t) * num_states + s) * num_actions + a;
  }

  double P(int t, int s, int a, int s2) const { return transition[p_index(t, s, a, s2)]; }
  double& P(int t, int s, int a, int s2) { return transition[p_index(t, s, a, s2)]; }
  double r(int t, int s, int s2) const { return reward[r_index(t, s, s2)]; }
  double& r(int t, int s, int s2) { return reward[r_index(t, s, s2)]; }
  double c(int t, int s, int a) const { return cost[c_index(t, s, a)]; }
  double& c(int t, int s, int a) { return cost[c_index(t, s, a)]; }

  // Pointer to the next-state distribution P(. | s, a) at step t.
  const double* row(int t, int s, int a) const { return &transition[p_index(t, s, a, 0)]; }

  double max_reward() const;

  bool operator==(const Instance&) const = default;
};

// Payment vector over next states, every entry in [0, B].
struct Contract {
  std::vector<double> pay;

  static Contract zero(int num_states) { return Contract{std::vector<double>(num_states, 0.0)}; }
  bool within_bound(double bound, double tol = 0.0) const;
  bool operator==(const Contract&) const = default;
};

// True when two contracts agree entrywise within tol.
bool same_contract(const Contract& a, const Contract& b, double tol = 1e-12);

// Sequence (s_1, p_1, a_1, ..., s_{h-1}, p_{h-1}, a_{h-1}, s_h). Actions are the
// principal's recommendations, never the actions the agent actually played.
// contract_ids optionally records which menu entry each contract came from
// (-1 when unknown); it lets two numerically equal contracts stay distinct.
struct History {
  std::vector<int> states;
  std::vector<Contract> contracts;
  std::vector<int> contract_ids;
  std::vector<int> actions;

  static History start(int s) { return History{{s}, {}, {}, {}}; }

  // Number of states in the history, i.e. the 1-based step h of its last state.
  int length() const { return static_cast<int>(states.size()); }
  int last_state() const { return states.back(); }

  History extended(const Contract& p, int contract_id, int action, int next_state) const;
  // Prefix ending at the h-th state (1-based), i.e. tau(s_h).
  History prefix(int h) const;
  // Suffix starting at the h-th state (1-based).
  History suffix(int h) const;

  bool operator==(const History&) const = default;
};

// Concatenation of a history with another that starts at its last state.
History concat(const History& head, const History& tail);

// Whether the history is well formed for the instance (alternation, indices).
bool history_well_formed(const History& tau, const Instance& inst, std::string* why = nullptr);

// One contract and one recommended action per (step, state).
struct MarkovianPolicy {
  std::vector<std::vector<Contract>> contracts;  // [t][s]
  std::vector<std::vector<int>> actions;         // [t][s]
};

struct Issue {
  std::string rule;
  std::string location;
  std::string message;
};

struct ValidationReport {
  std::vector<Issue> violations;
  std::vector<Issue> warnings;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

ValidationReport validate_instance(const Instance& inst);

nlohmann::json instance_to_json(const Instance& inst);
// Throws ValidationError on schema or invariant violations.
Instance instance_from_json(const nlohmann::json& j);
Instance load_instance(const std::string& path);
void save_instance(const Instance& inst, const std::string& path);

// reach[t][s] is true when state s can be occupied at step t (t in 0..H)
// under some sequence of agent actions starting from the support of mu.
std::vector<std::vector<char>> reachable_states(const Instance& inst);

// Actions at (t, s) that share cost and next-state row with a lower-indexed
// action are mapped to that action; returns the representative per action.
std::vector<int> action_representatives(const Instance& inst, int t, int s);

}  // namespace cmdp
