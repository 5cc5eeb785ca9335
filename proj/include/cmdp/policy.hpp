#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmdp/model.hpp"

namespace cmdp {

// One (contract, recommended action) offer of a promise node, with the
// promise transition for every next state.
struct MenuEntry {
  int action = 0;
  Contract contract;
  // next[s'] indexes the promise nodes of state s' at the following step;
  // -1 is allowed only for next states that no action can reach. At the last
  // step every entry is 0, the terminal promise.
  std::vector<int> next;
};

struct Choice {
  int entry = 0;  // index into the node's menu
  double prob = 0.0;
};

// A promise of one (step, state) together with its menu and lottery.
struct PromiseNode {
  double promise = 0.0;
  std::int64_t grid_index = -1;  // k with promise = k * grid_step, or -1
  std::vector<MenuEntry> menu;   // sorted by action; entries with equal action keep their contract-id order
  std::vector<Choice> choice;    // sorted by entry index, all probabilities positive
};

// Compact history-dependent commitment: promise sets, contract menus,
// lotteries over (contract, action), and promise transitions.
struct PromiseFormPolicy {
  int horizon = 0;
  int num_states = 0;
  double grid_step = 0.0;  // positive when every promise is grid aligned
  bool direct = true;
  std::vector<std::vector<std::vector<PromiseNode>>> nodes;  // [t][s], sorted by promise

  static PromiseFormPolicy empty(int horizon, int num_states);

  const PromiseNode& node(int t, int s, int i) const { return nodes[t][s][i]; }
  // Rank of the entry among the node's entries with the same action.
  int contract_id(int t, int s, int i, int entry) const;
  // Entry index for (action, contract id), or -1.
  int find_entry(int t, int s, int i, int action, int contract_id) const;

  std::size_t promise_count() const;  // total number of promise nodes
  std::size_t menu_count() const;     // total number of menu entries
  // Recomputes the direct flag from the menus.
  bool menus_are_direct() const;
  // Sorts every menu by action (stable) and remaps the choices accordingly.
  void normalize_menus();
};

// Problems found in a policy's structure relative to an instance (empty = valid).
std::vector<std::string> validate_policy(const PromiseFormPolicy& sigma, const Instance& inst);
// Throws ValidationError listing every problem.
void require_valid_policy(const PromiseFormPolicy& sigma, const Instance& inst);

struct NodeValues {
  double vp = 0.0, va = 0.0, va_dev = 0.0;     // principal, agent, agent's best deviation
  std::vector<double> qp, qa, qa_dev;          // per menu entry
};

struct ValueTables {
  std::vector<std::vector<std::vector<NodeValues>>> at;  // [t][s][i]
  double value = 0.0;                                    // sum_s mu(s) V^P at the initial promise
};

ValueTables evaluate(const PromiseFormPolicy& sigma, const Instance& inst);

struct FoldResult {
  int step = 0;        // 0-based step of the last history state
  int state = 0;
  int node = 0;        // index into nodes[step][state]
  double promise = 0.0;
};

// Folds the promise transitions along the history.
FoldResult fold_promise(const PromiseFormPolicy& sigma, const Instance& inst, const History& tau);

struct Offer {
  Contract contract;
  int contract_id = 0;
  int action = 0;
  int entry = 0;
  double prob = 0.0;
};

// Lottery over (contract, action) that the policy plays after the history.
std::vector<Offer> implement_step(const PromiseFormPolicy& sigma, const Instance& inst, const History& tau);

struct ResidualMap {
  std::vector<std::vector<std::vector<double>>> at;  // [t][s][i]
  double max = 0.0;
};

// |sum phi sum P (p - c + next promise) - promise| per node.
ResidualMap honesty_residual(const PromiseFormPolicy& sigma, const Instance& inst);
// Largest gain of a one-step action swap with the same contract and promises.
double local_ic_residual(const PromiseFormPolicy& sigma, const Instance& inst);

// Nodes reachable from the initial promises through supported offers and next
// states that some action can reach.
std::vector<std::vector<std::vector<char>>> reachable_nodes(const PromiseFormPolicy& sigma, const Instance& inst);

struct IcReport {
  double epsilon = 0.0;              // over reachable nodes
  double epsilon_unreachable = 0.0;  // over the remaining nodes
  std::size_t reachable_nodes = 0;
};

// Largest deviation gain Q^dev - Q^A over supported offers.
IcReport ic_epsilon(const PromiseFormPolicy& sigma, const Instance& inst);
IcReport ic_epsilon(const PromiseFormPolicy& sigma, const Instance& inst, const ValueTables& tables);

nlohmann::json policy_to_json(const PromiseFormPolicy& sigma);
PromiseFormPolicy policy_from_json(const nlohmann::json& j);
PromiseFormPolicy load_policy(const std::string& path);
void save_policy(const PromiseFormPolicy& sigma, const std::string& path);

}  // namespace cmdp
