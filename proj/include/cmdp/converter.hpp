#pragma once

#include <vector>

#include "cmdp/policy.hpp"

namespace cmdp {

// How best-response ties are broken when relabeling recommended actions.
enum class TieRule {
  Incumbent,  // keep the current recommendation, then the principal's best, then lowest index
  Principal,  // principal's best continuation, then the current recommendation, then lowest index
};

// Blends every contract with the reward: p'(s') = (1 - sqrt(eps)) p(s') + sqrt(eps) r(s, s').
PromiseFormPolicy change_contracts(const PromiseFormPolicy& sigma, double epsilon, const Instance& inst);

// labels[t][s][i][c] is the best response chosen for choice c of node i.
using ActionLabels = std::vector<std::vector<std::vector<std::vector<int>>>>;

// Replaces every supported recommendation with the agent's best response.
PromiseFormPolicy realign_actions(const PromiseFormPolicy& sigma, const Instance& inst,
                                  TieRule tie = TieRule::Incumbent, ActionLabels* labels = nullptr);

// Old promises of one (step, state) sharing an agent value, with the
// principal value each achieves and the one that is kept.
struct PromiseCluster {
  double new_promise = 0.0;
  std::vector<int> members;  // old node indices
  std::vector<double> principal_value;
  int chosen = -1;  // old node index
};

struct ConflictTables {
  std::vector<std::vector<std::vector<PromiseCluster>>> clusters;  // [t][s]
  std::vector<std::vector<std::vector<int>>> new_index;            // [t][s][old node] -> new node
};

// Relabels promises by the agent's realized value, merging equal values into
// the member with the best principal value.
PromiseFormPolicy realign_promises(const PromiseFormPolicy& sigma, const Instance& inst,
                                   ConflictTables* conflicts = nullptr);

struct ConversionReport {
  double epsilon = 0.0;
  double value_in = 0.0;
  double value_actions = 0.0;  // after relabeling actions
  double value_out = 0.0;
  double ic_in = 0.0;
  double ic_actions = 0.0;
  double ic_out = 0.0;
  double honesty_out = 0.0;
  std::size_t promises_in = 0, menu_in = 0;
  std::size_t promises_out = 0, menu_out = 0;
  bool direct_out = true;
  double seconds = 0.0;
};

struct ConversionResult {
  PromiseFormPolicy blended;   // after change_contracts
  PromiseFormPolicy relabeled; // after realign_actions
  PromiseFormPolicy policy;    // final IC and honest policy
  ConversionReport report;
};

ConversionResult convert(const PromiseFormPolicy& sigma, double epsilon, const Instance& inst,
                         TieRule tie = TieRule::Incumbent);

nlohmann::json conversion_report_to_json(const ConversionReport& report);

}  // namespace cmdp
