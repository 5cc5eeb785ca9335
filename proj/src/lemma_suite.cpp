#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cmdp/verifier.hpp"

namespace cmdp {

namespace {

constexpr double kExact = 1e-9;
constexpr double kLoose = 1e-6;

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// Adds a check that passes when measured <= bound.
void at_most(LemmaReport& rep, std::string name, double measured, double bound, std::string detail = {}) {
  rep.checks.push_back(LemmaCheck{std::move(name), measured, bound, measured <= bound, std::move(detail)});
}

}  // namespace

bool LemmaReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const LemmaCheck& c) { return c.pass; });
}

std::string LemmaReport::text() const {
  std::ostringstream os;
  for (const LemmaCheck& c : checks) {
    os << (c.pass ? "PASS " : "FAIL ") << c.name << " measured=" << fmt(c.measured) << " bound=" << fmt(c.bound);
    if (!c.detail.empty()) os << " " << c.detail;
    os << "\n";
  }
  return os.str();
}

nlohmann::json LemmaReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const LemmaCheck& c : checks)
    arr.push_back({{"name", c.name}, {"measured", c.measured}, {"bound", c.bound}, {"pass", c.pass}, {"detail", c.detail}});
  return {{"checks", arr}, {"all_pass", all_pass()}};
}

LemmaReport check_policy_lemmas(const PromiseFormPolicy& sigma, const Instance& inst) {
  require_valid_policy(sigma, inst);
  const int H = inst.horizon, S = inst.num_states;
  LemmaReport rep;
  ValueTables vt = evaluate(sigma, inst);
  const double eta = honesty_residual(sigma, inst).max;
  const double kappa = local_ic_residual(sigma, inst);

  double drift = 0.0;
  for (int t = 0; t < H; ++t)
    for (int s = 0; s < S; ++s)
      for (std::size_t i = 0; i < sigma.nodes[t][s].size(); ++i)
        drift = std::max(drift, std::abs(vt.at[t][s][i].va - sigma.nodes[t][s][i].promise) - eta * (H - t));
  at_most(rep, "honesty_propagation", drift, kExact, "eta=" + fmt(eta));

  const double eps = ic_epsilon(sigma, inst, vt).epsilon;
  const double lift = 2.0 * eta * H * H + kappa * H;
  at_most(rep, "local_ic_lifting", eps, lift + kExact, "kappa=" + fmt(kappa));

  AgentPolicy rec = recommended_agent(sigma, inst);
  ExactValue dfs = exact_value(sigma, rec, inst);
  at_most(rep, "recommended_value_matches_evaluation", std::abs(dfs.principal - vt.value), kExact);
  ExactValue recursive = recursive_value(sigma, rec, inst);
  at_most(rep, "recursive_value_matches_enumeration",
          std::max(std::abs(recursive.principal - dfs.principal), std::abs(recursive.agent - dfs.agent)), kExact);

  double rec_agent = recursive.agent;
  double dominance = 0.0, gain = 0.0;
  for (AgentTie tie : {AgentTie::Recommendation, AgentTie::Principal, AgentTie::Adversarial, AgentTie::Lexicographic}) {
    AgentPolicy br = best_response(sigma, inst, tie);
    double v = recursive_value(sigma, br, inst).agent;
    dominance = std::max(dominance, rec_agent - v);
    gain = std::max(gain, v - rec_agent);
  }
  at_most(rep, "best_response_dominates", dominance, kExact);
  at_most(rep, "deviation_gain_within_ic_epsilon", gain, eps + kExact);
  return rep;
}

LemmaReport check_lemma_suite(const Instance& inst, const SuiteOptions& options) {
  options.enum_config.check();
  const double eps = options.epsilon;
  const int H = inst.horizon, S = inst.num_states;
  DpOptions dopt;
  dopt.delta_override = options.delta_override;
  dopt.early_exit = false;
  DpResult dp = solve(inst, eps, dopt);
  const PromiseFormPolicy& sigma = dp.policy;
  const double delta = dp.table.grid.delta;

  LemmaReport rep = check_policy_lemmas(sigma, inst);
  ValueTables vt = evaluate(sigma, inst);
  at_most(rep, "value_at_least_table", dp.report.table_value - vt.value, kExact);
  at_most(rep, "solver_ic_epsilon", ic_epsilon(sigma, inst, vt).epsilon, eps + kLoose);
  at_most(rep, "solver_honesty", honesty_residual(sigma, inst).max, 2.0 * delta + kExact);
  at_most(rep, "solver_local_ic", local_ic_residual(sigma, inst), 2.0 * delta + kExact);

  int non_prefix = 0;
  double convexity = 0.0;
  for (int t = 0; t <= H; ++t)
    for (int s = 0; s < S; ++s) {
      const StepTable& M = dp.table.M[t];
      if (!M.is_prefix(s)) ++non_prefix;
      const std::int64_t n = M.prefix_length(s);
      for (std::int64_t k = 1; k + 1 < n; ++k)
        convexity = std::max(convexity, M.value[s][k - 1] + M.value[s][k + 1] - 2.0 * M.value[s][k]);
    }
  at_most(rep, "feasible_promises_form_prefix", non_prefix, 0.0);
  at_most(rep, "table_concave", convexity, kLoose);

  const double slack = (H + 1) * std::sqrt(eps);
  ConversionResult conv = convert(sigma, eps, inst);
  ValueTables v2 = evaluate(conv.relabeled, inst);
  ValueTables v3 = evaluate(conv.policy, inst);

  if (options.with_opt) {
    try {
      OptResult opt = enumerate_opt(inst, options.enum_config);
      at_most(rep, "solver_at_least_opt", opt.value - vt.value, kLoose, "opt=" + fmt(opt.value));
      at_most(rep, "converted_near_opt", opt.value - v3.value, slack + kLoose, "opt=" + fmt(opt.value));
      ValueTables vo = evaluate(opt.witness, inst);
      double excess = 0.0;
      for (int t = 0; t < H; ++t)
        for (int s = 0; s < S; ++s)
          for (std::size_t i = 0; i < opt.witness.nodes[t][s].size(); ++i) {
            const double u = opt.witness.nodes[t][s][i].promise, w = vo.at[t][s][i].vp;
            for (std::int64_t k : {dp.table.grid.floor_index(u), dp.table.grid.ceil_index(u)})
              excess = std::max(excess, w - dp.table.M[t].at(s, k));
          }
      at_most(rep, "table_dominates_opt_witness", excess, kLoose);
    } catch (const CapExceeded& e) {
      rep.checks.push_back(LemmaCheck{"opt_search", 0.0, 0.0, true, std::string("skipped: ") + e.what()});
    }
  }

  at_most(rep, "relabeled_ic", ic_epsilon(conv.relabeled, inst, v2).epsilon, kExact);
  at_most(rep, "converted_ic", ic_epsilon(conv.policy, inst, v3).epsilon, kExact);
  at_most(rep, "converted_honest", honesty_residual(conv.policy, inst).max, kExact);
  at_most(rep, "promise_realignment_keeps_value", v2.value - v3.value, kExact);
  at_most(rep, "conversion_loss", vt.value - v3.value, slack + kLoose, "slack=" + fmt(slack));
  at_most(rep, "conversion_never_grows",
          std::max(static_cast<double>(conv.policy.promise_count()) - static_cast<double>(sigma.promise_count()),
                   static_cast<double>(conv.policy.menu_count()) - static_cast<double>(sigma.menu_count())),
          0.0);

  double worst_tie = 0.0;
  for (AgentTie tie : {AgentTie::Recommendation, AgentTie::Principal, AgentTie::Adversarial, AgentTie::Lexicographic}) {
    AgentPolicy br = best_response(conv.blended, inst, tie);
    worst_tie = std::max(worst_tie, vt.value - recursive_value(conv.blended, br, inst).principal);
  }
  at_most(rep, "blended_robust_to_ties", worst_tie, slack + kLoose);

  AgentPolicy br = best_response(conv.blended, inst, AgentTie::Recommendation);
  at_most(rep, "relabeled_matches_best_response",
          std::abs(v2.value - recursive_value(conv.blended, br, inst).principal), kExact);

  ActionLabels labels;
  realign_actions(conv.blended, inst, TieRule::Incumbent, &labels);
  int mismatches = 0;
  for (int t = 0; t < H; ++t)
    for (int s = 0; s < S; ++s)
      for (std::size_t i = 0; i < conv.blended.nodes[t][s].size(); ++i) {
        const PromiseNode& nd = conv.blended.nodes[t][s][i];
        for (std::size_t c = 0; c < nd.choice.size(); ++c)
          if (labels[t][s][i][c] != br.play(t, s, static_cast<int>(i), nd.choice[c].entry)) ++mismatches;
      }
  at_most(rep, "relabeling_equals_best_response", mismatches, 0.0);
  return rep;
}

}  // namespace cmdp
