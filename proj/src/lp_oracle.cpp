#include "cmdp/lp_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cmdp {

namespace {

constexpr double kSnap = 1e-9;
// Action weights below this are treated as numerical noise of the simplex.
constexpr double kAlphaFloor = 1e-12;

std::string name3(const char* base, int a, int s) {
  std::ostringstream os;
  os << base << "_a" << a << "_s" << s;
  return os.str();
}

}  // namespace

PromiseGrid PromiseGrid::make(const Instance& inst, double delta, bool* clamped) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ValidationError("promise grid step must be positive");
  bool c = false;
  if (delta < 1e-7) {
    delta = 1e-7;
    c = true;
  }
  if (clamped) *clamped = c;
  PromiseGrid g;
  g.delta = delta;
  double top = inst.horizon * inst.payment_bound / delta;
  g.size = static_cast<std::int64_t>(std::floor(top + kSnap * std::max(1.0, top))) + 1;
  return g;
}

std::int64_t PromiseGrid::floor_index(double x) const {
  double y = x / delta;
  double r = std::round(y);
  if (std::abs(y - r) <= kSnap) return static_cast<std::int64_t>(r);
  return static_cast<std::int64_t>(std::floor(y));
}

std::int64_t PromiseGrid::ceil_index(double x) const {
  double y = x / delta;
  double r = std::round(y);
  if (std::abs(y - r) <= kSnap) return static_cast<std::int64_t>(r);
  return static_cast<std::int64_t>(std::ceil(y));
}

std::optional<std::int64_t> PromiseGrid::exact_index(double x) const {
  double y = x / delta;
  double r = std::round(y);
  if (std::abs(y - r) <= kSnap && r >= 0 && r < static_cast<double>(size)) return static_cast<std::int64_t>(r);
  return std::nullopt;
}

std::int64_t StepTable::prefix_length(int s) const {
  const auto& row = value[s];
  std::int64_t k = 0;
  while (k < static_cast<std::int64_t>(row.size()) && row[k] > kNegInf) ++k;
  return k;
}

bool StepTable::is_prefix(int s) const {
  std::int64_t n = prefix_length(s);
  const auto& row = value[s];
  for (std::int64_t k = n; k < static_cast<std::int64_t>(row.size()); ++k)
    if (row[k] > kNegInf) return false;
  return true;
}

StepTable terminal_table(int num_states, const PromiseGrid& grid) {
  StepTable T;
  T.value.assign(num_states, std::vector<double>(grid.size, kNegInf));
  for (auto& row : T.value) row[0] = 0.0;
  return T;
}

CellLp build_lp(const Instance& inst, int t, int s, std::int64_t k, const PromiseGrid& grid, const StepTable& next,
                LpForm form, bool with_names) {
  const int S = inst.num_states, A = inst.num_actions;
  const bool full = form == LpForm::Full;
  CellLp cell;
  CellLayout& L = cell.layout;
  L.num_states = S;
  L.num_actions = A;
  L.nu.assign(A, -1);
  L.gamma.assign(A * S, -1);
  L.xi_begin.assign(A * S, -1);
  L.xi_count.assign(A * S, 0);
  LinearProgram& lp = cell.lp;

  std::vector<int> rep = full ? std::vector<int>() : action_representatives(inst, t, s);
  auto included = [&](int a) { return full || rep[a] == a; };
  std::vector<std::int64_t> feasible(S);
  for (int s2 = 0; s2 < S; ++s2) feasible[s2] = next.prefix_length(s2);

  for (int a = 0; a < A; ++a) {
    if (!included(a)) continue;
    double reward = 0.0;
    for (int s2 = 0; s2 < S; ++s2) reward += inst.P(t, s, a, s2) * inst.r(t, s, s2);
    L.nu[a] = lp.add_var(reward, with_names ? "nu_a" + std::to_string(a) : std::string());
  }
  for (int a = 0; a < A; ++a) {
    if (!included(a)) continue;
    for (int s2 = 0; s2 < S; ++s2) {
      double p = inst.P(t, s, a, s2);
      if (!full && p <= 0.0) continue;
      L.gamma[a * S + s2] = lp.add_var(-p, with_names ? name3("gamma", a, s2) : std::string());
      if (feasible[s2] == 0) continue;
      L.xi_begin[a * S + s2] = lp.num_vars;
      L.xi_count[a * S + s2] = feasible[s2];
      for (std::int64_t k2 = 0; k2 < feasible[s2]; ++k2)
        lp.add_var(p * next.value[s2][k2],
                   with_names ? name3("xi", a, s2) + "_k" + std::to_string(k2) : std::string());
    }
  }

  const double iota = grid.value(k);
  // Agent's promised value expression.
  std::vector<std::pair<int, double>> honesty;
  for (int a = 0; a < A; ++a) {
    if (!included(a)) continue;
    honesty.push_back({L.nu[a], -inst.c(t, s, a)});
    for (int s2 = 0; s2 < S; ++s2) {
      int g = L.gamma[a * S + s2];
      if (g < 0) continue;
      double p = inst.P(t, s, a, s2);
      if (p != 0.0) honesty.push_back({g, p});
      int x = L.xi_begin[a * S + s2];
      if (x < 0 || p == 0.0) continue;
      for (std::int64_t k2 = 1; k2 < L.xi_count[a * S + s2]; ++k2)
        honesty.push_back({x + static_cast<int>(k2), p * grid.value(k2)});
    }
  }
  L.honesty_ge_row = lp.add_row(honesty, RowSense::GreaterEqual, iota - grid.delta, "honesty_ge");
  L.honesty_le_row = lp.add_row(honesty, RowSense::LessEqual, iota + grid.delta, "honesty_le");

  // Incentive constraints: action a must beat every alternative under its own
  // contract and promises.
  for (int a = 0; a < A; ++a) {
    if (!included(a)) continue;
    for (int b = 0; b < A; ++b) {
      if (b == a || !included(b)) continue;
      std::vector<std::pair<int, double>> row;
      double dc = inst.c(t, s, b) - inst.c(t, s, a);
      if (dc != 0.0) row.push_back({L.nu[a], dc});
      for (int s2 = 0; s2 < S; ++s2) {
        double dp = inst.P(t, s, a, s2) - inst.P(t, s, b, s2);
        if (dp == 0.0) continue;
        int g = L.gamma[a * S + s2];
        if (g >= 0) row.push_back({g, dp});
        int x = L.xi_begin[a * S + s2];
        if (x < 0) continue;
        for (std::int64_t k2 = 1; k2 < L.xi_count[a * S + s2]; ++k2)
          row.push_back({x + static_cast<int>(k2), dp * grid.value(k2)});
      }
      lp.add_row(row, RowSense::GreaterEqual, 0.0, "ic_a" + std::to_string(a) + "_b" + std::to_string(b));
    }
  }
  // Payment bounds gamma <= B nu.
  for (int a = 0; a < A; ++a) {
    if (!included(a)) continue;
    for (int s2 = 0; s2 < S; ++s2) {
      int g = L.gamma[a * S + s2];
      if (g < 0) continue;
      lp.add_row({{g, 1.0}, {L.nu[a], -inst.payment_bound}}, RowSense::LessEqual, 0.0, name3("paybound", a, s2));
    }
  }
  // Promise lotteries carry the action's mass.
  std::vector<char> blocked(A, 0);
  for (int a = 0; a < A; ++a) {
    if (!included(a)) continue;
    for (int s2 = 0; s2 < S; ++s2) {
      int x = L.xi_begin[a * S + s2];
      if (x < 0) {
        if (feasible[s2] == 0 && inst.P(t, s, a, s2) > 0.0) {
          lp.add_row({{L.nu[a], -1.0}}, RowSense::Equal, 0.0, name3("mass", a, s2));
          blocked[a] = 1;
        }
        continue;
      }
      std::vector<std::pair<int, double>> row;
      for (std::int64_t k2 = 0; k2 < L.xi_count[a * S + s2]; ++k2) row.push_back({x + static_cast<int>(k2), 1.0});
      row.push_back({L.nu[a], -1.0});
      lp.add_row(row, RowSense::Equal, 0.0, name3("mass", a, s2));
    }
  }
  std::vector<std::pair<int, double>> total;
  for (int a = 0; a < A; ++a)
    if (included(a)) total.push_back({L.nu[a], 1.0});
  lp.add_row(total, RowSense::Equal, 1.0, "simplex");
  cell.structurally_infeasible = true;
  for (int a = 0; a < A; ++a)
    if (included(a) && !blocked[a]) cell.structurally_infeasible = false;
  return cell;
}

LpSolution solution_from_result(const CellLp& cell, const LpResult& res) {
  const CellLayout& L = cell.layout;
  const int S = L.num_states, A = L.num_actions;
  LpSolution sol;
  if (res.status != LpStatus::Optimal) return sol;
  sol.feasible = true;
  sol.objective = res.objective;
  sol.nu.assign(A, 0.0);
  sol.gamma.assign(A * S, 0.0);
  sol.xi.assign(A * S, {});
  for (int a = 0; a < A; ++a) {
    if (L.nu[a] < 0) continue;
    sol.nu[a] = res.x[L.nu[a]];
    for (int s2 = 0; s2 < S; ++s2) {
      int g = L.gamma[a * S + s2];
      if (g >= 0) sol.gamma[a * S + s2] = res.x[g];
      int x = L.xi_begin[a * S + s2];
      auto& out = sol.xi[a * S + s2];
      if (x < 0) {
        if (sol.nu[a] > 0.0) out.push_back({0, sol.nu[a]});
        continue;
      }
      for (std::int64_t k2 = 0; k2 < L.xi_count[a * S + s2]; ++k2) {
        double v = res.x[x + k2];
        if (v > 0.0) out.push_back({k2, v});
      }
    }
  }
  return sol;
}

LpSolution solve_lp(const CellLp& cell, LpSolver& solver) {
  if (cell.structurally_infeasible) return LpSolution{};
  return solution_from_result(cell, solver.solve(cell.lp));
}

LpSolution solve_lp(const CellLp& cell) {
  SimplexSolver solver;
  return solve_lp(cell, solver);
}

RelaxedSolution lp_to_relaxed(const LpSolution& sol, const Instance& inst, int t, const PromiseGrid& grid) {
  (void)t;
  const int S = inst.num_states, A = inst.num_actions;
  RelaxedSolution rel;
  rel.alpha.assign(A, 0.0);
  rel.contracts.assign(A, Contract::zero(S));
  rel.qtilde.assign(A * S, {});
  rel.q.assign(A * S, 0.0);
  double mass = 0.0;
  for (int a = 0; a < A; ++a)
    if (sol.nu[a] > kAlphaFloor) mass += sol.nu[a];
  for (int a = 0; a < A; ++a) {
    double nu = sol.nu[a];
    bool active = nu > kAlphaFloor;
    rel.alpha[a] = active ? nu / mass : 0.0;
    for (int s2 = 0; s2 < S; ++s2) {
      auto& qt = rel.qtilde[a * S + s2];
      if (!active) {
        qt.push_back({0, 1.0});
        continue;
      }
      rel.contracts[a].pay[s2] = std::clamp(sol.gamma[a * S + s2] / nu, 0.0, inst.payment_bound);
      double w = 0.0;
      for (auto [k2, v] : sol.xi[a * S + s2]) w += v;
      double mean = 0.0;
      for (auto [k2, v] : sol.xi[a * S + s2]) {
        qt.push_back({k2, v / w});
        mean += (v / w) * grid.value(k2);
      }
      if (qt.empty()) qt.push_back({0, 1.0});
      rel.q[a * S + s2] = mean;
    }
  }
  return rel;
}

LpSolution relaxed_to_lp(const RelaxedSolution& rel) {
  const int A = static_cast<int>(rel.alpha.size());
  const int S = A > 0 ? static_cast<int>(rel.contracts[0].pay.size()) : 0;
  LpSolution sol;
  sol.feasible = true;
  sol.nu = rel.alpha;
  sol.gamma.assign(A * S, 0.0);
  sol.xi.assign(A * S, {});
  for (int a = 0; a < A; ++a)
    for (int s2 = 0; s2 < S; ++s2) {
      sol.gamma[a * S + s2] = rel.alpha[a] * rel.contracts[a].pay[s2];
      if (rel.alpha[a] == 0.0) continue;
      for (auto [k2, w] : rel.qtilde[a * S + s2]) sol.xi[a * S + s2].push_back({k2, rel.alpha[a] * w});
    }
  return sol;
}

std::optional<std::int64_t> discretize(double q, const std::vector<double>& next_row, const PromiseGrid& grid) {
  double y = q / grid.delta;
  double r = std::round(y);
  std::int64_t cands[2];
  int n = 0;
  if (std::abs(y - r) <= kSnap) {
    cands[n++] = static_cast<std::int64_t>(r);
  } else {
    std::int64_t lo = static_cast<std::int64_t>(std::floor(y));
    cands[n++] = lo;
    cands[n++] = lo + 1;
  }
  std::optional<std::int64_t> best;
  double best_val = kNegInf;
  for (int i = 0; i < n; ++i) {
    std::int64_t k = cands[i];
    if (k < 0 || k >= static_cast<std::int64_t>(next_row.size())) continue;
    double m = next_row[k];
    if (!(m > kNegInf)) continue;
    if (!best || m > best_val) {
      best = k;
      best_val = m;
    }
  }
  return best;
}

double principal_objective(const Instance& inst, int t, int s, const StepTable& next, const PromiseGrid& grid,
                           const std::vector<double>& alpha, const std::vector<Contract>& contracts,
                           const std::vector<std::int64_t>& z) {
  (void)grid;
  const int S = inst.num_states;
  double v = 0.0;
  for (int a = 0; a < inst.num_actions; ++a) {
    if (alpha[a] <= 0.0) continue;
    double inner = 0.0;
    for (int s2 = 0; s2 < S; ++s2) {
      double p = inst.P(t, s, a, s2);
      if (p == 0.0) continue;
      inner += p * (inst.r(t, s, s2) - contracts[a].pay[s2] + next.at(s2, z[a * S + s2]));
    }
    v += alpha[a] * inner;
  }
  return v;
}

double relaxed_objective(const Instance& inst, int t, int s, const StepTable& next, const RelaxedSolution& rel) {
  const int S = inst.num_states;
  double v = 0.0;
  for (int a = 0; a < inst.num_actions; ++a) {
    if (rel.alpha[a] <= 0.0) continue;
    double inner = 0.0;
    for (int s2 = 0; s2 < S; ++s2) {
      double p = inst.P(t, s, a, s2);
      if (p == 0.0) continue;
      double y = 0.0;
      for (auto [k2, w] : rel.qtilde[a * S + s2]) y += w * next.at(s2, k2);
      inner += p * (inst.r(t, s, s2) - rel.contracts[a].pay[s2] + y);
    }
    v += rel.alpha[a] * inner;
  }
  return v;
}

double promised_agent_value(const Instance& inst, int t, int s, const std::vector<double>& alpha,
                            const std::vector<Contract>& contracts, const std::vector<double>& w) {
  const int S = inst.num_states;
  double v = 0.0;
  for (int a = 0; a < inst.num_actions; ++a) {
    if (alpha[a] <= 0.0) continue;
    double inner = 0.0;
    for (int s2 = 0; s2 < S; ++s2) {
      double p = inst.P(t, s, a, s2);
      if (p == 0.0) continue;
      inner += p * (contracts[a].pay[s2] - inst.c(t, s, a) + w[a * S + s2]);
    }
    v += alpha[a] * inner;
  }
  return v;
}

double local_ic_violation(const Instance& inst, int t, int s, const std::vector<double>& alpha,
                          const std::vector<Contract>& contracts, const std::vector<double>& w) {
  const int S = inst.num_states, A = inst.num_actions;
  double worst = 0.0;
  for (int a = 0; a < A; ++a) {
    if (alpha[a] <= 0.0) continue;
    auto value = [&](int b) {
      double v = 0.0;
      for (int s2 = 0; s2 < S; ++s2) {
        double p = inst.P(t, s, b, s2);
        if (p == 0.0) continue;
        v += p * (contracts[a].pay[s2] - inst.c(t, s, b) + w[a * S + s2]);
      }
      return v;
    };
    double own = value(a);
    for (int b = 0; b < A; ++b) worst = std::max(worst, value(b) - own);
  }
  return worst;
}

namespace {

OracleResult finish(const Instance& inst, int t, const PromiseGrid& grid, const StepTable& next, const CellLp& cell,
                    const LpResult& res) {
  OracleResult out;
  out.lp_iterations = res.iterations;
  if (res.status == LpStatus::Unbounded) throw NumericalError("cell program reported unbounded");
  if (res.status != LpStatus::Optimal) return out;
  LpSolution sol = solution_from_result(cell, res);
  RelaxedSolution rel = lp_to_relaxed(sol, inst, t, grid);
  const int S = inst.num_states, A = inst.num_actions;
  out.feasible = true;
  out.value = sol.objective;
  out.alpha = rel.alpha;
  out.contracts = rel.contracts;
  out.q = rel.q;
  out.qtilde = rel.qtilde;
  out.z.assign(A * S, 0);
  for (int a = 0; a < A; ++a)
    for (int s2 = 0; s2 < S; ++s2) {
      auto z = discretize(rel.q[a * S + s2], next.value[s2], grid);
      if (!z) throw NumericalError("no feasible grid promise within delta of the mean promise");
      out.z[a * S + s2] = *z;
    }
  return out;
}

}  // namespace

OracleResult approximation_oracle(const Instance& inst, int t, int s, std::int64_t k, const PromiseGrid& grid,
                                  const StepTable& next) {
  CellLp cell = build_lp(inst, t, s, k, grid, next, LpForm::Reduced, false);
  if (cell.structurally_infeasible) return OracleResult{};
  LpResult res = SimplexSolver().solve(cell.lp);
  return finish(inst, t, grid, next, cell, res);
}

CellSweep::CellSweep(const Instance& inst, int t, int s, const PromiseGrid& grid, const StepTable& next)
    : inst_(inst), t_(t), s_(s), grid_(grid), next_(next) {
  cell_ = build_lp(inst, t, s, 0, grid, next, LpForm::Reduced, false);
  if (!cell_.structurally_infeasible) session_ = std::make_unique<SimplexSession>(cell_.lp);
}

CellSweep::~CellSweep() = default;

OracleResult CellSweep::solve(std::int64_t k) {
  if (cell_.structurally_infeasible) return OracleResult{};
  double iota = grid_.value(k);
  session_->set_rhs(cell_.layout.honesty_ge_row, iota - grid_.delta);
  session_->set_rhs(cell_.layout.honesty_le_row, iota + grid_.delta);
  LpResult res = session_->solve();
  return finish(inst_, t_, grid_, next_, cell_, res);
}

}  // namespace cmdp
