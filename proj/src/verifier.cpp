#include "cmdp/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "cmdp/generators.hpp"
#include "cmdp/simplex.hpp"

namespace cmdp {

namespace {

constexpr double kIcTol = 1e-12;
constexpr double kValueBucket = 1e-9;

bool reachable_by_some_action(const Instance& inst, int t, int s, int s2) {
  for (int b = 0; b < inst.num_actions; ++b)
    if (inst.P(t, s, b, s2) > 0.0) return true;
  return false;
}

std::vector<int> distinct_actions(const Instance& inst, int t, int s) {
  std::vector<int> rep = action_representatives(inst, t, s), out;
  for (int a = 0; a < inst.num_actions; ++a)
    if (rep[a] == a) out.push_back(a);
  return out;
}

std::vector<double> contract_grid(const Instance& inst, double step) {
  std::vector<double> g;
  std::int64_t n = static_cast<std::int64_t>(std::floor(inst.payment_bound / step + 1e-9));
  for (std::int64_t k = 0; k <= n; ++k) g.push_back(std::min(inst.payment_bound, static_cast<double>(k) * step));
  return g;
}

struct Cell {
  int t, s;
  std::vector<int> actions;
};

std::vector<Cell> reachable_cells(const Instance& inst) {
  auto reach = reachable_states(inst);
  std::vector<Cell> cells;
  for (int t = 0; t < inst.horizon; ++t)
    for (int s = 0; s < inst.num_states; ++s)
      if (reach[t][s]) cells.push_back(Cell{t, s, distinct_actions(inst, t, s)});
  return cells;
}

std::size_t count_assignments(const std::vector<Cell>& cells, std::size_t cap) {
  std::size_t n = 1;
  for (const Cell& c : cells) {
    n *= c.actions.size();
    if (n > cap) throw CapExceeded("Markovian enumeration exceeds the work cap");
  }
  return n;
}

// Advances a mixed-radix counter; false once it wraps around.
bool next_assignment(std::vector<int>& digit, const std::vector<Cell>& cells) {
  for (std::size_t i = cells.size(); i-- > 0;) {
    if (++digit[i] < static_cast<int>(cells[i].actions.size())) return true;
    digit[i] = 0;
  }
  return false;
}

MarkovianPolicy empty_markovian(const Instance& inst) {
  MarkovianPolicy rho;
  rho.contracts.assign(inst.horizon, std::vector<Contract>(inst.num_states, Contract::zero(inst.num_states)));
  rho.actions.assign(inst.horizon, std::vector<int>(inst.num_states, 0));
  return rho;
}

// Affine expression over the payment variables.
struct Affine {
  std::vector<double> coef;
  double constant = 0.0;
};

}  // namespace

void EnumConfig::check() const {
  if (!(contract_grid_step > 0.0)) throw ValidationError("contract grid step must be positive");
  if (history_cap < 1 || work_cap < 1) throw ValidationError("enumeration caps must be >= 1");
}

// ---- history-indexed values -------------------------------------------------

std::vector<HistoryValues> enumerate_values(const PromiseFormPolicy& sigma, const Instance& inst, std::size_t cap) {
  require_valid_policy(sigma, inst);
  const int H = inst.horizon, S = inst.num_states, A = inst.num_actions;
  std::vector<HistoryValues> out;
  struct Triple {
    double vp, va, va_dev;
  };
  std::function<Triple(const History&)> rec = [&](const History& tau) -> Triple {
    if (out.size() >= cap) throw CapExceeded("history enumeration exceeds the cap");
    const int t = tau.length() - 1, s = tau.last_state();
    HistoryValues hv;
    hv.history = tau;
    std::size_t slot = out.size();
    out.push_back(hv);
    std::vector<OfferValues> offers;
    Triple res{0.0, 0.0, 0.0};
    for (const Offer& o : implement_step(sigma, inst, tau)) {
      std::vector<Triple> cont(S, Triple{0.0, 0.0, 0.0});
      if (t + 1 < H)
        for (int s2 = 0; s2 < S; ++s2)
          if (reachable_by_some_action(inst, t, s, s2)) cont[s2] = rec(tau.extended(o.contract, o.contract_id, o.action, s2));
      OfferValues ov;
      ov.offer = o;
      for (int s2 = 0; s2 < S; ++s2) {
        double p = inst.P(t, s, o.action, s2);
        if (p == 0.0) continue;
        ov.qp += p * (inst.r(t, s, s2) - o.contract.pay[s2] + cont[s2].vp);
        ov.qa += p * (o.contract.pay[s2] - inst.c(t, s, o.action) + cont[s2].va);
      }
      ov.qa_dev = kNegInf;
      for (int b = 0; b < A; ++b) {
        double v = 0.0;
        for (int s2 = 0; s2 < S; ++s2) {
          double p = inst.P(t, s, b, s2);
          if (p == 0.0) continue;
          v += p * (o.contract.pay[s2] - inst.c(t, s, b) + cont[s2].va_dev);
        }
        ov.qa_dev = std::max(ov.qa_dev, v);
      }
      res.vp += o.prob * ov.qp;
      res.va += o.prob * ov.qa;
      res.va_dev += o.prob * ov.qa_dev;
      offers.push_back(ov);
    }
    out[slot].vp = res.vp;
    out[slot].va = res.va;
    out[slot].va_dev = res.va_dev;
    out[slot].offers = std::move(offers);
    return res;
  };
  for (int s = 0; s < S; ++s)
    if (inst.initial[s] > 0.0) rec(History::start(s));
  return out;
}

double max_table_discrepancy(const PromiseFormPolicy& sigma, const Instance& inst, std::size_t cap) {
  ValueTables vt = evaluate(sigma, inst);
  double worst = 0.0;
  for (const HistoryValues& hv : enumerate_values(sigma, inst, cap)) {
    FoldResult f = fold_promise(sigma, inst, hv.history);
    const NodeValues& nv = vt.at[f.step][f.state][f.node];
    worst = std::max({worst, std::abs(hv.vp - nv.vp), std::abs(hv.va - nv.va), std::abs(hv.va_dev - nv.va_dev)});
    for (const OfferValues& ov : hv.offers) {
      const int e = ov.offer.entry;
      worst = std::max({worst, std::abs(ov.qp - nv.qp[e]), std::abs(ov.qa - nv.qa[e]), std::abs(ov.qa_dev - nv.qa_dev[e])});
    }
  }
  return worst;
}

PromiseFormPolicy random_policy(const Instance& inst, std::uint64_t seed, int max_promises) {
  const int H = inst.horizon, S = inst.num_states, A = inst.num_actions;
  SplitMix64 rng(seed);
  PromiseFormPolicy sigma = PromiseFormPolicy::empty(H, S);
  std::vector<std::vector<int>> count(H, std::vector<int>(S, 1));
  for (int t = 1; t < H; ++t)
    for (int s = 0; s < S; ++s) count[t][s] = 1 + rng.below(std::max(1, max_promises));
  for (int t = 0; t < H; ++t)
    for (int s = 0; s < S; ++s) {
      double promise = rng.uniform();
      for (int i = 0; i < count[t][s]; ++i) {
        PromiseNode nd;
        nd.promise = promise;
        promise += 0.1 + rng.uniform();
        int entries = 1 + rng.below(2);
        for (int e = 0; e < entries; ++e) {
          MenuEntry m;
          m.action = rng.below(A);
          m.contract = Contract::zero(S);
          for (int s2 = 0; s2 < S; ++s2) m.contract.pay[s2] = rng.uniform() * inst.payment_bound;
          m.next.assign(S, 0);
          if (t + 1 < H)
            for (int s2 = 0; s2 < S; ++s2) m.next[s2] = rng.below(count[t + 1][s2]);
          nd.menu.push_back(std::move(m));
        }
        if (entries == 1) {
          nd.choice.push_back(Choice{0, 1.0});
        } else {
          switch (rng.below(3)) {
            case 0:
              nd.choice = {Choice{0, 0.5}, Choice{1, 0.5}};
              break;
            case 1:
              nd.choice = {Choice{0, 0.25}, Choice{1, 0.75}};
              break;
            default:
              nd.choice = {Choice{rng.below(2), 1.0}};
              break;
          }
        }
        sigma.nodes[t][s].push_back(std::move(nd));
      }
    }
  sigma.normalize_menus();
  sigma.direct = sigma.menus_are_direct();
  return sigma;
}

// ---- Markovian policies ------------------------------------------------------

MarkovianEvaluation evaluate_markovian(const MarkovianPolicy& rho, const Instance& inst) {
  const int H = inst.horizon, S = inst.num_states, A = inst.num_actions;
  MarkovianEvaluation ev;
  ev.agent_value.assign(H + 1, std::vector<double>(S, 0.0));
  ev.principal_value.assign(H + 1, std::vector<double>(S, 0.0));
  auto reach = reachable_states(inst);
  for (int t = H - 1; t >= 0; --t)
    for (int s = 0; s < S; ++s) {
      const Contract& p = rho.contracts[t][s];
      auto agent_q = [&](int b) {
        double v = 0.0;
        for (int s2 = 0; s2 < S; ++s2) {
          double pr = inst.P(t, s, b, s2);
          if (pr != 0.0) v += pr * (p.pay[s2] - inst.c(t, s, b) + ev.agent_value[t + 1][s2]);
        }
        return v;
      };
      int a = rho.actions[t][s];
      double own = agent_q(a);
      double vp = 0.0;
      for (int s2 = 0; s2 < S; ++s2) {
        double pr = inst.P(t, s, a, s2);
        if (pr != 0.0) vp += pr * (inst.r(t, s, s2) - p.pay[s2] + ev.principal_value[t + 1][s2]);
      }
      ev.agent_value[t][s] = own;
      ev.principal_value[t][s] = vp;
      if (reach[t][s])
        for (int b = 0; b < A; ++b) ev.ic_gap = std::max(ev.ic_gap, agent_q(b) - own);
    }
  for (int s = 0; s < S; ++s) ev.value += inst.initial[s] * ev.principal_value[0][s];
  return ev;
}

MarkovianResult enumerate_markovian(const Instance& inst, const EnumConfig& cfg) {
  cfg.check();
  const int H = inst.horizon, S = inst.num_states;
  std::vector<Cell> cells = reachable_cells(inst);
  MarkovianResult best;
  best.assignments = count_assignments(cells, cfg.work_cap);
  // Payment variable index per (cell, next state) that some action can reach.
  std::vector<std::vector<int>> var(cells.size(), std::vector<int>(S, -1));
  int nvars = 0;
  std::vector<std::vector<int>> cell_of(H, std::vector<int>(S, -1));
  for (std::size_t c = 0; c < cells.size(); ++c) {
    cell_of[cells[c].t][cells[c].s] = static_cast<int>(c);
    for (int s2 = 0; s2 < S; ++s2)
      if (reachable_by_some_action(inst, cells[c].t, cells[c].s, s2)) var[c][s2] = nvars++;
  }
  std::vector<int> digit(cells.size(), 0);
  SimplexSolver solver;
  do {
    auto action = [&](int c) { return cells[c].actions[digit[c]]; };
    // Joint program over every payment of the assignment.
    std::vector<std::vector<Affine>> va(H + 1, std::vector<Affine>(S, Affine{std::vector<double>(nvars, 0.0), 0.0}));
    std::vector<std::vector<Affine>> vp = va;
    LinearProgram lp;
    for (int v = 0; v < nvars; ++v) lp.add_var(0.0);
    for (int v = 0; v < nvars; ++v) lp.add_row({{v, 1.0}}, RowSense::LessEqual, inst.payment_bound);
    for (int t = H - 1; t >= 0; --t)
      for (int s = 0; s < S; ++s) {
        int c = cell_of[t][s];
        if (c < 0) continue;
        int a = action(c);
        auto q = [&](int b, Affine& out) {
          for (int s2 = 0; s2 < S; ++s2) {
            double pr = inst.P(t, s, b, s2);
            if (pr == 0.0) continue;
            out.coef[var[c][s2]] += pr;
            for (int v = 0; v < nvars; ++v) out.coef[v] += pr * va[t + 1][s2].coef[v];
            out.constant += pr * (va[t + 1][s2].constant - inst.c(t, s, b));
          }
        };
        q(a, va[t][s]);
        for (int s2 = 0; s2 < S; ++s2) {
          double pr = inst.P(t, s, a, s2);
          if (pr == 0.0) continue;
          vp[t][s].coef[var[c][s2]] -= pr;
          for (int v = 0; v < nvars; ++v) vp[t][s].coef[v] += pr * vp[t + 1][s2].coef[v];
          vp[t][s].constant += pr * (inst.r(t, s, s2) + vp[t + 1][s2].constant);
        }
        for (int b : cells[c].actions) {
          if (b == a) continue;
          Affine alt{std::vector<double>(nvars, 0.0), 0.0};
          q(b, alt);
          std::vector<std::pair<int, double>> row;
          for (int v = 0; v < nvars; ++v) {
            double d = va[t][s].coef[v] - alt.coef[v];
            if (std::abs(d) > 1e-15) row.push_back({v, d});
          }
          lp.add_row(row, RowSense::GreaterEqual, alt.constant - va[t][s].constant);
        }
      }
    double constant = 0.0;
    for (int s = 0; s < S; ++s) {
      if (inst.initial[s] <= 0.0) continue;
      for (int v = 0; v < nvars; ++v) lp.objective[v] += inst.initial[s] * vp[0][s].coef[v];
      constant += inst.initial[s] * vp[0][s].constant;
    }
    LpResult res = solver.solve(lp);
    if (res.status == LpStatus::Optimal) {
      double value = res.objective + constant;
      if (!best.feasible || value > best.value + 1e-12) {
        best.feasible = true;
        best.value = value;
        best.policy = empty_markovian(inst);
        for (std::size_t c = 0; c < cells.size(); ++c) {
          best.policy.actions[cells[c].t][cells[c].s] = action(static_cast<int>(c));
          for (int s2 = 0; s2 < S; ++s2)
            if (var[c][s2] >= 0)
              best.policy.contracts[cells[c].t][cells[c].s].pay[s2] =
                  std::clamp(res.x[var[c][s2]], 0.0, inst.payment_bound);
        }
      }
    }
    // Minimum-payment contracts, one step at a time.
    std::vector<std::vector<double>> ua(H + 1, std::vector<double>(S, 0.0)), up = ua;
    bool ok = true;
    for (int t = H - 1; t >= 0 && ok; --t)
      for (int s = 0; s < S && ok; ++s) {
        int c = cell_of[t][s];
        if (c < 0) continue;
        int a = action(c);
        LinearProgram one;
        std::vector<int> local(S, -1);
        for (int s2 = 0; s2 < S; ++s2)
          if (var[c][s2] >= 0) {
            local[s2] = one.add_var(-inst.P(t, s, a, s2));
            one.add_row({{local[s2], 1.0}}, RowSense::LessEqual, inst.payment_bound);
          }
        for (int b : cells[c].actions) {
          if (b == a) continue;
          std::vector<std::pair<int, double>> row;
          double rhs = inst.c(t, s, a) - inst.c(t, s, b);
          for (int s2 = 0; s2 < S; ++s2) {
            double d = inst.P(t, s, a, s2) - inst.P(t, s, b, s2);
            if (d == 0.0) continue;
            row.push_back({local[s2], d});
            rhs -= d * ua[t + 1][s2];
          }
          one.add_row(row, RowSense::GreaterEqual, rhs);
        }
        LpResult r1 = solver.solve(one);
        if (r1.status != LpStatus::Optimal) {
          ok = false;
          break;
        }
        for (int s2 = 0; s2 < S; ++s2) {
          double pr = inst.P(t, s, a, s2);
          if (pr == 0.0) continue;
          double pay = std::clamp(r1.x[local[s2]], 0.0, inst.payment_bound);
          ua[t][s] += pr * (pay - inst.c(t, s, a) + ua[t + 1][s2]);
          up[t][s] += pr * (inst.r(t, s, s2) - pay + up[t + 1][s2]);
        }
      }
    if (ok) {
      double value = 0.0;
      for (int s = 0; s < S; ++s) value += inst.initial[s] * up[0][s];
      best.min_payment_value = std::max(best.min_payment_value, value);
    }
  } while (next_assignment(digit, cells));
  if (best.feasible) {
    MarkovianEvaluation ev = evaluate_markovian(best.policy, inst);
    best.agent_value = ev.agent_value;
    best.principal_value = ev.principal_value;
  }
  return best;
}

MarkovianResult markovian_grid_search(const Instance& inst, const EnumConfig& cfg) {
  cfg.check();
  const int H = inst.horizon, S = inst.num_states, A = inst.num_actions;
  std::vector<Cell> cells = reachable_cells(inst);
  // Later steps first so each incentive check sees a complete continuation.
  std::stable_sort(cells.begin(), cells.end(), [](const Cell& x, const Cell& y) { return x.t > y.t; });
  const std::vector<double> grid = contract_grid(inst, cfg.contract_grid_step);
  MarkovianResult best;
  best.assignments = count_assignments(cells, cfg.work_cap);
  std::size_t work = 0;
  MarkovianPolicy rho = empty_markovian(inst);
  std::vector<std::vector<double>> ua(H + 1, std::vector<double>(S, 0.0)), up = ua;
  std::vector<int> digit(cells.size(), 0);
  std::function<void(std::size_t)> dfs = [&](std::size_t idx) {
    if (idx == cells.size()) {
      double value = 0.0;
      for (int s = 0; s < S; ++s) value += inst.initial[s] * up[0][s];
      if (!best.feasible || value > best.value + 1e-12) {
        best.feasible = true;
        best.value = value;
        best.policy = rho;
      }
      return;
    }
    const Cell& cell = cells[idx];
    const int t = cell.t, s = cell.s, a = cell.actions[digit[idx]];
    std::vector<int> support;
    for (int s2 = 0; s2 < S; ++s2)
      if (inst.P(t, s, a, s2) > 0.0) support.push_back(s2);
    std::vector<std::size_t> pick(support.size(), 0);
    Contract& p = rho.contracts[t][s];
    rho.actions[t][s] = a;
    while (true) {
      if (++work > cfg.work_cap) throw CapExceeded("Markovian grid search exceeds the work cap");
      std::fill(p.pay.begin(), p.pay.end(), 0.0);
      for (std::size_t j = 0; j < support.size(); ++j) p.pay[support[j]] = grid[pick[j]];
      auto agent_q = [&](int b) {
        double v = 0.0;
        for (int s2 = 0; s2 < S; ++s2) {
          double pr = inst.P(t, s, b, s2);
          if (pr != 0.0) v += pr * (p.pay[s2] - inst.c(t, s, b) + ua[t + 1][s2]);
        }
        return v;
      };
      double own = agent_q(a);
      bool ic = true;
      for (int b = 0; b < A && ic; ++b) ic = agent_q(b) <= own + kIcTol;
      if (ic) {
        double vp = 0.0;
        for (int s2 : support) vp += inst.P(t, s, a, s2) * (inst.r(t, s, s2) - p.pay[s2] + up[t + 1][s2]);
        ua[t][s] = own;
        up[t][s] = vp;
        dfs(idx + 1);
      }
      std::size_t j = 0;
      while (j < pick.size() && ++pick[j] == grid.size()) pick[j++] = 0;
      if (j == pick.size()) break;
    }
  };
  do {
    dfs(0);
  } while (next_assignment(digit, cells));
  if (best.feasible) {
    MarkovianEvaluation ev = evaluate_markovian(best.policy, inst);
    best.agent_value = ev.agent_value;
    best.principal_value = ev.principal_value;
  }
  return best;
}

// ---- history-dependent lower bound on OPT -----------------------------------

namespace {

struct ValuePair {
  double u = 0.0;  // agent's continuation value
  double w = 0.0;  // principal's continuation value
  int action = 0;
  Contract contract;
  std::vector<int> next;
};

// Sorts by agent value and keeps, within each 1e-9 bucket, the best principal value.
void dedupe(std::vector<ValuePair>& pairs) {
  std::stable_sort(pairs.begin(), pairs.end(), [](const ValuePair& x, const ValuePair& y) { return x.u < y.u; });
  std::vector<ValuePair> out;
  for (std::size_t i = 0; i < pairs.size();) {
    double start = pairs[i].u;
    std::size_t best = i;
    std::size_t j = i;
    for (; j < pairs.size() && pairs[j].u <= start + kValueBucket; ++j)
      if (pairs[j].w > pairs[best].w) best = j;
    out.push_back(std::move(pairs[best]));
    i = j;
  }
  pairs = std::move(out);
}

}  // namespace

OptResult enumerate_opt(const Instance& inst, const EnumConfig& cfg) {
  cfg.check();
  const int H = inst.horizon, S = inst.num_states, A = inst.num_actions;
  auto reach = reachable_states(inst);
  const std::vector<double> grid = contract_grid(inst, cfg.contract_grid_step);
  OptResult out;
  std::vector<std::vector<std::vector<ValuePair>>> sets(H + 1, std::vector<std::vector<ValuePair>>(S));
  for (int s = 0; s < S; ++s) sets[H][s].push_back(ValuePair{});
  for (int t = H - 1; t >= 0; --t)
    for (int s = 0; s < S; ++s) {
      if (!reach[t][s]) continue;
      auto& here = sets[t][s];
      for (int a : distinct_actions(inst, t, s)) {
        std::vector<int> support;
        for (int s2 = 0; s2 < S; ++s2)
          if (inst.P(t, s, a, s2) > 0.0) support.push_back(s2);
        // Next states only a deviation reaches get the continuation worst for the agent.
        std::vector<int> fixed_next(S, -1);
        for (int s2 = 0; s2 < S; ++s2)
          if (inst.P(t, s, a, s2) == 0.0 && reachable_by_some_action(inst, t, s, s2)) fixed_next[s2] = 0;
        const std::size_t m = support.size();
        std::vector<std::size_t> pay(m, 0), cont(m, 0);
        bool empty_branch = false;
        for (int s2 = 0; s2 < S; ++s2)
          if ((inst.P(t, s, a, s2) > 0.0 || fixed_next[s2] == 0) && sets[t + 1][s2].empty()) empty_branch = true;
        if (empty_branch) continue;
        while (true) {
          if (++out.combinations > cfg.work_cap) throw CapExceeded("history-dependent search exceeds the work cap");
          ValuePair vp;
          vp.action = a;
          vp.contract = Contract::zero(S);
          vp.next = fixed_next;
          std::vector<double> cu(S, 0.0);
          for (int s2 = 0; s2 < S; ++s2)
            if (fixed_next[s2] == 0) cu[s2] = sets[t + 1][s2][0].u;
          double w = 0.0;
          for (std::size_t j = 0; j < m; ++j) {
            int s2 = support[j];
            vp.contract.pay[s2] = grid[pay[j]];
            vp.next[s2] = static_cast<int>(cont[j]);
            cu[s2] = sets[t + 1][s2][cont[j]].u;
            w += inst.P(t, s, a, s2) * (inst.r(t, s, s2) - grid[pay[j]] + sets[t + 1][s2][cont[j]].w);
          }
          auto agent_q = [&](int b) {
            double v = 0.0;
            for (int s2 = 0; s2 < S; ++s2) {
              double pr = inst.P(t, s, b, s2);
              if (pr != 0.0) v += pr * (vp.contract.pay[s2] - inst.c(t, s, b) + cu[s2]);
            }
            return v;
          };
          double own = agent_q(a);
          bool ic = true;
          for (int b = 0; b < A && ic; ++b) ic = agent_q(b) <= own + kIcTol;
          if (ic) {
            vp.u = own;
            vp.w = w;
            if (t + 1 == H) std::fill(vp.next.begin(), vp.next.end(), 0);
            here.push_back(std::move(vp));
          }
          // Advance the joint (payment, continuation) counter.
          std::size_t j = 0;
          for (; j < m; ++j) {
            if (++pay[j] < grid.size()) break;
            pay[j] = 0;
            if (++cont[j] < sets[t + 1][support[j]].size()) break;
            cont[j] = 0;
          }
          if (j == m) break;
        }
      }
      dedupe(here);
    }
  // Witness: one node per kept pair; the initial step keeps its best pair.
  out.witness = PromiseFormPolicy::empty(H, S);
  out.witness.direct = true;
  out.value = 0.0;
  for (int t = 0; t < H; ++t)
    for (int s = 0; s < S; ++s) {
      auto& pairs = sets[t][s];
      if (t == 0 && !pairs.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < pairs.size(); ++i)
          if (pairs[i].w > pairs[best].w) best = i;
        ValuePair keep = pairs[best];
        pairs = {keep};
      }
      for (const ValuePair& vp : pairs) {
        PromiseNode nd;
        nd.promise = vp.u;
        nd.menu.push_back(MenuEntry{vp.action, vp.contract, vp.next});
        nd.choice.push_back(Choice{0, 1.0});
        out.witness.nodes[t][s].push_back(std::move(nd));
      }
    }
  for (int s = 0; s < S; ++s) {
    if (inst.initial[s] <= 0.0) continue;
    if (sets[0][s].empty()) throw NumericalError("history-dependent search found no IC policy");
    out.value += inst.initial[s] * sets[0][s][0].w;
  }
  return out;
}

// ---- single-cell brute force ---------------------------------------------------

double brute_force_cell(const Instance& inst, int t, int s, std::int64_t k, const PromiseGrid& grid,
                        const StepTable& next, double contract_step, double window) {
  const int S = inst.num_states, A = inst.num_actions;
  const std::vector<double> pay_grid = contract_grid(inst, contract_step);
  const double lo = grid.value(k) - window, hi = grid.value(k) + window;
  // z candidates: feasible next promises on the coarse grid {0, step, 2 step, ...}.
  std::vector<std::vector<std::int64_t>> zc(S);
  for (int s2 = 0; s2 < S; ++s2) {
    std::int64_t n = next.prefix_length(s2);
    std::int64_t stride = std::max<std::int64_t>(1, grid.floor_index(contract_step));
    for (std::int64_t z = 0; z < n; z += stride) zc[s2].push_back(z);
  }
  struct Cand {
    double u, f;
  };
  std::vector<std::vector<Cand>> cand(A);
  for (int a : distinct_actions(inst, t, s)) {
    std::vector<int> support;
    for (int s2 = 0; s2 < S; ++s2)
      if (inst.P(t, s, a, s2) > 0.0) support.push_back(s2);
    bool empty_branch = false;
    for (int s2 : support)
      if (zc[s2].empty()) empty_branch = true;
    if (empty_branch) continue;
    const std::size_t m = support.size();
    std::vector<std::size_t> pay(m, 0), zi(m, 0);
    std::vector<double> p(S, 0.0), z(S, 0.0);
    while (true) {
      for (std::size_t j = 0; j < m; ++j) {
        p[support[j]] = pay_grid[pay[j]];
        z[support[j]] = grid.value(zc[support[j]][zi[j]]);
      }
      auto agent_q = [&](int b) {
        double v = 0.0;
        for (int s2 = 0; s2 < S; ++s2) {
          double pr = inst.P(t, s, b, s2);
          if (pr != 0.0) v += pr * (p[s2] - inst.c(t, s, b) + z[s2]);
        }
        return v;
      };
      double own = agent_q(a);
      bool ic = true;
      for (int b = 0; b < A && ic; ++b) ic = agent_q(b) <= own + kIcTol;
      if (ic) {
        double f = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          int s2 = support[j];
          f += inst.P(t, s, a, s2) * (inst.r(t, s, s2) - p[s2] + next.value[s2][zc[s2][zi[j]]]);
        }
        cand[a].push_back(Cand{own, f});
      }
      std::size_t j = 0;
      for (; j < m; ++j) {
        if (++pay[j] < pay_grid.size()) break;
        pay[j] = 0;
        if (++zi[j] < zc[support[j]].size()) break;
        zi[j] = 0;
      }
      if (j == m) break;
    }
    std::sort(cand[a].begin(), cand[a].end(), [](const Cand& x, const Cand& y) { return x.u < y.u; });
  }
  double best = kNegInf;
  for (int a = 0; a < A; ++a)
    for (const Cand& c : cand[a])
      if (c.u >= lo && c.u <= hi) best = std::max(best, c.f);
  // Even mixes: (u_a + u_b) / 2 inside the window, via suffix maxima over sorted u.
  for (int a = 0; a < A; ++a)
    for (int b = a + 1; b < A; ++b) {
      const auto& cb = cand[b];
      if (cand[a].empty() || cb.empty()) continue;
      // Sparse table for range maxima of f over cb.
      const std::size_t n = cb.size();
      std::vector<std::vector<double>> table(1, std::vector<double>(n));
      for (std::size_t i = 0; i < n; ++i) table[0][i] = cb[i].f;
      for (std::size_t len = 1; 2 * len <= n; len *= 2) {
        const auto& prev = table.back();
        std::vector<double> row(n - 2 * len + 1);
        for (std::size_t i = 0; i + 2 * len <= n; ++i) row[i] = std::max(prev[i], prev[i + len]);
        table.push_back(std::move(row));
      }
      auto range_max = [&](std::size_t l, std::size_t r) {  // [l, r)
        std::size_t level = 0;
        while ((std::size_t{2} << level) <= r - l) ++level;
        return std::max(table[level][l], table[level][r - (std::size_t{1} << level)]);
      };
      for (const Cand& ca : cand[a]) {
        double need_lo = 2.0 * lo - ca.u, need_hi = 2.0 * hi - ca.u;
        auto l = std::lower_bound(cb.begin(), cb.end(), need_lo, [](const Cand& x, double v) { return x.u < v; });
        auto r = std::upper_bound(cb.begin(), cb.end(), need_hi, [](double v, const Cand& x) { return v < x.u; });
        if (l >= r) continue;
        best = std::max(best, 0.5 * (ca.f + range_max(l - cb.begin(), r - cb.begin())));
      }
    }
  return best;
}

}  // namespace cmdp
