#include "cmdp/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cmdp {

namespace {

std::string where(int t, int s, int i) {
  std::ostringstream os;
  os << "(h=" << t + 1 << ",s=" << s << ",node=" << i << ")";
  return os.str();
}

bool reachable_by_some_action(const Instance& inst, int t, int s, int s2) {
  for (int b = 0; b < inst.num_actions; ++b)
    if (inst.P(t, s, b, s2) > 0.0) return true;
  return false;
}

}  // namespace

PromiseFormPolicy PromiseFormPolicy::empty(int horizon, int num_states) {
  PromiseFormPolicy p;
  p.horizon = horizon;
  p.num_states = num_states;
  p.nodes.assign(horizon, std::vector<std::vector<PromiseNode>>(num_states));
  return p;
}

int PromiseFormPolicy::contract_id(int t, int s, int i, int entry) const {
  const auto& menu = nodes[t][s][i].menu;
  int id = 0;
  for (int e = 0; e < entry; ++e)
    if (menu[e].action == menu[entry].action) ++id;
  return id;
}

int PromiseFormPolicy::find_entry(int t, int s, int i, int action, int cid) const {
  const auto& menu = nodes[t][s][i].menu;
  int id = 0;
  for (int e = 0; e < static_cast<int>(menu.size()); ++e) {
    if (menu[e].action != action) continue;
    if (id == cid) return e;
    ++id;
  }
  return -1;
}

std::size_t PromiseFormPolicy::promise_count() const {
  std::size_t n = 0;
  for (const auto& step : nodes)
    for (const auto& st : step) n += st.size();
  return n;
}

std::size_t PromiseFormPolicy::menu_count() const {
  std::size_t n = 0;
  for (const auto& step : nodes)
    for (const auto& st : step)
      for (const auto& nd : st) n += nd.menu.size();
  return n;
}

bool PromiseFormPolicy::menus_are_direct() const {
  for (const auto& step : nodes)
    for (const auto& st : step)
      for (const auto& nd : st)
        for (std::size_t e = 1; e < nd.menu.size(); ++e)
          for (std::size_t f = 0; f < e; ++f)
            if (nd.menu[e].action == nd.menu[f].action) return false;
  return true;
}

void PromiseFormPolicy::normalize_menus() {
  for (auto& step : nodes)
    for (auto& st : step)
      for (auto& nd : st) {
        std::vector<int> order(nd.menu.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int x, int y) { return nd.menu[x].action < nd.menu[y].action; });
        std::vector<int> where_now(nd.menu.size());
        std::vector<MenuEntry> menu;
        for (std::size_t k = 0; k < order.size(); ++k) {
          where_now[order[k]] = static_cast<int>(k);
          menu.push_back(std::move(nd.menu[order[k]]));
        }
        nd.menu = std::move(menu);
        for (auto& c : nd.choice) c.entry = where_now[c.entry];
        std::sort(nd.choice.begin(), nd.choice.end(), [](const Choice& x, const Choice& y) { return x.entry < y.entry; });
      }
}

std::vector<std::string> validate_policy(const PromiseFormPolicy& sigma, const Instance& inst) {
  std::vector<std::string> out;
  const int H = inst.horizon, S = inst.num_states, A = inst.num_actions;
  if (sigma.horizon != H || sigma.num_states != S || static_cast<int>(sigma.nodes.size()) != H) {
    out.push_back("policy dimensions do not match the instance");
    return out;
  }
  for (int t = 0; t < H; ++t) {
    if (static_cast<int>(sigma.nodes[t].size()) != S) {
      out.push_back("policy step " + std::to_string(t + 1) + " has the wrong number of states");
      return out;
    }
  }
  for (int s = 0; s < S; ++s) {
    std::size_t n = sigma.nodes[0][s].size();
    if (inst.initial[s] > 0.0 && n != 1) out.push_back("initial promise set of state " + std::to_string(s) + " is not a singleton");
    if (inst.initial[s] <= 0.0 && n > 1) out.push_back("initial promise set of state " + std::to_string(s) + " has more than one promise");
  }
  for (int t = 0; t < H; ++t)
    for (int s = 0; s < S; ++s) {
      const auto& st = sigma.nodes[t][s];
      for (int i = 0; i < static_cast<int>(st.size()); ++i) {
        const PromiseNode& nd = st[i];
        std::string w = where(t, s, i);
        if (i > 0 && !(nd.promise > st[i - 1].promise)) out.push_back(w + ": promises not strictly increasing");
        if (!std::isfinite(nd.promise)) out.push_back(w + ": promise is not finite");
        if (sigma.grid_step > 0.0) {
          if (nd.grid_index < 0 || nd.promise != static_cast<double>(nd.grid_index) * sigma.grid_step)
            out.push_back(w + ": promise is not the recorded grid point");
        }
        if (nd.choice.empty()) out.push_back(w + ": empty lottery");
        for (std::size_t e = 0; e < nd.menu.size(); ++e) {
          const MenuEntry& m = nd.menu[e];
          if (m.action < 0 || m.action >= A) {
            out.push_back(w + ": menu action out of range");
            continue;
          }
          if (e > 0 && m.action < nd.menu[e - 1].action) out.push_back(w + ": menu not sorted by action");
          if (static_cast<int>(m.contract.pay.size()) != S) {
            out.push_back(w + ": contract dimension mismatch");
            continue;
          }
          if (!m.contract.within_bound(inst.payment_bound, 1e-12)) out.push_back(w + ": contract outside [0,B]");
          if (static_cast<int>(m.next.size()) != S) {
            out.push_back(w + ": promise transition dimension mismatch");
            continue;
          }
          for (int s2 = 0; s2 < S; ++s2) {
            int nx = m.next[s2];
            if (t + 1 == H) {
              if (nx != 0) out.push_back(w + ": last-step promise transition must map to the terminal promise");
              continue;
            }
            if (nx == -1) {
              if (reachable_by_some_action(inst, t, s, s2))
                out.push_back(w + ": promise transition missing for a reachable next state");
              continue;
            }
            if (nx < 0 || nx >= static_cast<int>(sigma.nodes[t + 1][s2].size()))
              out.push_back(w + ": promise transition outside the next promise set");
          }
        }
        double total = 0.0;
        for (std::size_t c = 0; c < nd.choice.size(); ++c) {
          const Choice& ch = nd.choice[c];
          if (ch.entry < 0 || ch.entry >= static_cast<int>(nd.menu.size())) {
            out.push_back(w + ": lottery references a missing menu entry");
            continue;
          }
          if (!(ch.prob > 0.0)) out.push_back(w + ": lottery probability must be positive");
          if (c > 0 && ch.entry <= nd.choice[c - 1].entry) out.push_back(w + ": lottery not sorted by entry");
          total += ch.prob;
        }
        if (std::abs(total - 1.0) > 1e-12) out.push_back(w + ": lottery does not sum to 1");
      }
    }
  if (sigma.direct && !sigma.menus_are_direct()) out.push_back("policy flagged direct but some action has several contracts");
  return out;
}

void require_valid_policy(const PromiseFormPolicy& sigma, const Instance& inst) {
  auto problems = validate_policy(sigma, inst);
  if (problems.empty()) return;
  std::string msg = "invalid promise-form policy:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw ValidationError(msg);
}

ValueTables evaluate(const PromiseFormPolicy& sigma, const Instance& inst) {
  require_valid_policy(sigma, inst);
  const int H = inst.horizon, S = inst.num_states, A = inst.num_actions;
  ValueTables T;
  T.at.resize(H);
  for (int t = H - 1; t >= 0; --t) {
    T.at[t].resize(S);
    for (int s = 0; s < S; ++s) {
      const auto& st = sigma.nodes[t][s];
      T.at[t][s].resize(st.size());
      for (std::size_t i = 0; i < st.size(); ++i) {
        const PromiseNode& nd = st[i];
        NodeValues& nv = T.at[t][s][i];
        const std::size_t E = nd.menu.size();
        nv.qp.assign(E, 0.0);
        nv.qa.assign(E, 0.0);
        nv.qa_dev.assign(E, 0.0);
        for (std::size_t e = 0; e < E; ++e) {
          const MenuEntry& m = nd.menu[e];
          auto cont = [&](int s2, int which) -> double {
            if (t + 1 == H || m.next[s2] < 0) return 0.0;
            const NodeValues& nx = T.at[t + 1][s2][m.next[s2]];
            return which == 0 ? nx.vp : which == 1 ? nx.va : nx.va_dev;
          };
          double qp = 0.0, qa = 0.0;
          for (int s2 = 0; s2 < S; ++s2) {
            double p = inst.P(t, s, m.action, s2);
            if (p == 0.0) continue;
            qp += p * (inst.r(t, s, s2) - m.contract.pay[s2] + cont(s2, 0));
            qa += p * (m.contract.pay[s2] - inst.c(t, s, m.action) + cont(s2, 1));
          }
          double best = kNegInf;
          for (int b = 0; b < A; ++b) {
            double v = 0.0;
            for (int s2 = 0; s2 < S; ++s2) {
              double p = inst.P(t, s, b, s2);
              if (p == 0.0) continue;
              v += p * (m.contract.pay[s2] - inst.c(t, s, b) + cont(s2, 2));
            }
            best = std::max(best, v);
          }
          nv.qp[e] = qp;
          nv.qa[e] = qa;
          nv.qa_dev[e] = best;
        }
        for (const Choice& c : nd.choice) {
          nv.vp += c.prob * nv.qp[c.entry];
          nv.va += c.prob * nv.qa[c.entry];
          nv.va_dev += c.prob * nv.qa_dev[c.entry];
        }
      }
    }
  }
  T.value = 0.0;
  for (int s = 0; s < S; ++s)
    if (inst.initial[s] > 0.0) T.value += inst.initial[s] * T.at[0][s][0].vp;
  return T;
}

FoldResult fold_promise(const PromiseFormPolicy& sigma, const Instance& inst, const History& tau) {
  std::string why;
  if (!history_well_formed(tau, inst, &why)) throw ValidationError("malformed history: " + why);
  if (tau.length() > inst.horizon) throw ValidationError("malformed history: no decision after the last step");
  int s = tau.states[0];
  if (sigma.nodes[0][s].empty()) throw ValidationError("promise-not-in-set: no initial promise for the first state");
  int node = 0;
  for (int t = 0; t + 1 < tau.length(); ++t) {
    const PromiseNode& nd = sigma.nodes[t][s][node];
    int a = tau.actions[t];
    int entry = -1;
    if (tau.contract_ids[t] >= 0) {
      entry = sigma.find_entry(t, s, node, a, tau.contract_ids[t]);
      if (entry >= 0 && !same_contract(nd.menu[entry].contract, tau.contracts[t]))
        throw ValidationError("malformed history: contract does not match its contract id");
    } else {
      for (int e = 0; e < static_cast<int>(nd.menu.size()); ++e)
        if (nd.menu[e].action == a && same_contract(nd.menu[e].contract, tau.contracts[t])) {
          entry = e;
          break;
        }
    }
    int s2 = tau.states[t + 1];
    int next;
    if (entry < 0) {
      // Offer outside the menu: fold to the smallest next promise.
      next = 0;
      if (sigma.nodes[t + 1][s2].empty())
        throw ValidationError("promise-not-in-set: next state has no promise to fall back to");
    } else {
      next = nd.menu[entry].next[s2];
      if (next < 0) throw ValidationError("promise-not-in-set: transition to a state with no promise");
    }
    s = s2;
    node = next;
  }
  FoldResult out;
  out.step = tau.length() - 1;
  out.state = s;
  out.node = node;
  out.promise = sigma.nodes[out.step][s][node].promise;
  return out;
}

std::vector<Offer> implement_step(const PromiseFormPolicy& sigma, const Instance& inst, const History& tau) {
  FoldResult f = fold_promise(sigma, inst, tau);
  const PromiseNode& nd = sigma.nodes[f.step][f.state][f.node];
  std::vector<Offer> out;
  for (const Choice& c : nd.choice) {
    const MenuEntry& m = nd.menu[c.entry];
    out.push_back(Offer{m.contract, sigma.contract_id(f.step, f.state, f.node, c.entry), m.action, c.entry, c.prob});
  }
  return out;
}

namespace {

double next_promise(const PromiseFormPolicy& sigma, int t, int s2, int idx) {
  if (t + 1 == sigma.horizon || idx < 0) return 0.0;
  return sigma.nodes[t + 1][s2][idx].promise;
}

}  // namespace

ResidualMap honesty_residual(const PromiseFormPolicy& sigma, const Instance& inst) {
  require_valid_policy(sigma, inst);
  const int H = inst.horizon, S = inst.num_states;
  ResidualMap R;
  R.at.resize(H);
  for (int t = 0; t < H; ++t) {
    R.at[t].resize(S);
    for (int s = 0; s < S; ++s) {
      const auto& st = sigma.nodes[t][s];
      R.at[t][s].resize(st.size());
      for (std::size_t i = 0; i < st.size(); ++i) {
        const PromiseNode& nd = st[i];
        double v = 0.0;
        for (const Choice& c : nd.choice) {
          const MenuEntry& m = nd.menu[c.entry];
          double inner = 0.0;
          for (int s2 = 0; s2 < S; ++s2) {
            double p = inst.P(t, s, m.action, s2);
            if (p == 0.0) continue;
            inner += p * (m.contract.pay[s2] - inst.c(t, s, m.action) + next_promise(sigma, t, s2, m.next[s2]));
          }
          v += c.prob * inner;
        }
        double r = std::abs(v - nd.promise);
        R.at[t][s][i] = r;
        R.max = std::max(R.max, r);
      }
    }
  }
  return R;
}

double local_ic_residual(const PromiseFormPolicy& sigma, const Instance& inst) {
  require_valid_policy(sigma, inst);
  const int H = inst.horizon, S = inst.num_states, A = inst.num_actions;
  double worst = 0.0;
  for (int t = 0; t < H; ++t)
    for (int s = 0; s < S; ++s)
      for (const PromiseNode& nd : sigma.nodes[t][s])
        for (const Choice& c : nd.choice) {
          const MenuEntry& m = nd.menu[c.entry];
          auto value = [&](int b) {
            double v = 0.0;
            for (int s2 = 0; s2 < S; ++s2) {
              double p = inst.P(t, s, b, s2);
              if (p == 0.0) continue;
              v += p * (m.contract.pay[s2] - inst.c(t, s, b) + next_promise(sigma, t, s2, m.next[s2]));
            }
            return v;
          };
          double own = value(m.action);
          for (int b = 0; b < A; ++b) worst = std::max(worst, value(b) - own);
        }
  return worst;
}

std::vector<std::vector<std::vector<char>>> reachable_nodes(const PromiseFormPolicy& sigma, const Instance& inst) {
  const int H = inst.horizon, S = inst.num_states;
  std::vector<std::vector<std::vector<char>>> R(H, std::vector<std::vector<char>>(S));
  for (int t = 0; t < H; ++t)
    for (int s = 0; s < S; ++s) R[t][s].assign(sigma.nodes[t][s].size(), 0);
  for (int s = 0; s < S; ++s)
    if (inst.initial[s] > 0.0 && !sigma.nodes[0][s].empty()) R[0][s][0] = 1;
  for (int t = 0; t + 1 < H; ++t)
    for (int s = 0; s < S; ++s)
      for (std::size_t i = 0; i < sigma.nodes[t][s].size(); ++i) {
        if (!R[t][s][i]) continue;
        const PromiseNode& nd = sigma.nodes[t][s][i];
        for (const Choice& c : nd.choice) {
          const MenuEntry& m = nd.menu[c.entry];
          for (int s2 = 0; s2 < S; ++s2)
            if (m.next[s2] >= 0 && reachable_by_some_action(inst, t, s, s2)) R[t + 1][s2][m.next[s2]] = 1;
        }
      }
  return R;
}

IcReport ic_epsilon(const PromiseFormPolicy& sigma, const Instance& inst) {
  return ic_epsilon(sigma, inst, evaluate(sigma, inst));
}

IcReport ic_epsilon(const PromiseFormPolicy& sigma, const Instance& inst, const ValueTables& T) {
  auto R = reachable_nodes(sigma, inst);
  IcReport rep;
  for (int t = 0; t < inst.horizon; ++t)
    for (int s = 0; s < inst.num_states; ++s)
      for (std::size_t i = 0; i < sigma.nodes[t][s].size(); ++i) {
        const PromiseNode& nd = sigma.nodes[t][s][i];
        const NodeValues& nv = T.at[t][s][i];
        double gain = 0.0;
        for (const Choice& c : nd.choice) gain = std::max(gain, nv.qa_dev[c.entry] - nv.qa[c.entry]);
        if (R[t][s][i]) {
          rep.epsilon = std::max(rep.epsilon, gain);
          ++rep.reachable_nodes;
        } else {
          rep.epsilon_unreachable = std::max(rep.epsilon_unreachable, gain);
        }
      }
  return rep;
}

}  // namespace cmdp
