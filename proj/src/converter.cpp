#include "cmdp/converter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace cmdp {

namespace {

constexpr double kClusterWidth = 1e-10;

// Per-node value of a later step, 0 past the horizon or for unused transitions.
struct LayerValues {
  std::vector<std::vector<double>> v;  // [s][node]
  double at(int s2, int node) const { return node < 0 || v.empty() ? 0.0 : v[s2][node]; }
};

}  // namespace

PromiseFormPolicy change_contracts(const PromiseFormPolicy& sigma, double epsilon, const Instance& inst) {
  require_valid_policy(sigma, inst);
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ValidationError("change_contracts needs 0 <= epsilon < 1");
  if (!sigma.menus_are_direct()) throw ValidationError("change_contracts needs a direct policy");
  if (inst.payment_bound < inst.max_reward())
    throw ValidationError("change_contracts needs the payment bound to cover the largest reward");
  PromiseFormPolicy out = sigma;
  if (epsilon == 0.0) return out;
  const double root = std::sqrt(epsilon);
  for (int t = 0; t < inst.horizon; ++t)
    for (int s = 0; s < inst.num_states; ++s)
      for (PromiseNode& nd : out.nodes[t][s])
        for (MenuEntry& m : nd.menu)
          for (int s2 = 0; s2 < inst.num_states; ++s2) {
            double p = (1.0 - root) * m.contract.pay[s2] + root * inst.r(t, s, s2);
            m.contract.pay[s2] = std::clamp(p, 0.0, inst.payment_bound);
          }
  return out;
}

PromiseFormPolicy realign_actions(const PromiseFormPolicy& sigma, const Instance& inst, TieRule tie,
                                  ActionLabels* labels) {
  require_valid_policy(sigma, inst);
  const int H = inst.horizon, S = inst.num_states, A = inst.num_actions;
  PromiseFormPolicy out = PromiseFormPolicy::empty(H, S);
  out.grid_step = sigma.grid_step;
  if (labels) labels->assign(H, std::vector<std::vector<std::vector<int>>>(S));
  LayerValues vhat_next, vp_next;
  for (int t = H - 1; t >= 0; --t) {
    LayerValues vhat_here, vp_here;
    vhat_here.v.resize(S);
    vp_here.v.resize(S);
    for (int s = 0; s < S; ++s) {
      const auto& st = sigma.nodes[t][s];
      auto& dst = out.nodes[t][s];
      if (labels) (*labels)[t][s].resize(st.size());
      for (std::size_t i = 0; i < st.size(); ++i) {
        const PromiseNode& nd = st[i];
        PromiseNode nn;
        nn.promise = nd.promise;
        nn.grid_index = nd.grid_index;
        double vhat = 0.0, vp = 0.0;
        for (const Choice& c : nd.choice) {
          const MenuEntry& m = nd.menu[c.entry];
          auto cont = [&](const LayerValues& L, int s2) { return t + 1 == H ? 0.0 : L.at(s2, m.next[s2]); };
          std::vector<double> agent(A, 0.0), principal(A, 0.0);
          for (int b = 0; b < A; ++b)
            for (int s2 = 0; s2 < S; ++s2) {
              double p = inst.P(t, s, b, s2);
              if (p == 0.0) continue;
              agent[b] += p * (m.contract.pay[s2] - inst.c(t, s, b) + cont(vhat_next, s2));
              principal[b] += p * (inst.r(t, s, s2) - m.contract.pay[s2] + cont(vp_next, s2));
            }
          double best = *std::max_element(agent.begin(), agent.end());
          auto tied = [&](int b) { return agent[b] >= best - kTieTol; };
          int pick = -1;
          auto best_for_principal = [&]() {
            int q = -1;
            for (int b = 0; b < A; ++b)
              if (tied(b) && (q < 0 || principal[b] > principal[q])) q = b;
            return q;
          };
          if (tie == TieRule::Incumbent) {
            pick = tied(m.action) ? m.action : best_for_principal();
          } else {
            int q = best_for_principal();
            double top = principal[q];
            pick = (tied(m.action) && principal[m.action] >= top - kTieTol) ? m.action : q;
          }
          if (labels) (*labels)[t][s][i].push_back(pick);
          vhat += c.prob * best;
          vp += c.prob * principal[pick];
          int found = -1;
          for (int e = 0; e < static_cast<int>(nn.menu.size()); ++e) {
            const MenuEntry& x = nn.menu[e];
            if (x.action == pick && x.next == m.next && same_contract(x.contract, m.contract)) {
              found = e;
              break;
            }
          }
          if (found >= 0) {
            for (Choice& ch : nn.choice)
              if (ch.entry == found) ch.prob += c.prob;
          } else {
            nn.choice.push_back(Choice{static_cast<int>(nn.menu.size()), c.prob});
            nn.menu.push_back(MenuEntry{pick, m.contract, m.next});
          }
        }
        vhat_here.v[s].push_back(vhat);
        vp_here.v[s].push_back(vp);
        dst.push_back(std::move(nn));
      }
    }
    vhat_next = std::move(vhat_here);
    vp_next = std::move(vp_here);
  }
  out.normalize_menus();
  out.direct = out.menus_are_direct();
  return out;
}

PromiseFormPolicy realign_promises(const PromiseFormPolicy& sigma, const Instance& inst, ConflictTables* conflicts) {
  require_valid_policy(sigma, inst);
  const int H = inst.horizon, S = inst.num_states;
  PromiseFormPolicy out = PromiseFormPolicy::empty(H, S);
  out.direct = sigma.direct;
  out.grid_step = 0.0;
  ConflictTables tables;
  tables.clusters.assign(H, std::vector<std::vector<PromiseCluster>>(S));
  tables.new_index.assign(H, std::vector<std::vector<int>>(S));
  LayerValues va_next, vp_next;
  for (int t = H - 1; t >= 0; --t) {
    LayerValues va_here, vp_here;
    va_here.v.resize(S);
    vp_here.v.resize(S);
    for (int s = 0; s < S; ++s) {
      const auto& st = sigma.nodes[t][s];
      const int n = static_cast<int>(st.size());
      std::vector<double> agent(n, 0.0), principal(n, 0.0);
      auto mapped = [&](int s2, int old) {
        if (t + 1 == H) return 0;
        return old < 0 ? -1 : tables.new_index[t + 1][s2][old];
      };
      for (int i = 0; i < n; ++i)
        for (const Choice& c : st[i].choice) {
          const MenuEntry& m = st[i].menu[c.entry];
          double qa = 0.0, qp = 0.0;
          for (int s2 = 0; s2 < S; ++s2) {
            double p = inst.P(t, s, m.action, s2);
            if (p == 0.0) continue;
            int nx = mapped(s2, m.next[s2]);
            double wa = t + 1 == H ? 0.0 : va_next.at(s2, nx);
            double wp = t + 1 == H ? 0.0 : vp_next.at(s2, nx);
            qa += p * (m.contract.pay[s2] - inst.c(t, s, m.action) + wa);
            qp += p * (inst.r(t, s, s2) - m.contract.pay[s2] + wp);
          }
          agent[i] += c.prob * qa;
          principal[i] += c.prob * qp;
        }
      std::vector<int> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return agent[x] < agent[y]; });
      auto& clusters = tables.clusters[t][s];
      tables.new_index[t][s].assign(n, -1);
      for (int pos = 0; pos < n;) {
        PromiseCluster cl;
        double start = agent[order[pos]];
        while (pos < n && agent[order[pos]] <= start + kClusterWidth) {
          int i = order[pos++];
          cl.members.push_back(i);
          cl.principal_value.push_back(principal[i]);
        }
        std::size_t best = 0;
        for (std::size_t j = 1; j < cl.members.size(); ++j) {
          double gj = cl.principal_value[j], gb = cl.principal_value[best];
          if (gj > gb || (gj == gb && st[cl.members[j]].promise < st[cl.members[best]].promise)) best = j;
        }
        cl.chosen = cl.members[best];
        cl.new_promise = agent[cl.chosen];
        int idx = static_cast<int>(clusters.size());
        for (int i : cl.members) tables.new_index[t][s][i] = idx;
        clusters.push_back(std::move(cl));
      }
      for (const PromiseCluster& cl : clusters) {
        const PromiseNode& old = st[cl.chosen];
        PromiseNode nn;
        nn.promise = cl.new_promise;
        nn.choice = old.choice;
        nn.menu = old.menu;
        for (MenuEntry& m : nn.menu)
          for (int s2 = 0; s2 < S; ++s2) m.next[s2] = mapped(s2, m.next[s2]);
        out.nodes[t][s].push_back(std::move(nn));
        va_here.v[s].push_back(cl.new_promise);
        vp_here.v[s].push_back(principal[cl.chosen]);
      }
    }
    va_next = std::move(va_here);
    vp_next = std::move(vp_here);
  }
  if (conflicts) *conflicts = std::move(tables);
  return out;
}

ConversionResult convert(const PromiseFormPolicy& sigma, double epsilon, const Instance& inst, TieRule tie) {
  const auto start = std::chrono::steady_clock::now();
  ConversionResult out;
  ConversionReport& rep = out.report;
  rep.epsilon = epsilon;
  ValueTables in = evaluate(sigma, inst);
  rep.value_in = in.value;
  rep.ic_in = ic_epsilon(sigma, inst, in).epsilon;
  rep.promises_in = sigma.promise_count();
  rep.menu_in = sigma.menu_count();
  out.blended = change_contracts(sigma, epsilon, inst);
  out.relabeled = realign_actions(out.blended, inst, tie);
  ValueTables mid = evaluate(out.relabeled, inst);
  rep.value_actions = mid.value;
  rep.ic_actions = ic_epsilon(out.relabeled, inst, mid).epsilon;
  out.policy = realign_promises(out.relabeled, inst);
  ValueTables fin = evaluate(out.policy, inst);
  rep.value_out = fin.value;
  rep.ic_out = ic_epsilon(out.policy, inst, fin).epsilon;
  rep.honesty_out = honesty_residual(out.policy, inst).max;
  rep.promises_out = out.policy.promise_count();
  rep.menu_out = out.policy.menu_count();
  rep.direct_out = out.policy.direct;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

nlohmann::json conversion_report_to_json(const ConversionReport& r) {
  return {{"epsilon", r.epsilon},
          {"value_in", r.value_in},
          {"value_after_actions", r.value_actions},
          {"value_out", r.value_out},
          {"ic_epsilon_in", r.ic_in},
          {"ic_epsilon_after_actions", r.ic_actions},
          {"ic_epsilon_out", r.ic_out},
          {"honesty_residual_out", r.honesty_out},
          {"promises_in", r.promises_in},
          {"menu_entries_in", r.menu_in},
          {"promises_out", r.promises_out},
          {"menu_entries_out", r.menu_out},
          {"direct_out", r.direct_out},
          {"seconds", r.seconds}};
}

}  // namespace cmdp
