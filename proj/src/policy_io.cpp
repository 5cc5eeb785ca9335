#include <algorithm>
#include <fstream>
#include <map>

#include "cmdp/policy.hpp"

namespace cmdp {

namespace {

using nlohmann::json;

json promise_key(const PromiseFormPolicy& sigma, const PromiseNode& nd) {
  if (sigma.grid_step > 0.0) return nd.grid_index;
  return nd.promise;
}

int find_node(const PromiseFormPolicy& sigma, int t, int s, const json& key, const std::string& where) {
  const auto& st = sigma.nodes[t][s];
  for (int i = 0; i < static_cast<int>(st.size()); ++i) {
    if (sigma.grid_step > 0.0) {
      if (key.is_number_integer() && st[i].grid_index == key.get<std::int64_t>()) return i;
    } else if (key.is_number() && st[i].promise == key.get<double>()) {
      return i;
    }
  }
  throw ValidationError(where + ": promise " + key.dump() + " is not in the promise set");
}

}  // namespace

nlohmann::json policy_to_json(const PromiseFormPolicy& sigma) {
  json j;
  j["schema_version"] = kPolicySchemaVersion;
  j["horizon"] = sigma.horizon;
  j["num_states"] = sigma.num_states;
  j["direct"] = sigma.direct;
  if (sigma.grid_step > 0.0) j["grid_step"] = sigma.grid_step;
  json promises = json::array(), menu = json::array(), choice = json::array(), g = json::array();
  for (int t = 0; t < sigma.horizon; ++t) {
    json pt = json::array(), mt = json::array(), ct = json::array(), gt = json::array();
    for (int s = 0; s < sigma.num_states; ++s) {
      json ps = json::array();
      for (int i = 0; i < static_cast<int>(sigma.nodes[t][s].size()); ++i) {
        const PromiseNode& nd = sigma.nodes[t][s][i];
        json key = promise_key(sigma, nd);
        ps.push_back(key);
        for (int e = 0; e < static_cast<int>(nd.menu.size()); ++e) {
          const MenuEntry& m = nd.menu[e];
          int cid = sigma.contract_id(t, s, i, e);
          mt.push_back({{"s", s}, {"promise", key}, {"action", m.action}, {"contract_id", cid},
                        {"contract", m.contract.pay}});
          for (int s2 = 0; s2 < sigma.num_states; ++s2) {
            int nx = m.next[s2];
            if (nx < 0) continue;
            json nkey = (t + 1 == sigma.horizon)
                            ? (sigma.grid_step > 0.0 ? json(0) : json(0.0))
                            : promise_key(sigma, sigma.nodes[t + 1][s2][nx]);
            gt.push_back({{"s", s}, {"promise", key}, {"contract_id", cid}, {"action", m.action},
                          {"next_state", s2}, {"next_promise", nkey}});
          }
        }
        json support = json::array();
        for (const Choice& c : nd.choice)
          support.push_back({{"contract_id", sigma.contract_id(t, s, i, c.entry)},
                             {"action", nd.menu[c.entry].action},
                             {"prob", c.prob}});
        ct.push_back({{"s", s}, {"promise", key}, {"support", support}});
      }
      pt.push_back(ps);
    }
    promises.push_back(pt);
    menu.push_back(mt);
    choice.push_back(ct);
    g.push_back(gt);
  }
  j["promises"] = promises;
  j["menu"] = menu;
  j["choice"] = choice;
  j["g"] = g;
  return j;
}

PromiseFormPolicy policy_from_json(const nlohmann::json& j) {
  std::string path = "policy";
  try {
    path = "schema_version";
    if (j.at("schema_version").get<int>() != kPolicySchemaVersion)
      throw ValidationError("unsupported policy schema_version " + j["schema_version"].dump());
    path = "horizon";
    int H = j.at("horizon").get<int>();
    path = "num_states";
    int S = j.at("num_states").get<int>();
    if (H < 1 || S < 1) throw ValidationError("policy horizon and num_states must be >= 1");
    PromiseFormPolicy sigma = PromiseFormPolicy::empty(H, S);
    path = "direct";
    sigma.direct = j.value("direct", true);
    if (j.contains("grid_step")) {
      path = "grid_step";
      sigma.grid_step = j["grid_step"].get<double>();
      if (!(sigma.grid_step > 0.0)) throw ValidationError("grid_step must be positive");
    }
    const json& promises = j.at("promises");
    if (static_cast<int>(promises.size()) != H) throw ValidationError("promises: expected one entry per step");
    for (int t = 0; t < H; ++t) {
      if (static_cast<int>(promises[t].size()) != S) throw ValidationError("promises[" + std::to_string(t) + "]: expected one list per state");
      for (int s = 0; s < S; ++s)
        for (const json& key : promises[t][s]) {
          path = "promises[" + std::to_string(t) + "][" + std::to_string(s) + "]";
          PromiseNode nd;
          if (sigma.grid_step > 0.0) {
            nd.grid_index = key.get<std::int64_t>();
            nd.promise = static_cast<double>(nd.grid_index) * sigma.grid_step;
          } else {
            nd.promise = key.get<double>();
          }
          sigma.nodes[t][s].push_back(std::move(nd));
        }
    }
    struct Raw {
      int action, cid;
      Contract contract;
    };
    std::map<std::tuple<int, int, int>, std::vector<Raw>> raw;
    const json& menu = j.at("menu");
    if (static_cast<int>(menu.size()) != H) throw ValidationError("menu: expected one entry per step");
    for (int t = 0; t < H; ++t)
      for (std::size_t n = 0; n < menu[t].size(); ++n) {
        path = "menu[" + std::to_string(t) + "][" + std::to_string(n) + "]";
        const json& m = menu[t][n];
        int s = m.at("s").get<int>();
        if (s < 0 || s >= S) throw ValidationError(path + ": state out of range");
        int i = find_node(sigma, t, s, m.at("promise"), path);
        Raw r{m.at("action").get<int>(), m.at("contract_id").get<int>(), Contract{m.at("contract").get<std::vector<double>>()}};
        raw[{t, s, i}].push_back(std::move(r));
      }
    for (auto& [key, entries] : raw) {
      auto [t, s, i] = key;
      std::stable_sort(entries.begin(), entries.end(),
                       [](const Raw& a, const Raw& b) { return std::tie(a.action, a.cid) < std::tie(b.action, b.cid); });
      PromiseNode& nd = sigma.nodes[t][s][i];
      int expect = 0;
      for (std::size_t e = 0; e < entries.size(); ++e) {
        if (e > 0 && entries[e].action != entries[e - 1].action) expect = 0;
        if (entries[e].cid != expect)
          throw ValidationError("menu: contract ids of each action must be 0,1,2,... at step " + std::to_string(t + 1));
        ++expect;
        MenuEntry me;
        me.action = entries[e].action;
        me.contract = std::move(entries[e].contract);
        me.next.assign(S, t + 1 == H ? 0 : -1);
        nd.menu.push_back(std::move(me));
      }
    }
    const json& g = j.at("g");
    if (static_cast<int>(g.size()) != H) throw ValidationError("g: expected one entry per step");
    for (int t = 0; t < H; ++t)
      for (std::size_t n = 0; n < g[t].size(); ++n) {
        path = "g[" + std::to_string(t) + "][" + std::to_string(n) + "]";
        const json& m = g[t][n];
        int s = m.at("s").get<int>();
        int s2 = m.at("next_state").get<int>();
        if (s < 0 || s >= S || s2 < 0 || s2 >= S) throw ValidationError(path + ": state out of range");
        int i = find_node(sigma, t, s, m.at("promise"), path);
        int e = sigma.find_entry(t, s, i, m.at("action").get<int>(), m.at("contract_id").get<int>());
        if (e < 0) throw ValidationError(path + ": no such menu entry");
        if (t + 1 == H) {
          if (m.at("next_promise").get<double>() != 0.0) throw ValidationError(path + ": last-step promise must be 0");
          continue;
        }
        sigma.nodes[t][s][i].menu[e].next[s2] = find_node(sigma, t + 1, s2, m.at("next_promise"), path);
      }
    const json& choice = j.at("choice");
    if (static_cast<int>(choice.size()) != H) throw ValidationError("choice: expected one entry per step");
    for (int t = 0; t < H; ++t)
      for (std::size_t n = 0; n < choice[t].size(); ++n) {
        path = "choice[" + std::to_string(t) + "][" + std::to_string(n) + "]";
        const json& m = choice[t][n];
        int s = m.at("s").get<int>();
        if (s < 0 || s >= S) throw ValidationError(path + ": state out of range");
        int i = find_node(sigma, t, s, m.at("promise"), path);
        PromiseNode& nd = sigma.nodes[t][s][i];
        for (const json& c : m.at("support")) {
          int e = sigma.find_entry(t, s, i, c.at("action").get<int>(), c.at("contract_id").get<int>());
          if (e < 0) throw ValidationError(path + ": lottery references a missing menu entry");
          nd.choice.push_back(Choice{e, c.at("prob").get<double>()});
        }
        std::sort(nd.choice.begin(), nd.choice.end(), [](const Choice& a, const Choice& b) { return a.entry < b.entry; });
      }
    return sigma;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("policy field " + path + ": " + e.what());
  }
}

PromiseFormPolicy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open policy file " + path);
  try {
    return policy_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("policy parse error in " + path + ": " + e.what());
  }
}

void save_policy(const PromiseFormPolicy& sigma, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write policy file " + path);
  out << policy_to_json(sigma).dump(1) << "\n";
}

}  // namespace cmdp
