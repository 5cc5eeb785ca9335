#pragma once

#include <cstdio>
#include <filesystem>
#include <string>

#include "cmdp/generators.hpp"
#include "cmdp/policy.hpp"

namespace fixtures {

using namespace cmdp;

inline std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("cmdp_test_" + name)).string();
}

inline Instance toy2() { return gen_toy2(); }
inline Instance toy2(std::uint64_t seed) { return gen_random(seed, 2, 2, 2, 0.0); }

// One state, one zero-cost action, reward 1 on every step.
inline Instance single_state(int horizon) {
  Instance inst = Instance::zeros(horizon, 1, 1, 1.0);
  inst.initial[0] = 1.0;
  for (int t = 0; t < horizon; ++t) {
    inst.P(t, 0, 0, 0) = 1.0;
    inst.r(t, 0, 0) = 1.0;
  }
  return inst;
}

inline MenuEntry entry(int action, std::vector<double> pay, std::vector<int> next) {
  return MenuEntry{action, Contract{std::move(pay)}, std::move(next)};
}

inline PromiseNode node(double promise, std::vector<MenuEntry> menu, std::vector<Choice> choice = {{0, 1.0}}) {
  PromiseNode nd;
  nd.promise = promise;
  nd.menu = std::move(menu);
  nd.choice = std::move(choice);
  return nd;
}

// History-dependent policy on the gap instance: the principal pays nothing at
// s0, then pays 3/4 on s4 only after the path through s1.
inline PromiseFormPolicy gap_hand_policy() {
  enum { s0, s1, s2, s3, s4, s5 };
  const std::vector<double> zero(6, 0.0);
  PromiseFormPolicy sigma = PromiseFormPolicy::empty(3, 6);
  sigma.nodes[0][s0].push_back(node(0.0, {entry(0, zero, {-1, 0, 0, -1, -1, -1})}));
  sigma.nodes[1][s1].push_back(node(0.25, {entry(0, zero, {-1, -1, -1, 1, -1, -1})}));
  sigma.nodes[1][s2].push_back(node(0.0, {entry(0, zero, {-1, -1, -1, 0, -1, -1})}));
  sigma.nodes[2][s3].push_back(node(0.0, {entry(2, zero, {0, 0, 0, 0, 0, 0})}));
  sigma.nodes[2][s3].push_back(node(0.25, {entry(0, {0, 0, 0, 0, 0.75, 0}, {0, 0, 0, 0, 0, 0})}));
  return sigma;
}

// Markovian-style policy on the gap instance: pays nothing anywhere.
inline PromiseFormPolicy gap_zero_policy() {
  enum { s0, s1, s2, s3 };
  const std::vector<double> zero(6, 0.0);
  PromiseFormPolicy sigma = PromiseFormPolicy::empty(3, 6);
  sigma.nodes[0][s0].push_back(node(0.0, {entry(0, zero, {-1, 0, 0, -1, -1, -1})}));
  sigma.nodes[1][s1].push_back(node(0.0, {entry(0, zero, {-1, -1, -1, 0, -1, -1})}));
  sigma.nodes[1][s2].push_back(node(0.0, {entry(0, zero, {-1, -1, -1, 0, -1, -1})}));
  sigma.nodes[2][s3].push_back(node(0.0, {entry(2, zero, {0, 0, 0, 0, 0, 0})}));
  return sigma;
}

}  // namespace fixtures
