#pragma once

// Shared fixtures and independent oracles for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <vector>

#include "gjalloc/crawler.hpp"
#include "gjalloc/learning.hpp"
#include "gjalloc/model.hpp"

namespace gja::test {

inline std::vector<DataCenter> make_dcs(const std::vector<int>& slots) {
  std::vector<DataCenter> dcs;
  for (std::size_t i = 0; i < slots.size(); ++i) dcs.push_back(DataCenter::make(static_cast<int>(i), slots[i]));
  return dcs;
}

inline GdcnTopology complete_topology(const std::vector<int>& slots) {
  return GdcnTopology::complete(make_dcs(slots));
}

inline GdcnTopology path_topology(const std::vector<int>& slots) {
  std::vector<GdcnTopology::Edge> edges;
  for (int i = 1; i < static_cast<int>(slots.size()); ++i) edges.emplace_back(i - 1, i);
  return GdcnTopology(make_dcs(slots), edges);
}

inline GraphJob triangle() { return GraphJob::make(0, 3, {{0, 1}, {1, 2}, {0, 2}}); }
inline GraphJob path_job(int n) {
  std::vector<GraphJob::Edge> edges;
  for (int v = 1; v < n; ++v) edges.emplace_back(v - 1, v);
  return GraphJob::make(0, n, edges);
}
inline GraphJob star_job(int n) {
  std::vector<GraphJob::Edge> edges;
  for (int v = 1; v < n; ++v) edges.emplace_back(0, v);
  return GraphJob::make(0, n, edges);
}
inline GraphJob shells7_job() {
  return GraphJob::make(0, 7, {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 4}, {3, 4}, {4, 5}, {5, 6}}, 0);
}

/// Mapping vectors of every injective placement of job nodes onto the free
/// slots of the materialized slot graph, found by trying slot permutations.
inline std::set<MappingVector> brute_force_mappings(const GdcnTopology& t, const GraphJob& job) {
  std::vector<int> slot_dc;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (int k = 0; k < t.dc(i).free_slots(); ++k) slot_dc.push_back(static_cast<int>(i));
  }
  const int n = job.size();
  std::set<MappingVector> found;
  std::vector<int> slot_of(n, -1);
  std::vector<char> used(slot_dc.size(), 0);
  std::function<void(int)> place = [&](int v) {
    if (v == n) {
      MappingVector m(t.size());
      for (int u = 0; u < n; ++u) ++m[slot_dc[slot_of[u]]];
      found.insert(m);
      return;
    }
    for (std::size_t s = 0; s < slot_dc.size(); ++s) {
      if (used[s]) continue;
      bool ok = true;
      for (int u : job.neighbors(v)) {
        if (u < v) {
          const int a = slot_dc[slot_of[u]];
          const int b = slot_dc[s];
          if (a != b && !t.linked(a, b)) ok = false;
        }
      }
      if (!ok) continue;
      used[s] = 1;
      slot_of[v] = static_cast<int>(s);
      place(v + 1);
      used[s] = 0;
    }
  };
  place(0);
  return found;
}

/// Whether some assignment of job nodes to datacenters with exactly the
/// counts of `m` puts every job edge inside a datacenter or across a link.
inline bool brute_force_embeds(const GdcnTopology& t, const GraphJob& job, const MappingVector& m) {
  if (m.total() != job.size()) return false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (m[i] < 0 || m[i] > t.dc(i).free_slots()) return false;
  }
  std::vector<int> labels;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (int k = 0; k < m[i]; ++k) labels.push_back(static_cast<int>(i));
  }
  std::sort(labels.begin(), labels.end());
  do {
    bool ok = true;
    for (auto [u, v] : job.edges()) {
      if (labels[u] != labels[v] && !t.linked(labels[u], labels[v])) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  } while (std::next_permutation(labels.begin(), labels.end()));
  return false;
}

/// Straight reading of the learner's timeframe rule. Strategies are plain
/// vectors and clusters are label lists; nothing is shared with the library.
struct BrmaOracle {
  std::vector<std::vector<double>> points;
  std::vector<int> label;  // cluster of each strategy
  double E, K, ks;
  std::vector<double> w;

  BrmaOracle(std::vector<std::vector<double>> pts, std::vector<int> labels, double e, double k, double s)
      : points(std::move(pts)), label(std::move(labels)), E(e), K(k), ks(s), w(points.size(), 1.0) {}

  double sim(const std::vector<double>& a, const std::vector<double>& b) const {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    return (std::exp(ks * dot / (std::sqrt(na) * std::sqrt(nb))) - 1.0) / (std::exp(ks) - 1.0);
  }

  std::vector<double> probabilities() const {
    double total = 0.0;
    for (double x : w) total += x;
    std::vector<double> p;
    for (double x : w) p.push_back((1.0 - E) * x / total + E / static_cast<double>(w.size()));
    return p;
  }

  void timeframe(const std::vector<std::size_t>& actions, const std::vector<double>& u) {
    const std::size_t n = w.size();
    std::vector<double> q(n, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
      double num = 0.0;
      int kappa = 0;
      for (std::size_t z = 0; z < actions.size(); ++z) {
        if (actions[z] == m) {
          num += u[z];
          ++kappa;
        }
      }
      if (kappa > 0) {
        q[m] = num / kappa;
        continue;
      }
      int members = 0;
      for (int l : label) members += l == label[m];
      double acc = 0.0;
      for (std::size_t z = 0; z < actions.size(); ++z) {
        if (label[actions[z]] == label[m]) acc += sim(points[actions[z]], points[m]) * u[z];
      }
      q[m] = acc / members;  // zero when the cluster went untouched
    }
    for (std::size_t m = 0; m < n; ++m) w[m] *= std::exp(K * q[m] / static_cast<double>(n));
  }
};

/// Regret matching for one agent recomputed from the whole history at every
/// step: substituting rewards, average regrets, next distribution.
inline std::vector<double> rmba_oracle_distribution(const JointUtility& game, std::size_t agent,
                                                    const std::vector<std::vector<std::size_t>>& history) {
  const std::size_t a = game.actions(agent);
  const double n = static_cast<double>(history.size());
  const std::size_t cur = history.back()[agent];
  std::vector<double> r(a, 0.0);
  double total = 0.0;
  for (std::size_t m2 = 0; m2 < a; ++m2) {
    double delta = 0.0;
    for (const auto& joint : history) {
      double sr = game.utility(agent, joint);
      if (joint[agent] == cur) {
        auto alt = joint;
        alt[agent] = m2;
        sr = game.utility(agent, alt);
      }
      delta += sr - game.utility(agent, joint);
    }
    r[m2] = std::max(delta / n, 0.0);
    total += r[m2];
  }
  std::vector<double> p(a, 0.0);
  if (total == 0.0) {
    p[cur] = 1.0;
    return p;
  }
  double others = 0.0;
  for (std::size_t m = 0; m < a; ++m) {
    if (m == cur) continue;
    p[m] = r[m] / total;
    others += p[m];
  }
  p[cur] = 1.0 - others;
  return p;
}

// Sum of per-DC expected costs, recomputed from the mapping vector.
inline double strategy_key(const GdcnTopology& t, const MappingVector& m) {
  double k = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] > 0) k += dc_cost_term(t.dc(i), t.dc(i).load + m[i], m[i]);
  }
  return k;
}

// Cheapest key the walk can produce from `start`. Explores every reachable
// (current DC, visited set) state; from each one, allocations begin at the
// current DC and follow unvisited neighbors, split per the shell rule. A
// reset starts over with an empty list, so paths never cross one.
inline double walk_enumeration_minimum(const GdcnTopology& t, const GraphJob& job, int start) {
  const auto cap = t.free_slots();
  double best = std::numeric_limits<double>::infinity();
  std::set<std::pair<int, unsigned>> seen;
  std::vector<std::pair<int, unsigned>> stack{{start, 1u << start}};
  std::vector<int> path;
  std::function<void(int, unsigned)> grow = [&](int dc, unsigned visited) {
    path.push_back(dc);
    for (const auto& m : shell_split_enumerate(t, job, path, cap)) best = std::min(best, strategy_key(t, m));
    if (static_cast<int>(path.size()) <= job.depth()) {
      for (int nb : t.neighbors(dc)) {
        if (!(visited >> nb & 1u)) grow(nb, visited | 1u << nb);
      }
    }
    path.pop_back();
  };
  while (!stack.empty()) {
    const auto state = stack.back();
    stack.pop_back();
    if (!seen.insert(state).second) continue;
    const auto [dc, visited] = state;
    grow(dc, visited);
    bool fresh = false;
    for (int nb : t.neighbors(dc)) {
      if (!(visited >> nb & 1u)) {
        fresh = true;
        stack.push_back({nb, visited | 1u << nb});
      }
    }
    if (!fresh) {
      for (int nb : t.neighbors(dc)) stack.push_back({nb, 1u << nb});
    }
  }
  return best;
}

}  // namespace gja::test
