#include "gjalloc/feasibility.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <unordered_set>

namespace gja {

namespace {

// Nodes in BFS order from the center, so every node after the first has an
// already-placed neighbor.
std::vector<int> placement_order(const GraphJob& job) {
  auto hood = neighborhood_decomposition(job, job.center());
  std::vector<int> order;
  for (const auto& shell : hood.shells) order.insert(order.end(), shell.begin(), shell.end());
  return order;
}

struct LabelSearch {
  const GdcnTopology& topology;
  const GraphJob& job;
  std::span<const int> capacity;
  std::vector<int> order;
  std::vector<int> label;   // node -> dc, -1 when unplaced
  std::vector<int> counts;  // per dc
  std::unordered_set<MappingVector, MappingVectorHash> found;

  LabelSearch(const GdcnTopology& t, const GraphJob& j, std::span<const int> cap)
      : topology(t), job(j), capacity(cap), order(placement_order(j)),
        label(j.size(), -1), counts(t.size(), 0) {}

  bool compatible(int node, int dc) const {
    if (counts[dc] >= capacity[dc]) return false;
    for (int nb : job.neighbors(node)) {
      if (label[nb] >= 0 && !topology.slots_adjacent(label[nb], dc)) return false;
    }
    return true;
  }

  void place(std::size_t depth) {
    if (depth == order.size()) {
      found.insert(MappingVector(counts));
      return;
    }
    const int node = order[depth];
    for (int dc = 0; dc < static_cast<int>(topology.size()); ++dc) {
      if (!compatible(node, dc)) continue;
      label[node] = dc;
      ++counts[dc];
      place(depth + 1);
      --counts[dc];
      label[node] = -1;
    }
  }

  // Enumerate only labelings whose first node sits in `first_dc`.
  void run_from(int first_dc) {
    const int node = order.front();
    if (!compatible(node, first_dc)) return;
    label[node] = first_dc;
    ++counts[first_dc];
    place(1);
    --counts[first_dc];
    label[node] = -1;
  }
};

FeasibleMappingSet to_sorted_set(int job_type, std::unordered_set<MappingVector, MappingVectorHash>&& found) {
  FeasibleMappingSet out;
  out.job_type = job_type;
  out.vectors.assign(std::make_move_iterator(found.begin()), std::make_move_iterator(found.end()));
  std::sort(out.vectors.begin(), out.vectors.end());
  return out;
}

FeasibleMappingSet enumerate_with_capacity(const GdcnTopology& topology, const GraphJob& job,
                                           std::span<const int> capacity, Exec exec) {
  const int n = static_cast<int>(topology.size());
  std::vector<std::unordered_set<MappingVector, MappingVectorHash>> partial(n);
  if (exec == Exec::serial) {
    for (int dc = 0; dc < n; ++dc) {
      LabelSearch search(topology, job, capacity);
      search.run_from(dc);
      partial[dc] = std::move(search.found);
    }
  } else {
#pragma omp parallel for schedule(dynamic)
    for (int dc = 0; dc < n; ++dc) {
      LabelSearch search(topology, job, capacity);
      search.run_from(dc);
      partial[dc] = std::move(search.found);
    }
  }
  std::unordered_set<MappingVector, MappingVectorHash> merged;
  for (auto& p : partial) merged.insert(p.begin(), p.end());
  return to_sorted_set(job.type_id(), std::move(merged));
}

// Witness search for a fixed count vector.
bool find_witness(const GdcnTopology& topology, const GraphJob& job, const std::vector<int>& order,
                  std::vector<int>& remaining, std::vector<int>& label, std::span<const int> support,
                  std::size_t depth) {
  if (depth == order.size()) return true;
  const int node = order[depth];
  for (int dc : support) {
    if (remaining[dc] == 0) continue;
    bool ok = true;
    for (int nb : job.neighbors(node)) {
      if (label[nb] >= 0 && !topology.slots_adjacent(label[nb], dc)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    label[node] = dc;
    --remaining[dc];
    if (find_witness(topology, job, order, remaining, label, support, depth + 1)) return true;
    ++remaining[dc];
    label[node] = -1;
  }
  return false;
}

bool verify_with_capacity(const GdcnTopology& topology, const GraphJob& job, const MappingVector& m,
                          std::span<const int> capacity, const std::vector<int>& order) {
  if (m.size() != topology.size() || m.total() != job.size()) return false;
  std::vector<int> support;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] < 0 || m[i] > capacity[i]) return false;
    if (m[i] > 0) support.push_back(static_cast<int>(i));
  }
  std::vector<int> remaining(m.counts().begin(), m.counts().end());
  std::vector<int> label(job.size(), -1);
  return find_witness(topology, job, order, remaining, label, support, 0);
}

}  // namespace

bool FeasibleMappingSet::contains(const MappingVector& m) const {
  return std::binary_search(vectors.begin(), vectors.end(), m);
}

FeasibleMappingSet FeasibleMappingSet::restricted_to(std::span<const int> capacity) const {
  FeasibleMappingSet out;
  out.job_type = job_type;
  for (const auto& m : vectors) {
    bool fits = m.size() == capacity.size();
    for (std::size_t i = 0; fits && i < m.size(); ++i) fits = m[i] <= capacity[i];
    if (fits) out.vectors.push_back(m);
  }
  return out;
}

NeighborhoodDecomposition neighborhood_decomposition(const GraphJob& job, int center) {
  if (center < 0 || center >= job.size()) throw ValidationError("job.center", "node id out of range");
  std::vector<int> dist(job.size(), -1);
  std::queue<int> frontier;
  dist[center] = 0;
  frontier.push(center);
  NeighborhoodDecomposition out;
  out.center = center;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    if (static_cast<int>(out.shells.size()) <= dist[u]) out.shells.emplace_back();
    out.shells[dist[u]].push_back(u);
    for (int v : job.neighbors(u)) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        frontier.push(v);
      }
    }
  }
  if (std::any_of(dist.begin(), dist.end(), [](int d) { return d < 0; })) {
    throw ValidationError("job.edges", "job graph must be connected");
  }
  for (auto& shell : out.shells) std::sort(shell.begin(), shell.end());
  return out;
}

FeasibleMappingSet enumerate_feasible_mappings(const GdcnTopology& topology, const GraphJob& job,
                                               const OracleLimits& limits, Exec exec) {
  if (job.size() > limits.max_nodes || static_cast<int>(topology.size()) > limits.max_dcs) {
    throw SizeLimitError("embedding oracle is limited to " + std::to_string(limits.max_nodes) + " nodes and " +
                         std::to_string(limits.max_dcs) + " datacenters");
  }
  auto free = topology.free_slots();
  return enumerate_with_capacity(topology, job, free, exec);
}

bool verify_embedding(const GdcnTopology& topology, const GraphJob& job, const MappingVector& m) {
  auto free = topology.free_slots();
  return verify_with_capacity(topology, job, m, free, placement_order(job));
}

FeasibleMappingSet candidate_mappings(const GdcnTopology& topology, const GraphJob& job,
                                      std::span<const int> capacity, std::size_t max_vectors, Exec exec) {
  const int n = static_cast<int>(topology.size());
  const int total = job.size();
  if (capacity.size() != topology.size()) throw ValidationError("capacity", "one entry per datacenter");

  // ways[i][r]: count vectors over dcs i..n-1 summing to r, saturated at max_vectors + 1.
  const std::size_t cap = max_vectors + 1;
  std::vector<std::vector<std::size_t>> ways(n + 1, std::vector<std::size_t>(total + 1, 0));
  ways[n][0] = 1;
  for (int i = n - 1; i >= 0; --i) {
    for (int r = 0; r <= total; ++r) {
      std::size_t acc = 0;
      for (int c = 0; c <= std::min(r, std::max(capacity[i], 0)); ++c) acc = std::min(cap, acc + ways[i + 1][r - c]);
      ways[i][r] = acc;
    }
  }
  if (ways[0][total] > max_vectors) {
    throw SizeLimitError("more than " + std::to_string(max_vectors) + " count vectors to scan");
  }

  std::vector<MappingVector> all;
  all.reserve(ways[0][total]);
  std::vector<int> counts(n, 0);
  std::function<void(int, int)> compose = [&](int i, int left) {
    if (i == n - 1) {
      if (left <= capacity[i]) {
        counts[i] = left;
        all.emplace_back(counts);
        counts[i] = 0;
      }
      return;
    }
    for (int c = std::min(left, std::max(capacity[i], 0)); c >= 0; --c) {
      if (ways[i + 1][left - c] == 0) continue;
      counts[i] = c;
      compose(i + 1, left - c);
    }
    counts[i] = 0;
  };
  compose(0, total);

  const auto order = placement_order(job);
  std::vector<char> keep(all.size(), 0);
  const auto count = static_cast<std::ptrdiff_t>(all.size());
  if (exec == Exec::serial) {
    for (std::ptrdiff_t k = 0; k < count; ++k) keep[k] = verify_with_capacity(topology, job, all[k], capacity, order);
  } else {
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t k = 0; k < count; ++k) keep[k] = verify_with_capacity(topology, job, all[k], capacity, order);
  }
  FeasibleMappingSet out;
  out.job_type = job.type_id();
  for (std::size_t k = 0; k < all.size(); ++k) {
    if (keep[k]) out.vectors.push_back(std::move(all[k]));
  }
  std::sort(out.vectors.begin(), out.vectors.end());
  return out;
}

FeasibleMappingSet structural_mappings(const GdcnTopology& topology, const GraphJob& job,
                                       const OracleLimits& limits) {
  std::vector<int> capacity(topology.size(), job.size());
  if (job.size() <= limits.max_nodes && static_cast<int>(topology.size()) <= limits.max_dcs) {
    return enumerate_with_capacity(topology, job, capacity, Exec::parallel);
  }
  return candidate_mappings(topology, job, capacity);
}

MappingVector round_to_feasible(std::span<const double> continuous, const FeasibleMappingSet& candidates,
                                std::span<const double> weights, const GdcnTopology& topology, Exec exec) {
  if (candidates.empty()) throw InfeasibleError("no feasible allocation to round to");
  if (continuous.size() != topology.size() || weights.size() != topology.size()) {
    throw ValidationError("round_to_feasible", "vector lengths must equal the datacenter count");
  }
  const auto dist = weighted_sq_distances(candidates.vectors, continuous, weights, exec);
  const double best = dist[argmin_first(dist)];
  std::size_t pick = candidates.size();
  double pick_cost = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < dist.size(); ++k) {
    if (dist[k] != best) continue;
    double cost = std::numeric_limits<double>::infinity();
    try {
      cost = allocation_cost(topology, candidates.vectors[k]);
    } catch (const CapacityError&) {
    }
    if (pick == candidates.size() || cost < pick_cost ||
        (cost == pick_cost && candidates.vectors[k] < candidates.vectors[pick])) {
      pick = k;
      pick_cost = cost;
    }
  }
  return candidates.vectors[pick];
}

}  // namespace gja
