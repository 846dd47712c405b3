#include "gjalloc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace gja {

std::vector<int> greedy_rank(const GdcnTopology& topology, const GraphJob& job, BaselinePolicy policy) {
  const int n = static_cast<int>(topology.size());
  std::vector<double> score(n);
  for (int i = 0; i < n; ++i) {
    const auto& dc = topology.dc(i);
    if (policy == BaselinePolicy::greedy1) {
      score[i] = dc_power(dc, std::min(dc.load + job.size(), dc.slots));
    } else if (policy == BaselinePolicy::greedy2) {
      score[i] = -static_cast<double>(dc.free_slots());
    } else {
      throw ValidationError("policy", "only greedy policies rank datacenters");
    }
  }
  std::vector<int> rank(n);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) { return score[a] < score[b]; });
  return rank;
}

MappingVector greedy_pick(const FeasibleMappingSet& feasible, std::span<const int> rank) {
  if (feasible.empty()) throw InfeasibleError("no feasible allocation");
  const MappingVector* best = &feasible.vectors.front();
  for (const auto& m : feasible.vectors) {
    for (int dc : rank) {
      if (m[dc] != (*best)[dc]) {
        if (m[dc] > (*best)[dc]) best = &m;
        break;
      }
    }
  }
  return *best;
}

MappingVector greedy1_allocate(const GdcnTopology& topology, const GraphJob& job, const FeasibleMappingSet& feasible) {
  return greedy_pick(feasible, greedy_rank(topology, job, BaselinePolicy::greedy1));
}

MappingVector greedy2_allocate(const GdcnTopology& topology, const GraphJob& job, const FeasibleMappingSet& feasible) {
  return greedy_pick(feasible, greedy_rank(topology, job, BaselinePolicy::greedy2));
}

MappingVector exhaustive_allocate(const GdcnTopology& topology, const FeasibleMappingSet& feasible,
                                  std::size_t max_candidates, Exec exec) {
  if (feasible.empty()) throw InfeasibleError("no feasible allocation");
  if (feasible.size() > max_candidates) {
    throw SizeLimitError("exhaustive search limited to " + std::to_string(max_candidates) + " candidates");
  }
  const auto cost = candidate_costs(topology, feasible.vectors, exec);
  // Vectors are sorted, so the first minimum is the lexicographically smallest.
  const auto pick = argmin_first(cost);
  if (!std::isfinite(cost[pick])) throw InfeasibleError("no candidate fits the free slots");
  return feasible.vectors[pick];
}

}  // namespace gja
