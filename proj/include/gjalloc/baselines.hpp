#pragma once

#include <random>
#include <span>

#include "gjalloc/feasibility.hpp"
#include "gjalloc/model.hpp"

namespace gja {

enum class BaselinePolicy { greedy1, greedy2, random, exhaustive };

/// Datacenter order used by a greedy policy; ties go to the lower index.
/// greedy1: ascending facility power after adding the whole job (capped at
/// capacity). greedy2: descending free slots.
std::vector<int> greedy_rank(const GdcnTopology& topology, const GraphJob& job, BaselinePolicy policy);

/// Feasible vector with the most slots on the first-ranked datacenter, ties
/// broken by the next-ranked one and so on. Throws InfeasibleError when
/// `feasible` is empty.
MappingVector greedy_pick(const FeasibleMappingSet& feasible, std::span<const int> rank);

MappingVector greedy1_allocate(const GdcnTopology& topology, const GraphJob& job, const FeasibleMappingSet& feasible);
MappingVector greedy2_allocate(const GdcnTopology& topology, const GraphJob& job, const FeasibleMappingSet& feasible);

/// Cheapest member by allocation cost; ties go to the lexicographically
/// smallest vector. Throws InfeasibleError when empty and SizeLimitError above
/// `max_candidates`.
MappingVector exhaustive_allocate(const GdcnTopology& topology, const FeasibleMappingSet& feasible,
                                  std::size_t max_candidates = 2'000'000, Exec exec = Exec::parallel);

/// Uniform draw from a non-empty pool.
template <class T>
const T& random_select(std::span<const T> pool, std::mt19937_64& rng) {
  if (pool.empty()) throw InfeasibleError("cannot draw from an empty pool");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return pool[pick(rng)];
}

}  // namespace gja
