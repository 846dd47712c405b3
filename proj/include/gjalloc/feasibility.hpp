#pragma once

#include <span>
#include <vector>

#include "gjalloc/kernels.hpp"
#include "gjalloc/model.hpp"

namespace gja {

/// Size bound for the exhaustive embedding oracle.
struct OracleLimits {
  int max_nodes = 8;
  int max_dcs = 8;
};

/// The mapping vectors of every feasible embedding of one job type, sorted
/// lexicographically without duplicates.
struct FeasibleMappingSet {
  int job_type = 0;
  std::vector<MappingVector> vectors;

  bool empty() const { return vectors.empty(); }
  std::size_t size() const { return vectors.size(); }
  bool contains(const MappingVector& m) const;

  /// Members with m_i <= capacity_i for every datacenter.
  FeasibleMappingSet restricted_to(std::span<const int> capacity) const;
};

struct NeighborhoodDecomposition {
  int center = 0;
  std::vector<std::vector<int>> shells;  // shells[k] = nodes at distance k
};

/// BFS shells around `center`. Throws ValidationError for a bad center.
NeighborhoodDecomposition neighborhood_decomposition(const GraphJob& job, int center);

/// Every mapping vector that admits an embedding of `job` into the free slots
/// of `topology`. Backtracks over node-to-datacenter labelings; slots inside a
/// datacenter are interchangeable, so a labeling is feasible when per-DC counts
/// fit the free slots and every job edge lands inside one datacenter or on a
/// datacenter link. Throws SizeLimitError above `limits`.
FeasibleMappingSet enumerate_feasible_mappings(const GdcnTopology& topology, const GraphJob& job,
                                               const OracleLimits& limits = {},
                                               Exec exec = Exec::parallel);

/// True when `m` places the whole job within the free slots and some node
/// labeling consistent with `m` satisfies every job edge.
bool verify_embedding(const GdcnTopology& topology, const GraphJob& job, const MappingVector& m);

/// Feasible vectors found by scanning all count vectors with m_i <= capacity_i
/// and keeping those verify_embedding accepts. Works where the labeling
/// search is too large (many datacenters); refuses more than `max_vectors`
/// count vectors with SizeLimitError.
FeasibleMappingSet candidate_mappings(const GdcnTopology& topology, const GraphJob& job,
                                      std::span<const int> capacity, std::size_t max_vectors = 2'000'000,
                                      Exec exec = Exec::parallel);

/// Capacity-independent feasible set: every datacenter treated as able to hold
/// the whole job. Intersect with current free slots via restricted_to().
FeasibleMappingSet structural_mappings(const GdcnTopology& topology, const GraphJob& job,
                                       const OracleLimits& limits = {});

/// Candidate closest to `continuous` in weighted squared distance. Ties go to
/// the lower allocation cost under the topology's loads, then to the
/// lexicographically smallest vector. Throws InfeasibleError when empty.
MappingVector round_to_feasible(std::span<const double> continuous, const FeasibleMappingSet& candidates,
                                std::span<const double> weights, const GdcnTopology& topology,
                                Exec exec = Exec::parallel);

}  // namespace gja
