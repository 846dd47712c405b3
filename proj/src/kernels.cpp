#include "gjalloc/kernels.hpp"

#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gja {

int worker_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

double sq_distance(const MappingVector& m, std::span<const double> target, std::span<const double> weights) {
  double d = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double diff = m[i] - target[i];
    d += weights[i] * diff * diff;
  }
  return d;
}

double fitted_cost(const GdcnTopology& topology, const MappingVector& m) {
  for (std::size_t i = 0; i < topology.size(); ++i) {
    if (m[i] > topology.dc(i).free_slots()) return std::numeric_limits<double>::infinity();
  }
  return allocation_cost(topology, m);
}

}  // namespace

std::vector<double> weighted_sq_distances(std::span<const MappingVector> candidates,
                                          std::span<const double> target,
                                          std::span<const double> weights, Exec exec) {
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
  std::vector<double> out(candidates.size());
  if (exec == Exec::serial) {
    for (std::ptrdiff_t k = 0; k < n; ++k) out[k] = sq_distance(candidates[k], target, weights);
    return out;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) out[k] = sq_distance(candidates[k], target, weights);
  return out;
}

std::vector<double> candidate_costs(const GdcnTopology& topology,
                                    std::span<const MappingVector> candidates, Exec exec) {
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
  std::vector<double> out(candidates.size());
  if (exec == Exec::serial) {
    for (std::ptrdiff_t k = 0; k < n; ++k) out[k] = fitted_cost(topology, candidates[k]);
    return out;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) out[k] = fitted_cost(topology, candidates[k]);
  return out;
}

std::size_t argmin_first(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] < values[best]) best = k;
  }
  return best;
}

}  // namespace gja
