#pragma once

// Data-parallel inner loops. Every kernel has a serial reference path that the
// OpenMP path must reproduce exactly; tests compare the two and the benchmark
// target times them.

#include <span>
#include <vector>

#include "gjalloc/model.hpp"

namespace gja {

enum class Exec { serial, parallel };

/// Number of OpenMP worker threads available (1 without OpenMP).
int worker_threads();

/// sum_i w_i (m_i - x_i)^2 for every candidate.
std::vector<double> weighted_sq_distances(std::span<const MappingVector> candidates,
                                          std::span<const double> target,
                                          std::span<const double> weights, Exec exec = Exec::parallel);

/// allocation_cost of every candidate against the topology's current loads;
/// +infinity for candidates that do not fit.
std::vector<double> candidate_costs(const GdcnTopology& topology,
                                    std::span<const MappingVector> candidates,
                                    Exec exec = Exec::parallel);

/// Index of the smallest value; the lowest index wins ties.
std::size_t argmin_first(std::span<const double> values);

}  // namespace gja
