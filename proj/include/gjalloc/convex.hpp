#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "gjalloc/feasibility.hpp"
#include "gjalloc/model.hpp"

namespace gja {

struct SolverConfig {
  double c_lambda = 0.1;
  double c_gamma = 0.18;
  double c_Lambda = 0.15;
  double tolerance = 1e-4;  // stop once every multiplier moves less than this
  int max_iterations = 20000;
  std::vector<double> rounding_weights;  // empty means all ones
  std::ostream* trace = nullptr;         // per-iteration multiplier CSV when set
};

/// Multipliers of the capacity (lambda), placement (gamma) and
/// non-negativity (Lambda) constraints.
struct DualState {
  std::vector<double> lambda;
  double gamma = 0.0;
  std::vector<double> Lambda;
  int iteration = 0;
};

/// The per-job continuous relaxation: minimize the allocation cost over real
/// slot counts subject to per-DC free capacity, m >= 0 and sum m = |V|.
///
/// The objective is divided by the mean electricity price so that multipliers
/// live on a watt scale; with a uniform price this is exactly the power
/// objective and the reference step sizes apply unchanged.
class RelaxedProblem {
 public:
  RelaxedProblem(const GdcnTopology& topology, int job_size);

  std::size_t size() const { return curvature_.size(); }
  int job_size() const { return job_size_; }
  double price_scale() const { return price_scale_; }

  /// xi_i eta_i N_i sigma_i alpha_i / |S_i|^alpha_i in scaled units.
  double curvature(std::size_t i) const { return curvature_[i]; }
  double io_slope(std::size_t i) const { return io_slope_[i]; }
  double load(std::size_t i) const { return load_[i]; }
  double capacity(std::size_t i) const { return capacity_[i]; }
  double alpha(std::size_t i) const { return alpha_[i]; }

  /// Scaled cost of a real-valued allocation; requires load_i + m_i >= 0.
  double objective(std::span<const double> m) const;
  /// Cost term of datacenter i alone.
  double dc_objective(std::size_t i, double m) const;
  double lagrangian(std::span<const double> m, const DualState& state) const;

  /// Multipliers used to start the ascent.
  DualState initial_state() const;

 private:
  std::vector<double> curvature_, io_slope_, load_, capacity_, alpha_, idle_, sigma_term_, slots_;
  double price_scale_ = 1.0;
  int job_size_ = 0;
};

/// Per-DC stationary point of the Lagrangian for fixed multipliers, with
/// m_i = 0 wherever Lambda_i - lambda_i - gamma - xi_i nu_i <= 0.
double inner_minimizer_dc(const RelaxedProblem& problem, std::size_t i, double lambda, double gamma,
                          double Lambda);
std::vector<double> inner_minimizer(const RelaxedProblem& problem, const DualState& state);

/// D(lambda, gamma, Lambda) = Lagrangian at the inner minimizer.
double dual_value(const RelaxedProblem& problem, const DualState& state);

struct DualGradient {
  std::vector<double> lambda;
  double gamma = 0.0;
  std::vector<double> Lambda;
};
DualGradient dual_gradient(const RelaxedProblem& problem, const DualState& state);

/// One projected gradient-ascent step on the dual.
DualState dual_ascent_step(const DualState& state, const RelaxedProblem& problem, const SolverConfig& cfg);

struct RelaxedSolution {
  std::vector<double> m;
  DualState state;
  int iterations = 0;
  bool converged = false;
};

/// Solves the relaxation by dual ascent. Throws InfeasibleError when the free
/// capacity cannot hold the job. Without convergence the iterate with the
/// smallest constraint violation is returned and `converged` is false.
RelaxedSolution solve_relaxed(const GdcnTopology& topology, const GraphJob& job, const SolverConfig& cfg = {});

/// Feasible candidates for `job` under the topology's current loads.
using CandidateSource = std::function<FeasibleMappingSet(const GdcnTopology&, const GraphJob&)>;

struct JobOutcome {
  int job_type = 0;
  std::optional<MappingVector> allocation;  // empty when the job could not be placed
  std::vector<double> relaxed;
  bool converged = false;
};

/// Places jobs one at a time in the given order: relax, round to the nearest
/// feasible vector, commit to the loads of `topology`. A job that cannot be
/// placed is recorded and skipped.
std::vector<JobOutcome> allocate_sequentially(GdcnTopology& topology, std::span<const GraphJob> jobs,
                                              const CandidateSource& candidates, const SolverConfig& cfg = {});

}  // namespace gja
