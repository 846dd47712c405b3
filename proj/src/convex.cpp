#include "gjalloc/convex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace gja {

RelaxedProblem::RelaxedProblem(const GdcnTopology& topology, int job_size) : job_size_(job_size) {
  double xi_sum = 0.0;
  for (const auto& dc : topology.dcs()) xi_sum += dc.xi;
  price_scale_ = xi_sum / static_cast<double>(topology.size());
  for (const auto& dc : topology.dcs()) {
    const double rel_xi = dc.xi / price_scale_;
    const double slots = dc.slots;
    curvature_.push_back(rel_xi * dc.eta * dc.servers * dc.sigma * dc.alpha / std::pow(slots, dc.alpha));
    io_slope_.push_back(rel_xi * dc.nu);
    load_.push_back(dc.load);
    capacity_.push_back(dc.free_slots());
    alpha_.push_back(dc.alpha);
    idle_.push_back(rel_xi * dc.eta * dc.servers * dc.p_idle);
    sigma_term_.push_back(rel_xi * dc.eta * dc.servers * dc.sigma);
    slots_.push_back(slots);
  }
}

double RelaxedProblem::dc_objective(std::size_t i, double m) const {
  const double u = (load_[i] + m) / slots_[i];
  return sigma_term_[i] * std::pow(u, alpha_[i]) + idle_[i] + io_slope_[i] * m;
}

double RelaxedProblem::objective(std::span<const double> m) const {
  double total = 0.0;
  for (std::size_t i = 0; i < size(); ++i) total += dc_objective(i, m[i]);
  return total;
}

double RelaxedProblem::lagrangian(std::span<const double> m, const DualState& s) const {
  double value = objective(m);
  double placed = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    value += s.lambda[i] * (m[i] - capacity_[i]) - s.Lambda[i] * m[i];
    placed += m[i];
  }
  return value + s.gamma * (placed - job_size_);
}

DualState RelaxedProblem::initial_state() const {
  DualState s;
  s.lambda.assign(size(), 0.0);
  s.Lambda.resize(size());
  double mean_curvature = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    s.Lambda[i] = curvature_[i] / 5.0;
    mean_curvature += curvature_[i];
  }
  s.gamma = -mean_curvature / static_cast<double>(size()) / 3.0;
  return s;
}

double inner_minimizer_dc(const RelaxedProblem& problem, std::size_t i, double lambda, double gamma,
                          double Lambda) {
  const double numerator = Lambda - lambda - gamma - problem.io_slope(i);
  if (numerator <= 0.0) return 0.0;
  return std::pow(numerator / problem.curvature(i), 1.0 / (problem.alpha(i) - 1.0)) - problem.load(i);
}

std::vector<double> inner_minimizer(const RelaxedProblem& problem, const DualState& state) {
  std::vector<double> m(problem.size());
  for (std::size_t i = 0; i < problem.size(); ++i) {
    m[i] = inner_minimizer_dc(problem, i, state.lambda[i], state.gamma, state.Lambda[i]);
  }
  return m;
}

double dual_value(const RelaxedProblem& problem, const DualState& state) {
  return problem.lagrangian(inner_minimizer(problem, state), state);
}

DualGradient dual_gradient(const RelaxedProblem& problem, const DualState& state) {
  const auto m = inner_minimizer(problem, state);
  DualGradient g;
  g.lambda.resize(problem.size());
  g.Lambda.resize(problem.size());
  double placed = 0.0;
  for (std::size_t i = 0; i < problem.size(); ++i) {
    g.lambda[i] = m[i] - problem.capacity(i);
    g.Lambda[i] = -m[i];
    placed += m[i];
  }
  g.gamma = placed - problem.job_size();
  return g;
}

DualState dual_ascent_step(const DualState& state, const RelaxedProblem& problem, const SolverConfig& cfg) {
  const auto g = dual_gradient(problem, state);
  DualState next = state;
  for (std::size_t i = 0; i < problem.size(); ++i) {
    next.lambda[i] = std::max(0.0, state.lambda[i] + cfg.c_lambda * g.lambda[i]);
    next.Lambda[i] = std::max(0.0, state.Lambda[i] + cfg.c_Lambda * g.Lambda[i]);
  }
  next.gamma = state.gamma + cfg.c_gamma * g.gamma;
  next.iteration = state.iteration + 1;
  return next;
}

namespace {

double violation(const RelaxedProblem& problem, std::span<const double> m) {
  double placed = 0.0;
  double v = 0.0;
  for (std::size_t i = 0; i < problem.size(); ++i) {
    placed += m[i];
    v += std::max(0.0, m[i] - problem.capacity(i)) + std::max(0.0, -m[i]);
  }
  return v + std::abs(placed - problem.job_size());
}

void write_trace_header(std::ostream& out, std::size_t n) {
  out << "iteration";
  for (std::size_t i = 0; i < n; ++i) out << ",lambda_" << i;
  out << ",gamma";
  for (std::size_t i = 0; i < n; ++i) out << ",Lambda_" << i;
  out << '\n';
}

void write_trace_row(std::ostream& out, const DualState& s) {
  out << s.iteration;
  for (double v : s.lambda) out << ',' << v;
  out << ',' << s.gamma;
  for (double v : s.Lambda) out << ',' << v;
  out << '\n';
}

double max_change(const DualState& a, const DualState& b) {
  double d = std::abs(a.gamma - b.gamma);
  for (std::size_t i = 0; i < a.lambda.size(); ++i) {
    d = std::max({d, std::abs(a.lambda[i] - b.lambda[i]), std::abs(a.Lambda[i] - b.Lambda[i])});
  }
  return d;
}

}  // namespace

RelaxedSolution solve_relaxed(const GdcnTopology& topology, const GraphJob& job, const SolverConfig& cfg) {
  const auto free = topology.free_slots();
  if (std::accumulate(free.begin(), free.end(), 0) < job.size()) {
    throw InfeasibleError("free capacity cannot hold a job of " + std::to_string(job.size()) + " nodes");
  }
  RelaxedProblem problem(topology, job.size());
  RelaxedSolution out;
  DualState state = problem.initial_state();
  if (cfg.trace) {
    write_trace_header(*cfg.trace, problem.size());
    write_trace_row(*cfg.trace, state);
  }
  double best_violation = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cfg.max_iterations; ++k) {
    DualState next = dual_ascent_step(state, problem, cfg);
    if (cfg.trace) write_trace_row(*cfg.trace, next);
    const bool settled = max_change(state, next) < cfg.tolerance;
    state = std::move(next);
    auto m = inner_minimizer(problem, state);
    const double v = violation(problem, m);
    if (settled) {
      out.m = std::move(m);
      out.state = state;
      out.converged = true;
      break;
    }
    if (v < best_violation) {
      best_violation = v;
      out.m = std::move(m);
      out.state = state;
    }
  }
  out.iterations = state.iteration;
  return out;
}

std::vector<JobOutcome> allocate_sequentially(GdcnTopology& topology, std::span<const GraphJob> jobs,
                                              const CandidateSource& candidates, const SolverConfig& cfg) {
  std::vector<JobOutcome> outcomes;
  outcomes.reserve(jobs.size());
  std::vector<double> weights = cfg.rounding_weights;
  if (weights.empty()) weights.assign(topology.size(), 1.0);
  for (const auto& job : jobs) {
    JobOutcome outcome;
    outcome.job_type = job.type_id();
    try {
      auto feasible = candidates(topology, job);
      if (!feasible.empty()) {
        auto relaxed = solve_relaxed(topology, job, cfg);
        outcome.relaxed = relaxed.m;
        outcome.converged = relaxed.converged;
        auto pick = round_to_feasible(relaxed.m, feasible, weights, topology);
        topology.commit(pick);
        outcome.allocation = std::move(pick);
      }
    } catch (const InfeasibleError&) {
    }
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

}  // namespace gja
