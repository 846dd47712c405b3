#include "gjalloc/cdga.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace gja {

ConsensusMatrix build_consensus_matrix(const GdcnTopology& topology, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("cdga.epsilon", "must lie in (0, 1)");
  ConsensusMatrix w;
  w.n = topology.size();
  w.epsilon = epsilon;
  w.w.assign(w.n * w.n, 0.0);
  for (std::size_t i = 0; i < w.n; ++i) {
    const auto& nbrs = topology.neighbors(static_cast<int>(i));
    w.w[i * w.n + i] = 1.0 - epsilon * static_cast<double>(nbrs.size());
    for (int j : nbrs) w.w[i * w.n + j] = epsilon;
  }
  return w;
}

double disagreement_contraction(const ConsensusMatrix& w) {
  if (w.n < 2) return 0.0;
  Eigen::MatrixXd m(w.n, w.n);
  for (std::size_t i = 0; i < w.n; ++i) {
    for (std::size_t j = 0; j < w.n; ++j) m(i, j) = w(i, j);
  }
  // Deflate the consensus direction, then take the spectral radius.
  m.array() -= 1.0 / static_cast<double>(w.n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

ConsensusNetwork::ConsensusNetwork(const GdcnTopology& topology, ConsensusMatrix w, Exec exec)
    : topology_(&topology), w_(std::move(w)), exec_(exec), inbox_(topology.size()) {
  if (w_.n != topology.size()) throw ValidationError("cdga.matrix", "size must equal the datacenter count");
}

void ConsensusNetwork::exchange(std::vector<double>& values) {
  const auto n = static_cast<std::ptrdiff_t>(topology_->size());
  // Post: each DC sends its value along its own links only.
  for (auto& box : inbox_) box.clear();
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (int j : topology_->neighbors(static_cast<int>(i))) {
      inbox_[j].push_back({static_cast<int>(i), values[i]});
      ++messages_;
    }
  }
  // Combine: each DC reads its inbox.
  std::vector<double> next(values.size());
  long foreign = 0;
  auto combine = [&](std::ptrdiff_t i) {
    double acc = w_(i, i) * values[i];
    long bad = 0;
    for (const auto& msg : inbox_[i]) {
      if (!topology_->linked(static_cast<int>(i), msg.sender)) ++bad;
      acc += w_(i, msg.sender) * msg.value;
    }
    next[i] = acc;
    return bad;
  };
  if (exec_ == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) foreign += combine(i);
  } else {
#pragma omp parallel for reduction(+ : foreign)
    for (std::ptrdiff_t i = 0; i < n; ++i) foreign += combine(i);
  }
  foreign_reads_ += foreign;
  values = std::move(next);
}

double local_dual_value(const RelaxedProblem& problem, std::size_t i, const DcLocalState& s) {
  const double m = inner_minimizer_dc(problem, i, s.lambda, s.gamma, s.Lambda);
  const double share = static_cast<double>(problem.job_size()) / static_cast<double>(problem.size());
  return problem.dc_objective(i, m) + s.lambda * (m - problem.capacity(i)) + s.gamma * (m - share) -
         s.Lambda * m;
}

DcLocalState local_update(const DcLocalState& s, const RelaxedProblem& problem, std::size_t i,
                          const SolverConfig& cfg) {
  const double m = inner_minimizer_dc(problem, i, s.lambda, s.gamma, s.Lambda);
  const double share = static_cast<double>(problem.job_size()) / static_cast<double>(problem.size());
  DcLocalState next = s;
  next.lambda = std::max(0.0, s.lambda + cfg.c_lambda * (m - problem.capacity(i)));
  next.gamma_prime = s.gamma + cfg.c_gamma * (m - share);
  next.Lambda = std::max(0.0, s.Lambda - cfg.c_Lambda * m);
  return next;
}

void consensus_round(std::vector<DcLocalState>& states, ConsensusNetwork& network, int steps) {
  std::vector<double> x(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) x[i] = states[i].gamma_prime;
  for (int k = 0; k < steps; ++k) network.exchange(x);
  for (std::size_t i = 0; i < states.size(); ++i) states[i].gamma = x[i];
}

std::vector<DcLocalState> initial_local_states(const RelaxedProblem& problem) {
  std::vector<DcLocalState> states(problem.size());
  for (std::size_t i = 0; i < problem.size(); ++i) {
    states[i].Lambda = problem.curvature(i) / 5.0;
    states[i].gamma = -problem.curvature(i) / 3.0;
    states[i].gamma_prime = states[i].gamma;
  }
  return states;
}

namespace {

void write_trace(std::ostream& out, int iteration, const std::vector<DcLocalState>& states,
                 const RelaxedProblem& problem) {
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& s = states[i];
    out << iteration << ',' << i << ',' << s.lambda << ',' << s.gamma << ',' << s.Lambda << ','
        << inner_minimizer_dc(problem, i, s.lambda, s.gamma, s.Lambda) << '\n';
  }
}

}  // namespace

CdgaResult run_cdga(const GdcnTopology& topology, const GraphJob& job, const FeasibleMappingSet* candidates,
                    const CdgaConfig& cfg) {
  const auto free = topology.free_slots();
  if (std::accumulate(free.begin(), free.end(), 0) < job.size()) {
    throw InfeasibleError("free capacity cannot hold a job of " + std::to_string(job.size()) + " nodes");
  }
  if (cfg.consensus_steps < 0) throw ValidationError("cdga.consensus_steps", "must be non-negative");
  RelaxedProblem problem(topology, job.size());
  auto w = build_consensus_matrix(topology, cfg.epsilon);
  if (disagreement_contraction(w) >= 1.0) {
    throw ValidationError("cdga.epsilon", "consensus does not contract on this graph; lower epsilon");
  }
  ConsensusNetwork network(topology, std::move(w), cfg.exec);
  auto states = initial_local_states(problem);
  const auto n = static_cast<std::ptrdiff_t>(states.size());
  if (cfg.trace) {
    *cfg.trace << "iteration,dc,lambda,gamma,Lambda,m\n";
    write_trace(*cfg.trace, 0, states, problem);
  }

  CdgaResult out;
  std::vector<DcLocalState> next(states.size());
  for (int k = 0; k < cfg.solver.max_iterations; ++k) {
    if (cfg.exec == Exec::serial) {
      for (std::ptrdiff_t i = 0; i < n; ++i) next[i] = local_update(states[i], problem, i, cfg.solver);
    } else {
#pragma omp parallel for
      for (std::ptrdiff_t i = 0; i < n; ++i) next[i] = local_update(states[i], problem, i, cfg.solver);
    }
    consensus_round(next, network, cfg.consensus_steps);
    out.iterations = k + 1;
    if (cfg.trace) write_trace(*cfg.trace, k + 1, next, problem);

    // Every DC's own multipliers settled and its gamma agrees with every
    // other DC's previous gamma.
    double change = 0.0;
    double gmin = states[0].gamma;
    double gmax = states[0].gamma;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      change = std::max({change, std::abs(next[i].lambda - states[i].lambda),
                         std::abs(next[i].gamma - states[i].gamma), std::abs(next[i].Lambda - states[i].Lambda)});
      gmin = std::min(gmin, states[i].gamma);
      gmax = std::max(gmax, states[i].gamma);
    }
    double spread = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      spread = std::max({spread, std::abs(next[i].gamma - gmin), std::abs(next[i].gamma - gmax)});
    }
    std::swap(states, next);
    if (change < cfg.solver.tolerance && spread < cfg.solver.tolerance) {
      out.converged = true;
      break;
    }
  }

  out.relaxed.resize(states.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out.relaxed[i] = inner_minimizer_dc(problem, i, states[i].lambda, states[i].gamma, states[i].Lambda);
  }
  if (candidates && !candidates->empty()) {
    std::vector<double> weights = cfg.solver.rounding_weights;
    if (weights.empty()) weights.assign(topology.size(), 1.0);
    out.allocation = round_to_feasible(out.relaxed, *candidates, weights, topology, cfg.exec);
  }
  out.states = std::move(states);
  out.messages = network.messages_sent();
  out.non_neighbor_reads = network.non_neighbor_reads();
  return out;
}

}  // namespace gja
