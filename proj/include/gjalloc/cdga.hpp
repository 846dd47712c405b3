#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "gjalloc/convex.hpp"
#include "gjalloc/kernels.hpp"

namespace gja {

struct CdgaConfig {
  SolverConfig solver;      // step sizes, tolerance and iteration cap
  double epsilon = 0.1;     // Laplacian weight
  int consensus_steps = 15;  // one-hop exchanges per round
  std::ostream* trace = nullptr;
  Exec exec = Exec::parallel;
};

/// W = I - epsilon * Laplacian of the datacenter graph.
struct ConsensusMatrix {
  std::size_t n = 0;
  double epsilon = 0.0;
  std::vector<double> w;  // row major

  double operator()(std::size_t i, std::size_t j) const { return w[i * n + j]; }
};

/// Throws ValidationError unless 0 < epsilon < 1.
ConsensusMatrix build_consensus_matrix(const GdcnTopology& topology, double epsilon);

/// Second-largest eigenvalue magnitude of W, i.e. its contraction factor on
/// the disagreement subspace.
double disagreement_contraction(const ConsensusMatrix& w);

struct DcLocalState {
  double lambda = 0.0;
  double gamma = 0.0;
  double gamma_prime = 0.0;
  double Lambda = 0.0;
};

/// Message fabric over the datacenter graph. A datacenter only ever reads the
/// messages its neighbors posted; the counters let tests confirm that.
class ConsensusNetwork {
 public:
  ConsensusNetwork(const GdcnTopology& topology, ConsensusMatrix w, Exec exec = Exec::parallel);

  /// One synchronous exchange: every DC posts its value to its neighbors, then
  /// replaces it by the W-weighted mix of its own value and its inbox.
  void exchange(std::vector<double>& values);

  const ConsensusMatrix& matrix() const { return w_; }
  long messages_sent() const { return messages_; }
  long non_neighbor_reads() const { return foreign_reads_; }

 private:
  struct Message {
    int sender;
    double value;
  };
  const GdcnTopology* topology_;
  ConsensusMatrix w_;
  Exec exec_;
  std::vector<std::vector<Message>> inbox_;
  long messages_ = 0;
  long foreign_reads_ = 0;
};

/// Per-DC share of the dual, with the placement constraint split evenly.
double local_dual_value(const RelaxedProblem& problem, std::size_t i, const DcLocalState& s);

/// Gradient step on one datacenter's own dual term (writes gamma_prime).
DcLocalState local_update(const DcLocalState& s, const RelaxedProblem& problem, std::size_t i,
                          const SolverConfig& cfg);

/// gamma_i <- (W^steps gamma')_i computed by `steps` one-hop exchanges.
void consensus_round(std::vector<DcLocalState>& states, ConsensusNetwork& network, int steps);

std::vector<DcLocalState> initial_local_states(const RelaxedProblem& problem);

struct CdgaResult {
  std::vector<double> relaxed;
  std::optional<MappingVector> allocation;
  std::vector<DcLocalState> states;
  int iterations = 0;
  bool converged = false;
  long messages = 0;
  long non_neighbor_reads = 0;
};

/// Distributed dual ascent with consensus on the placement multiplier. The
/// final rounding against `candidates` is the one centralized step; it is
/// skipped when `candidates` is null or empty. Throws InfeasibleError when the
/// free capacity cannot hold the job and ValidationError when epsilon is too
/// large for W to contract disagreement on this graph.
CdgaResult run_cdga(const GdcnTopology& topology, const GraphJob& job, const FeasibleMappingSet* candidates,
                    const CdgaConfig& cfg = {});

}  // namespace gja
