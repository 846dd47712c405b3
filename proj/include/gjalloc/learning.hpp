#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "gjalloc/model.hpp"

namespace gja {

/// Strategies plus a partition of their indices into clusters.
struct StrategyPool {
  std::vector<MappingVector> strategies;
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::size_t> cluster_of;  // strategy index -> cluster index

  std::size_t size() const { return strategies.size(); }
};

/// k-means over mapping vectors as points in R^n (k-means++ seeding, at most
/// `max_iterations` Lloyd rounds). An empty cluster is re-seeded with the
/// point farthest from its centroid. Throws ValidationError unless
/// 1 <= k <= pool size.
StrategyPool cluster_pool(std::vector<MappingVector> strategies, std::size_t k, std::uint64_t seed,
                          int max_iterations = 100);

/// Sum of squared distances of every strategy to its cluster mean.
double clustering_objective(const StrategyPool& pool);

/// (exp(k_s cos(a, b)) - 1) / (exp(k_s) - 1). Throws ValidationError for a
/// zero vector.
double similarity(const MappingVector& a, const MappingVector& b, double k_s);

struct BrmaConfig {
  double exploration = 0.01;  // E
  int timeframe = 15;         // Gamma
  std::size_t clusters = 15;  // |C|
  double sharpness = 10.0;    // k_s
  double boost = 10.0;        // K
  bool force_cluster_sweep = true;  // one strategy per cluster in the first timeframe

  /// Throws ValidationError for out-of-range values, including Gamma < |C|
  /// when the first-timeframe sweep is on.
  void validate() const;
};

struct BrmaState {
  std::vector<double> weights;
  std::vector<double> probabilities;
};

BrmaState brma_initial_state(std::size_t pool_size, const BrmaConfig& cfg);

/// (1 - E) w / sum(w) + E / |SA|.
std::vector<double> brma_probabilities(std::span<const double> weights, double exploration);

/// One actions-and-utilities record of a finished timeframe.
struct TimeframeLog {
  std::vector<std::size_t> actions;
  std::vector<double> utilities;  // normalized utility observed for each action
};

/// Virtual rewards of one timeframe: mean observed utility for chosen
/// strategies, a similarity-weighted estimate over the cluster for the other
/// members of a touched cluster, zero elsewhere.
std::vector<double> brma_virtual_rewards(const StrategyPool& pool, const TimeframeLog& log,
                                         const BrmaConfig& cfg);

/// Multiplies each weight by exp(K Q' / |SA|) and recomputes probabilities.
BrmaState brma_timeframe_update(const BrmaState& state, const StrategyPool& pool, const TimeframeLog& log,
                                const BrmaConfig& cfg);

/// Normalized utility of playing strategy `index` at `iteration`.
using UtilityEnvironment = std::function<double(std::size_t index, int iteration)>;

struct BrmaTrace {
  std::vector<std::size_t> actions;
  std::vector<double> utilities;
  std::vector<double> p90;  // probability mass on near-best strategies, per iteration
  std::vector<std::vector<double>> probabilities;  // per timeframe, starting with the initial one
};

/// Runs the learner for `iterations` plays. `reference` holds each strategy's
/// utility used to decide which strategies are within 10% of the best.
BrmaTrace brma_run(const StrategyPool& pool, const UtilityEnvironment& env, std::span<const double> reference,
                   int iterations, std::uint64_t seed, const BrmaConfig& cfg = {});

/// Mass of `p` on strategies whose reference utility is at least 90% of the best.
double p90(std::span<const double> p, std::span<const double> reference);

/// Utilities of a simultaneous-move game among proxy agents choosing strategy
/// indices.
class JointUtility {
 public:
  virtual ~JointUtility() = default;
  virtual std::size_t agents() const = 0;
  virtual std::size_t actions(std::size_t agent) const = 0;
  virtual double utility(std::size_t agent, std::span<const std::size_t> joint) const = 0;
  /// out[m] = utility of `agent` had it played m while others kept `joint`.
  virtual void deviation_utilities(std::size_t agent, std::span<const std::size_t> joint,
                                   std::span<double> out) const;
};

/// Explicit payoff table: payoff[joint index][agent], joint index in row-major
/// order with agent 0 most significant.
class TableGame : public JointUtility {
 public:
  TableGame(std::vector<std::size_t> action_counts, std::vector<std::vector<double>> payoff);
  std::size_t agents() const override { return counts_.size(); }
  std::size_t actions(std::size_t agent) const override { return counts_[agent]; }
  double utility(std::size_t agent, std::span<const std::size_t> joint) const override;
  std::size_t joint_index(std::span<const std::size_t> joint) const;

 private:
  std::vector<std::size_t> counts_;
  std::vector<std::vector<double>> payoff_;
};

/// Load-dependent pricing game: every agent places one copy of `job` using a
/// strategy from its pool; utilities follow adaptive_utility.
class AdaptivePricingGame : public JointUtility {
 public:
  AdaptivePricingGame(const GdcnTopology& topology, const GraphJob& job,
                      std::vector<std::vector<MappingVector>> pools, AdaptiveUtilityParams params);
  std::size_t agents() const override { return pools_.size(); }
  std::size_t actions(std::size_t agent) const override { return pools_[agent].size(); }
  double utility(std::size_t agent, std::span<const std::size_t> joint) const override;
  void deviation_utilities(std::size_t agent, std::span<const std::size_t> joint,
                           std::span<double> out) const override;

  /// Facility power of every datacenter used by at least one agent, after
  /// adding all agents' slots to the loads (capped at capacity).
  double joint_power(std::span<const std::size_t> joint) const;

  const std::vector<MappingVector>& pool(std::size_t agent) const { return pools_[agent]; }

 private:
  struct Sparse {
    std::vector<std::pair<int, int>> entries;  // (dc, slots)
    int dcs_used = 0;
  };
  double utility_with_others(const Sparse& own, std::span<const int> others, bool others_overload) const;

  const GdcnTopology* topology_;
  const GraphJob* job_;
  std::vector<std::vector<MappingVector>> pools_;
  std::vector<std::vector<Sparse>> sparse_;
  AdaptiveUtilityParams params_;
};

struct RmbaState {
  std::vector<double> regret_sum;  // actions x actions, row = own action played
  std::size_t actions = 0;
  int iterations = 0;
  std::size_t current = 0;
  std::vector<double> distribution;  // for the next play

  double average_regret(std::size_t m1, std::size_t m2) const;
};

/// Substituting reward of `agent` for the pair (m1, m2) at one joint play.
double rmba_substituting_reward(const JointUtility& game, std::size_t agent, std::size_t m1, std::size_t m2,
                                std::span<const std::size_t> joint);

RmbaState rmba_initial_state(std::size_t actions, std::size_t first_action);

/// Folds one joint play into `agent`'s regrets and forms its next
/// distribution. Zero total regret keeps the current action.
RmbaState rmba_step(const RmbaState& state, const JointUtility& game, std::size_t agent,
                    std::span<const std::size_t> joint);

/// Same update with the deviation utilities of the action `played` already
/// computed.
RmbaState rmba_step(const RmbaState& state, std::size_t played, std::span<const double> deviation_utilities,
                    double realized);

struct RmbaTrace {
  std::vector<std::vector<std::size_t>> joint_actions;  // per iteration
  std::vector<std::vector<double>> utilities;           // per iteration, per agent
  std::vector<double> joint_power;                       // per iteration when the game reports it
};

/// Repeated game: uniform random first plays, then each agent samples from its
/// regret-matching distribution.
RmbaTrace rmba_run(const JointUtility& game, int iterations, std::uint64_t seed);

/// Every agent draws uniformly each iteration.
RmbaTrace random_joint_run(const JointUtility& game, int iterations, std::uint64_t seed);

/// Largest violation over agents and action pairs of the correlated
/// equilibrium inequalities by the empirical joint distribution of `plays`.
double ce_violation(const TableGame& game, std::span<const std::vector<std::size_t>> plays);

}  // namespace gja
