#include "gjalloc/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gja {

namespace {

using Point = std::vector<double>;

double sq_dist(const Point& a, const Point& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

std::size_t sample_index(std::span<const double> p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double target = u(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (target < acc) return i;
  }
  // Rounding left the target past the last bucket; take the last positive one.
  for (std::size_t i = p.size(); i-- > 0;) {
    if (p[i] > 0.0) return i;
  }
  return p.size() - 1;
}

}  // namespace

StrategyPool cluster_pool(std::vector<MappingVector> strategies, std::size_t k, std::uint64_t seed,
                          int max_iterations) {
  const std::size_t n = strategies.size();
  if (k == 0 || k > n) throw ValidationError("clusters", "must lie between 1 and the pool size");
  std::vector<Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i].assign(strategies[i].counts().begin(), strategies[i].counts().end());
  }

  // k-means++ seeding.
  std::mt19937_64 rng(seed);
  std::vector<Point> centers;
  std::vector<char> taken(n, 0);
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  const std::size_t c0 = first(rng);
  centers.push_back(pts[c0]);
  taken[c0] = 1;
  std::vector<double> d2(n);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) d2[i] = std::min(d2[i], sq_dist(pts[i], c));
      if (taken[i]) d2[i] = 0.0;
      total += d2[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      for (auto& v : d2) v /= total;
      pick = sample_index(d2, rng);
    } else {
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!taken[i]) free.push_back(i);
      }
      std::uniform_int_distribution<std::size_t> u(0, free.size() - 1);
      pick = free[u(rng)];
    }
    centers.push_back(pts[pick]);
    taken[pick] = 1;
  }

  std::vector<std::size_t> assign(n, k);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = sq_dist(pts[i], centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = sq_dist(pts[i], centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    // Re-seed empty clusters from the points farthest from their centroid.
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : assign) ++sizes[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[assign[i]] < 2) continue;
        const double d = sq_dist(pts[i], centers[assign[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n) continue;
      --sizes[assign[far]];
      assign[far] = c;
      sizes[c] = 1;
      changed = true;
    }
    for (std::size_t c = 0; c < k; ++c) {
      Point mean(pts[0].size(), 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] != c) continue;
        for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += pts[i][d];
        ++count;
      }
      if (count == 0) continue;
      for (auto& v : mean) v /= static_cast<double>(count);
      centers[c] = std::move(mean);
    }
    if (!changed) break;
  }

  StrategyPool pool;
  pool.strategies = std::move(strategies);
  pool.clusters.resize(k);
  pool.cluster_of = assign;
  for (std::size_t i = 0; i < n; ++i) pool.clusters[assign[i]].push_back(i);
  // Drop clusters that stayed empty (only possible with duplicate points).
  std::vector<std::vector<std::size_t>> kept;
  for (auto& c : pool.clusters) {
    if (!c.empty()) kept.push_back(std::move(c));
  }
  pool.clusters = std::move(kept);
  for (std::size_t c = 0; c < pool.clusters.size(); ++c) {
    for (auto i : pool.clusters[c]) pool.cluster_of[i] = c;
  }
  return pool;
}

double clustering_objective(const StrategyPool& pool) {
  double total = 0.0;
  for (const auto& members : pool.clusters) {
    if (members.empty()) continue;
    const std::size_t dim = pool.strategies[members[0]].size();
    Point mean(dim, 0.0);
    for (auto i : members) {
      for (std::size_t d = 0; d < dim; ++d) mean[d] += pool.strategies[i][d];
    }
    for (auto& v : mean) v /= static_cast<double>(members.size());
    for (auto i : members) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = pool.strategies[i][d] - mean[d];
        total += diff * diff;
      }
    }
  }
  return total;
}

double similarity(const MappingVector& a, const MappingVector& b, double k_s) {
  if (a.size() != b.size()) throw ValidationError("similarity", "vectors must have equal length");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw ValidationError("similarity", "zero mapping vector");
  const double cosine = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::expm1(k_s * cosine) / std::expm1(k_s);
}

void BrmaConfig::validate() const {
  if (!(exploration > 0.0 && exploration < 1.0)) throw ValidationError("brma.exploration", "must lie in (0, 1)");
  if (timeframe < 1) throw ValidationError("brma.timeframe", "must be at least 1");
  if (clusters < 1) throw ValidationError("brma.clusters", "must be at least 1");
  if (!(boost > 0.0)) throw ValidationError("brma.boost", "must be positive");
  if (force_cluster_sweep && static_cast<std::size_t>(timeframe) < clusters) {
    throw ValidationError("brma.timeframe", "must be at least the cluster count for the first-timeframe sweep");
  }
}

BrmaState brma_initial_state(std::size_t pool_size, const BrmaConfig& cfg) {
  BrmaState s;
  s.weights.assign(pool_size, 1.0);
  s.probabilities = brma_probabilities(s.weights, cfg.exploration);
  return s;
}

std::vector<double> brma_probabilities(std::span<const double> weights, double exploration) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double floor = exploration / static_cast<double>(weights.size());
  std::vector<double> p(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) p[i] = (1.0 - exploration) * weights[i] / total + floor;
  return p;
}

std::vector<double> brma_virtual_rewards(const StrategyPool& pool, const TimeframeLog& log,
                                         const BrmaConfig& cfg) {
  const std::size_t n = pool.size();
  std::vector<double> sum(n, 0.0);
  std::vector<int> kappa(n, 0);
  std::vector<char> touched(pool.clusters.size(), 0);
  for (std::size_t z = 0; z < log.actions.size(); ++z) {
    sum[log.actions[z]] += log.utilities[z];
    ++kappa[log.actions[z]];
    touched[pool.cluster_of[log.actions[z]]] = 1;
  }
  std::vector<double> q(n, 0.0);
  for (std::size_t m = 0; m < n; ++m) {
    if (kappa[m] > 0) {
      q[m] = sum[m] / kappa[m];
      continue;
    }
    const std::size_t c = pool.cluster_of[m];
    if (!touched[c]) continue;
    double acc = 0.0;
    for (std::size_t z = 0; z < log.actions.size(); ++z) {
      if (pool.cluster_of[log.actions[z]] != c) continue;
      acc += similarity(pool.strategies[log.actions[z]], pool.strategies[m], cfg.sharpness) * log.utilities[z];
    }
    q[m] = acc / static_cast<double>(pool.clusters[c].size());
  }
  return q;
}

BrmaState brma_timeframe_update(const BrmaState& state, const StrategyPool& pool, const TimeframeLog& log,
                                const BrmaConfig& cfg) {
  const auto q = brma_virtual_rewards(pool, log, cfg);
  BrmaState next = state;
  const double size = static_cast<double>(pool.size());
  for (std::size_t m = 0; m < pool.size(); ++m) next.weights[m] = state.weights[m] * std::exp(cfg.boost * q[m] / size);
  next.probabilities = brma_probabilities(next.weights, cfg.exploration);
  return next;
}

double p90(std::span<const double> p, std::span<const double> reference) {
  const double best = *std::max_element(reference.begin(), reference.end());
  const double bar = best - 0.1 * std::abs(best);
  double mass = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (reference[i] >= bar) mass += p[i];
  }
  return mass;
}

BrmaTrace brma_run(const StrategyPool& pool, const UtilityEnvironment& env, std::span<const double> reference,
                   int iterations, std::uint64_t seed, const BrmaConfig& cfg) {
  if (pool.size() == 0) throw ValidationError("pool", "must not be empty");
  if (reference.size() != pool.size()) throw ValidationError("reference", "one utility per strategy");
  BrmaConfig effective = cfg;
  effective.clusters = pool.clusters.size();
  effective.validate();

  std::mt19937_64 rng(seed);
  BrmaState state = brma_initial_state(pool.size(), effective);
  BrmaTrace trace;
  trace.probabilities.push_back(state.probabilities);
  TimeframeLog log;
  for (int n = 0; n < iterations; ++n) {
    std::size_t action = 0;
    if (effective.force_cluster_sweep && n < static_cast<int>(pool.clusters.size())) {
      const auto& members = pool.clusters[n];
      std::vector<double> within(members.size());
      for (std::size_t i = 0; i < members.size(); ++i) within[i] = state.probabilities[members[i]];
      const double total = std::accumulate(within.begin(), within.end(), 0.0);
      for (auto& v : within) v /= total;
      action = members[sample_index(within, rng)];
    } else {
      action = sample_index(state.probabilities, rng);
    }
    const double u = env(action, n);
    trace.actions.push_back(action);
    trace.utilities.push_back(u);
    trace.p90.push_back(p90(state.probabilities, reference));
    log.actions.push_back(action);
    log.utilities.push_back(u);
    if ((n + 1) % effective.timeframe == 0) {
      state = brma_timeframe_update(state, pool, log, effective);
      trace.probabilities.push_back(state.probabilities);
      log = {};
    }
  }
  return trace;
}

void JointUtility::deviation_utilities(std::size_t agent, std::span<const std::size_t> joint,
                                       std::span<double> out) const {
  std::vector<std::size_t> alt(joint.begin(), joint.end());
  for (std::size_t m = 0; m < out.size(); ++m) {
    alt[agent] = m;
    out[m] = utility(agent, alt);
  }
}

TableGame::TableGame(std::vector<std::size_t> action_counts, std::vector<std::vector<double>> payoff)
    : counts_(std::move(action_counts)), payoff_(std::move(payoff)) {
  std::size_t joints = 1;
  for (auto c : counts_) joints *= c;
  if (payoff_.size() != joints) throw ValidationError("payoff", "one row per joint action");
  for (const auto& row : payoff_) {
    if (row.size() != counts_.size()) throw ValidationError("payoff", "one payoff per agent");
  }
}

std::size_t TableGame::joint_index(std::span<const std::size_t> joint) const {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < counts_.size(); ++k) idx = idx * counts_[k] + joint[k];
  return idx;
}

double TableGame::utility(std::size_t agent, std::span<const std::size_t> joint) const {
  return payoff_[joint_index(joint)][agent];
}

AdaptivePricingGame::AdaptivePricingGame(const GdcnTopology& topology, const GraphJob& job,
                                         std::vector<std::vector<MappingVector>> pools, AdaptiveUtilityParams params)
    : topology_(&topology), job_(&job), pools_(std::move(pools)), params_(params) {
  if (pools_.empty()) throw ValidationError("pools", "need at least one agent");
  for (const auto& pool : pools_) {
    if (pool.empty()) throw ValidationError("pools", "every agent needs a strategy");
    std::vector<Sparse> sparse;
    for (const auto& m : pool) {
      if (m.size() != topology.size()) throw ValidationError("pools", "strategy length must equal the DC count");
      Sparse s;
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i] > 0) s.entries.emplace_back(static_cast<int>(i), m[i]);
      }
      s.dcs_used = static_cast<int>(s.entries.size());
      sparse.push_back(std::move(s));
    }
    sparse_.push_back(std::move(sparse));
  }
}

double AdaptivePricingGame::utility_with_others(const Sparse& own, std::span<const int> others,
                                                bool others_overload) const {
  bool overloaded = others_overload;
  for (const auto& [dc, slots] : own.entries) {
    const auto& d = topology_->dc(dc);
    if (d.load + others[dc] + slots > d.slots) overloaded = true;
  }
  if (overloaded) return -params_.penalty;
  double pay = 0.0;
  for (const auto& [dc, slots] : own.entries) {
    const auto& d = topology_->dc(dc);
    const int joint = others[dc] + slots;
    const double shared = d.xi * dc_power(d, d.load + joint) / joint;
    pay += slots * d.xi * d.nu + shared * slots;
  }
  const auto& w = params_.weights;
  const double payment = pay * params_.billing_hours;
  return w.rho - w.chi * payment - w.phi * own.dcs_used + w.chi * params_.max_payment + w.phi * job_->size();
}

namespace {

std::vector<int> others_usage(const std::vector<std::vector<MappingVector>>& pools, std::size_t n,
                              std::size_t agent, std::span<const std::size_t> joint) {
  std::vector<int> others(n, 0);
  for (std::size_t k = 0; k < pools.size(); ++k) {
    if (k == agent) continue;
    const auto& m = pools[k][joint[k]];
    for (std::size_t i = 0; i < n; ++i) others[i] += m[i];
  }
  return others;
}

}  // namespace

double AdaptivePricingGame::utility(std::size_t agent, std::span<const std::size_t> joint) const {
  const auto others = others_usage(pools_, topology_->size(), agent, joint);
  bool others_overload = false;
  for (std::size_t i = 0; i < others.size(); ++i) {
    const auto& d = topology_->dc(i);
    if (d.load + others[i] > d.slots) others_overload = true;
  }
  return utility_with_others(sparse_[agent][joint[agent]], others, others_overload);
}

void AdaptivePricingGame::deviation_utilities(std::size_t agent, std::span<const std::size_t> joint,
                                              std::span<double> out) const {
  const auto others = others_usage(pools_, topology_->size(), agent, joint);
  bool others_overload = false;
  for (std::size_t i = 0; i < others.size(); ++i) {
    const auto& d = topology_->dc(i);
    if (d.load + others[i] > d.slots) others_overload = true;
  }
  for (std::size_t m = 0; m < out.size(); ++m) out[m] = utility_with_others(sparse_[agent][m], others, others_overload);
}

double AdaptivePricingGame::joint_power(std::span<const std::size_t> joint) const {
  const std::size_t n = topology_->size();
  std::vector<int> total(n, 0);
  for (std::size_t k = 0; k < pools_.size(); ++k) {
    const auto& m = pools_[k][joint[k]];
    for (std::size_t i = 0; i < n; ++i) total[i] += m[i];
  }
  double power = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (total[i] == 0) continue;
    const auto& d = topology_->dc(i);
    power += dc_power(d, std::min(d.slots, d.load + total[i]));
  }
  return power;
}

double RmbaState::average_regret(std::size_t m1, std::size_t m2) const {
  if (iterations == 0) return 0.0;
  return std::max(regret_sum[m1 * actions + m2] / iterations, 0.0);
}

double rmba_substituting_reward(const JointUtility& game, std::size_t agent, std::size_t m1, std::size_t m2,
                                std::span<const std::size_t> joint) {
  if (joint[agent] != m1) return game.utility(agent, joint);
  std::vector<std::size_t> alt(joint.begin(), joint.end());
  alt[agent] = m2;
  return game.utility(agent, alt);
}

RmbaState rmba_initial_state(std::size_t actions, std::size_t first_action) {
  RmbaState s;
  s.actions = actions;
  s.regret_sum.assign(actions * actions, 0.0);
  s.current = first_action;
  s.distribution.assign(actions, 0.0);
  s.distribution[first_action] = 1.0;
  return s;
}

namespace {

// In-place form so long runs do not copy the regret matrix every play.
void fold_play(RmbaState& s, std::size_t played, std::span<const double> deviation_utilities, double realized) {
  const std::size_t a = s.actions;
  // Rows other than the played action gain SR - c = 0.
  for (std::size_t m = 0; m < a; ++m) s.regret_sum[played * a + m] += deviation_utilities[m] - realized;
  ++s.iterations;
  s.current = played;

  std::vector<double> r(a);
  double total = 0.0;
  for (std::size_t m = 0; m < a; ++m) {
    r[m] = s.average_regret(played, m);
    total += r[m];
  }
  s.distribution.assign(a, 0.0);
  if (total <= 0.0) {
    s.distribution[played] = 1.0;
    return;
  }
  double others = 0.0;
  for (std::size_t m = 0; m < a; ++m) {
    if (m == played) continue;
    s.distribution[m] = r[m] / total;
    others += s.distribution[m];
  }
  s.distribution[played] = std::max(0.0, 1.0 - others);
}

}  // namespace

RmbaState rmba_step(const RmbaState& state, std::size_t played, std::span<const double> deviation_utilities,
                    double realized) {
  RmbaState next = state;
  fold_play(next, played, deviation_utilities, realized);
  return next;
}

RmbaState rmba_step(const RmbaState& state, const JointUtility& game, std::size_t agent,
                    std::span<const std::size_t> joint) {
  std::vector<double> dev(game.actions(agent));
  game.deviation_utilities(agent, joint, dev);
  return rmba_step(state, joint[agent], dev, game.utility(agent, joint));
}

namespace {

void record(RmbaTrace& trace, const JointUtility& game, const std::vector<std::size_t>& joint) {
  std::vector<double> u(game.agents());
  for (std::size_t k = 0; k < game.agents(); ++k) u[k] = game.utility(k, joint);
  trace.joint_actions.push_back(joint);
  trace.utilities.push_back(std::move(u));
  if (const auto* pricing = dynamic_cast<const AdaptivePricingGame*>(&game)) {
    trace.joint_power.push_back(pricing->joint_power(joint));
  }
}

std::vector<std::size_t> uniform_joint(const JointUtility& game, std::mt19937_64& rng) {
  std::vector<std::size_t> joint(game.agents());
  for (std::size_t k = 0; k < game.agents(); ++k) {
    std::uniform_int_distribution<std::size_t> pick(0, game.actions(k) - 1);
    joint[k] = pick(rng);
  }
  return joint;
}

}  // namespace

RmbaTrace rmba_run(const JointUtility& game, int iterations, std::uint64_t seed) {
  RmbaTrace trace;
  if (iterations <= 0) return trace;
  std::mt19937_64 rng(seed);
  auto joint = uniform_joint(game, rng);
  std::vector<RmbaState> states;
  for (std::size_t k = 0; k < game.agents(); ++k) states.push_back(rmba_initial_state(game.actions(k), joint[k]));
  for (int n = 0; n < iterations; ++n) {
    if (n > 0) {
      for (std::size_t k = 0; k < game.agents(); ++k) joint[k] = sample_index(states[k].distribution, rng);
    }
    record(trace, game, joint);
    for (std::size_t k = 0; k < game.agents(); ++k) {
      std::vector<double> dev(game.actions(k));
      game.deviation_utilities(k, joint, dev);
      fold_play(states[k], joint[k], dev, trace.utilities.back()[k]);
    }
  }
  return trace;
}

RmbaTrace random_joint_run(const JointUtility& game, int iterations, std::uint64_t seed) {
  RmbaTrace trace;
  std::mt19937_64 rng(seed);
  for (int n = 0; n < iterations; ++n) record(trace, game, uniform_joint(game, rng));
  return trace;
}

double ce_violation(const TableGame& game, std::span<const std::vector<std::size_t>> plays) {
  std::size_t joints = 1;
  for (std::size_t k = 0; k < game.agents(); ++k) joints *= game.actions(k);
  std::vector<double> freq(joints, 0.0);
  for (const auto& j : plays) freq[game.joint_index(j)] += 1.0;
  for (auto& f : freq) f /= static_cast<double>(plays.size());

  std::vector<std::size_t> joint(game.agents());
  double worst = 0.0;
  for (std::size_t k = 0; k < game.agents(); ++k) {
    const std::size_t a = game.actions(k);
    std::vector<double> gain(a * a, 0.0);
    for (std::size_t idx = 0; idx < joints; ++idx) {
      if (freq[idx] == 0.0) continue;
      std::size_t rest = idx;
      for (std::size_t q = game.agents(); q-- > 0;) {
        joint[q] = rest % game.actions(q);
        rest /= game.actions(q);
      }
      const std::size_t played = joint[k];
      const double base = game.utility(k, joint);
      for (std::size_t alt = 0; alt < a; ++alt) {
        auto dev = joint;
        dev[k] = alt;
        gain[played * a + alt] += freq[idx] * (game.utility(k, dev) - base);
      }
    }
    for (double g : gain) worst = std::max(worst, g);
  }
  return worst;
}

}  // namespace gja
