#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gjalloc/error.hpp"

namespace gja {

inline constexpr int kDefaultSlotsPerServer = 3;

/// Per-server power and pricing parameters shared by a group of datacenters.
/// Defaults model an IBM BladeCenter server (150 W idle, 250 W peak, PUE 1.3,
/// cubic utilization curve), I/O power at 5% of peak and electricity at
/// 0.12 $/kWh.
struct PowerParams {
  double eta = 1.3;
  double sigma = 100.0;  // peak minus idle, watts
  double alpha = 3.0;
  double p_idle = 150.0;
  double xi = 0.12 / 1000.0;  // cost per watt-hour
  double nu = 12.5;           // I/O watts per utilized slot
};

struct DataCenter {
  int id = 0;
  int slots = 0;
  int servers = 0;
  int load = 0;
  double eta = 1.3;
  double sigma = 100.0;
  double alpha = 3.0;
  double p_idle = 150.0;
  double xi = 0.12 / 1000.0;
  double nu = 12.5;

  static DataCenter make(int id, int slots, const PowerParams& params = {},
                         int slots_per_server = kDefaultSlotsPerServer,
                         int load = 0);

  int free_slots() const { return slots - load; }
  double peak_server_power() const { return sigma + p_idle; }

  /// Throws ValidationError when a field violates the datacenter invariants.
  void validate() const;
};

/// Per-DC slot counts of one job allocation.
class MappingVector {
 public:
  MappingVector() = default;
  explicit MappingVector(std::size_t n) : counts_(n, 0) {}
  explicit MappingVector(std::vector<int> counts) : counts_(std::move(counts)) {}
  MappingVector(std::initializer_list<int> counts) : counts_(counts) {}

  std::size_t size() const { return counts_.size(); }
  int operator[](std::size_t i) const { return counts_[i]; }
  int& operator[](std::size_t i) { return counts_[i]; }
  std::span<const int> counts() const { return counts_; }

  int total() const;
  int dcs_used() const;

  auto operator<=>(const MappingVector&) const = default;

 private:
  std::vector<int> counts_;
};

struct MappingVectorHash {
  std::size_t operator()(const MappingVector& m) const noexcept;
};

/// Datacenters plus the links between them. Two slots are adjacent when they
/// sit in the same datacenter or in linked datacenters; the slot graph is
/// never materialized.
class GdcnTopology {
 public:
  using Edge = std::pair<int, int>;

  GdcnTopology(std::vector<DataCenter> dcs, std::vector<Edge> edges);

  static GdcnTopology complete(std::vector<DataCenter> dcs);

  std::size_t size() const { return dcs_.size(); }
  const DataCenter& dc(std::size_t i) const { return dcs_[i]; }
  std::span<const DataCenter> dcs() const { return dcs_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& neighbors(std::size_t i) const { return adjacency_[i]; }

  bool linked(int a, int b) const { return linked_[static_cast<std::size_t>(a) * dcs_.size() + b] != 0; }
  bool slots_adjacent(int a, int b) const { return a == b || linked(a, b); }
  int max_degree() const;

  std::vector<int> loads() const;
  std::vector<int> free_slots() const;
  void set_loads(std::span<const int> loads);

  /// Adds an allocation to the current loads. Throws CapacityError naming the
  /// first datacenter that would overflow; loads are untouched in that case.
  void commit(const MappingVector& m);

 private:
  std::vector<DataCenter> dcs_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<char> linked_;
};

/// A job whose nodes each need one slot; edges require adjacent slots.
class GraphJob {
 public:
  using Edge = std::pair<int, int>;

  /// Builds the job and its shortest-path shells around `center`. Without an
  /// explicit center the node of minimum eccentricity (lowest id on ties) is
  /// used. Throws ValidationError for out-of-range ids, self loops or a
  /// disconnected job graph.
  static GraphJob make(int type_id, int nodes, std::vector<Edge> edges,
                       std::optional<int> center = std::nullopt);

  int type_id() const { return type_id_; }
  int size() const { return static_cast<int>(adjacency_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int v) const { return adjacency_[v]; }
  int center() const { return center_; }
  /// |N^0|, |N^1|, ..., |N^D| around the center.
  const std::vector<int>& shell_sizes() const { return shell_sizes_; }
  int depth() const { return static_cast<int>(shell_sizes_.size()) - 1; }

 private:
  int type_id_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
  int center_ = 0;
  std::vector<int> shell_sizes_;
};

/// Probability mass over the number of occupied slots of one datacenter.
struct LoadForecast {
  std::vector<double> pmf;

  static LoadForecast point_mass(int load, int slots);
  /// Uniform over the integers lo..hi inclusive.
  static LoadForecast uniform(int lo, int hi, int slots);

  void validate(int slots) const;
};

// Power model and allocation cost.

/// Facility power of a datacenter with `used` busy slots, in watts.
double dc_power(const DataCenter& dc, int used);

/// One datacenter's share of the allocation cost when it ends up with
/// `occupied` busy slots of which `added` belong to the job being priced.
double dc_cost_term(const DataCenter& dc, int occupied, int added);

/// Cost rate (per hour) of the whole network after adding `m` to the loads.
double allocation_cost(const GdcnTopology& topology, const MappingVector& m);

/// Extra facility power caused by adding `m` to the current loads.
double incurred_power(const GdcnTopology& topology, const MappingVector& m);

/// Expected per-DC cost of taking `used` slots under a load forecast. Loads
/// that would leave no room for `used` slots are discarded and the rest of the
/// mass renormalized; throws InfeasibleError when nothing remains.
double expected_strategy_cost(const DataCenter& dc, const LoadForecast& forecast, int used);

// Proxy-agent utilities.

struct PreferenceWeights {
  double rho = 1.0;  // reward of execution
  double chi = 1.0;  // payment sensitivity
  double phi = 1.0;  // preference for fewer datacenters
};

struct FixedPriceUtility {
  double value = 0.0;
  double normalized = 0.0;
};

/// Utility of a strategy under fixed per-slot prices. `max_price` must exceed
/// every price. Throws ValidationError when `m` does not place the whole job.
FixedPriceUtility fixed_price_utility(const GraphJob& job, const MappingVector& m,
                                      std::span<const double> prices,
                                      const PreferenceWeights& weights, double max_price);

struct PaymentResult {
  std::vector<double> payments;  // per proxy agent, cost per hour
  bool overloaded = false;
};

/// Load-dependent payments of several proxy agents whose strategies run side
/// by side. Each used datacenter bills its full cost term pro rata to the
/// slots each agent takes there; unused datacenters bill nobody. When the
/// joint load overflows a datacenter `overloaded` is set and payments are
/// computed against the capped load.
PaymentResult adaptive_payment(const GdcnTopology& topology,
                               std::span<const MappingVector> strategies);

struct AdaptiveUtilityParams {
  PreferenceWeights weights;
  double max_payment = 0.0;  // in billed units
  double penalty = 1.0;      // charged when the joint allocation does not fit
  double billing_hours = 1.0;
};

std::vector<double> adaptive_utility(const GdcnTopology& topology, const GraphJob& job,
                                     std::span<const MappingVector> strategies,
                                     const AdaptiveUtilityParams& params);

/// Upper bound on any single agent's payment for a job of `job_size` nodes:
/// the full-load cost of the `job_size` costliest datacenters plus the largest
/// possible I/O term, times `billing_hours`.
double max_payment_bound(const GdcnTopology& topology, int job_size, double billing_hours);

}  // namespace gja
