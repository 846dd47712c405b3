#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gjalloc/feasibility.hpp"
#include "gjalloc/model.hpp"

namespace gja {

/// Cumulative node counts of whole shells: prefix[0] = 1 (the center) and
/// prefix[r + 1] = prefix[r] + |shell r + 1|. The last entry is the job size.
struct FeasPrefix {
  std::vector<int> prefix;
};

FeasPrefix feasible_prefixes(const GraphJob& job);

/// One datacenter's share of a partial strategy.
struct Segment {
  int dc = 0;
  int slots = 0;
  double cost = 0.0;  // expected cost at this datacenter
  int remaining = 0;  // job nodes still unassigned after this segment
};

struct IncompleteAllocation {
  std::vector<Segment> segments;
};

/// A complete strategy in walk order.
struct CrawledStrategy {
  std::vector<std::pair<int, int>> placement;  // (dc, slots)
  MappingVector mapping(std::size_t dcs) const;
};

/// Keeps the `capacity` cheapest strategies offered so far. Backed by a
/// balanced search tree; equal keys keep insertion order and the newest of
/// the most expensive entries is the one evicted.
class StrategyStore {
 public:
  explicit StrategyStore(std::size_t capacity);

  struct AddResult {
    bool inserted = false;
    std::optional<CrawledStrategy> evicted;
  };

  /// Inserts while below capacity; afterwards replaces the maximum only when
  /// `key` is strictly smaller.
  AddResult add(double key, CrawledStrategy value);

  std::size_t size() const { return tree_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return tree_.empty(); }
  double min_key() const { return tree_.begin()->first; }
  double max_key() const { return tree_.rbegin()->first; }

  /// Entries in non-decreasing key order.
  std::vector<std::pair<double, CrawledStrategy>> in_order() const;

  /// One JSON object per line: {"key": k, "placement": [[dc, slots], ...]}.
  void dump_jsonl(std::ostream& out) const;

 private:
  std::size_t capacity_;
  std::multimap<double, CrawledStrategy> tree_;
};

/// The bounded insertion rule as a free function; true when the store changed.
bool bst_add(StrategyStore& store, double key, CrawledStrategy value);

/// Sum of per-segment expected costs.
double find_tot_cost(std::span<const Segment> segments);

/// Every mapping vector induced by splitting the shells, in order, into at
/// most D + 1 non-empty consecutive runs placed on consecutive datacenters of
/// `path` (first run on path[0]) with each run fitting that datacenter's
/// capacity. Throws ValidationError when consecutive path entries are not
/// linked or repeat a datacenter.
std::vector<MappingVector> shell_split_enumerate(const GdcnTopology& topology, const GraphJob& job,
                                                std::span<const int> path, std::span<const int> capacity);

enum class Admission {
  raw_slots,   // compare run sizes to |S^i|, let the forecast truncation reject overload
  free_slots,  // compare run sizes to |S^i| minus the current load
};

struct CrawlerConfig {
  std::size_t store_size = 50;
  Admission admission = Admission::raw_slots;
  bool dedupe = true;  // skip strategies whose mapping vector is already stored
};

struct CrawlerCounters {
  long shell_ops = 0;        // shell additions while extending or initializing
  long visits = 0;           // datacenters processed
  long completed = 0;        // complete strategies offered to the store
  long infeasible = 0;       // candidates rejected by the load forecast
  long duplicates = 0;       // candidates skipped as already stored
  long resets = 0;           // visited-set resets
  long max_incomplete = 0;   // largest IA list seen
};

/// A cloud crawler for one job type walking a read-only topology.
class Crawler {
 public:
  /// `forecasts` holds one load forecast per datacenter.
  Crawler(const GdcnTopology& topology, const GraphJob& job, std::span<const LoadForecast> forecasts,
          int start_dc, std::uint64_t seed, CrawlerConfig cfg = {});

  /// Complete pending allocations with this datacenter's slots.
  void extend_allocations_at_dc();
  /// Start new allocations at this datacenter.
  void init_allocations_at_dc();
  /// Move to a random unvisited neighbor, or reset when none is left.
  int next_hop();

  /// One loop of the walk: extend, init, hop.
  void step();

  int current_dc() const { return current_; }
  const std::unordered_set<int>& visited() const { return visited_; }
  const std::vector<IncompleteAllocation>& incomplete() const { return ia_; }
  const StrategyStore& store() const { return store_; }
  const CrawlerCounters& counters() const { return counters_; }
  const FeasPrefix& prefix() const { return prefix_; }
  /// Datacenters processed so far, in order.
  const std::vector<int>& walk() const { return walk_; }

 private:
  int admission_capacity(int dc) const;
  void offer(std::vector<Segment> segments);

  const GdcnTopology* topology_;
  const GraphJob* job_;
  std::vector<LoadForecast> forecasts_;
  CrawlerConfig cfg_;
  FeasPrefix prefix_;
  std::mt19937_64 rng_;
  int current_;
  std::unordered_set<int> visited_;
  std::vector<IncompleteAllocation> ia_;
  StrategyStore store_;
  std::unordered_map<MappingVector, int, MappingVectorHash> stored_;
  CrawlerCounters counters_;
  std::vector<int> walk_;
};

/// Runs `steps` loops of the walk from `start_dc`. The crawler keeps pointers
/// to `topology` and `job`, which must outlive it.
Crawler run_crawler(const GdcnTopology& topology, const GraphJob& job, std::span<const LoadForecast> forecasts,
                    int start_dc, int steps, std::uint64_t seed, CrawlerConfig cfg = {});

/// Point-mass forecasts at the topology's current loads.
std::vector<LoadForecast> current_load_forecasts(const GdcnTopology& topology);

}  // namespace gja
