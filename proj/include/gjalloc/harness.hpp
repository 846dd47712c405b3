#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gjalloc/cdga.hpp"
#include "gjalloc/convex.hpp"
#include "gjalloc/crawler.hpp"
#include "gjalloc/learning.hpp"
#include "gjalloc/model.hpp"

namespace gja {

inline constexpr int kScenarioSchema = 1;
inline constexpr const char* kMetricsSchema = "gjalloc-metrics/1";

/// splitmix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Independent stream seed for (seed, stream, a, b).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t a = 0, std::uint64_t b = 0);

struct JobSpec {
  std::string name;
  int nodes = 0;
  std::vector<GraphJob::Edge> edges;
  std::optional<int> center;
  double rate = 0.0;  // arrivals per iteration
};

/// Triangle, 4-path, 5-star, triangle with a 3-path tail, and a 7-node job
/// whose shells around node 0 have sizes 1, 2, 2, 1, 1. Rates 1, 1, 1, 3, 4.
std::vector<JobSpec> canonical_catalog();

enum class TopologyKind { complete, edges, scale_free };
enum class ArrivalMode { deterministic, poisson };

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  int iterations = 100;
  int repetitions = 1;
  double duration_hours = 24.0;

  TopologyKind topology = TopologyKind::complete;
  std::vector<int> slots;                    // complete / edges
  std::vector<GdcnTopology::Edge> edges;     // edges
  int scale_free_dcs = 0;                    // scale_free
  int attachment = 3;                        // scale_free
  int slot_k_min = 4;                        // scale_free: slots = 3k
  int slot_k_max = 11;

  PowerParams power;
  int slots_per_server = kDefaultSlotsPerServer;

  double load_lo = 0.0;  // initial loads uniform on [lo, hi] x slots
  double load_hi = 0.2;

  std::vector<JobSpec> jobs = canonical_catalog();
  ArrivalMode arrivals = ArrivalMode::deterministic;
  bool persistent_loads = false;

  // Learning experiments.
  std::size_t store_size = 200;
  int crawl_steps = 400;
  int agents = 5;
  PreferenceWeights preferences;
  BrmaConfig brma;

  // Distributed allocator.
  double epsilon = 0.1;
  int consensus_steps = CdgaConfig{}.consensus_steps;

  void validate() const;
};

/// Slot rows 1..3 (9-21, 12-24, 15-27) on five fully connected datacenters, loads 0-20%.
Scenario small_scenario(int row = 3);
/// The three slot rows side by side, 15 fully connected datacenters.
Scenario medium_scenario();
/// Scale-free network of `dcs` datacenters with 3k slots, loads 20-100%.
Scenario large_scenario(int dcs = 200);

/// Parses a scenario document. Missing fields take the defaults above; a
/// "preset" field ("small", "medium", "large") picks the starting point.
/// Throws ValidationError naming the offending field.
Scenario scenario_from_json(const std::string& text);
Scenario load_scenario(const std::filesystem::path& file);
std::string scenario_to_json(const Scenario& s);

/// Preferential attachment: start from a clique of m + 1 nodes, then each new
/// node links to m distinct existing nodes with probability proportional to
/// degree.
std::vector<GdcnTopology::Edge> preferential_attachment(int nodes, int m, std::mt19937_64& rng);

/// Topology of repetition `rep` with zero loads.
GdcnTopology build_topology(const Scenario& s, int rep = 0);
std::vector<GraphJob> build_jobs(const Scenario& s);

/// Integer loads uniform on [ceil(lo S), floor(hi S)] per datacenter.
std::vector<int> sample_loads(const Scenario& s, const GdcnTopology& topology, std::mt19937_64& rng);

/// Job type ids of one iteration's batch, ordered by type then arrival.
std::vector<int> sample_arrivals(const std::vector<JobSpec>& catalog, ArrivalMode mode, std::mt19937_64& rng);

enum class Policy { convex, cdga, greedy1, greedy2, random, exhaustive, brma, rmba };
Policy parse_policy(const std::string& name);
std::string policy_name(Policy p);
bool is_learning_policy(Policy p);

struct MetricsReport {
  std::string scenario;
  std::string policy;
  std::uint64_t seed = 0;
  int iterations = 0;
  int repetitions = 0;
  double duration_hours = 0.0;

  // Allocation policies, averaged over repetitions.
  std::vector<double> incurred_power;      // watts per iteration
  std::vector<double> cumulative_power;    // prefix means of incurred_power
  std::vector<double> incurred_cost;       // cost per hour per iteration
  long jobs_placed = 0;
  long jobs_failed = 0;
  long load_mismatches = 0;                // iterations whose load accounting did not add up

  // Learning policies, averaged over repetitions and job types.
  std::vector<double> utility;             // learner
  std::vector<double> utility_random;      // uniform selection on the same pools
  std::vector<double> p90;                 // brma
  std::vector<double> p90_random;
  std::vector<double> joint_power;         // rmba, watts
  std::vector<double> joint_power_random;
  std::vector<double> payments;            // rmba, total charged to agents per iteration
  std::vector<double> payments_random;
};

/// Runs one policy on a scenario. Repetitions run in parallel on independent
/// seed streams and are reduced in repetition order.
MetricsReport run_experiment(const Scenario& s, Policy policy, std::optional<int> job_filter = std::nullopt);

/// Prefix means of `series`.
std::vector<double> cumulative_mean(const std::vector<double>& series);

/// Money saved by `a` relative to `b` over `hours` of execution per
/// iteration: sum of (cost_b - cost_a) * hours. Throws ValidationError when
/// the reports come from different scenarios, seeds or lengths.
double profit_vs_baseline(const MetricsReport& a, const MetricsReport& b, double hours);

/// Writes the CSV series and summary.json into `dir`.
void write_report(const MetricsReport& r, const std::filesystem::path& dir);
MetricsReport read_report(const std::filesystem::path& dir);

/// Result of crawling one job type on repetition 0 of a scenario.
struct CrawlOutcome {
  GdcnTopology topology;  // with the sampled loads
  int start_dc = 0;
  std::vector<std::pair<double, CrawledStrategy>> strategies;  // cheapest first
  CrawlerCounters counters;
  std::vector<int> walk;
};
CrawlOutcome crawl_scenario(const Scenario& s, int job_id, int steps, std::size_t store_size, std::uint64_t seed);

/// Fixed per-slot prices: a datacenter's electricity cost at its current load,
/// over `hours`, divided by its slot count.
std::vector<double> fixed_slot_prices(const GdcnTopology& topology, double hours);

}  // namespace gja
