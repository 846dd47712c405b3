#include "gjalloc/crawler.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include <json.hpp>

namespace gja {

FeasPrefix feasible_prefixes(const GraphJob& job) {
  FeasPrefix out;
  const auto& shells = job.shell_sizes();
  out.prefix.push_back(shells.front());
  for (std::size_t r = 1; r < shells.size(); ++r) out.prefix.push_back(out.prefix.back() + shells[r]);
  return out;
}

MappingVector CrawledStrategy::mapping(std::size_t dcs) const {
  MappingVector m(dcs);
  for (const auto& [dc, slots] : placement) m[dc] += slots;
  return m;
}

StrategyStore::StrategyStore(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ValidationError("store_size", "must be at least 1");
}

StrategyStore::AddResult StrategyStore::add(double key, CrawledStrategy value) {
  AddResult result;
  if (tree_.size() < capacity_) {
    tree_.emplace(key, std::move(value));
    result.inserted = true;
  } else if (key < max_key()) {
    auto last = std::prev(tree_.end());
    result.evicted = std::move(last->second);
    tree_.erase(last);
    tree_.emplace(key, std::move(value));
    result.inserted = true;
  }
  return result;
}

std::vector<std::pair<double, CrawledStrategy>> StrategyStore::in_order() const {
  return {tree_.begin(), tree_.end()};
}

void StrategyStore::dump_jsonl(std::ostream& out) const {
  for (const auto& [key, value] : tree_) {
    nlohmann::json line;
    line["key"] = key;
    line["placement"] = nlohmann::json::array();
    for (const auto& [dc, slots] : value.placement) line["placement"].push_back({dc, slots});
    out << line.dump() << '\n';
  }
}

bool bst_add(StrategyStore& store, double key, CrawledStrategy value) {
  return store.add(key, std::move(value)).inserted;
}

double find_tot_cost(std::span<const Segment> segments) {
  double total = 0.0;
  for (const auto& s : segments) total += s.cost;
  return total;
}

std::vector<MappingVector> shell_split_enumerate(const GdcnTopology& topology, const GraphJob& job,
                                                std::span<const int> path, std::span<const int> capacity) {
  if (path.empty()) throw ValidationError("path", "needs at least one datacenter");
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t] < 0 || path[t] >= static_cast<int>(topology.size())) {
      throw ValidationError("path", "datacenter id out of range");
    }
    for (std::size_t u = 0; u < t; ++u) {
      if (path[u] == path[t]) throw ValidationError("path", "datacenters must be distinct");
    }
    if (t > 0 && !topology.linked(path[t - 1], path[t])) {
      throw ValidationError("path", "consecutive datacenters must be linked");
    }
  }
  const auto& shells = job.shell_sizes();
  const int depth = static_cast<int>(shells.size());
  std::vector<MappingVector> out;
  MappingVector m(topology.size());
  // Run t covers shells [first, last] and sits on path[t].
  auto place = [&](auto&& self, int first, std::size_t t) -> void {
    if (first == depth) {
      out.push_back(m);
      return;
    }
    if (t == path.size()) return;
    const int dc = path[t];
    int run = 0;
    for (int last = first; last < depth; ++last) {
      run += shells[last];
      if (run > capacity[dc]) break;
      m[dc] = run;
      self(self, last + 1, t + 1);
      m[dc] = 0;
    }
  };
  place(place, 0, 0);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Crawler::Crawler(const GdcnTopology& topology, const GraphJob& job, std::span<const LoadForecast> forecasts,
                 int start_dc, std::uint64_t seed, CrawlerConfig cfg)
    : topology_(&topology), job_(&job), forecasts_(forecasts.begin(), forecasts.end()), cfg_(cfg),
      prefix_(feasible_prefixes(job)), rng_(seed), current_(start_dc), store_(cfg.store_size) {
  if (forecasts_.size() != topology.size()) throw ValidationError("forecasts", "one forecast per datacenter");
  if (start_dc < 0 || start_dc >= static_cast<int>(topology.size())) {
    throw ValidationError("start_dc", "datacenter id out of range");
  }
  for (std::size_t i = 0; i < forecasts_.size(); ++i) forecasts_[i].validate(topology.dc(i).slots);
  visited_.insert(start_dc);
}

int Crawler::admission_capacity(int dc) const {
  const auto& d = topology_->dc(dc);
  return cfg_.admission == Admission::raw_slots ? d.slots : d.free_slots();
}

void Crawler::offer(std::vector<Segment> segments) {
  ++counters_.completed;
  CrawledStrategy strategy;
  for (const auto& s : segments) strategy.placement.emplace_back(s.dc, s.slots);
  const double key = find_tot_cost(segments);
  if (cfg_.dedupe) {
    auto m = strategy.mapping(topology_->size());
    if (stored_.count(m)) {
      ++counters_.duplicates;
      return;
    }
    auto result = store_.add(key, std::move(strategy));
    if (result.inserted) ++stored_[std::move(m)];
    if (result.evicted) {
      auto it = stored_.find(result.evicted->mapping(topology_->size()));
      if (--it->second == 0) stored_.erase(it);
    }
    return;
  }
  store_.add(key, std::move(strategy));
}

void Crawler::extend_allocations_at_dc() {
  const int dc = current_;
  const auto& shells = job_->shell_sizes();
  const int depth = static_cast<int>(shells.size());
  const int cap = admission_capacity(dc);
  std::vector<IncompleteAllocation> next;
  for (const auto& partial : ia_) {
    const Segment& last = partial.segments.back();
    const int assigned = job_->size() - last.remaining;
    // Index of the last fully assigned shell; the walk resumes after it.
    const auto done = std::find(prefix_.prefix.begin(), prefix_.prefix.end(), assigned) - prefix_.prefix.begin();
    int taken = 0;
    for (int j = static_cast<int>(done) + 1; j < depth; ++j) {
      taken += shells[j];
      ++counters_.shell_ops;
      if (taken > cap) break;
      double cost = 0.0;
      try {
        cost = expected_strategy_cost(topology_->dc(dc), forecasts_[dc], taken);
      } catch (const InfeasibleError&) {
        ++counters_.infeasible;
        break;
      }
      IncompleteAllocation grown = partial;
      grown.segments.push_back({dc, taken, cost, last.remaining - taken});
      if (j == depth - 1) {
        offer(std::move(grown.segments));
      } else {
        next.push_back(std::move(grown));
      }
    }
  }
  ia_ = std::move(next);
}

void Crawler::init_allocations_at_dc() {
  const int dc = current_;
  const int cap = admission_capacity(dc);
  for (int r : prefix_.prefix) {
    ++counters_.shell_ops;
    if (r > cap) break;
    double cost = 0.0;
    try {
      cost = expected_strategy_cost(topology_->dc(dc), forecasts_[dc], r);
    } catch (const InfeasibleError&) {
      ++counters_.infeasible;
      break;
    }
    const int rest = job_->size() - r;
    std::vector<Segment> segments{{dc, r, cost, rest}};
    if (rest == 0) {
      offer(std::move(segments));
    } else {
      ia_.push_back({std::move(segments)});
    }
  }
  counters_.max_incomplete = std::max(counters_.max_incomplete, static_cast<long>(ia_.size()));
}

int Crawler::next_hop() {
  const auto& nbrs = topology_->neighbors(current_);
  if (nbrs.empty()) throw ValidationError("topology", "the crawler's datacenter has no neighbor to move to");
  std::vector<int> fresh;
  for (int nb : nbrs) {
    if (!visited_.count(nb)) fresh.push_back(nb);
  }
  int chosen = 0;
  if (fresh.empty()) {
    ia_.clear();
    visited_.clear();
    ++counters_.resets;
    std::uniform_int_distribution<std::size_t> pick(0, nbrs.size() - 1);
    chosen = nbrs[pick(rng_)];
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, fresh.size() - 1);
    chosen = fresh[pick(rng_)];
  }
  visited_.insert(chosen);
  current_ = chosen;
  return chosen;
}

void Crawler::step() {
  walk_.push_back(current_);
  ++counters_.visits;
  extend_allocations_at_dc();
  init_allocations_at_dc();
  next_hop();
}

Crawler run_crawler(const GdcnTopology& topology, const GraphJob& job, std::span<const LoadForecast> forecasts,
                    int start_dc, int steps, std::uint64_t seed, CrawlerConfig cfg) {
  if (steps < 1) throw ValidationError("steps", "must be at least 1");
  Crawler crawler(topology, job, forecasts, start_dc, seed, cfg);
  for (int s = 0; s < steps; ++s) crawler.step();
  return crawler;
}

std::vector<LoadForecast> current_load_forecasts(const GdcnTopology& topology) {
  std::vector<LoadForecast> out;
  out.reserve(topology.size());
  for (const auto& dc : topology.dcs()) out.push_back(LoadForecast::point_mass(dc.load, dc.slots));
  return out;
}

}  // namespace gja
