#include "gjalloc/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

namespace gja {

namespace {

std::string dc_path(int id, const char* field) {
  return "dcs[" + std::to_string(id) + "]." + field;
}

// Distance of every node from `source`; -1 for unreachable nodes.
std::vector<int> bfs_distances(const std::vector<std::vector<int>>& adjacency, int source) {
  std::vector<int> dist(adjacency.size(), -1);
  std::queue<int> frontier;
  dist[source] = 0;
  frontier.push(source);
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (int v : adjacency[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        frontier.push(v);
      }
    }
  }
  return dist;
}

}  // namespace

DataCenter DataCenter::make(int id, int slots, const PowerParams& params, int slots_per_server,
                            int load) {
  if (slots_per_server <= 0) throw ValidationError(dc_path(id, "slots_per_server"), "must be positive");
  if (slots <= 0 || slots % slots_per_server != 0) {
    throw ValidationError(dc_path(id, "slots"),
                          "must be a positive multiple of " + std::to_string(slots_per_server));
  }
  DataCenter dc;
  dc.id = id;
  dc.slots = slots;
  dc.servers = slots / slots_per_server;
  dc.load = load;
  dc.eta = params.eta;
  dc.sigma = params.sigma;
  dc.alpha = params.alpha;
  dc.p_idle = params.p_idle;
  dc.xi = params.xi;
  dc.nu = params.nu;
  dc.validate();
  return dc;
}

void DataCenter::validate() const {
  if (slots <= 0) throw ValidationError(dc_path(id, "slots"), "must be positive");
  if (servers <= 0 || slots % servers != 0) {
    throw ValidationError(dc_path(id, "servers"), "must divide the slot count");
  }
  if (load < 0 || load > slots) throw ValidationError(dc_path(id, "load"), "must lie in [0, slots]");
  if (!(eta > 0)) throw ValidationError(dc_path(id, "eta"), "must be positive");
  if (!(sigma > 0)) throw ValidationError(dc_path(id, "sigma"), "must be positive");
  if (!(alpha >= 2)) throw ValidationError(dc_path(id, "alpha"), "must be at least 2");
  if (!(p_idle >= 0)) throw ValidationError(dc_path(id, "p_idle"), "must be non-negative");
  if (!(xi > 0)) throw ValidationError(dc_path(id, "xi"), "must be positive");
  if (!(nu >= 0)) throw ValidationError(dc_path(id, "nu"), "must be non-negative");
}

int MappingVector::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0); }

int MappingVector::dcs_used() const {
  return static_cast<int>(std::count_if(counts_.begin(), counts_.end(), [](int c) { return c > 0; }));
}

std::size_t MappingVectorHash::operator()(const MappingVector& m) const noexcept {
  std::size_t h = 0xcbf29ce484222325ULL;
  for (int c : m.counts()) {
    h ^= static_cast<std::size_t>(c) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

GdcnTopology::GdcnTopology(std::vector<DataCenter> dcs, std::vector<Edge> edges)
    : dcs_(std::move(dcs)) {
  const std::size_t n = dcs_.size();
  if (n == 0) throw ValidationError("dcs", "at least one datacenter is required");
  for (std::size_t i = 0; i < n; ++i) {
    dcs_[i].id = static_cast<int>(i);
    dcs_[i].validate();
  }
  adjacency_.assign(n, {});
  linked_.assign(n * n, 0);
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n) {
      throw ValidationError("topology.edges", "datacenter index out of range");
    }
    if (a == b) throw ValidationError("topology.edges", "self loop on datacenter " + std::to_string(a));
    if (a > b) std::swap(a, b);
    if (linked_[a * n + b]) continue;
    linked_[a * n + b] = linked_[b * n + a] = 1;
    edges_.emplace_back(a, b);
    adjacency_[a].push_back(b);
    adjacency_[b].push_back(a);
  }
  std::sort(edges_.begin(), edges_.end());
  for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
  auto dist = bfs_distances(adjacency_, 0);
  if (std::any_of(dist.begin(), dist.end(), [](int d) { return d < 0; })) {
    throw ValidationError("topology", "datacenter graph must be connected");
  }
}

GdcnTopology GdcnTopology::complete(std::vector<DataCenter> dcs) {
  std::vector<Edge> edges;
  const int n = static_cast<int>(dcs.size());
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) edges.emplace_back(a, b);
  return GdcnTopology(std::move(dcs), std::move(edges));
}

int GdcnTopology::max_degree() const {
  std::size_t best = 0;
  for (const auto& nb : adjacency_) best = std::max(best, nb.size());
  return static_cast<int>(best);
}

std::vector<int> GdcnTopology::loads() const {
  std::vector<int> out;
  out.reserve(dcs_.size());
  for (const auto& dc : dcs_) out.push_back(dc.load);
  return out;
}

std::vector<int> GdcnTopology::free_slots() const {
  std::vector<int> out;
  out.reserve(dcs_.size());
  for (const auto& dc : dcs_) out.push_back(dc.free_slots());
  return out;
}

void GdcnTopology::set_loads(std::span<const int> loads) {
  if (loads.size() != dcs_.size()) throw ValidationError("loads", "one load per datacenter is required");
  for (std::size_t i = 0; i < dcs_.size(); ++i) {
    if (loads[i] < 0 || loads[i] > dcs_[i].slots) {
      throw CapacityError(static_cast<int>(i), "load " + std::to_string(loads[i]) +
                                                   " does not fit datacenter " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < dcs_.size(); ++i) dcs_[i].load = loads[i];
}

void GdcnTopology::commit(const MappingVector& m) {
  if (m.size() != dcs_.size()) throw ValidationError("mapping", "length must equal the datacenter count");
  for (std::size_t i = 0; i < dcs_.size(); ++i) {
    if (m[i] < 0 || m[i] > dcs_[i].free_slots()) {
      throw CapacityError(static_cast<int>(i), "allocation overflows datacenter " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < dcs_.size(); ++i) dcs_[i].load += m[i];
}

GraphJob GraphJob::make(int type_id, int nodes, std::vector<Edge> edges, std::optional<int> center) {
  if (nodes <= 0) throw ValidationError("job.nodes", "must be positive");
  GraphJob job;
  job.type_id_ = type_id;
  job.adjacency_.assign(nodes, {});
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= nodes || v >= nodes) throw ValidationError("job.edges", "node id out of range");
    if (u == v) throw ValidationError("job.edges", "self loop on node " + std::to_string(u));
    if (u > v) std::swap(u, v);
    if (std::find(job.adjacency_[u].begin(), job.adjacency_[u].end(), v) != job.adjacency_[u].end()) continue;
    job.adjacency_[u].push_back(v);
    job.adjacency_[v].push_back(u);
    job.edges_.emplace_back(u, v);
  }
  std::sort(job.edges_.begin(), job.edges_.end());
  for (auto& nb : job.adjacency_) std::sort(nb.begin(), nb.end());

  int best_center = -1;
  int best_ecc = nodes + 1;
  std::vector<int> best_dist;
  for (int v = 0; v < nodes; ++v) {
    if (center && *center != v) continue;
    auto dist = bfs_distances(job.adjacency_, v);
    if (std::any_of(dist.begin(), dist.end(), [](int d) { return d < 0; })) {
      throw ValidationError("job.edges", "job graph must be connected");
    }
    int ecc = *std::max_element(dist.begin(), dist.end());
    if (ecc < best_ecc) {
      best_ecc = ecc;
      best_center = v;
      best_dist = std::move(dist);
    }
  }
  if (best_center < 0) throw ValidationError("job.center", "node id out of range");
  job.center_ = best_center;
  job.shell_sizes_.assign(best_ecc + 1, 0);
  for (int d : best_dist) ++job.shell_sizes_[d];
  return job;
}

LoadForecast LoadForecast::point_mass(int load, int slots) {
  if (load < 0 || load > slots) throw ValidationError("forecast", "point mass outside [0, slots]");
  LoadForecast f;
  f.pmf.assign(slots + 1, 0.0);
  f.pmf[load] = 1.0;
  return f;
}

LoadForecast LoadForecast::uniform(int lo, int hi, int slots) {
  if (lo < 0 || hi < lo || hi > slots) throw ValidationError("forecast", "uniform range outside [0, slots]");
  LoadForecast f;
  f.pmf.assign(slots + 1, 0.0);
  const double mass = 1.0 / (hi - lo + 1);
  for (int j = lo; j <= hi; ++j) f.pmf[j] = mass;
  return f;
}

void LoadForecast::validate(int slots) const {
  if (pmf.size() != static_cast<std::size_t>(slots) + 1) {
    throw ValidationError("forecast.pmf", "needs one entry per load 0..slots");
  }
  double sum = 0.0;
  for (double p : pmf) {
    if (!(p >= 0)) throw ValidationError("forecast.pmf", "masses must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("forecast.pmf", "masses must sum to 1");
}

double dc_power(const DataCenter& dc, int used) {
  if (used < 0 || used > dc.slots) {
    throw CapacityError(dc.id, "datacenter " + std::to_string(dc.id) + " cannot run " +
                                   std::to_string(used) + " of " + std::to_string(dc.slots) + " slots");
  }
  const double utilization = static_cast<double>(used) / dc.slots;
  return dc.eta * dc.servers * (dc.sigma * std::pow(utilization, dc.alpha) + dc.p_idle);
}

double dc_cost_term(const DataCenter& dc, int occupied, int added) {
  return dc.xi * dc_power(dc, occupied) + dc.xi * dc.nu * added;
}

namespace {

void check_fits(const GdcnTopology& topology, const MappingVector& m) {
  if (m.size() != topology.size()) throw ValidationError("mapping", "length must equal the datacenter count");
  for (std::size_t i = 0; i < topology.size(); ++i) {
    const auto& dc = topology.dc(i);
    if (m[i] < 0 || dc.load + m[i] > dc.slots) {
      throw CapacityError(static_cast<int>(i), "allocation overflows datacenter " + std::to_string(i));
    }
  }
}

}  // namespace

double allocation_cost(const GdcnTopology& topology, const MappingVector& m) {
  check_fits(topology, m);
  double total = 0.0;
  for (std::size_t i = 0; i < topology.size(); ++i) {
    const auto& dc = topology.dc(i);
    total += dc_cost_term(dc, dc.load + m[i], m[i]);
  }
  return total;
}

double incurred_power(const GdcnTopology& topology, const MappingVector& m) {
  check_fits(topology, m);
  double total = 0.0;
  for (std::size_t i = 0; i < topology.size(); ++i) {
    if (m[i] == 0) continue;
    const auto& dc = topology.dc(i);
    total += dc_power(dc, dc.load + m[i]) - dc_power(dc, dc.load);
  }
  return total;
}

double expected_strategy_cost(const DataCenter& dc, const LoadForecast& forecast, int used) {
  if (used < 0 || used > dc.slots) {
    throw CapacityError(dc.id, "datacenter " + std::to_string(dc.id) + " has fewer than " +
                                   std::to_string(used) + " slots");
  }
  if (forecast.pmf.size() != static_cast<std::size_t>(dc.slots) + 1) {
    throw ValidationError("forecast.pmf", "needs one entry per load 0..slots");
  }
  double mass = 0.0;
  double weighted = 0.0;
  for (int j = 0; j <= dc.slots - used; ++j) {
    const double p = forecast.pmf[j];
    if (p <= 0.0) continue;
    mass += p;
    weighted += p * dc_cost_term(dc, j + used, used);
  }
  if (mass <= 0.0) {
    throw InfeasibleError("datacenter " + std::to_string(dc.id) + " has no forecast load leaving room for " +
                          std::to_string(used) + " slots");
  }
  return weighted / mass;
}

FixedPriceUtility fixed_price_utility(const GraphJob& job, const MappingVector& m,
                                      std::span<const double> prices,
                                      const PreferenceWeights& weights, double max_price) {
  if (prices.size() != m.size()) throw ValidationError("prices", "one price per datacenter is required");
  if (m.total() != job.size()) throw ValidationError("strategy", "must place every node of the job");
  double payment = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (!(max_price > prices[k])) throw ValidationError("max_price", "must exceed every slot price");
    payment += prices[k] * m[k];
  }
  const double n = job.size();
  FixedPriceUtility u;
  u.value = weights.rho - weights.chi * payment - weights.phi * m.dcs_used() +
            weights.chi * n * max_price + weights.phi * n;
  u.normalized = u.value / (weights.rho + weights.chi * n * max_price + weights.phi * (n - 1));
  return u;
}

PaymentResult adaptive_payment(const GdcnTopology& topology, std::span<const MappingVector> strategies) {
  const std::size_t n = topology.size();
  std::vector<int> joint(n, 0);
  for (const auto& m : strategies) {
    if (m.size() != n) throw ValidationError("strategies", "length must equal the datacenter count");
    for (std::size_t i = 0; i < n; ++i) joint[i] += m[i];
  }
  PaymentResult result;
  result.payments.assign(strategies.size(), 0.0);
  std::vector<double> shared(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (joint[i] == 0) continue;
    const auto& dc = topology.dc(i);
    int occupied = dc.load + joint[i];
    if (occupied > dc.slots) {
      result.overloaded = true;
      occupied = dc.slots;
    }
    shared[i] = dc.xi * dc_power(dc, occupied) / joint[i];
  }
  for (std::size_t k = 0; k < strategies.size(); ++k) {
    const auto& m = strategies[k];
    double pay = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (m[i] == 0) continue;
      const auto& dc = topology.dc(i);
      pay += m[i] * dc.xi * dc.nu + shared[i] * m[i];
    }
    result.payments[k] = pay;
  }
  return result;
}

std::vector<double> adaptive_utility(const GdcnTopology& topology, const GraphJob& job,
                                     std::span<const MappingVector> strategies,
                                     const AdaptiveUtilityParams& params) {
  auto billed = adaptive_payment(topology, strategies);
  std::vector<double> out(strategies.size());
  const auto& w = params.weights;
  for (std::size_t k = 0; k < strategies.size(); ++k) {
    if (billed.overloaded) {
      out[k] = -params.penalty;
      continue;
    }
    const double payment = billed.payments[k] * params.billing_hours;
    out[k] = w.rho - w.chi * payment - w.phi * strategies[k].dcs_used() + w.chi * params.max_payment +
             w.phi * job.size();
  }
  return out;
}

double max_payment_bound(const GdcnTopology& topology, int job_size, double billing_hours) {
  std::vector<double> full;
  double io = 0.0;
  for (const auto& dc : topology.dcs()) {
    full.push_back(dc.xi * dc_power(dc, dc.slots));
    io = std::max(io, dc.xi * dc.nu);
  }
  std::sort(full.begin(), full.end(), std::greater<>());
  const std::size_t take = std::min<std::size_t>(full.size(), static_cast<std::size_t>(job_size));
  double bound = std::accumulate(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(take), 0.0);
  bound += io * job_size;
  return bound * billing_hours;
}

}  // namespace gja
