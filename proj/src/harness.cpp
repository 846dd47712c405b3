#include "gjalloc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "gjalloc/baselines.hpp"
#include "gjalloc/feasibility.hpp"

namespace gja {

using nlohmann::json;

namespace {

enum Stream : std::uint64_t {
  kTopologyStream = 1,
  kLoadStream,
  kArrivalStream,
  kPolicyStream,
  kCrawlStream,
  kClusterStream,
  kLearnStream,
  kRandomStream,
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ a) ^ b);
}

std::vector<JobSpec> canonical_catalog() {
  return {
      {"triangle", 3, {{0, 1}, {1, 2}, {0, 2}}, std::nullopt, 1.0},
      {"path4", 4, {{0, 1}, {1, 2}, {2, 3}}, std::nullopt, 1.0},
      {"star5", 5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}, std::nullopt, 1.0},
      {"triangle_tail6", 6, {{0, 1}, {1, 2}, {0, 2}, {2, 3}, {3, 4}, {4, 5}}, std::nullopt, 3.0},
      {"shells7", 7, {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 4}, {3, 4}, {4, 5}, {5, 6}}, 0, 4.0},
  };
}

void Scenario::validate() const {
  if (iterations < 0) throw ValidationError("iterations", "must be non-negative");
  if (repetitions < 1) throw ValidationError("repetitions", "must be at least 1");
  if (!(duration_hours > 0.0)) throw ValidationError("duration_hours", "must be positive");
  if (topology == TopologyKind::scale_free) {
    if (attachment < 1) throw ValidationError("topology.attachment", "must be at least 1");
    if (scale_free_dcs < attachment + 1) throw ValidationError("topology.dcs", "must exceed the attachment parameter");
    if (slot_k_min < 1 || slot_k_max < slot_k_min) throw ValidationError("topology.slot_k", "needs 1 <= min <= max");
  } else {
    if (slots.empty()) throw ValidationError("topology.slots", "needs at least one datacenter");
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (slots[i] < 1) throw ValidationError("topology.slots[" + std::to_string(i) + "]", "must be positive");
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto [a, b] = edges[e];
      const int n = static_cast<int>(slots.size());
      if (a < 0 || b < 0 || a >= n || b >= n) {
        throw ValidationError("topology.edges[" + std::to_string(e) + "]", "datacenter id out of range");
      }
    }
  }
  if (slots_per_server < 1) throw ValidationError("power.slots_per_server", "must be positive");
  if (!(power.eta >= 1.0)) throw ValidationError("power.eta", "must be at least 1");
  if (!(power.alpha > 1.0)) throw ValidationError("power.alpha", "must exceed 1");
  if (!(power.sigma > 0.0)) throw ValidationError("power.sigma", "must be positive");
  if (!(power.p_idle >= 0.0)) throw ValidationError("power.p_idle", "must be non-negative");
  if (!(power.xi > 0.0)) throw ValidationError("power.xi", "must be positive");
  if (!(power.nu >= 0.0)) throw ValidationError("power.nu", "must be non-negative");
  if (!(load_lo >= 0.0 && load_lo <= load_hi && load_hi <= 1.0)) {
    throw ValidationError("loads", "needs 0 <= lo <= hi <= 1");
  }
  if (jobs.empty()) throw ValidationError("jobs", "needs at least one job type");
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const std::string path = "jobs[" + std::to_string(j) + "]";
    if (!(jobs[j].rate >= 0.0)) throw ValidationError(path + ".rate", "must be non-negative");
    if (arrivals == ArrivalMode::deterministic && jobs[j].rate != std::floor(jobs[j].rate)) {
      throw ValidationError(path + ".rate", "deterministic arrivals need whole-number rates");
    }
    try {
      GraphJob::make(static_cast<int>(j), jobs[j].nodes, jobs[j].edges, jobs[j].center);
    } catch (const ValidationError& e) {
      throw ValidationError(path + "." + e.path(), e.what());
    }
  }
  if (store_size < 1) throw ValidationError("learning.store_size", "must be at least 1");
  if (crawl_steps < 1) throw ValidationError("learning.crawl_steps", "must be at least 1");
  if (agents < 1) throw ValidationError("learning.agents", "must be at least 1");
  brma.validate();
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("cdga.epsilon", "must lie in (0, 1)");
  if (consensus_steps < 0) throw ValidationError("cdga.consensus_steps", "must be non-negative");
}

Scenario small_scenario(int row) {
  static const int table[3][5] = {{9, 12, 15, 18, 21}, {12, 15, 18, 21, 24}, {15, 18, 21, 24, 27}};
  if (row < 1 || row > 3) throw ValidationError("preset_row", "must be 1, 2 or 3");
  Scenario s;
  s.name = "small-" + std::to_string(row);
  s.slots.assign(table[row - 1], table[row - 1] + 5);
  s.load_lo = 0.0;
  s.load_hi = 0.2;
  return s;
}

Scenario medium_scenario() {
  Scenario s;
  s.name = "medium";
  for (int row = 1; row <= 3; ++row) {
    const auto part = small_scenario(row).slots;
    s.slots.insert(s.slots.end(), part.begin(), part.end());
  }
  s.load_lo = 0.0;
  s.load_hi = 0.2;
  return s;
}

Scenario large_scenario(int dcs) {
  Scenario s;
  s.name = "large-" + std::to_string(dcs);
  s.topology = TopologyKind::scale_free;
  s.scale_free_dcs = dcs;
  s.attachment = 3;
  s.load_lo = 0.2;
  s.load_hi = 1.0;
  s.iterations = 300;
  return s;
}

namespace {

template <class T>
T field(const json& obj, const char* key, const std::string& path, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(path + key, "has the wrong type");
  }
}

std::vector<GdcnTopology::Edge> parse_edges(const json& arr, const std::string& path) {
  if (!arr.is_array()) throw ValidationError(path, "must be an array of [a, b] pairs");
  std::vector<GdcnTopology::Edge> out;
  for (std::size_t e = 0; e < arr.size(); ++e) {
    const auto& pair = arr[e];
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() || !pair[1].is_number_integer()) {
      throw ValidationError(path + "[" + std::to_string(e) + "]", "must be a pair of integers");
    }
    out.emplace_back(pair[0].get<int>(), pair[1].get<int>());
  }
  return out;
}

}  // namespace

Scenario scenario_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("$", std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("$", "scenario must be a JSON object");
  const int schema = field<int>(doc, "schema", "", kScenarioSchema);
  if (schema != kScenarioSchema) throw ValidationError("schema", "unsupported version " + std::to_string(schema));

  Scenario s;
  const auto preset = field<std::string>(doc, "preset", "", "");
  if (preset == "small") {
    s = small_scenario(field<int>(doc, "preset_row", "", 3));
  } else if (preset == "medium") {
    s = medium_scenario();
  } else if (preset == "large") {
    s = large_scenario(field<int>(doc, "preset_dcs", "", 200));
  } else if (!preset.empty()) {
    throw ValidationError("preset", "unknown preset '" + preset + "'");
  }

  if (!doc.contains("seed")) throw ValidationError("seed", "is required");
  s.name = field<std::string>(doc, "name", "", s.name);
  s.seed = field<std::uint64_t>(doc, "seed", "", s.seed);
  s.iterations = field<int>(doc, "iterations", "", s.iterations);
  s.repetitions = field<int>(doc, "repetitions", "", s.repetitions);
  s.duration_hours = field<double>(doc, "duration_hours", "", s.duration_hours);
  s.persistent_loads = field<bool>(doc, "persistent_loads", "", s.persistent_loads);

  if (auto it = doc.find("topology"); it != doc.end()) {
    const auto& t = *it;
    if (!t.is_object()) throw ValidationError("topology", "must be an object");
    const auto kind = field<std::string>(t, "kind", "topology.", "complete");
    if (kind == "complete") {
      s.topology = TopologyKind::complete;
    } else if (kind == "edges") {
      s.topology = TopologyKind::edges;
    } else if (kind == "scale_free") {
      s.topology = TopologyKind::scale_free;
    } else {
      throw ValidationError("topology.kind", "must be complete, edges or scale_free");
    }
    s.slots = field<std::vector<int>>(t, "slots", "topology.", s.slots);
    if (t.contains("edges")) s.edges = parse_edges(t["edges"], "topology.edges");
    if (s.topology == TopologyKind::edges && !t.contains("edges")) {
      throw ValidationError("topology.edges", "is required for kind 'edges'");
    }
    s.scale_free_dcs = field<int>(t, "dcs", "topology.", s.scale_free_dcs);
    s.attachment = field<int>(t, "attachment", "topology.", s.attachment);
    if (t.contains("slot_k")) {
      const auto k = field<std::vector<int>>(t, "slot_k", "topology.", {});
      if (k.size() != 2) throw ValidationError("topology.slot_k", "must be [min, max]");
      s.slot_k_min = k[0];
      s.slot_k_max = k[1];
    }
  }
  if (auto it = doc.find("power"); it != doc.end()) {
    const auto& p = *it;
    s.power.eta = field<double>(p, "eta", "power.", s.power.eta);
    s.power.sigma = field<double>(p, "sigma", "power.", s.power.sigma);
    s.power.alpha = field<double>(p, "alpha", "power.", s.power.alpha);
    s.power.p_idle = field<double>(p, "p_idle", "power.", s.power.p_idle);
    s.power.xi = field<double>(p, "xi", "power.", s.power.xi);
    s.power.nu = field<double>(p, "nu", "power.", s.power.nu);
    s.slots_per_server = field<int>(p, "slots_per_server", "power.", s.slots_per_server);
  }
  if (auto it = doc.find("loads"); it != doc.end()) {
    s.load_lo = field<double>(*it, "lo", "loads.", s.load_lo);
    s.load_hi = field<double>(*it, "hi", "loads.", s.load_hi);
  }
  if (auto it = doc.find("jobs"); it != doc.end()) {
    if (!it->is_array()) throw ValidationError("jobs", "must be an array");
    s.jobs.clear();
    for (std::size_t j = 0; j < it->size(); ++j) {
      const auto& o = (*it)[j];
      const std::string path = "jobs[" + std::to_string(j) + "].";
      if (!o.is_object()) throw ValidationError(path.substr(0, path.size() - 1), "must be an object");
      JobSpec spec;
      spec.name = field<std::string>(o, "name", path, "job" + std::to_string(j));
      spec.nodes = field<int>(o, "nodes", path, 0);
      if (o.contains("edges")) spec.edges = parse_edges(o["edges"], path + "edges");
      if (o.contains("center") && !o["center"].is_null()) spec.center = field<int>(o, "center", path, 0);
      spec.rate = field<double>(o, "rate", path, 0.0);
      s.jobs.push_back(std::move(spec));
    }
  }
  const auto arrivals = field<std::string>(doc, "arrivals", "", "deterministic");
  if (arrivals == "deterministic") {
    s.arrivals = ArrivalMode::deterministic;
  } else if (arrivals == "poisson") {
    s.arrivals = ArrivalMode::poisson;
  } else {
    throw ValidationError("arrivals", "must be deterministic or poisson");
  }
  if (auto it = doc.find("learning"); it != doc.end()) {
    const auto& l = *it;
    s.store_size = field<std::size_t>(l, "store_size", "learning.", s.store_size);
    s.crawl_steps = field<int>(l, "crawl_steps", "learning.", s.crawl_steps);
    s.agents = field<int>(l, "agents", "learning.", s.agents);
    s.preferences.rho = field<double>(l, "rho", "learning.", s.preferences.rho);
    s.preferences.chi = field<double>(l, "chi", "learning.", s.preferences.chi);
    s.preferences.phi = field<double>(l, "phi", "learning.", s.preferences.phi);
    s.brma.exploration = field<double>(l, "exploration", "learning.", s.brma.exploration);
    s.brma.timeframe = field<int>(l, "timeframe", "learning.", s.brma.timeframe);
    s.brma.clusters = field<std::size_t>(l, "clusters", "learning.", s.brma.clusters);
    s.brma.sharpness = field<double>(l, "sharpness", "learning.", s.brma.sharpness);
    s.brma.boost = field<double>(l, "boost", "learning.", s.brma.boost);
  }
  if (auto it = doc.find("cdga"); it != doc.end()) {
    s.epsilon = field<double>(*it, "epsilon", "cdga.", s.epsilon);
    s.consensus_steps = field<int>(*it, "consensus_steps", "cdga.", s.consensus_steps);
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("scenario", "cannot read " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return scenario_from_json(buf.str());
}

std::string scenario_to_json(const Scenario& s) {
  json doc;
  doc["schema"] = kScenarioSchema;
  doc["name"] = s.name;
  doc["seed"] = s.seed;
  doc["iterations"] = s.iterations;
  doc["repetitions"] = s.repetitions;
  doc["duration_hours"] = s.duration_hours;
  doc["persistent_loads"] = s.persistent_loads;
  json t;
  if (s.topology == TopologyKind::scale_free) {
    t["kind"] = "scale_free";
    t["dcs"] = s.scale_free_dcs;
    t["attachment"] = s.attachment;
    t["slot_k"] = {s.slot_k_min, s.slot_k_max};
  } else {
    t["kind"] = s.topology == TopologyKind::complete ? "complete" : "edges";
    t["slots"] = s.slots;
    if (s.topology == TopologyKind::edges) {
      t["edges"] = json::array();
      for (const auto& [a, b] : s.edges) t["edges"].push_back({a, b});
    }
  }
  doc["topology"] = t;
  doc["power"] = {{"eta", s.power.eta},       {"sigma", s.power.sigma}, {"alpha", s.power.alpha},
                  {"p_idle", s.power.p_idle}, {"xi", s.power.xi},       {"nu", s.power.nu},
                  {"slots_per_server", s.slots_per_server}};
  doc["loads"] = {{"lo", s.load_lo}, {"hi", s.load_hi}};
  doc["jobs"] = json::array();
  for (const auto& j : s.jobs) {
    json o{{"name", j.name}, {"nodes", j.nodes}, {"rate", j.rate}};
    o["edges"] = json::array();
    for (const auto& [a, b] : j.edges) o["edges"].push_back({a, b});
    if (j.center) o["center"] = *j.center;
    doc["jobs"].push_back(o);
  }
  doc["arrivals"] = s.arrivals == ArrivalMode::deterministic ? "deterministic" : "poisson";
  doc["learning"] = {{"store_size", s.store_size},
                     {"crawl_steps", s.crawl_steps},
                     {"agents", s.agents},
                     {"rho", s.preferences.rho},
                     {"chi", s.preferences.chi},
                     {"phi", s.preferences.phi},
                     {"exploration", s.brma.exploration},
                     {"timeframe", s.brma.timeframe},
                     {"clusters", s.brma.clusters},
                     {"sharpness", s.brma.sharpness},
                     {"boost", s.brma.boost}};
  doc["cdga"] = {{"epsilon", s.epsilon}, {"consensus_steps", s.consensus_steps}};
  return doc.dump(2) + "\n";
}

std::vector<GdcnTopology::Edge> preferential_attachment(int nodes, int m, std::mt19937_64& rng) {
  if (m < 1 || nodes < m + 1) throw ValidationError("topology", "preferential attachment needs nodes > m >= 1");
  std::vector<GdcnTopology::Edge> edges;
  std::vector<int> endpoints;  // each node once per incident edge
  for (int a = 0; a <= m; ++a) {
    for (int b = a + 1; b <= m; ++b) {
      edges.emplace_back(a, b);
      endpoints.push_back(a);
      endpoints.push_back(b);
    }
  }
  for (int v = m + 1; v < nodes; ++v) {
    std::vector<int> targets;
    std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
    while (static_cast<int>(targets.size()) < m) {
      const int t = endpoints[pick(rng)];
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    for (int t : targets) {
      edges.emplace_back(t, v);
      endpoints.push_back(t);
      endpoints.push_back(v);
    }
  }
  return edges;
}

GdcnTopology build_topology(const Scenario& s, int rep) {
  std::vector<DataCenter> dcs;
  if (s.topology == TopologyKind::scale_free) {
    std::mt19937_64 rng(derive_seed(s.seed, kTopologyStream, static_cast<std::uint64_t>(rep)));
    std::uniform_int_distribution<int> k(s.slot_k_min, s.slot_k_max);
    for (int i = 0; i < s.scale_free_dcs; ++i) {
      dcs.push_back(DataCenter::make(i, s.slots_per_server * k(rng), s.power, s.slots_per_server));
    }
    auto edges = preferential_attachment(s.scale_free_dcs, s.attachment, rng);
    return GdcnTopology(std::move(dcs), std::move(edges));
  }
  for (std::size_t i = 0; i < s.slots.size(); ++i) {
    dcs.push_back(DataCenter::make(static_cast<int>(i), s.slots[i], s.power, s.slots_per_server));
  }
  if (s.topology == TopologyKind::complete) return GdcnTopology::complete(std::move(dcs));
  return GdcnTopology(std::move(dcs), s.edges);
}

std::vector<GraphJob> build_jobs(const Scenario& s) {
  std::vector<GraphJob> jobs;
  for (std::size_t j = 0; j < s.jobs.size(); ++j) {
    jobs.push_back(GraphJob::make(static_cast<int>(j), s.jobs[j].nodes, s.jobs[j].edges, s.jobs[j].center));
  }
  return jobs;
}

std::vector<int> sample_loads(const Scenario& s, const GdcnTopology& topology, std::mt19937_64& rng) {
  std::vector<int> loads(topology.size());
  for (std::size_t i = 0; i < topology.size(); ++i) {
    const int slots = topology.dc(i).slots;
    const int lo = static_cast<int>(std::ceil(s.load_lo * slots - 1e-9));
    const int hi = std::max(lo, static_cast<int>(std::floor(s.load_hi * slots + 1e-9)));
    std::uniform_int_distribution<int> u(lo, hi);
    loads[i] = u(rng);
  }
  return loads;
}

std::vector<int> sample_arrivals(const std::vector<JobSpec>& catalog, ArrivalMode mode, std::mt19937_64& rng) {
  std::vector<int> batch;
  for (std::size_t j = 0; j < catalog.size(); ++j) {
    long count = 0;
    if (mode == ArrivalMode::deterministic) {
      count = std::lround(catalog[j].rate);
    } else if (catalog[j].rate > 0.0) {
      std::poisson_distribution<long> draw(catalog[j].rate);
      count = draw(rng);
    }
    batch.insert(batch.end(), static_cast<std::size_t>(count), static_cast<int>(j));
  }
  return batch;
}

Policy parse_policy(const std::string& name) {
  static const std::pair<const char*, Policy> names[] = {
      {"convex", Policy::convex},   {"cdga", Policy::cdga},     {"greedy1", Policy::greedy1},
      {"greedy2", Policy::greedy2}, {"random", Policy::random}, {"exhaustive", Policy::exhaustive},
      {"brma", Policy::brma},       {"rmba", Policy::rmba},
  };
  for (const auto& [n, p] : names) {
    if (name == n) return p;
  }
  throw ValidationError("policy", "unknown policy '" + name + "'");
}

std::string policy_name(Policy p) {
  switch (p) {
    case Policy::convex: return "convex";
    case Policy::cdga: return "cdga";
    case Policy::greedy1: return "greedy1";
    case Policy::greedy2: return "greedy2";
    case Policy::random: return "random";
    case Policy::exhaustive: return "exhaustive";
    case Policy::brma: return "brma";
    case Policy::rmba: return "rmba";
  }
  return "unknown";
}

bool is_learning_policy(Policy p) { return p == Policy::brma || p == Policy::rmba; }

std::vector<double> cumulative_mean(const std::vector<double>& series) {
  std::vector<double> out(series.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum += series[i];
    out[i] = sum / static_cast<double>(i + 1);
  }
  return out;
}

std::vector<double> fixed_slot_prices(const GdcnTopology& topology, double hours) {
  std::vector<double> prices;
  for (const auto& dc : topology.dcs()) prices.push_back(dc.xi * dc_power(dc, dc.load) * hours / dc.slots);
  return prices;
}

namespace {

struct RepResult {
  std::vector<double> power, cost;
  long placed = 0, failed = 0, mismatches = 0;
  // learning, summed over job types
  std::vector<double> utility, utility_random, p90, p90_random, joint_power, joint_power_random, payments,
      payments_random;
  int learning_samples = 0;
};

void add_into(std::vector<double>& acc, const std::vector<double>& v) {
  if (acc.empty()) acc.assign(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) acc[i] += v[i];
}

double incurred_cost(const GdcnTopology& topology, const MappingVector& m) {
  double total = 0.0;
  for (std::size_t i = 0; i < topology.size(); ++i) {
    if (m[i] == 0) continue;
    const auto& dc = topology.dc(i);
    total += dc.xi * (dc_power(dc, dc.load + m[i]) - dc_power(dc, dc.load));
  }
  return total;
}

RepResult run_allocation_rep(const Scenario& s, Policy policy, int rep, const std::vector<GraphJob>& jobs,
                             const std::vector<FeasibleMappingSet>& structural) {
  RepResult out;
  GdcnTopology topology = build_topology(s, rep);
  const auto r = static_cast<std::uint64_t>(rep);
  SolverConfig solver;
  CdgaConfig cdga;
  cdga.epsilon = s.epsilon;
  cdga.consensus_steps = s.consensus_steps;
  cdga.exec = Exec::serial;
  const std::vector<double> weights(topology.size(), 1.0);

  for (int it = 0; it < s.iterations; ++it) {
    const auto i = static_cast<std::uint64_t>(it);
    if (it == 0 || !s.persistent_loads) {
      std::mt19937_64 load_rng(derive_seed(s.seed, kLoadStream, r, i));
      topology.set_loads(sample_loads(s, topology, load_rng));
    }
    std::mt19937_64 arrival_rng(derive_seed(s.seed, kArrivalStream, r, i));
    std::mt19937_64 policy_rng(derive_seed(s.seed, kPolicyStream, r, i));
    const auto batch = sample_arrivals(s.jobs, s.arrivals, arrival_rng);
    const auto before = topology.loads();
    long committed = 0;
    double power = 0.0;
    double cost = 0.0;
    for (int type : batch) {
      const auto& job = jobs[type];
      const auto free = topology.free_slots();
      const auto feasible = structural[type].restricted_to(free);
      if (feasible.empty()) {
        ++out.failed;
        continue;
      }
      std::optional<MappingVector> pick;
      try {
        switch (policy) {
          case Policy::convex: {
            const auto relaxed = solve_relaxed(topology, job, solver);
            pick = round_to_feasible(relaxed.m, feasible, weights, topology, Exec::serial);
            break;
          }
          case Policy::cdga:
            pick = run_cdga(topology, job, &feasible, cdga).allocation;
            break;
          case Policy::greedy1: pick = greedy1_allocate(topology, job, feasible); break;
          case Policy::greedy2: pick = greedy2_allocate(topology, job, feasible); break;
          case Policy::exhaustive: pick = exhaustive_allocate(topology, feasible, 2'000'000, Exec::serial); break;
          case Policy::random:
            pick = random_select(std::span<const MappingVector>(feasible.vectors), policy_rng);
            break;
          default: throw ValidationError("policy", "not an allocation policy");
        }
      } catch (const InfeasibleError&) {
      }
      if (!pick) {
        ++out.failed;
        continue;
      }
      power += incurred_power(topology, *pick);
      cost += incurred_cost(topology, *pick);
      topology.commit(*pick);
      committed += pick->total();
      ++out.placed;
    }
    const auto after = topology.loads();
    const long sum_before = std::accumulate(before.begin(), before.end(), 0L);
    const long sum_after = std::accumulate(after.begin(), after.end(), 0L);
    if (sum_before + committed != sum_after) ++out.mismatches;
    out.power.push_back(power);
    out.cost.push_back(cost);
  }
  return out;
}

RepResult run_learning_rep(const Scenario& s, Policy policy, int rep, const std::vector<GraphJob>& jobs,
                           std::optional<int> job_filter) {
  RepResult out;
  GdcnTopology topology = build_topology(s, rep);
  const auto r = static_cast<std::uint64_t>(rep);
  {
    std::mt19937_64 load_rng(derive_seed(s.seed, kLoadStream, r, 0));
    topology.set_loads(sample_loads(s, topology, load_rng));
  }
  const auto forecasts = current_load_forecasts(topology);
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (job_filter && *job_filter != static_cast<int>(j)) continue;
    const auto& job = jobs[j];
    std::mt19937_64 start_rng(derive_seed(s.seed, kCrawlStream, r, j));
    std::uniform_int_distribution<int> start(0, static_cast<int>(topology.size()) - 1);
    const int start_dc = start(start_rng);
    CrawlerConfig ccfg;
    ccfg.store_size = s.store_size;
    auto crawler = run_crawler(topology, job, forecasts, start_dc, s.crawl_steps, start_rng(), ccfg);
    std::vector<MappingVector> pool;
    for (const auto& [key, strategy] : crawler.store().in_order()) pool.push_back(strategy.mapping(topology.size()));
    if (pool.empty()) {
      ++out.failed;
      continue;
    }
    ++out.learning_samples;

    if (policy == Policy::brma) {
      const auto prices = fixed_slot_prices(topology, s.duration_hours);
      const double max_price =
          std::nextafter(*std::max_element(prices.begin(), prices.end()), std::numeric_limits<double>::infinity());
      std::vector<double> value(pool.size());
      for (std::size_t m = 0; m < pool.size(); ++m) {
        value[m] = fixed_price_utility(job, pool[m], prices, s.preferences, max_price).normalized;
      }
      BrmaConfig cfg = s.brma;
      cfg.clusters = std::min(cfg.clusters, pool.size());
      auto clustered = cluster_pool(pool, cfg.clusters, derive_seed(s.seed, kClusterStream, r, j));
      const auto trace = brma_run(clustered, [&](std::size_t m, int) { return value[m]; }, value, s.iterations,
                                  derive_seed(s.seed, kLearnStream, r, j), cfg);
      std::mt19937_64 random_rng(derive_seed(s.seed, kRandomStream, r, j));
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      std::vector<double> random_u(s.iterations);
      for (auto& u : random_u) u = value[pick(random_rng)];
      const std::vector<double> uniform(pool.size(), 1.0 / static_cast<double>(pool.size()));
      const double random_p90 = p90(uniform, value);
      add_into(out.utility, trace.utilities);
      add_into(out.utility_random, random_u);
      add_into(out.p90, trace.p90);
      add_into(out.p90_random, std::vector<double>(s.iterations, random_p90));
    } else {
      AdaptiveUtilityParams params;
      params.weights = s.preferences;
      params.billing_hours = s.duration_hours;
      params.max_payment = max_payment_bound(topology, job.size(), s.duration_hours);
      params.penalty = s.preferences.rho;
      AdaptivePricingGame game(topology, job, std::vector<std::vector<MappingVector>>(s.agents, pool), params);
      const auto learned = rmba_run(game, s.iterations, derive_seed(s.seed, kLearnStream, r, j));
      const auto random = random_joint_run(game, s.iterations, derive_seed(s.seed, kRandomStream, r, j));
      auto summarize = [&](const RmbaTrace& t, std::vector<double>& util, std::vector<double>& pay) {
        util.assign(t.utilities.size(), 0.0);
        pay.assign(t.utilities.size(), 0.0);
        std::vector<MappingVector> chosen(s.agents);
        for (std::size_t n = 0; n < t.utilities.size(); ++n) {
          util[n] = std::accumulate(t.utilities[n].begin(), t.utilities[n].end(), 0.0) / s.agents;
          for (int k = 0; k < s.agents; ++k) chosen[k] = pool[t.joint_actions[n][k]];
          const auto billed = adaptive_payment(topology, chosen);
          pay[n] = std::accumulate(billed.payments.begin(), billed.payments.end(), 0.0) * s.duration_hours;
        }
      };
      std::vector<double> u1, p1, u2, p2;
      summarize(learned, u1, p1);
      summarize(random, u2, p2);
      add_into(out.utility, u1);
      add_into(out.utility_random, u2);
      add_into(out.payments, p1);
      add_into(out.payments_random, p2);
      add_into(out.joint_power, learned.joint_power);
      add_into(out.joint_power_random, random.joint_power);
    }
  }
  return out;
}

void average_into(std::vector<double>& dst, const std::vector<RepResult>& reps,
                  std::vector<double> RepResult::*member, bool by_samples) {
  double count = 0.0;
  for (const auto& rr : reps) {
    const auto& v = rr.*member;
    if (v.empty()) continue;
    add_into(dst, v);
    count += by_samples ? rr.learning_samples : 1.0;
  }
  if (count > 0.0) {
    for (auto& x : dst) x /= count;
  }
}

}  // namespace

MetricsReport run_experiment(const Scenario& s, Policy policy, std::optional<int> job_filter) {
  s.validate();
  if (job_filter && (*job_filter < 0 || *job_filter >= static_cast<int>(s.jobs.size()))) {
    throw ValidationError("job", "no job type " + std::to_string(*job_filter));
  }
  MetricsReport report;
  report.scenario = s.name;
  report.policy = policy_name(policy);
  report.seed = s.seed;
  report.iterations = s.iterations;
  report.repetitions = s.repetitions;
  report.duration_hours = s.duration_hours;
  const auto jobs = build_jobs(s);

  std::vector<FeasibleMappingSet> structural;
  const bool learning = is_learning_policy(policy);
  if (!learning && s.topology != TopologyKind::scale_free) {
    const auto topology = build_topology(s, 0);
    for (const auto& job : jobs) structural.push_back(structural_mappings(topology, job));
  } else if (!learning) {
    throw ValidationError("policy", "allocation policies need an explicit topology; use brma or rmba on scale-free");
  }

  std::vector<RepResult> reps(s.repetitions);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (int rep = 0; rep < s.repetitions; ++rep) {
    try {
      reps[rep] = learning ? run_learning_rep(s, policy, rep, jobs, job_filter)
                           : run_allocation_rep(s, policy, rep, jobs, structural);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& rr : reps) {
    report.jobs_placed += rr.placed;
    report.jobs_failed += rr.failed;
    report.load_mismatches += rr.mismatches;
  }
  if (!learning) {
    average_into(report.incurred_power, reps, &RepResult::power, false);
    average_into(report.incurred_cost, reps, &RepResult::cost, false);
    report.cumulative_power = cumulative_mean(report.incurred_power);
  } else {
    average_into(report.utility, reps, &RepResult::utility, true);
    average_into(report.utility_random, reps, &RepResult::utility_random, true);
    average_into(report.p90, reps, &RepResult::p90, true);
    average_into(report.p90_random, reps, &RepResult::p90_random, true);
    average_into(report.joint_power, reps, &RepResult::joint_power, true);
    average_into(report.joint_power_random, reps, &RepResult::joint_power_random, true);
    average_into(report.payments, reps, &RepResult::payments, true);
    average_into(report.payments_random, reps, &RepResult::payments_random, true);
  }
  return report;
}

double profit_vs_baseline(const MetricsReport& a, const MetricsReport& b, double hours) {
  if (a.scenario != b.scenario || a.seed != b.seed || a.iterations != b.iterations ||
      a.repetitions != b.repetitions || a.incurred_cost.size() != b.incurred_cost.size()) {
    throw ValidationError("compare", "reports come from different scenarios, seeds or lengths");
  }
  double profit = 0.0;
  for (std::size_t i = 0; i < a.incurred_cost.size(); ++i) profit += (b.incurred_cost[i] - a.incurred_cost[i]) * hours;
  return profit;
}

namespace {

void write_csv(const std::filesystem::path& file, const std::vector<std::string>& header,
               const std::vector<const std::vector<double>*>& columns) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ValidationError("out", "cannot write " + file.string());
  out << "# " << kMetricsSchema << '\n' << "iteration";
  for (const auto& h : header) out << ',' << h;
  out << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front()->size();
  for (std::size_t i = 0; i < rows; ++i) {
    out << i + 1;
    for (const auto* c : columns) out << ',' << fmt((*c)[i]);
    out << '\n';
  }
}

std::vector<std::vector<double>> read_csv(const std::filesystem::path& file, std::vector<std::string>& header) {
  std::ifstream in(file);
  if (!in) throw ValidationError("report", "cannot read " + file.string());
  std::string line;
  std::getline(in, line);
  if (line != std::string("# ") + kMetricsSchema) throw ValidationError("report", file.string() + ": unknown schema");
  std::getline(in, line);
  header.clear();
  {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // iteration
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::vector<std::vector<double>> cols(header.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    for (auto& c : cols) {
      if (!std::getline(ss, cell, ',')) throw ValidationError("report", file.string() + ": short row");
      c.push_back(std::stod(cell));
    }
  }
  return cols;
}

double tail_mean(const std::vector<double>& v, std::size_t n) {
  if (v.empty()) return 0.0;
  n = std::min(n, v.size());
  return std::accumulate(v.end() - static_cast<std::ptrdiff_t>(n), v.end(), 0.0) / static_cast<double>(n);
}

}  // namespace

void write_report(const MetricsReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json summary;
  summary["schema"] = kMetricsSchema;
  summary["scenario"] = r.scenario;
  summary["policy"] = r.policy;
  summary["seed"] = r.seed;
  summary["iterations"] = r.iterations;
  summary["repetitions"] = r.repetitions;
  summary["duration_hours"] = r.duration_hours;
  summary["jobs_placed"] = r.jobs_placed;
  summary["jobs_failed"] = r.jobs_failed;
  summary["load_mismatches"] = r.load_mismatches;
  if (!r.incurred_power.empty() || r.utility.empty()) {
    write_csv(dir / "incurred_power.csv", {"incurred_power_w", "cumulative_avg_w", "incurred_cost_per_h"},
              {&r.incurred_power, &r.cumulative_power, &r.incurred_cost});
    summary["total_incurred_power_w"] = std::accumulate(r.incurred_power.begin(), r.incurred_power.end(), 0.0);
    summary["final_cumulative_avg_w"] = r.cumulative_power.empty() ? 0.0 : r.cumulative_power.back();
  }
  if (!r.utility.empty()) {
    if (!r.p90.empty()) {
      write_csv(dir / "learning.csv", {"utility", "utility_random", "p90", "p90_random"},
                {&r.utility, &r.utility_random, &r.p90, &r.p90_random});
      summary["final_p90"] = r.p90.back();
    } else {
      write_csv(dir / "learning.csv",
                {"utility", "utility_random", "joint_power_w", "joint_power_random_w", "payments", "payments_random"},
                {&r.utility, &r.utility_random, &r.joint_power, &r.joint_power_random, &r.payments,
                 &r.payments_random});
      summary["mean_joint_power_w"] = tail_mean(r.joint_power, r.joint_power.size());
      summary["mean_joint_power_random_w"] = tail_mean(r.joint_power_random, r.joint_power_random.size());
      summary["currency_in_circulation_delta"] =
          tail_mean(r.payments_random, r.payments_random.size()) - tail_mean(r.payments, r.payments.size());
    }
    summary["mean_utility"] = tail_mean(r.utility, r.utility.size());
    summary["mean_utility_random"] = tail_mean(r.utility_random, r.utility_random.size());
  }
  std::ofstream out(dir / "summary.json", std::ios::binary);
  if (!out) throw ValidationError("out", "cannot write " + (dir / "summary.json").string());
  out << summary.dump(2) << '\n';
}

MetricsReport read_report(const std::filesystem::path& dir) {
  std::ifstream in(dir / "summary.json");
  if (!in) throw ValidationError("report", "cannot read " + (dir / "summary.json").string());
  json summary;
  try {
    in >> summary;
  } catch (const json::exception& e) {
    throw ValidationError("report", std::string("bad summary.json: ") + e.what());
  }
  MetricsReport r;
  try {
    r.scenario = summary.at("scenario").get<std::string>();
    r.policy = summary.at("policy").get<std::string>();
    r.seed = summary.at("seed").get<std::uint64_t>();
    r.iterations = summary.at("iterations").get<int>();
    r.repetitions = summary.at("repetitions").get<int>();
    r.duration_hours = summary.at("duration_hours").get<double>();
    r.jobs_placed = summary.at("jobs_placed").get<long>();
    r.jobs_failed = summary.at("jobs_failed").get<long>();
  } catch (const json::exception& e) {
    throw ValidationError("report", std::string("summary.json: ") + e.what());
  }
  if (std::filesystem::exists(dir / "incurred_power.csv")) {
    std::vector<std::string> header;
    auto cols = read_csv(dir / "incurred_power.csv", header);
    if (cols.size() != 3) throw ValidationError("report", "incurred_power.csv needs three columns");
    r.incurred_power = std::move(cols[0]);
    r.cumulative_power = std::move(cols[1]);
    r.incurred_cost = std::move(cols[2]);
  }
  return r;
}

CrawlOutcome crawl_scenario(const Scenario& s, int job_id, int steps, std::size_t store_size, std::uint64_t seed) {
  s.validate();
  if (job_id < 0 || job_id >= static_cast<int>(s.jobs.size())) {
    throw ValidationError("job", "no job type " + std::to_string(job_id));
  }
  GdcnTopology topology = build_topology(s, 0);
  std::mt19937_64 load_rng(derive_seed(s.seed, kLoadStream, 0, 0));
  topology.set_loads(sample_loads(s, topology, load_rng));
  const auto jobs = build_jobs(s);
  std::mt19937_64 start_rng(derive_seed(seed, kCrawlStream, 0, static_cast<std::uint64_t>(job_id)));
  std::uniform_int_distribution<int> start(0, static_cast<int>(topology.size()) - 1);
  CrawlerConfig cfg;
  cfg.store_size = store_size;
  const int start_dc = start(start_rng);
  const auto forecasts = current_load_forecasts(topology);
  const Crawler crawler = run_crawler(topology, jobs[job_id], forecasts, start_dc, steps, seed, cfg);
  CrawlOutcome out{topology, start_dc, crawler.store().in_order(), crawler.counters(), crawler.walk()};
  return out;
}

}  // namespace gja
