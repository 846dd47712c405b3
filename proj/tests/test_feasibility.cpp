#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "gjalloc/feasibility.hpp"
#include "gjalloc/kernels.hpp"
#include "support.hpp"

using namespace gja;

namespace {

GdcnTopology random_topology(std::mt19937_64& rng, int n, int max_free) {
  std::vector<int> slots(n, 3 * ((max_free + 2) / 3));
  std::vector<GdcnTopology::Edge> edges;
  for (int v = 1; v < n; ++v) edges.emplace_back(static_cast<int>(rng() % v), v);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (rng() % 3 == 0) edges.emplace_back(a, b);
    }
  }
  GdcnTopology t(test::make_dcs(slots), edges);
  std::vector<int> loads(n);
  for (int i = 0; i < n; ++i) loads[i] = slots[i] - static_cast<int>(rng() % (max_free + 1));
  t.set_loads(loads);
  return t;
}

GraphJob random_job(std::mt19937_64& rng, int nodes) {
  std::vector<GraphJob::Edge> edges;
  for (int v = 1; v < nodes; ++v) edges.emplace_back(static_cast<int>(rng() % v), v);
  for (int a = 0; a < nodes; ++a) {
    for (int b = a + 1; b < nodes; ++b) {
      if (rng() % 4 == 0) edges.emplace_back(a, b);
    }
  }
  return GraphJob::make(0, nodes, edges);
}

}  // namespace

TEST_CASE("neighborhood decomposition of a path") {
  const auto d = neighborhood_decomposition(test::path_job(4), 1);
  CHECK(d.shells == std::vector<std::vector<int>>{{1}, {0, 2}, {3}});
  CHECK_THROWS_AS(neighborhood_decomposition(test::path_job(4), 7), ValidationError);
}

TEST_CASE("triangle on a three-datacenter path") {
  // Datacenters 0 and 2 are not linked, so no vector may use both.
  auto t = test::path_topology({3, 3, 3});
  const auto set = enumerate_feasible_mappings(t, test::triangle());
  for (const auto& m : set.vectors) CHECK_FALSE((m[0] > 0 && m[2] > 0));
  CHECK(set.contains(MappingVector{1, 1, 1}) == false);
  CHECK(set.contains(MappingVector{2, 1, 0}));
  CHECK(set.contains(MappingVector{3, 0, 0}));
  const auto oracle = test::brute_force_mappings(t, test::triangle());
  CHECK(std::set<MappingVector>(set.vectors.begin(), set.vectors.end()) == oracle);
}

TEST_CASE("enumeration matches the slot-permutation oracle on random instances") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 3);
    auto t = random_topology(rng, n, 3);
    const auto job = random_job(rng, 1 + static_cast<int>(rng() % 4));
    const auto set = enumerate_feasible_mappings(t, job);
    const auto oracle = test::brute_force_mappings(t, job);
    CHECK(std::set<MappingVector>(set.vectors.begin(), set.vectors.end()) == oracle);
    CHECK(std::is_sorted(set.vectors.begin(), set.vectors.end()));
    const auto scanned = candidate_mappings(t, job, t.free_slots());
    CHECK(scanned.vectors == set.vectors);
  }
}

TEST_CASE("verify_embedding agrees with the labeling oracle") {
  std::mt19937_64 rng(99);
  int positives = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 3);
    auto t = random_topology(rng, n, 4);
    const auto job = random_job(rng, 2 + static_cast<int>(rng() % 4));
    MappingVector m(n);
    for (int v = 0; v < job.size(); ++v) ++m[rng() % n];
    const bool want = test::brute_force_embeds(t, job, m);
    positives += want;
    CHECK(verify_embedding(t, job, m) == want);
  }
  CHECK(positives > 20);
}

TEST_CASE("structural sets restricted to capacity equal the direct enumeration") {
  auto t = test::complete_topology({6, 6, 6});
  const auto job = test::star_job(5);
  const auto structural = structural_mappings(t, job);
  t.set_loads(std::vector<int>{4, 2, 5});
  const auto direct = enumerate_feasible_mappings(t, job);
  CHECK(structural.restricted_to(t.free_slots()).vectors == direct.vectors);
}

TEST_CASE("oracle size limits") {
  auto t = test::complete_topology({30});
  CHECK_THROWS_AS(enumerate_feasible_mappings(t, test::path_job(9)), SizeLimitError);
  auto wide = test::complete_topology(std::vector<int>(6, 30));
  CHECK_THROWS_AS(candidate_mappings(wide, test::path_job(8), wide.free_slots(), 1000), SizeLimitError);
}

TEST_CASE("rounding picks the nearest candidate, then the cheaper one") {
  auto t = test::complete_topology({6, 6});
  FeasibleMappingSet set;
  set.vectors = {MappingVector{0, 3}, MappingVector{1, 2}, MappingVector{2, 1}, MappingVector{3, 0}};
  const std::vector<double> ones{1.0, 1.0};
  CHECK(round_to_feasible(std::vector<double>{1.2, 1.8}, set, ones, t) == MappingVector{1, 2});
  // Equidistant from {1,2} and {2,1}: load DC 1 so {1,2} costs more.
  t.set_loads(std::vector<int>{0, 3});
  CHECK(round_to_feasible(std::vector<double>{1.5, 1.5}, set, ones, t) == MappingVector{2, 1});
  CHECK_THROWS_AS(round_to_feasible(std::vector<double>{1.5, 1.5}, FeasibleMappingSet{}, ones, t), InfeasibleError);
}

TEST_CASE("serial and parallel kernels agree exactly") {
  std::mt19937_64 rng(7);
  auto t = test::complete_topology({9, 12, 15, 18, 21, 24});
  t.set_loads(std::vector<int>{3, 4, 5, 6, 7, 20});
  std::vector<MappingVector> cands;
  for (int k = 0; k < 5000; ++k) {
    MappingVector m(6);
    for (int v = 0; v < 7; ++v) ++m[rng() % 6];
    cands.push_back(m);
  }
  const std::vector<double> target{1.1, 0.3, 2.5, 0.0, 1.7, 1.4};
  const std::vector<double> weights{1.0, 2.0, 0.5, 1.0, 1.0, 3.0};
  CHECK(weighted_sq_distances(cands, target, weights, Exec::serial) ==
        weighted_sq_distances(cands, target, weights, Exec::parallel));
  const auto cs = candidate_costs(t, cands, Exec::serial);
  CHECK(cs == candidate_costs(t, cands, Exec::parallel));
  for (std::size_t k = 0; k < cands.size(); ++k) {
    if (cands[k][5] > 4) CHECK(std::isinf(cs[k]));
  }
  const auto job = test::path_job(5);
  CHECK(enumerate_feasible_mappings(t, job, {}, Exec::serial).vectors ==
        enumerate_feasible_mappings(t, job, {}, Exec::parallel).vectors);
  CHECK(candidate_mappings(t, job, t.free_slots(), 2'000'000, Exec::serial).vectors ==
        candidate_mappings(t, job, t.free_slots(), 2'000'000, Exec::parallel).vectors);
}

TEST_CASE("argmin_first keeps the lowest index on ties") {
  const std::vector<double> v{3.0, 1.0, 1.0, std::numeric_limits<double>::infinity()};
  CHECK(argmin_first(v) == 1);
}
