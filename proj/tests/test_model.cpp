#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gjalloc/model.hpp"
#include "support.hpp"

using namespace gja;

TEST_CASE("power of a datacenter follows the cubic utilization curve") {
  const auto dc = DataCenter::make(0, 15, {}, 3);
  CHECK(dc.servers == 5);
  // 1.3 * 5 * (100 * (3/15)^3 + 150)
  CHECK(dc_power(dc, 3) == doctest::Approx(980.2).epsilon(1e-12));
  CHECK(dc_power(dc, 0) == doctest::Approx(1.3 * 5 * 150));
  CHECK(dc_power(dc, 15) == doctest::Approx(1.3 * 5 * 250));
  CHECK_THROWS_AS(dc_power(dc, 16), CapacityError);
  CHECK_THROWS_AS(dc_power(dc, -1), CapacityError);
}

TEST_CASE("datacenter construction rejects bad fields") {
  CHECK_THROWS_AS(DataCenter::make(0, 16, {}, 3), ValidationError);
  CHECK_THROWS_AS(DataCenter::make(0, 0, {}, 3), ValidationError);
  PowerParams p;
  p.alpha = 1.5;
  CHECK_THROWS_AS(DataCenter::make(0, 15, p, 3), ValidationError);
  CHECK_THROWS_AS(DataCenter::make(0, 15, {}, 3, 16), ValidationError);
}

TEST_CASE("topology checks links and connectivity") {
  auto t = test::path_topology({6, 6, 6});
  CHECK(t.linked(0, 1));
  CHECK_FALSE(t.linked(0, 2));
  CHECK(t.slots_adjacent(1, 1));
  CHECK(t.max_degree() == 2);
  std::vector<DataCenter> dcs{DataCenter::make(0, 6), DataCenter::make(1, 6), DataCenter::make(2, 6)};
  CHECK_THROWS_AS(GdcnTopology(dcs, {{0, 1}}), ValidationError);
  CHECK_THROWS_AS(GdcnTopology(dcs, {{0, 0}, {1, 2}}), ValidationError);
  CHECK_THROWS_AS(GdcnTopology(dcs, {{0, 3}}), ValidationError);
}

TEST_CASE("commit adds loads or leaves them untouched") {
  auto t = test::complete_topology({6, 9});
  t.commit(MappingVector{2, 3});
  CHECK(t.loads() == std::vector<int>{2, 3});
  CHECK_THROWS_AS(t.commit(MappingVector{5, 0}), CapacityError);
  CHECK(t.loads() == std::vector<int>{2, 3});
}

TEST_CASE("allocation cost and incurred power against hand sums") {
  auto t = test::complete_topology({15, 18});
  t.set_loads(std::vector<int>{3, 6});
  const MappingVector m{2, 1};
  const auto& a = t.dc(0);
  const auto& b = t.dc(1);
  auto power = [](double servers, double used, double slots) {
    return 1.3 * servers * (100.0 * std::pow(used / slots, 3.0) + 150.0);
  };
  const double xi = 0.12 / 1000.0;
  const double cost = xi * power(5, 5, 15) + xi * power(6, 7, 18) + xi * 12.5 * 3;
  CHECK(allocation_cost(t, m) == doctest::Approx(cost).epsilon(1e-13));
  const double inc = power(5, 5, 15) - power(5, 3, 15) + power(6, 7, 18) - power(6, 6, 18);
  CHECK(incurred_power(t, m) == doctest::Approx(inc).epsilon(1e-13));
  CHECK(dc_cost_term(a, 5, 2) == doctest::Approx(xi * power(5, 5, 15) + xi * 12.5 * 2));
  CHECK(dc_cost_term(b, 6, 0) == doctest::Approx(xi * power(6, 6, 18)));
  CHECK(incurred_power(t, MappingVector{0, 0}) == 0.0);
  CHECK_THROWS_AS(allocation_cost(t, MappingVector{13, 0}), CapacityError);
}

TEST_CASE("graph job shells") {
  SUBCASE("triangle") {
    auto j = GraphJob::make(0, 3, {{0, 1}, {1, 2}, {0, 2}});
    CHECK(j.center() == 0);
    CHECK(j.shell_sizes() == std::vector<int>{1, 2});
  }
  SUBCASE("path of four picks an inner node") {
    auto j = GraphJob::make(0, 4, {{0, 1}, {1, 2}, {2, 3}});
    CHECK(j.center() == 1);
    CHECK(j.shell_sizes() == std::vector<int>{1, 2, 1});
  }
  SUBCASE("pinned center") {
    auto j = GraphJob::make(0, 7, {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 4}, {3, 4}, {4, 5}, {5, 6}}, 0);
    CHECK(j.shell_sizes() == std::vector<int>{1, 2, 2, 1, 1});
    CHECK(j.depth() == 4);
  }
  SUBCASE("duplicate edges collapse") {
    auto j = GraphJob::make(0, 2, {{0, 1}, {1, 0}});
    CHECK(j.edges().size() == 1);
  }
  CHECK_THROWS_AS(GraphJob::make(0, 3, {{0, 1}}), ValidationError);
  CHECK_THROWS_AS(GraphJob::make(0, 2, {{0, 0}}), ValidationError);
  CHECK_THROWS_AS(GraphJob::make(0, 2, {{0, 2}}), ValidationError);
  CHECK_THROWS_AS(GraphJob::make(0, 2, {{0, 1}}, 5), ValidationError);
}

TEST_CASE("expected cost renormalizes over loads that leave room") {
  const auto dc = DataCenter::make(0, 6, {}, 3);
  // Uniform over loads 2..5, taking 3 slots: only loads 2 and 3 fit.
  const auto f = LoadForecast::uniform(2, 5, 6);
  const double want = 0.5 * dc_cost_term(dc, 5, 3) + 0.5 * dc_cost_term(dc, 6, 3);
  CHECK(expected_strategy_cost(dc, f, 3) == doctest::Approx(want).epsilon(1e-14));
  CHECK(expected_strategy_cost(dc, LoadForecast::point_mass(1, 6), 2) == doctest::Approx(dc_cost_term(dc, 3, 2)));
  CHECK_THROWS_AS(expected_strategy_cost(dc, LoadForecast::point_mass(5, 6), 2), InfeasibleError);
  CHECK_THROWS_AS(expected_strategy_cost(dc, LoadForecast::point_mass(1, 3), 2), ValidationError);
  LoadForecast bad;
  bad.pmf = {0.5, 0.2, 0.2, 0.2, 0, 0, 0};
  CHECK_THROWS_AS(bad.validate(6), ValidationError);
}

TEST_CASE("fixed-price utility by hand") {
  const auto job = GraphJob::make(0, 3, {{0, 1}, {1, 2}, {0, 2}});
  const std::vector<double> prices{0.5, 1.0, 2.0};
  const PreferenceWeights w{1.0, 1.0, 1.0};
  const auto u = fixed_price_utility(job, MappingVector{2, 1, 0}, prices, w, 3.0);
  // rho - chi * 2.0 - phi * 2 + chi * 3 * 3 + phi * 3 = 1 - 2 - 2 + 9 + 3
  CHECK(u.value == doctest::Approx(9.0));
  // divided by rho + chi * 3 * 3 + phi * 2
  CHECK(u.normalized == doctest::Approx(9.0 / 12.0));
  CHECK_THROWS_AS(fixed_price_utility(job, MappingVector{1, 1, 0}, prices, w, 3.0), ValidationError);
  CHECK_THROWS_AS(fixed_price_utility(job, MappingVector{3, 0, 0}, prices, w, 2.0), ValidationError);
}

TEST_CASE("normalized fixed-price utility never exceeds one") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> price(0.0, 5.0);
  std::uniform_real_distribution<double> weight(0.1, 3.0);
  double worst = -1.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 7);
    std::vector<GraphJob::Edge> edges;
    for (int v = 1; v < n; ++v) edges.emplace_back(v - 1, v);
    const auto job = GraphJob::make(0, n, edges);
    const std::size_t dcs = 1 + rng() % 5;
    std::vector<double> prices(dcs);
    for (auto& p : prices) p = price(rng);
    double top = 0.0;
    for (double p : prices) top = std::max(top, p);
    const double max_price = std::nextafter(top, INFINITY);
    MappingVector m(dcs);
    for (int v = 0; v < n; ++v) ++m[rng() % dcs];
    const PreferenceWeights w{weight(rng), weight(rng), weight(rng)};
    worst = std::max(worst, fixed_price_utility(job, m, prices, w, max_price).normalized);
  }
  CHECK(worst <= 1.0);
}

TEST_CASE("adaptive payments bill each used datacenter once") {
  auto t = test::complete_topology({6, 9, 12});
  t.set_loads(std::vector<int>{1, 2, 3});
  const std::vector<MappingVector> s{{2, 1, 0}, {0, 2, 0}};
  const auto billed = adaptive_payment(t, s);
  CHECK_FALSE(billed.overloaded);
  const double xi = 0.12 / 1000.0;
  // DC 0 carries 2 job slots, all from agent 0; DC 1 carries 3, split 1:2.
  const double p0 = xi * dc_power(t.dc(0), 3);
  const double p1 = xi * dc_power(t.dc(1), 5);
  CHECK(billed.payments[0] == doctest::Approx(p0 + p1 / 3.0 + 3 * xi * 12.5));
  CHECK(billed.payments[1] == doctest::Approx(2.0 * p1 / 3.0 + 2 * xi * 12.5));

  const std::vector<MappingVector> over{{5, 0, 0}, {1, 0, 0}};
  const auto capped = adaptive_payment(t, over);
  CHECK(capped.overloaded);
  AdaptiveUtilityParams params;
  params.penalty = 0.7;
  const auto job = GraphJob::make(0, 5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  const auto u = adaptive_utility(t, job, over, params);
  CHECK(u[0] == -0.7);
  CHECK(u[1] == -0.7);
}

TEST_CASE("adaptive utility by hand") {
  auto t = test::complete_topology({6, 9});
  const auto job = GraphJob::make(0, 3, {{0, 1}, {1, 2}, {0, 2}});
  AdaptiveUtilityParams params;
  params.weights = {2.0, 1.5, 0.5};
  params.max_payment = 10.0;
  params.billing_hours = 24.0;
  const std::vector<MappingVector> s{{2, 1}};
  const double pay = adaptive_payment(t, s).payments[0] * 24.0;
  const auto u = adaptive_utility(t, job, s, params);
  CHECK(u[0] == doctest::Approx(2.0 - 1.5 * pay - 0.5 * 2 + 1.5 * 10.0 + 0.5 * 3));
}

TEST_CASE("payment bound covers every single-agent payment") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int> slots;
    const int n = 2 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i) slots.push_back(3 * (1 + static_cast<int>(rng() % 4)));
    auto t = test::complete_topology(slots);
    std::vector<int> loads(n);
    for (int i = 0; i < n; ++i) loads[i] = static_cast<int>(rng() % (slots[i] + 1));
    t.set_loads(loads);
    const int size = 1 + static_cast<int>(rng() % 6);
    MappingVector m(n);
    for (int v = 0; v < size; ++v) ++m[rng() % n];
    const std::vector<MappingVector> s{m};
    CHECK(adaptive_payment(t, s).payments[0] * 24.0 <= max_payment_bound(t, size, 24.0) + 1e-12);
  }
}

TEST_CASE("mapping vector helpers") {
  const MappingVector m{0, 3, 0, 2};
  CHECK(m.total() == 5);
  CHECK(m.dcs_used() == 2);
  CHECK(MappingVectorHash{}(m) == MappingVectorHash{}(MappingVector{0, 3, 0, 2}));
  CHECK(MappingVector{0, 3} < MappingVector{1, 0});
}
