#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "gjalloc/convex.hpp"
#include "gjalloc/harness.hpp"
#include "support.hpp"

using namespace gja;

namespace {

// Water-filling on the KKT conditions: for a common price g every DC takes
// the slots where its marginal cost reaches g, clipped to [0, free]; bisect g
// until the job is placed.
std::vector<double> water_fill(const RelaxedProblem& p) {
  auto take = [&](double g) {
    std::vector<double> m(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double level = g - p.io_slope(i);
      double x = level <= 0.0 ? 0.0 : std::pow(level / p.curvature(i), 1.0 / (p.alpha(i) - 1.0)) - p.load(i);
      m[i] = std::clamp(x, 0.0, p.capacity(i));
    }
    return m;
  };
  double lo = 0.0;
  double hi = 1.0;
  auto placed = [&](double g) {
    double s = 0.0;
    for (double x : take(g)) s += x;
    return s;
  };
  while (placed(hi) < p.job_size()) hi *= 2.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (placed(mid) < p.job_size() ? lo : hi) = mid;
  }
  return take(hi);
}

DualState random_state(const RelaxedProblem& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DualState s;
  s.lambda.resize(p.size());
  s.Lambda.resize(p.size());
  double scale = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) scale = std::max(scale, p.curvature(i) * 400.0);
  s.gamma = -scale * (0.05 + u(rng));
  for (std::size_t i = 0; i < p.size(); ++i) {
    s.lambda[i] = scale * 0.3 * u(rng);
    s.Lambda[i] = scale * 0.3 * u(rng);
  }
  return s;
}

// Distance of every DC's inner-minimizer numerator from the kink at zero.
bool away_from_kink(const RelaxedProblem& p, const DualState& s, double margin) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double num = s.Lambda[i] - s.lambda[i] - s.gamma - p.io_slope(i);
    if (std::abs(num) < margin) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("relaxed problem constants") {
  auto t = test::complete_topology({15, 18});
  t.set_loads(std::vector<int>{3, 0});
  const RelaxedProblem p(t, 4);
  // Uniform price: the scaled objective is plain facility power plus I/O watts.
  CHECK(p.price_scale() == doctest::Approx(0.12 / 1000.0));
  CHECK(p.curvature(0) == doctest::Approx(1.3 * 5 * 100 * 3 / std::pow(15.0, 3)));
  CHECK(p.io_slope(1) == doctest::Approx(12.5));
  CHECK(p.capacity(0) == 12.0);
  const std::vector<double> m{1.0, 3.0};
  CHECK(p.objective(m) == doctest::Approx(dc_power(t.dc(0), 4) + dc_power(t.dc(1), 3) + 12.5 * 4));
  const auto s = p.initial_state();
  CHECK(s.Lambda[0] == doctest::Approx(p.curvature(0) / 5));
  CHECK(s.gamma == doctest::Approx(-(p.curvature(0) + p.curvature(1)) / 6));
}

TEST_CASE("inner minimizer is a stationary point of the Lagrangian") {
  std::mt19937_64 rng(3);
  auto t = test::complete_topology({15, 18, 21});
  t.set_loads(std::vector<int>{2, 5, 1});
  const RelaxedProblem p(t, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_state(p, rng);
    const auto m = inner_minimizer(p, s);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double num = s.Lambda[i] - s.lambda[i] - s.gamma - p.io_slope(i);
      if (num <= 0.0) {
        CHECK(m[i] == 0.0);
        continue;
      }
      const double h = 1e-4;
      auto li = [&](double x) { return p.dc_objective(i, x) + (s.lambda[i] + s.gamma - s.Lambda[i]) * x; };
      CHECK((li(m[i] + h) - li(m[i] - h)) / (2 * h) == doctest::Approx(0.0).epsilon(1e-5).scale(num));
    }
  }
}

TEST_CASE("dual gradient matches central finite differences") {
  std::mt19937_64 rng(17);
  auto t = test::complete_topology({15, 18, 21, 24, 27});
  t.set_loads(std::vector<int>{1, 3, 0, 4, 2});
  const RelaxedProblem p(t, 6);
  int checked = 0;
  double worst = 0.0;
  while (checked < 1000) {
    auto s = random_state(p, rng);
    if (!away_from_kink(p, s, 1e-2)) continue;
    const auto g = dual_gradient(p, s);
    const double h = 1e-6;
    auto rel = [](double fd, double an) { return std::abs(fd - an) / std::max(1.0, std::abs(an)); };
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto a = s, b = s;
      a.lambda[i] += h;
      b.lambda[i] -= h;
      worst = std::max(worst, rel((dual_value(p, a) - dual_value(p, b)) / (2 * h), g.lambda[i]));
      a = s, b = s;
      a.Lambda[i] += h;
      b.Lambda[i] -= h;
      worst = std::max(worst, rel((dual_value(p, a) - dual_value(p, b)) / (2 * h), g.Lambda[i]));
    }
    auto a = s, b = s;
    a.gamma += h;
    b.gamma -= h;
    worst = std::max(worst, rel((dual_value(p, a) - dual_value(p, b)) / (2 * h), g.gamma));
    ++checked;
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("projected ascent step") {
  auto t = test::complete_topology({15, 18});
  const RelaxedProblem p(t, 3);
  auto s = p.initial_state();
  const auto g = dual_gradient(p, s);
  const SolverConfig cfg;
  const auto next = dual_ascent_step(s, p, cfg);
  CHECK(next.gamma == doctest::Approx(s.gamma + 0.18 * g.gamma));
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(next.lambda[i] == doctest::Approx(std::max(0.0, 0.1 * g.lambda[i])));
    CHECK(next.Lambda[i] == doctest::Approx(std::max(0.0, s.Lambda[i] + 0.15 * g.Lambda[i])));
    CHECK(next.lambda[i] >= 0.0);
    CHECK(next.Lambda[i] >= 0.0);
  }
  CHECK(next.iteration == 1);
}

TEST_CASE("dual ascent reaches the water-filling optimum on small instances") {
  std::mt19937_64 rng(41);
  const auto jobs = build_jobs(small_scenario(3));
  int converged = 0;
  for (int trial = 0; trial < 40; ++trial) {
    auto t = test::complete_topology({15, 18, 21, 24, 27});
    std::vector<int> loads;
    for (int s : {15, 18, 21, 24, 27}) loads.push_back(static_cast<int>(rng() % (s / 5 + 1)));
    t.set_loads(loads);
    const auto& job = jobs[trial % jobs.size()];
    const auto sol = solve_relaxed(t, job);
    if (!sol.converged) continue;
    ++converged;
    const auto want = water_fill(RelaxedProblem(t, job.size()));
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(sol.m[i] - want[i]) < 0.05);
  }
  CHECK(converged >= 36);
}

TEST_CASE("solver rejects a job that cannot fit and writes a trace") {
  auto t = test::complete_topology({3});
  t.set_loads(std::vector<int>{2});
  CHECK_THROWS_AS(solve_relaxed(t, test::triangle()), InfeasibleError);
  auto u = test::complete_topology({15, 18});
  std::ostringstream trace;
  SolverConfig cfg;
  cfg.trace = &trace;
  const auto sol = solve_relaxed(u, test::triangle(), cfg);
  std::string header;
  std::istringstream in(trace.str());
  std::getline(in, header);
  CHECK(header == "iteration,lambda_0,lambda_1,gamma,Lambda_0,Lambda_1");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == sol.iterations + 1);
}

TEST_CASE("sequential allocation commits every placed job") {
  auto t = test::complete_topology({15, 18, 21});
  const std::vector<GraphJob> jobs{test::triangle(), test::path_job(4), test::star_job(5)};
  auto source = [](const GdcnTopology& topo, const GraphJob& job) { return enumerate_feasible_mappings(topo, job); };
  const auto out = allocate_sequentially(t, jobs, source);
  int placed = 0;
  for (const auto& o : out) {
    REQUIRE(o.allocation.has_value());
    placed += o.allocation->total();
  }
  const auto loads = t.loads();
  CHECK(std::accumulate(loads.begin(), loads.end(), 0) == placed);
  CHECK(placed == 12);

  auto full = test::complete_topology({3});
  full.set_loads(std::vector<int>{2});
  const auto none = allocate_sequentially(full, jobs, source);
  for (const auto& o : none) CHECK_FALSE(o.allocation.has_value());
}
