// Command-line front end: run experiments, compare reports, crawl one job
// type, validate scenario files.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gjalloc/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;

struct RunArgs {
  std::string scenario;
  std::string policy;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<int> repetitions;
  std::optional<int> job;
  std::string out;
};

int cmd_run(const RunArgs& a) {
  auto s = gja::load_scenario(a.scenario);
  if (a.seed) s.seed = *a.seed;
  if (a.iterations) s.iterations = *a.iterations;
  if (a.repetitions) s.repetitions = *a.repetitions;
  s.validate();
  const auto policy = gja::parse_policy(a.policy);
  const auto report = gja::run_experiment(s, policy, a.job);
  gja::write_report(report, a.out);
  std::printf("%s %s seed=%llu placed=%ld failed=%ld\n", report.scenario.c_str(), report.policy.c_str(),
              static_cast<unsigned long long>(report.seed), report.jobs_placed, report.jobs_failed);
  return report.jobs_failed > 0 ? kExitInfeasible : kExitOk;
}

int cmd_compare(const std::string& a_dir, const std::string& b_dir, double hours) {
  const auto a = gja::read_report(a_dir);
  const auto b = gja::read_report(b_dir);
  const double profit = gja::profit_vs_baseline(a, b, hours);
  std::printf("%s vs %s over %.17g h: profit %.17g\n", a.policy.c_str(), b.policy.c_str(), hours, profit);
  return kExitOk;
}

struct CrawlArgs {
  std::string scenario;
  int job = 0;
  int steps = 0;
  std::size_t store_size = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_crawl(const CrawlArgs& a) {
  const auto s = gja::load_scenario(a.scenario);
  const auto outcome = gja::crawl_scenario(s, a.job, a.steps, a.store_size, a.seed.value_or(s.seed));
  const auto& c = outcome.counters;
  std::FILE* log = a.out.empty() ? stderr : stdout;
  std::fprintf(log,
               "start=%d visits=%ld completed=%ld infeasible=%ld duplicates=%ld resets=%ld stored=%zu\n",
               outcome.start_dc, c.visits, c.completed, c.infeasible, c.duplicates, c.resets,
               outcome.strategies.size());
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out, std::ios::binary);
    if (!file) throw gja::ValidationError("out", "cannot write " + a.out);
  }
  std::ostream& out = a.out.empty() ? std::cout : file;
  gja::StrategyStore store(std::max<std::size_t>(outcome.strategies.size(), 1));
  for (const auto& [key, strategy] : outcome.strategies) store.add(key, strategy);
  store.dump_jsonl(out);
  return outcome.strategies.empty() ? kExitInfeasible : kExitOk;
}

int cmd_validate(const std::string& file) {
  const auto s = gja::load_scenario(file);
  // Building the topology and jobs catches structural problems the field
  // checks cannot see, such as a disconnected job graph.
  const auto topology = gja::build_topology(s, 0);
  const auto jobs = gja::build_jobs(s);
  std::printf("%s: ok (%zu datacenters, %zu job types)\n", s.name.c_str(), topology.size(), jobs.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph job allocation across geo-distributed datacenters"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one policy on a scenario and write metrics");
  run_cmd->add_option("--scenario", run.scenario, "Scenario JSON file")->required();
  run_cmd->add_option("--policy", run.policy,
                      "convex, cdga, greedy1, greedy2, random, exhaustive, brma or rmba")
      ->required();
  run_cmd->add_option("--seed", run.seed, "Override the scenario seed");
  run_cmd->add_option("--iterations", run.iterations, "Override the iteration count");
  run_cmd->add_option("--repetitions", run.repetitions, "Override the repetition count");
  run_cmd->add_option("--job", run.job, "Learning policies: restrict to one job type");
  run_cmd->add_option("--out", run.out, "Output directory")->required();

  std::string a_dir, b_dir;
  double hours = 24.0;
  auto* cmp_cmd = app.add_subcommand("compare", "Money saved by report A relative to report B");
  cmp_cmd->add_option("--a", a_dir, "Report directory A")->required();
  cmp_cmd->add_option("--b", b_dir, "Report directory B")->required();
  cmp_cmd->add_option("--hours", hours, "Execution time of each job")->capture_default_str();

  CrawlArgs crawl;
  auto* crawl_cmd = app.add_subcommand("crawl", "Crawl strategies for one job type and dump the store");
  crawl_cmd->add_option("--scenario", crawl.scenario, "Scenario JSON file")->required();
  crawl_cmd->add_option("--job", crawl.job, "Job type index")->required();
  crawl_cmd->add_option("--steps", crawl.steps, "Walk loops")->required()->check(CLI::PositiveNumber);
  crawl_cmd->add_option("--store-size", crawl.store_size, "Strategies kept")->required()->check(CLI::PositiveNumber);
  crawl_cmd->add_option("--seed", crawl.seed, "Walk seed (defaults to the scenario seed)");
  crawl_cmd->add_option("--out", crawl.out, "Write the store here instead of stdout");

  std::string validate_file;
  auto* val_cmd = app.add_subcommand("validate", "Check a scenario file");
  val_cmd->add_option("--scenario", validate_file, "Scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*cmp_cmd) return cmd_compare(a_dir, b_dir, hours);
    if (*crawl_cmd) return cmd_crawl(crawl);
    if (*val_cmd) return cmd_validate(validate_file);
  } catch (const gja::ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const gja::InfeasibleError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return kExitInfeasible;
  } catch (const gja::CapacityError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return kExitInfeasible;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  }
  return kExitValidation;
}
