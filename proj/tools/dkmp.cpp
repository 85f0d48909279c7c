// Command line front end: partition, bench, profile and verify.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "dkmp/bench.hpp"
#include "dkmp/profile.hpp"

namespace {

using namespace dkmp;

constexpr int kExitInfeasible = 1;
constexpr int kExitError = 2;

void print_metrics(const PartitionMetrics &metrics, const BlockID k) {
  std::cout << "cut=" << metrics.cut << " imbalance=" << csv::fixed(metrics.imbalance, 6)
            << " max_block_weight=" << metrics.max_block_weight << " bound=" << metrics.bound
            << " nonempty=" << metrics.nonempty_blocks << "/" << k << " feasible=" << (metrics.feasible ? "yes" : "no")
            << '\n';
}

std::ofstream open_output(const std::string &path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  return out;
}

int run_partition_command(
    const std::string &source, const PartitionRequest &request, const std::string &output, const bool trace
) {
  const SeqGraph graph = load_graph(source);
  std::cerr << "graph: n=" << graph.n() << " m=" << graph.m() << '\n';
  const auto outcome = run_partition(graph, request);
  write_partition(outcome.blocks, output);
  const auto metrics = evaluate_partition(graph, outcome.blocks, request.k, request.eps);
  print_metrics(metrics, request.k);
  std::cout << "time=" << csv::fixed(outcome.wall_seconds, 3) << "s levels=" << outcome.stats.levels
            << " replications=" << outcome.stats.replications << " messages=" << outcome.messages
            << " bytes=" << outcome.bytes << '\n';
  if (trace) {
    std::cerr << "levels:";
    for (const auto n : outcome.stats.level_sizes) {
      std::cerr << ' ' << n;
    }
    std::cerr << "\nextensions:";
    for (const auto &step : outcome.stats.extensions) {
      std::cerr << " n=" << step.n << ':' << step.blocks_before << "->" << step.blocks_after << "@P" << step.group_size;
    }
    std::cerr << '\n';
    for (std::size_t c = 0; c < outcome.collectives.size(); ++c) {
      const auto &stats = outcome.collectives[c];
      if (stats.calls > 0) {
        std::cerr << msg::collective_name(static_cast<msg::Collective>(c)) << ": calls=" << stats.calls
                  << " phases=" << stats.phases << " messages=" << stats.messages << " bytes=" << stats.bytes
                  << " max_pe_messages=" << stats.max_pe_messages << '\n';
      }
    }
  }
  if (!outcome.feasible) {
    std::cerr << "partition is infeasible: " << outcome.failure << '\n';
  }
  return metrics.feasible ? 0 : kExitInfeasible;
}

int run_bench_command(const std::string &grid_path, const std::string &output, const bool timings) {
  const BenchGrid grid = load_grid(grid_path);
  std::size_t done = 0;
  const std::size_t total =
      grid.graphs.size() * grid.ks.size() * grid.pes.size() * grid.presets.size() * grid.seeds.size();
  const auto records = run_grid(grid, [&](const RunRecord &r) {
    std::cerr << '[' << ++done << '/' << total << "] " << r.graph << " k=" << r.k << " P=" << r.pes << ' '
              << r.preset << " seed=" << r.seed << " cut=" << r.cut << ' ' << r.status << '\n';
  });
  auto out = open_output(output);
  write_records(out, records, timings);
  const auto bad = std::count_if(records.begin(), records.end(), [](const RunRecord &r) { return r.status != "ok"; });
  std::cerr << records.size() << " runs, " << bad << " not ok\n";
  return bad == 0 ? 0 : kExitInfeasible;
}

int run_profile_command(const std::string &input, const std::string &output) {
  std::ifstream in(input);
  if (!in) {
    throw std::runtime_error("cannot open " + input);
  }
  const auto records = read_records(in);
  const auto table = performance_profile(records);
  for (const auto &warning : table.warnings) {
    std::cerr << "warning: " << warning << '\n';
  }
  auto out = open_output(output);
  write_profile(out, table);
  std::cout << "instances=" << table.instances << '\n';
  for (std::size_t a = 0; a < table.algorithms.size(); ++a) {
    std::cout << table.algorithms[a] << " geomean_cut=" << csv::fixed(table.geometric_means[a], 3) << '\n';
  }
  return 0;
}

int run_verify_command(const std::string &source, const std::string &partition, const BlockID k, const double eps) {
  const SeqGraph graph = load_graph(source);
  const auto blocks = read_partition(partition);
  const auto metrics = evaluate_partition(graph, blocks, k, eps);
  if (!metrics.error.empty()) {
    std::cerr << "invalid partition: " << metrics.error << '\n';
    return kExitInfeasible;
  }
  print_metrics(metrics, k);
  return metrics.feasible ? 0 : kExitInfeasible;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Distributed deep multilevel graph partitioning on logical PEs"};
  app.require_subcommand(1);

  std::string graph;
  std::string output;
  BlockID k = 2;
  double eps = 0.03;
  int pes = 1;
  std::string preset = "fast";
  std::uint64_t seed = 1;
  std::string alltoall = "grid";
  auto *partition = app.add_subcommand("partition", "partition a METIS graph or a generated one");
  partition->add_option("graph", graph, "METIS file or gen:rgg2d:n=..,deg=..,seed=.. / gen:plaw:n=..,deg=..,gamma=..,seed=..")
      ->required();
  partition->add_option("-k", k, "number of blocks")->required()->check(CLI::PositiveNumber);
  partition->add_option("--epsilon", eps, "allowed imbalance")->check(CLI::NonNegativeNumber);
  partition->add_option("-P", pes, "number of logical PEs (power of two)")->check(CLI::PositiveNumber);
  partition->add_option("--preset", preset, "fast or strong")->check(CLI::IsMember({"fast", "strong"}));
  partition->add_option("--seed", seed, "random seed");
  partition->add_option("--alltoall", alltoall, "sparse all-to-all routing")->check(CLI::IsMember({"grid", "direct"}));
  partition->add_option("-o", output, "output partition file")->required();
  bool trace = false;
  partition->add_flag("--trace", trace, "print message counters per collective");

  std::string grid;
  bool timings = false;
  auto *bench = app.add_subcommand("bench", "run a benchmark grid");
  bench->add_option("--grid", grid, "grid description (TOML)")->required()->check(CLI::ExistingFile);
  bench->add_option("-o", output, "results CSV")->required();
  bench->add_flag("--timings", timings, "append wall and phase times (output no longer byte-stable)");

  std::string results;
  auto *profile = app.add_subcommand("profile", "performance profile of benchmark results");
  profile->add_option("results", results, "results CSV")->required()->check(CLI::ExistingFile);
  profile->add_option("-o", output, "profile CSV")->required();

  std::string partition_file;
  auto *verify = app.add_subcommand("verify", "check a partition; exit code 0 iff feasible");
  verify->add_option("graph", graph, "METIS file or gen: spec")->required();
  verify->add_option("partition", partition_file, "partition file")->required()->check(CLI::ExistingFile);
  verify->add_option("-k", k, "number of blocks")->required()->check(CLI::PositiveNumber);
  verify->add_option("--epsilon", eps, "allowed imbalance")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &error) {
    return app.exit(error) == 0 ? 0 : kExitError;
  }

  try {
    if (*partition) {
      const PartitionRequest request{
          .k = k,
          .eps = eps,
          .pes = pes,
          .preset = parse_preset(preset),
          .seed = seed,
          .mode = alltoall == "grid" ? msg::AllToAllMode::kGrid : msg::AllToAllMode::kDirect,
      };
      return run_partition_command(graph, request, output, trace);
    }
    if (*bench) {
      return run_bench_command(grid, output, timings);
    }
    if (*profile) {
      return run_profile_command(results, output);
    }
    return run_verify_command(graph, partition_file, k, eps);
  } catch (const std::exception &error) {
    std::cerr << "error: " << error.what() << '\n';
    return kExitError;
  }
}
