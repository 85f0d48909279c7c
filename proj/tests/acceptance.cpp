// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "dkmp/bench.hpp"
#include "test_graphs.hpp"

namespace {

using namespace dkmp;
namespace fs = std::filesystem;

constexpr double kEps = 0.03;

struct Verdict {
  bool pass = false;
  std::string detail;
};

fs::path scratch_dir() {
  static const fs::path dir = [] {
    auto path = fs::temp_directory_path() / "dkmp_acceptance";
    fs::remove_all(path);
    fs::create_directories(path);
    return path;
  }();
  return dir;
}

double seconds_since(const std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fixed(const double value, const int digits = 4) {
  return csv::fixed(value, digits);
}

//
// Corpus runs shared by the feasibility, P-invariance and preset checks.
//

struct CorpusGraph {
  std::string name;
  SeqGraph graph;
};

std::vector<CorpusGraph> corpus() {
  std::vector<CorpusGraph> graphs;
  for (const std::string spec : {
           "gen:rgg2d:n=4096,deg=8,seed=1",
           "gen:rgg2d:n=4096,deg=32,seed=1",
           "gen:rgg2d:n=32768,deg=8,seed=1",
           "gen:rgg2d:n=32768,deg=32,seed=1",
           "gen:plaw:n=32768,deg=8,gamma=3,seed=1",
       }) {
    graphs.push_back({spec, generate(spec)});
  }
  for (const std::string file : {"karate.metis", "lesmis.metis", "davis.metis"}) {
    graphs.push_back({file, load_metis(std::string(DKMP_DATA_DIR) + "/" + file)});
  }
  return graphs;
}

const std::vector<BlockID> kCorpusKs{2, 4, 8, 16, 32, 64, 128};
const std::vector<int> kCorpusPEs{1, 2, 4, 8, 16};
const std::vector<std::uint64_t> kCorpusSeeds{1, 2, 3, 4, 5};

struct CorpusResults {
  std::vector<RunRecord> fast;
  std::vector<RunRecord> strong;
  bool ran = false;
};

CorpusResults &corpus_results() {
  static CorpusResults results;
  if (results.ran) {
    return results;
  }
  results.ran = true;
  const auto start = std::chrono::steady_clock::now();
  const auto graphs = corpus();
  const fs::path file = scratch_dir() / "corpus.part";
  std::size_t done = 0;
  const std::size_t total = graphs.size() * kCorpusKs.size() * kCorpusPEs.size() * kCorpusSeeds.size() * 2;
  for (const Preset preset : {Preset::kFast, Preset::kStrong}) {
    auto &out = preset == Preset::kFast ? results.fast : results.strong;
    for (const auto &[name, graph] : graphs) {
      for (const BlockID k : kCorpusKs) {
        for (const int pes : kCorpusPEs) {
          for (const std::uint64_t seed : kCorpusSeeds) {
            const PartitionRequest request{.k = k, .eps = kEps, .pes = pes, .preset = preset, .seed = seed};
            out.push_back(bench_run(graph, name, request, file));
            if (++done % 100 == 0) {
              std::cerr << "  corpus runs " << done << '/' << total << " (" << fixed(seconds_since(start), 1) << "s)\n";
            }
          }
        }
      }
    }
  }
  return results;
}

/// Geometric mean of max(cut, 1) over the records selected by `keep`.
template <typename Keep> double geometric_mean_cut(const std::vector<RunRecord> &records, Keep &&keep) {
  double log_sum = 0.0;
  std::size_t count = 0;
  for (const auto &r : records) {
    if (keep(r)) {
      log_sum += std::log(std::max<double>(static_cast<double>(r.cut), 1.0));
      ++count;
    }
  }
  return count == 0 ? 0.0 : std::exp(log_sum / static_cast<double>(count));
}

Verdict check_feasibility() {
  const auto &results = corpus_results();
  std::size_t total = 0;
  std::size_t feasible = 0;
  std::string first_failure;
  for (const auto *records : {&results.fast, &results.strong}) {
    for (const auto &r : *records) {
      ++total;
      if (r.status == "ok" && r.feasible) {
        ++feasible;
      } else if (first_failure.empty()) {
        first_failure = "; first failure: " + r.graph + " k=" + std::to_string(r.k) + " P=" + std::to_string(r.pes) +
                        " " + r.preset + " seed=" + std::to_string(r.seed) + " " + r.status;
      }
    }
  }
  return {feasible == total, std::to_string(feasible) + "/" + std::to_string(total) + " runs verified feasible" + first_failure};
}

Verdict check_p_invariance() {
  const auto &fast = corpus_results().fast;
  const double base = geometric_mean_cut(fast, [](const RunRecord &r) { return r.pes == 1; });
  bool pass = true;
  std::string detail = "fast preset geometric-mean cut P1=" + fixed(base, 2);
  for (const int pes : kCorpusPEs) {
    if (pes == 1) {
      continue;
    }
    const double mean = geometric_mean_cut(fast, [&](const RunRecord &r) { return r.pes == pes; });
    const double ratio = mean / base;
    pass = pass && std::abs(ratio - 1.0) <= 0.10;
    detail += " P" + std::to_string(pes) + "=" + fixed(mean, 2) + " (x" + fixed(ratio, 3) + ")";
  }
  return {pass, detail};
}

Verdict check_preset_order() {
  const auto &results = corpus_results();
  const auto all = [](const RunRecord &) { return true; };
  const double fast = geometric_mean_cut(results.fast, all);
  const double strong = geometric_mean_cut(results.strong, all);
  return {strong <= fast, "geometric-mean cut strong=" + fixed(strong, 2) + " fast=" + fixed(fast, 2)};
}

//
// Large k on a larger geometric graph.
//

Verdict check_large_k() {
  const std::string name = "gen:rgg2d:n=262144,deg=8,seed=1";
  const SeqGraph graph = generate(name);
  const fs::path file = scratch_dir() / "large_k.part";
  std::size_t total = 0;
  std::size_t good = 0;
  std::string failures;
  for (const BlockID k : {1024u, 4096u}) {
    for (const int pes : {4, 16}) {
      for (const std::uint64_t seed : {1u, 2u, 3u}) {
        const auto start = std::chrono::steady_clock::now();
        const auto r = bench_run(graph, name, {.k = k, .eps = kEps, .pes = pes, .seed = seed}, file);
        std::cerr << "  k=" << k << " P=" << pes << " seed=" << seed << " cut=" << r.cut << " nonempty=" << r.nonempty_blocks
                  << ' ' << r.status << " (" << fixed(seconds_since(start), 1) << "s)\n";
        ++total;
        if (r.status == "ok" && r.feasible && r.nonempty_blocks == k) {
          ++good;
        } else {
          failures += " [k=" + std::to_string(k) + " P=" + std::to_string(pes) + " seed=" + std::to_string(seed) +
                      " nonempty=" + std::to_string(r.nonempty_blocks) + " " + r.status + "]";
        }
      }
    }
  }
  return {good == total, std::to_string(good) + "/" + std::to_string(total) + " runs feasible with exactly k nonempty blocks" + failures};
}

//
// Exhaustive oracle on tiny graphs.
//

Verdict check_oracle() {
  std::mt19937_64 rng(20240601);
  std::vector<double> ratios;
  std::size_t below_oracle = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<LocalID>(4 + trial % 7);
    const SeqGraph graph = testing::random_connected_graph(n, 0.3, rng);
    const Weight bound = l_max(graph.total_weight(), 2, kEps, graph.max_vertex_weight());
    const Weight optimum = testing::brute_force_bisection_cut(graph, bound);
    const auto outcome = run_partition(graph, {.k = 2, .eps = kEps, .pes = 1, .seed = static_cast<std::uint64_t>(trial + 1)});
    const auto metrics = evaluate_partition(graph, outcome.blocks, 2, kEps);
    if (!metrics.error.empty() || !metrics.feasible || metrics.cut < optimum) {
      ++below_oracle;
    }
    ratios.push_back(static_cast<double>(metrics.cut) / static_cast<double>(optimum));
  }
  std::sort(ratios.begin(), ratios.end());
  const double median = (ratios[49] + ratios[50]) / 2.0;
  return {
      below_oracle == 0 && median <= 1.5,
      "100 graphs, " + std::to_string(below_oracle) + " infeasible or below the optimum, median ratio " + fixed(median, 3) +
          ", worst ratio " + fixed(ratios.back(), 3)
  };
}

//
// Module property suites plus repeat-run determinism.
//

bool run_suite(const std::string &binary, const std::string &filter) {
  const std::string command = binary + " --gtest_brief=1 --gtest_filter='" + filter + "' > /dev/null 2>&1";
  return std::system(command.c_str()) == 0;
}

std::string file_bytes(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

Verdict check_invariants() {
  const std::vector<std::tuple<std::string, std::string, std::string>> suites{
      {"projection", DKMP_CONTRACTION_TEST, "ProjectTest.*:ContractTest.*"},
      {"cluster-weights", DKMP_LP_CLUSTERING_TEST, "ClusterTest.TrackedWeightsAreExactAndBounded"},
      {"grid-vs-direct", DKMP_MSG_KERNEL_TEST, "SparseAllToAllTest.*"},
      {"refinement-monotone", DKMP_LP_REFINEMENT_TEST, "RefineTest.SinglePECutNeverIncreases"},
      {"balancer", DKMP_BALANCER_TEST, "BalancerTest.*"},
  };
  bool pass = true;
  std::string detail;
  for (const auto &[label, binary, filter] : suites) {
    const bool ok = run_suite(binary, filter);
    pass = pass && ok;
    detail += label + (ok ? "=ok " : "=FAILED ");
  }

  std::mt19937_64 rng(77);
  std::size_t identical = 0;
  for (int config = 0; config < 20; ++config) {
    const bool geometric = rng() % 2 == 0;
    const auto n = 500 + rng() % 4000;
    const std::string spec = geometric ? "gen:rgg2d:n=" + std::to_string(n) + ",deg=8,seed=" + std::to_string(config)
                                       : "gen:plaw:n=" + std::to_string(n) + ",deg=6,gamma=3,seed=" + std::to_string(config);
    const SeqGraph graph = generate(spec);
    const PartitionRequest request{
        .k = BlockID{1} << (1 + rng() % 6),
        .eps = kEps,
        .pes = 1 << (rng() % 4),
        .preset = rng() % 2 == 0 ? Preset::kFast : Preset::kStrong,
        .seed = rng() % 1000,
    };
    const fs::path first = scratch_dir() / "repeat_a.part";
    const fs::path second = scratch_dir() / "repeat_b.part";
    write_partition(run_partition(graph, request).blocks, first.string());
    write_partition(run_partition(graph, request).blocks, second.string());
    identical += file_bytes(first) == file_bytes(second) ? 1 : 0;
  }
  pass = pass && identical == 20;
  detail += "determinism=" + std::to_string(identical) + "/20";
  return {pass, detail};
}

//
// Message counters of grid and direct sparse all-to-all.
//

Verdict check_scaling() {
  const SeqGraph graph = generate("gen:rgg2d:n=262144,deg=8,seed=1");
  constexpr auto kGrid = static_cast<std::size_t>(msg::Collective::kSparseGrid);
  constexpr auto kDirect = static_cast<std::size_t>(msg::Collective::kSparseDirect);
  double ratio_at_64 = 0.0;
  std::string detail;
  for (const int pes : {4, 16, 64}) {
    double per_call[2] = {};
    std::uint64_t max_pe[2] = {};
    double wall[2] = {};
    for (const auto mode : {msg::AllToAllMode::kGrid, msg::AllToAllMode::kDirect}) {
      const int i = mode == msg::AllToAllMode::kGrid ? 0 : 1;
      const auto outcome = run_partition(graph, {.k = 16, .eps = kEps, .pes = pes, .seed = 1, .mode = mode});
      const auto &stats = outcome.collectives[i == 0 ? kGrid : kDirect];
      per_call[i] = stats.calls == 0 ? 0.0 : static_cast<double>(stats.messages) / static_cast<double>(stats.calls);
      max_pe[i] = stats.max_pe_messages;
      wall[i] = outcome.wall_seconds;
    }
    const double ratio = per_call[0] == 0.0 ? 0.0 : per_call[1] / per_call[0];
    if (pes == 64) {
      ratio_at_64 = ratio;
    }
    detail += "P" + std::to_string(pes) + ": messages/exchange grid=" + fixed(per_call[0], 1) + " direct=" +
              fixed(per_call[1], 1) + " (x" + fixed(ratio, 2) + "), max per PE and phase " + std::to_string(max_pe[0]) +
              " vs " + std::to_string(max_pe[1]) + ", wall " + fixed(wall[0], 1) + "s/" + fixed(wall[1], 1) + "s; ";
  }
  return {ratio_at_64 >= 2.0, detail};
}

} // namespace

int main(int argc, char **argv) {
  const std::vector<std::pair<std::string, Verdict (*)()>> criteria{
      {"feasibility on the small corpus", check_feasibility},
      {"large-k feasibility", check_large_k},
      {"quality against the exhaustive oracle", check_oracle},
      {"cut is invariant in the number of PEs", check_p_invariance},
      {"strong preset cuts no more than fast", check_preset_order},
      {"module invariant suites", check_invariants},
      {"grid all-to-all message reduction", check_scaling},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    selected.insert(std::atoi(argv[i]));
  }

  bool all_pass = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(number)) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Verdict verdict;
    try {
      verdict = criteria[i].second();
    } catch (const std::exception &error) {
      verdict = {false, std::string("exception: ") + error.what()};
    }
    all_pass = all_pass && verdict.pass;
    std::cout << "criterion " << number << " (" << criteria[i].first << "): " << (verdict.pass ? "PASS" : "FAIL") << " - "
              << verdict.detail << " [" << fixed(seconds_since(start), 1) << "s]" << std::endl;
  }
  return all_pass ? 0 : 1;
}
