/*******************************************************************************
 * Partitioning runs on logical PEs and the benchmark harness around them:
 * run records, their CSV form and grids described in TOML.
 *
 * @file:   bench.hpp
 ******************************************************************************/
#pragma once

#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <toml.hpp>

#include "dkmp/deep_driver.hpp"
#include "dkmp/generators.hpp"
#include "dkmp/metis_io.hpp"
#include "dkmp/metrics.hpp"
#include "dkmp/msg/spmd.hpp"

namespace dkmp {

inline Preset parse_preset(const std::string_view name) {
  if (name == "fast") {
    return Preset::kFast;
  }
  if (name == "strong") {
    return Preset::kStrong;
  }
  throw ContractViolation("unknown preset '" + std::string(name) + "', expected fast or strong");
}

inline const char *preset_name(const Preset preset) {
  return preset == Preset::kFast ? "fast" : "strong";
}

/// A METIS file path or a gen: spec.
inline SeqGraph load_graph(const std::string &source) {
  return is_generator_spec(source) ? generate(source) : load_metis(source);
}

struct PartitionRequest {
  BlockID k = 2;
  double eps = 0.03;
  int pes = 1;
  Preset preset = Preset::kFast;
  std::uint64_t seed = 1;
  msg::AllToAllMode mode = msg::AllToAllMode::kGrid;
};

struct PartitionOutcome {
  std::vector<BlockID> blocks;
  bool feasible = false;
  std::string failure;
  DeepStats stats;
  double wall_seconds = 0.0;
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;
  std::array<msg::CollectiveStats, static_cast<std::size_t>(msg::Collective::kCount)> collectives{};
};

inline DeepConfig make_config(const PartitionRequest &request) {
  DeepConfig config = DeepConfig::preset(request.preset);
  config.k = request.k;
  config.eps = request.eps;
  config.seed = request.seed;
  return config;
}

/// Distributes `graph` over request.pes logical PEs and partitions it.
inline PartitionOutcome run_partition(const SeqGraph &graph, const PartitionRequest &request) {
  expects(request.pes >= 1 && std::has_single_bit(static_cast<unsigned>(request.pes)), "number of PEs must be a power of two");
  const DeepConfig config = make_config(request);
  const auto parts = distribute(graph, request.pes);

  msg::SpmdOptions options;
  options.mode = request.mode;
  const auto start = std::chrono::steady_clock::now();
  auto results = msg::run_spmd(
      request.pes,
      [&](msg::PEGroup &group) {
        const auto &local = parts[group.rank()];
        DeepResult result = deep_partition(local, group, config);
        PartitionOutcome outcome;
        outcome.blocks = msg::allgatherv<BlockID>(group, std::span(result.partition.blocks).first(local.n_owned()));
        outcome.feasible = result.feasible;
        outcome.failure = std::move(result.failure);
        outcome.stats = std::move(result.stats);
        return outcome;
      },
      options
  );
  PartitionOutcome outcome = std::move(results[0]);
  outcome.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (std::size_t c = 0; c < static_cast<std::size_t>(msg::Collective::kCount); ++c) {
    const auto stats = options.world->trace.stats(static_cast<msg::Collective>(c));
    outcome.collectives[c] = stats;
    outcome.messages += stats.messages;
    outcome.bytes += stats.bytes;
  }
  return outcome;
}

//
// Run records
//

struct RunRecord {
  std::string graph;
  std::uint64_t n = 0;
  std::uint64_t m = 0;
  BlockID k = 0;
  int pes = 1;
  std::uint64_t seed = 0;
  std::string preset;
  Weight cut = 0;
  double imbalance = 0.0;
  bool feasible = false;
  BlockID nonempty_blocks = 0;
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;
  std::string status;
  double wall_seconds = 0.0;
  double coarsening_seconds = 0.0;
  double extension_seconds = 0.0;
  double refinement_seconds = 0.0;
};

namespace csv {

inline std::string escape(const std::string &field) {
  if (field.find_first_of(",\"\n") == std::string::npos) {
    return field;
  }
  std::string quoted = "\"";
  for (const char c : field) {
    quoted += c;
    if (c == '"') {
      quoted += '"';
    }
  }
  return quoted + "\"";
}

inline std::vector<std::string> split_line(const std::string &line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  expects(!quoted, "unterminated quote in CSV line");
  return fields;
}

inline std::string fixed(const double value, const int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << value;
  return out.str();
}

} // namespace csv

inline const std::vector<std::string> &record_columns() {
  static const std::vector<std::string> columns{
      "graph", "n", "m", "k", "P", "seed", "preset", "cut", "imbalance", "feasible", "nonempty", "messages", "bytes", "status"
  };
  return columns;
}

inline const std::vector<std::string> &timing_columns() {
  static const std::vector<std::string> columns{"wall_s", "coarsening_s", "extension_s", "refinement_s"};
  return columns;
}

/// Without timings the output depends only on the inputs and seeds.
inline void write_records(std::ostream &out, std::span<const RunRecord> records, const bool timings) {
  auto header = record_columns();
  if (timings) {
    header.insert(header.end(), timing_columns().begin(), timing_columns().end());
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    out << (i > 0 ? "," : "") << header[i];
  }
  out << '\n';
  for (const auto &r : records) {
    out << csv::escape(r.graph) << ',' << r.n << ',' << r.m << ',' << r.k << ',' << r.pes << ',' << r.seed << ','
        << csv::escape(r.preset) << ',' << r.cut << ',' << csv::fixed(r.imbalance, 6) << ',' << (r.feasible ? 1 : 0)
        << ',' << r.nonempty_blocks << ',' << r.messages << ',' << r.bytes << ',' << csv::escape(r.status);
    if (timings) {
      out << ',' << csv::fixed(r.wall_seconds, 4) << ',' << csv::fixed(r.coarsening_seconds, 4) << ','
          << csv::fixed(r.extension_seconds, 4) << ',' << csv::fixed(r.refinement_seconds, 4);
    }
    out << '\n';
  }
}

inline std::vector<RunRecord> read_records(std::istream &in) {
  std::string line;
  expects(static_cast<bool>(std::getline(in, line)), "results file is empty");
  const auto header = csv::split_line(line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    column[header[i]] = i;
  }
  for (const auto &name : record_columns()) {
    expects(column.contains(name), ("results file lacks column " + name).c_str());
  }

  std::vector<RunRecord> records;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") {
      continue;
    }
    const auto fields = csv::split_line(line);
    expects(fields.size() == header.size(), "results row has the wrong number of fields");
    auto get = [&](const std::string &name) -> const std::string & { return fields[column.at(name)]; };
    auto optional = [&](const std::string &name) {
      return column.contains(name) ? std::stod(get(name)) : 0.0;
    };
    RunRecord r;
    r.graph = get("graph");
    r.n = std::stoull(get("n"));
    r.m = std::stoull(get("m"));
    r.k = static_cast<BlockID>(std::stoul(get("k")));
    r.pes = std::stoi(get("P"));
    r.seed = std::stoull(get("seed"));
    r.preset = get("preset");
    r.cut = std::stoll(get("cut"));
    r.imbalance = std::stod(get("imbalance"));
    r.feasible = get("feasible") == "1";
    r.nonempty_blocks = static_cast<BlockID>(std::stoul(get("nonempty")));
    r.messages = std::stoull(get("messages"));
    r.bytes = std::stoull(get("bytes"));
    r.status = get("status");
    r.wall_seconds = optional("wall_s");
    r.coarsening_seconds = optional("coarsening_s");
    r.extension_seconds = optional("extension_s");
    r.refinement_seconds = optional("refinement_s");
    records.push_back(std::move(r));
  }
  return records;
}

//
// Benchmark grids
//

struct BenchGrid {
  /// Graph names as written in the grid file.
  std::vector<std::string> graphs;
  /// What load_graph() reads for each name.
  std::vector<std::string> sources;
  std::vector<BlockID> ks{2, 4, 8, 16, 32, 64, 128};
  std::vector<int> pes{1, 2, 4, 8, 16};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<Preset> presets{Preset::kFast};
  double eps = 0.03;
  /// Partition files go here; feasibility is recomputed from them.
  std::filesystem::path partition_dir;
};

/// Relative graph paths and the partition directory are taken relative to
/// the grid file.
inline BenchGrid parse_grid(const std::string &text, const std::filesystem::path &base_dir) {
  toml::table table;
  try {
    table = toml::parse(text);
  } catch (const toml::parse_error &error) {
    throw ContractViolation(std::string("invalid grid file: ") + std::string(error.description()));
  }

  auto list = [&]<typename T>(const char *key, std::vector<T> &out, auto convert) {
    const auto *node = table.get(key);
    if (node == nullptr) {
      return;
    }
    const auto *array = node->as_array();
    if (array == nullptr) {
      throw ContractViolation(std::string("grid key '") + key + "' must be an array");
    }
    out.clear();
    for (const auto &item : *array) {
      out.push_back(convert(item));
    }
  };
  auto integer = [](const char *key) {
    return [key](const toml::node &node) {
      const auto value = node.value<std::int64_t>();
      if (!value || *value < 0) {
        throw ContractViolation(std::string("grid key '") + key + "' needs non-negative integers");
      }
      return *value;
    };
  };
  auto string = [](const char *key) {
    return [key](const toml::node &node) {
      const auto value = node.value<std::string>();
      if (!value) {
        throw ContractViolation(std::string("grid key '") + key + "' needs strings");
      }
      return *value;
    };
  };

  for (const auto &[key, value] : table) {
    static const std::set<std::string_view> known{"graphs", "k", "pes", "seeds", "presets", "epsilon", "partitions"};
    if (!known.contains(key.str())) {
      throw ContractViolation("unknown grid key '" + std::string(key.str()) + "'");
    }
  }

  BenchGrid grid;
  list("graphs", grid.graphs, string("graphs"));
  for (const auto &name : grid.graphs) {
    const bool relative = !is_generator_spec(name) && std::filesystem::path(name).is_relative();
    grid.sources.push_back(relative ? (base_dir / name).lexically_normal().string() : name);
  }
  list("k", grid.ks, [&](const toml::node &node) { return static_cast<BlockID>(integer("k")(node)); });
  list("pes", grid.pes, [&](const toml::node &node) { return static_cast<int>(integer("pes")(node)); });
  list("seeds", grid.seeds, [&](const toml::node &node) { return static_cast<std::uint64_t>(integer("seeds")(node)); });
  list("presets", grid.presets, [&](const toml::node &node) { return parse_preset(string("presets")(node)); });
  if (const auto eps = table["epsilon"].value<double>()) {
    grid.eps = *eps;
  }
  grid.partition_dir = base_dir / table["partitions"].value_or(std::string("partitions"));
  expects(!grid.graphs.empty(), "grid lists no graphs");
  return grid;
}

inline BenchGrid load_grid(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open grid file " + path.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_grid(text.str(), path.parent_path());
}

/// One run: partition, write the partition file, read it back and evaluate
/// it against the graph.
inline RunRecord bench_run(
    const SeqGraph &graph,
    const std::string &name,
    const PartitionRequest &request,
    const std::filesystem::path &partition_file
) {
  RunRecord record;
  record.graph = name;
  record.n = graph.n();
  record.m = graph.m();
  record.k = request.k;
  record.pes = request.pes;
  record.seed = request.seed;
  record.preset = preset_name(request.preset);
  try {
    const auto outcome = run_partition(graph, request);
    write_partition(outcome.blocks, partition_file.string());
    const auto blocks = read_partition(partition_file.string());
    const auto metrics = evaluate_partition(graph, blocks, request.k, request.eps);
    record.cut = metrics.cut;
    record.imbalance = metrics.imbalance;
    record.feasible = metrics.error.empty() && metrics.feasible;
    record.nonempty_blocks = metrics.nonempty_blocks;
    record.messages = outcome.messages;
    record.bytes = outcome.bytes;
    record.status = !metrics.error.empty() ? "invalid: " + metrics.error : (record.feasible ? "ok" : "infeasible");
    record.wall_seconds = outcome.wall_seconds;
    record.coarsening_seconds = outcome.stats.coarsening_seconds;
    record.extension_seconds = outcome.stats.extension_seconds;
    record.refinement_seconds = outcome.stats.refinement_seconds;
  } catch (const std::exception &error) {
    record.status = std::string("error: ") + error.what();
  }
  return record;
}

/// Runs the whole grid in a fixed order: graph, k, P, preset, seed.
inline std::vector<RunRecord> run_grid(const BenchGrid &grid, const std::function<void(const RunRecord &)> &progress = {}) {
  std::filesystem::create_directories(grid.partition_dir);
  std::vector<RunRecord> records;
  for (std::size_t g = 0; g < grid.graphs.size(); ++g) {
    const SeqGraph graph = load_graph(grid.sources[g]);
    for (const BlockID k : grid.ks) {
      for (const int pes : grid.pes) {
        for (const Preset preset : grid.presets) {
          for (const std::uint64_t seed : grid.seeds) {
            const PartitionRequest request{.k = k, .eps = grid.eps, .pes = pes, .preset = preset, .seed = seed};
            const auto file = grid.partition_dir / ("g" + std::to_string(g) + "_k" + std::to_string(k) + "_p" +
                                                    std::to_string(pes) + "_" + preset_name(preset) + "_s" +
                                                    std::to_string(seed) + ".part");
            records.push_back(bench_run(graph, grid.graphs[g], request, file));
            if (progress) {
              progress(records.back());
            }
          }
        }
      }
    }
  }
  return records;
}

} // namespace dkmp
