/*******************************************************************************
 * Performance profiles over run records.
 *
 * An instance is a (graph, k) pair, an algorithm a (preset, P) pair. The
 * quality of an algorithm on an instance is its mean cut over seeds. For each
 * tau the profile reports the fraction of instances on which the algorithm is
 * within a factor tau of the best algorithm. Comparisons are exact.
 *
 * @file:   profile.hpp
 ******************************************************************************/
#pragma once

#include <cmath>
#include <map>

#include "dkmp/bench.hpp"

namespace dkmp {

/// tau values in hundredths.
inline std::vector<std::int64_t> default_tau_grid() {
  std::vector<std::int64_t> taus;
  for (std::int64_t t = 100; t < 110; ++t) {
    taus.push_back(t);
  }
  for (std::int64_t t = 110; t <= 200; t += 5) {
    taus.push_back(t);
  }
  for (const std::int64_t t : {250, 300, 400, 500, 1000}) {
    taus.push_back(t);
  }
  return taus;
}

struct ProfileTable {
  std::vector<std::string> algorithms;
  std::vector<std::int64_t> taus;
  /// fractions[t][a]
  std::vector<std::vector<double>> fractions;
  /// Geometric mean of max(quality, 1) per algorithm over the kept instances.
  std::vector<double> geometric_means;
  std::size_t instances = 0;
  std::vector<std::string> warnings;
};

inline std::string algorithm_name(const RunRecord &record) {
  return record.preset + "/P" + std::to_string(record.pes);
}

/// Cells with an infeasible or failed run count as missing; instances with a
/// missing cell are dropped with a warning.
inline ProfileTable performance_profile(std::span<const RunRecord> records, std::vector<std::int64_t> taus = default_tau_grid()) {
  struct Cell {
    __int128 sum = 0;
    std::int64_t count = 0;
    bool failed = false;
  };
  using Instance = std::pair<std::string, BlockID>;
  std::map<Instance, std::map<std::string, Cell>> cells;
  std::set<std::string> algorithm_set;
  for (const auto &r : records) {
    auto &cell = cells[{r.graph, r.k}][algorithm_name(r)];
    algorithm_set.insert(algorithm_name(r));
    if (r.status != "ok" || !r.feasible) {
      cell.failed = true;
      continue;
    }
    cell.sum += r.cut;
    ++cell.count;
  }

  ProfileTable table;
  table.algorithms.assign(algorithm_set.begin(), algorithm_set.end());
  table.taus = std::move(taus);
  const std::size_t num_algorithms = table.algorithms.size();
  table.fractions.assign(table.taus.size(), std::vector<double>(num_algorithms, 0.0));
  std::vector<double> log_sums(num_algorithms, 0.0);
  std::vector<std::vector<std::size_t>> within(table.taus.size(), std::vector<std::size_t>(num_algorithms, 0));

  for (const auto &[instance, by_algorithm] : cells) {
    std::vector<const Cell *> row;
    std::string missing;
    for (const auto &name : table.algorithms) {
      const auto it = by_algorithm.find(name);
      if (it == by_algorithm.end() || it->second.failed || it->second.count == 0) {
        missing = name;
        break;
      }
      row.push_back(&it->second);
    }
    if (!missing.empty()) {
      table.warnings.push_back(
          "dropping instance " + instance.first + " k=" + std::to_string(instance.second) + ": no valid result for " + missing
      );
      continue;
    }
    ++table.instances;

    // Mean cuts are sum / count; compare a / b <= c / d as a * d <= c * b.
    const Cell *best = row.front();
    for (const Cell *cell : row) {
      if (cell->sum * best->count < best->sum * cell->count) {
        best = cell;
      }
    }
    for (std::size_t a = 0; a < num_algorithms; ++a) {
      const Cell &cell = *row[a];
      for (std::size_t t = 0; t < table.taus.size(); ++t) {
        if (cell.sum * best->count * 100 <= static_cast<__int128>(table.taus[t]) * best->sum * cell.count) {
          ++within[t][a];
        }
      }
      const double mean = static_cast<double>(cell.sum) / static_cast<double>(cell.count);
      log_sums[a] += std::log(std::max(mean, 1.0));
    }
  }

  table.geometric_means.assign(num_algorithms, 0.0);
  for (std::size_t a = 0; a < num_algorithms; ++a) {
    for (std::size_t t = 0; t < table.taus.size(); ++t) {
      table.fractions[t][a] =
          table.instances == 0 ? 0.0 : static_cast<double>(within[t][a]) / static_cast<double>(table.instances);
    }
    table.geometric_means[a] = table.instances == 0 ? 0.0 : std::exp(log_sums[a] / static_cast<double>(table.instances));
  }
  return table;
}

inline void write_profile(std::ostream &out, const ProfileTable &table) {
  out << "tau";
  for (const auto &name : table.algorithms) {
    out << ',' << csv::escape(name);
  }
  out << '\n';
  for (std::size_t t = 0; t < table.taus.size(); ++t) {
    out << csv::fixed(static_cast<double>(table.taus[t]) / 100.0, 2);
    for (const double fraction : table.fractions[t]) {
      out << ',' << csv::fixed(fraction, 6);
    }
    out << '\n';
  }
}

} // namespace dkmp
