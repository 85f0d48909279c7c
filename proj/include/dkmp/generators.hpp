/*******************************************************************************
 * Synthetic graph generators: 2D random geometric graphs and Chung-Lu graphs
 * with power-law expected degrees, plus the `gen:` spec syntax of the CLI.
 *
 * @file:   generators.hpp
 ******************************************************************************/
#pragma once

#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <string_view>

#include "dkmp/random.hpp"
#include "dkmp/seq_graph.hpp"

namespace dkmp {

/// n uniform points in the unit square, connected if closer than
/// r = sqrt(deg / (pi * (n - 1))). Vertices keep generation order.
inline SeqGraph gen_rgg2d(const LocalID n, const double avg_degree, const std::uint64_t seed) {
  expects(n >= 2, "random geometric graph needs at least two vertices");
  expects(avg_degree >= 0.0, "average degree must be non-negative");
  Random rng(seed);
  std::vector<double> x(n);
  std::vector<double> y(n);
  for (LocalID u = 0; u < n; ++u) {
    x[u] = rng.real();
    y[u] = rng.real();
  }
  const double r = std::sqrt(avg_degree / (std::numbers::pi * static_cast<double>(n - 1)));
  if (r == 0.0) {
    return SeqGraph::from_edges(n, std::span<const WeightedEdge>{});
  }

  const auto cells = static_cast<LocalID>(std::clamp(std::floor(1.0 / r), 1.0, std::sqrt(static_cast<double>(n)) + 1.0));
  auto cell_of = [&](const double coordinate) {
    return std::min(cells - 1, static_cast<LocalID>(coordinate * cells));
  };
  std::vector<std::uint64_t> start(static_cast<std::size_t>(cells) * cells + 1, 0);
  std::vector<std::size_t> cell(n);
  for (LocalID u = 0; u < n; ++u) {
    cell[u] = static_cast<std::size_t>(cell_of(y[u])) * cells + cell_of(x[u]);
    ++start[cell[u] + 1];
  }
  std::partial_sum(start.begin(), start.end(), start.begin());
  std::vector<LocalID> members(n);
  {
    std::vector<std::uint64_t> pos(start.begin(), start.end() - 1);
    for (LocalID u = 0; u < n; ++u) {
      members[pos[cell[u]]++] = u;
    }
  }

  const double r2 = r * r;
  std::vector<WeightedEdge> edges;
  for (LocalID u = 0; u < n; ++u) {
    const auto cx = static_cast<std::int64_t>(cell[u] % cells);
    const auto cy = static_cast<std::int64_t>(cell[u] / cells);
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const std::int64_t nx = cx + dx;
        const std::int64_t ny = cy + dy;
        if (nx < 0 || ny < 0 || nx >= cells || ny >= cells) {
          continue;
        }
        const auto c = static_cast<std::size_t>(ny) * cells + static_cast<std::size_t>(nx);
        for (auto i = start[c]; i < start[c + 1]; ++i) {
          const LocalID v = members[i];
          if (v <= u) {
            continue;
          }
          const double ddx = x[u] - x[v];
          const double ddy = y[u] - y[v];
          if (ddx * ddx + ddy * ddy <= r2) {
            edges.push_back({u, v, 1});
          }
        }
      }
    }
  }
  return SeqGraph::from_edges(n, edges);
}

/// Chung-Lu graph with expected degrees w_i proportional to
/// (i + i0)^(-1 / (gamma - 1)), scaled to the requested average degree. The
/// offset i0 caps the largest expected degree at sqrt(sum w) so that edge
/// probabilities stay below one. Sampled with geometric skipping over the
/// sorted weights; no self-loops, no multi-edges.
inline SeqGraph gen_powerlaw(const LocalID n, const double avg_degree, const double gamma, const std::uint64_t seed) {
  expects(gamma > 2.0, "power-law exponent must exceed 2");
  expects(avg_degree >= 0.0, "average degree must be non-negative");
  if (n == 0 || avg_degree == 0.0) {
    return SeqGraph::from_edges(n, std::span<const WeightedEdge>{});
  }

  const double exponent = -1.0 / (gamma - 1.0);
  const double target_sum = avg_degree * static_cast<double>(n);
  // w_0 / w_avg grows like n^(1 / (gamma - 1)); choose i0 so that
  // w_0 = sqrt(target_sum).
  auto weights_for = [&](const double offset) {
    std::vector<double> w(n);
    double sum = 0.0;
    for (LocalID i = 0; i < n; ++i) {
      w[i] = std::pow(static_cast<double>(i) + offset, exponent);
      sum += w[i];
    }
    for (double &value : w) {
      value *= target_sum / sum;
    }
    return w;
  };
  double lo = 1.0;
  double hi = static_cast<double>(n) + 1.0;
  for (int step = 0; step < 60; ++step) {
    const double mid = std::sqrt(lo * hi);
    if (weights_for(mid)[0] > std::sqrt(target_sum)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const auto w = weights_for(hi);

  Random rng(seed);
  std::vector<WeightedEdge> edges;
  for (LocalID u = 0; u + 1 < n; ++u) {
    LocalID v = u + 1;
    double p = std::min(w[u] * w[v] / target_sum, 1.0);
    while (v < n && p > 0.0) {
      if (p < 1.0) {
        const double skip = std::floor(std::log(1.0 - rng.real()) / std::log(1.0 - p));
        if (skip >= static_cast<double>(n - v)) {
          break;
        }
        v += static_cast<LocalID>(skip);
      }
      const double q = std::min(w[u] * w[v] / target_sum, 1.0);
      if (rng.real() < q / p) {
        edges.push_back({u, v, 1});
      }
      p = q;
      ++v;
    }
  }
  return SeqGraph::from_edges(n, edges);
}

/// Tail exponent of the degree distribution, 1 + alpha, where alpha is the
/// Hill estimate over the largest `fraction` of the degrees.
inline double hill_tail_exponent(const SeqGraph &graph, const double fraction) {
  std::vector<double> degrees;
  for (LocalID u = 0; u < graph.n(); ++u) {
    if (graph.degree(u) > 0) {
      degrees.push_back(graph.degree(u));
    }
  }
  std::sort(degrees.begin(), degrees.end(), std::greater<>());
  const auto top = static_cast<std::size_t>(std::max(2.0, fraction * static_cast<double>(degrees.size())));
  expects(top < degrees.size(), "not enough vertices for the tail estimate");
  double sum = 0.0;
  for (std::size_t i = 0; i < top; ++i) {
    sum += std::log(degrees[i] / degrees[top]);
  }
  return 1.0 + static_cast<double>(top) / sum;
}

//
// gen:<kind>:key=value,... specs
//

struct GeneratorSpec {
  std::string kind;
  std::map<std::string, std::string, std::less<>> params;

  template <typename T> [[nodiscard]] T value(const std::string_view key, const T fallback) const {
    const auto it = params.find(key);
    if (it == params.end()) {
      return fallback;
    }
    T result{};
    const auto &text = it->second;
    const auto [end, error] = std::from_chars(text.data(), text.data() + text.size(), result);
    if (error != std::errc() || end != text.data() + text.size()) {
      throw ContractViolation("invalid value for '" + std::string(key) + "': " + text);
    }
    return result;
  }
};

inline bool is_generator_spec(const std::string_view text) {
  return text.starts_with("gen:");
}

inline GeneratorSpec parse_generator_spec(const std::string_view text) {
  expects(is_generator_spec(text), "generator spec must start with 'gen:'");
  const std::string_view rest = text.substr(4);
  const auto colon = rest.find(':');
  GeneratorSpec spec;
  spec.kind = std::string(rest.substr(0, colon));
  if (colon == std::string_view::npos) {
    return spec;
  }
  std::string_view list = rest.substr(colon + 1);
  while (!list.empty()) {
    const auto comma = list.find(',');
    const std::string_view item = list.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ContractViolation("expected key=value in generator spec: " + std::string(item));
    }
    spec.params.emplace(std::string(item.substr(0, eq)), std::string(item.substr(eq + 1)));
    list = comma == std::string_view::npos ? std::string_view{} : list.substr(comma + 1);
  }
  return spec;
}

inline SeqGraph generate(const GeneratorSpec &spec) {
  static const std::map<std::string, std::vector<std::string>, std::less<>> known{
      {"rgg2d", {"n", "deg", "seed"}},
      {"plaw", {"n", "deg", "gamma", "seed"}},
  };
  const auto kind = known.find(spec.kind);
  if (kind == known.end()) {
    throw ContractViolation("unknown generator: " + spec.kind);
  }
  for (const auto &[key, value] : spec.params) {
    if (std::find(kind->second.begin(), kind->second.end(), key) == kind->second.end()) {
      throw ContractViolation("unknown parameter '" + key + "' for generator " + spec.kind);
    }
  }
  const auto n = spec.value<std::uint64_t>("n", 0);
  expects(n >= 1 && n < kInvalidLocalID, "generator needs a vertex count n");
  const auto degree = spec.value<double>("deg", 8.0);
  const auto seed = spec.value<std::uint64_t>("seed", 1);
  if (spec.kind == "rgg2d") {
    return gen_rgg2d(static_cast<LocalID>(n), degree, seed);
  }
  return gen_powerlaw(static_cast<LocalID>(n), degree, spec.value<double>("gamma", 3.0), seed);
}

inline SeqGraph generate(const std::string_view text) {
  return generate(parse_generator_spec(text));
}

} // namespace dkmp
