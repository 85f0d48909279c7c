/*******************************************************************************
 * METIS graph format reader / writer and partition file I/O.
 *
 * @file:   metis_io.hpp
 ******************************************************************************/
#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dkmp/seq_graph.hpp"

namespace dkmp {

namespace detail {
class TokenReader {
public:
  TokenReader(std::string_view line, const std::size_t line_no) : _line(line), _line_no(line_no) {}

  bool next(std::int64_t &value) {
    while (_pos < _line.size() && is_space(_line[_pos])) {
      ++_pos;
    }
    if (_pos == _line.size()) {
      return false;
    }
    const char *begin = _line.data() + _pos;
    const char *end = _line.data() + _line.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || (ptr != end && !is_space(*ptr))) {
      throw ParseError("expected an integer", _line_no);
    }
    _pos = static_cast<std::size_t>(ptr - _line.data());
    return true;
  }

private:
  static bool is_space(const char c) {
    return c == ' ' || c == '\t' || c == '\r';
  }

  std::string_view _line;
  std::size_t _line_no;
  std::size_t _pos = 0;
};

inline bool next_content_line(std::istream &in, std::string &line, std::size_t &line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line[0] == '%') {
      continue;
    }
    return true;
  }
  return false;
}
} // namespace detail

inline SeqGraph read_metis(std::istream &in) {
  std::string line;
  std::size_t line_no = 0;

  // Header lines may be preceded by comments but not by blank lines.
  if (!detail::next_content_line(in, line, line_no)) {
    throw ParseError("missing header", line_no);
  }

  std::int64_t n = -1;
  std::int64_t m = -1;
  std::int64_t fmt = 0;
  std::int64_t ncon = 1;
  {
    detail::TokenReader header(line, line_no);
    if (!header.next(n) || !header.next(m)) {
      throw ParseError("malformed header, expected \"n m [fmt [ncon]]\"", line_no);
    }
    header.next(fmt);
    header.next(ncon);
    std::int64_t extra = 0;
    if (header.next(extra)) {
      throw ParseError("malformed header, too many fields", line_no);
    }
  }
  if (n < 0 || m < 0 || n > std::numeric_limits<LocalID>::max() - 1) {
    throw ParseError("malformed header, invalid n or m", line_no);
  }
  if (fmt < 0 || fmt > 111 || (fmt % 10) > 1 || ((fmt / 10) % 10) > 1 || (fmt / 100) > 1) {
    throw ParseError("malformed header, unsupported fmt code " + std::to_string(fmt), line_no);
  }
  const bool has_edge_weights = (fmt % 10) == 1;
  const bool has_vertex_weights = ((fmt / 10) % 10) == 1;
  const bool has_vertex_sizes = (fmt / 100) == 1;
  if (has_vertex_weights && ncon != 1) {
    throw ParseError("multi-constraint vertex weights are not supported", line_no);
  }

  std::vector<std::uint64_t> xadj(static_cast<std::size_t>(n) + 1, 0);
  std::vector<LocalID> adjncy;
  std::vector<Weight> adjwgt;
  std::vector<Weight> vwgt(static_cast<std::size_t>(n), 1);
  std::vector<std::size_t> vertex_line(static_cast<std::size_t>(n), 0);
  adjncy.reserve(static_cast<std::size_t>(2 * m));
  adjwgt.reserve(static_cast<std::size_t>(2 * m));

  for (std::int64_t u = 0; u < n; ++u) {
    // Trailing isolated vertices may be omitted: a missing line reads as empty.
    if (!detail::next_content_line(in, line, line_no)) {
      line.clear();
      ++line_no;
    }
    vertex_line[u] = line_no;
    detail::TokenReader tokens(line, line_no);
    std::int64_t value = 0;

    if (has_vertex_sizes && !tokens.next(value)) {
      throw ParseError("missing vertex size", line_no);
    }
    if (has_vertex_weights) {
      if (!tokens.next(value)) {
        throw ParseError("missing vertex weight", line_no);
      }
      if (value <= 0) {
        throw ParseError("vertex weight must be positive", line_no);
      }
      vwgt[u] = value;
    }

    const auto first = adjncy.size();
    while (tokens.next(value)) {
      if (value < 1 || value > n) {
        throw ParseError("neighbor " + std::to_string(value) + " out of range", line_no);
      }
      if (value - 1 == u) {
        throw ParseError("self-loop", line_no);
      }
      Weight w = 1;
      if (has_edge_weights) {
        if (!tokens.next(w)) {
          throw ParseError("missing edge weight", line_no);
        }
        if (w <= 0) {
          throw ParseError("edge weight must be positive", line_no);
        }
      }
      adjncy.push_back(static_cast<LocalID>(value - 1));
      adjwgt.push_back(w);
    }

    // Sort this vertex's neighborhood to detect duplicates and to allow the
    // symmetry check below to use binary search.
    std::vector<std::pair<LocalID, Weight>> nbrs;
    nbrs.reserve(adjncy.size() - first);
    for (auto e = first; e < adjncy.size(); ++e) {
      nbrs.emplace_back(adjncy[e], adjwgt[e]);
    }
    std::sort(nbrs.begin(), nbrs.end());
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      if (i > 0 && nbrs[i].first == nbrs[i - 1].first) {
        throw ParseError("duplicate edge to " + std::to_string(nbrs[i].first + 1), line_no);
      }
      adjncy[first + i] = nbrs[i].first;
      adjwgt[first + i] = nbrs[i].second;
    }
    xadj[u + 1] = adjncy.size();
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line[0] != '%' && line.find_first_not_of(" \t\r") != std::string::npos) {
      throw ParseError("trailing content after the last vertex", line_no);
    }
  }

  for (std::int64_t u = 0; u < n; ++u) {
    for (auto e = xadj[u]; e < xadj[u + 1]; ++e) {
      const LocalID v = adjncy[e];
      const auto begin = adjncy.begin() + static_cast<std::ptrdiff_t>(xadj[v]);
      const auto end = adjncy.begin() + static_cast<std::ptrdiff_t>(xadj[v + 1]);
      const auto it = std::lower_bound(begin, end, static_cast<LocalID>(u));
      if (it == end || *it != static_cast<LocalID>(u)) {
        throw ParseError(
            "asymmetric adjacency: edge " + std::to_string(u + 1) + " -> " + std::to_string(v + 1) +
                " has no reverse edge",
            vertex_line[u]
        );
      }
      if (adjwgt[static_cast<std::size_t>(it - adjncy.begin())] != adjwgt[e]) {
        throw ParseError(
            "asymmetric edge weight between " + std::to_string(u + 1) + " and " + std::to_string(v + 1),
            vertex_line[u]
        );
      }
    }
  }

  if (adjncy.size() != static_cast<std::size_t>(2 * m)) {
    throw ParseError(
        "header declares " + std::to_string(m) + " edges but adjacency holds " +
            std::to_string(adjncy.size() / 2),
        1
    );
  }

  return {std::move(xadj), std::move(adjncy), std::move(vwgt), std::move(adjwgt)};
}

inline SeqGraph read_metis_string(const std::string &contents) {
  std::istringstream in(contents);
  return read_metis(in);
}

inline SeqGraph load_metis(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open graph file " + path);
  }
  return read_metis(in);
}

inline void write_metis(const SeqGraph &graph, std::ostream &out) {
  const bool vertex_weights = std::any_of(
      graph.raw_vertex_weights().begin(), graph.raw_vertex_weights().end(), [](const Weight w) { return w != 1; }
  );
  const bool edge_weights = std::any_of(
      graph.raw_edge_weights().begin(), graph.raw_edge_weights().end(), [](const Weight w) { return w != 1; }
  );

  out << graph.n() << ' ' << graph.m();
  if (vertex_weights || edge_weights) {
    out << ' ' << (vertex_weights ? "1" : "0") << (edge_weights ? "1" : "0");
  }
  out << '\n';

  for (LocalID u = 0; u < graph.n(); ++u) {
    bool first = true;
    if (vertex_weights) {
      out << graph.vertex_weight(u);
      first = false;
    }
    graph.for_each_neighbor(u, [&](const LocalID v, const Weight w) {
      out << (first ? "" : " ") << (v + 1);
      if (edge_weights) {
        out << ' ' << w;
      }
      first = false;
    });
    out << '\n';
  }
}

inline void write_partition(std::span<const BlockID> partition, std::ostream &out) {
  for (const BlockID b : partition) {
    out << b << '\n';
  }
}

inline void write_partition(std::span<const BlockID> partition, const std::string &path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write partition file " + path);
  }
  write_partition(partition, out);
}

inline std::vector<BlockID> read_partition(std::istream &in) {
  std::vector<BlockID> partition;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    detail::TokenReader tokens(line, line_no);
    std::int64_t block = 0;
    tokens.next(block);
    if (block < 0 || block >= std::numeric_limits<BlockID>::max()) {
      throw ParseError("invalid block ID", line_no);
    }
    partition.push_back(static_cast<BlockID>(block));
  }
  return partition;
}

inline std::vector<BlockID> read_partition(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open partition file " + path);
  }
  return read_partition(in);
}

} // namespace dkmp
