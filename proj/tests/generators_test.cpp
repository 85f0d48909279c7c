#include <gtest/gtest.h>

#include "dkmp/generators.hpp"

namespace dkmp {
namespace {

double average_degree(const SeqGraph &graph) {
  return static_cast<double>(graph.directed_edges()) / graph.n();
}

bool simple(const SeqGraph &graph) {
  for (LocalID u = 0; u < graph.n(); ++u) {
    for (auto e = graph.first_edge(u); e < graph.last_edge(u); ++e) {
      if (graph.edge_target(e) == u || (e > graph.first_edge(u) && graph.edge_target(e - 1) == graph.edge_target(e))) {
        return false;
      }
    }
  }
  return true;
}

TEST(Rgg2dTest, TwoCloseVerticesShareAnEdge) {
  const SeqGraph graph = gen_rgg2d(2, 8, 1);
  EXPECT_EQ(graph.m(), 1u);
}

TEST(Rgg2dTest, AverageDegreeWithinFifteenPercent) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const SeqGraph graph = gen_rgg2d(100'000, 8, seed);
    EXPECT_NEAR(average_degree(graph), 8.0, 8.0 * 0.15) << "seed " << seed;
    EXPECT_TRUE(simple(graph));
  }
}

TEST(Rgg2dTest, MatchesBruteForcePairScan) {
  // Same points as the generator: two draws per vertex in order.
  const LocalID n = 500;
  const SeqGraph graph = gen_rgg2d(n, 12, 9);
  Random rng(9);
  std::vector<double> x(n);
  std::vector<double> y(n);
  for (LocalID u = 0; u < n; ++u) {
    x[u] = rng.real();
    y[u] = rng.real();
  }
  const double r = std::sqrt(12.0 / (std::numbers::pi * (n - 1)));
  std::uint64_t expected = 0;
  for (LocalID u = 0; u < n; ++u) {
    for (LocalID v = u + 1; v < n; ++v) {
      expected += (x[u] - x[v]) * (x[u] - x[v]) + (y[u] - y[v]) * (y[u] - y[v]) <= r * r;
    }
  }
  EXPECT_EQ(graph.m(), expected);
}

TEST(Rgg2dTest, Deterministic) {
  EXPECT_EQ(gen_rgg2d(5000, 8, 3), gen_rgg2d(5000, 8, 3));
  EXPECT_NE(gen_rgg2d(5000, 8, 3), gen_rgg2d(5000, 8, 4));
}

TEST(PowerLawTest, TailExponentNearThree) {
  const SeqGraph graph = gen_powerlaw(100'000, 8, 3.0, 1);
  const double tail = hill_tail_exponent(graph, 0.01);
  EXPECT_GE(tail, 2.5);
  EXPECT_LE(tail, 3.5);
  EXPECT_TRUE(simple(graph));
  EXPECT_NEAR(average_degree(graph), 8.0, 8.0 * 0.15);
}

TEST(PowerLawTest, ZeroDegreeGivesEmptyGraph) {
  const SeqGraph graph = gen_powerlaw(3, 0, 3.0, 1);
  EXPECT_EQ(graph.n(), 3u);
  EXPECT_EQ(graph.m(), 0u);
}

TEST(PowerLawTest, Deterministic) {
  EXPECT_EQ(gen_powerlaw(5000, 8, 3.0, 7), gen_powerlaw(5000, 8, 3.0, 7));
}

TEST(GeneratorSpecTest, Parses) {
  const auto spec = parse_generator_spec("gen:plaw:n=65536,deg=8,gamma=3,seed=1");
  EXPECT_EQ(spec.kind, "plaw");
  EXPECT_EQ(spec.value<std::uint64_t>("n", 0), 65536u);
  EXPECT_EQ(spec.value<double>("gamma", 0), 3.0);
  EXPECT_EQ(generate("gen:rgg2d:n=1000,deg=8,seed=1"), gen_rgg2d(1000, 8, 1));
}

TEST(GeneratorSpecTest, RejectsMalformedSpecs) {
  EXPECT_THROW(generate("gen:rgg3d:n=10"), ContractViolation);
  EXPECT_THROW(generate("gen:rgg2d:n=10,size=3"), ContractViolation);
  EXPECT_THROW(generate("gen:rgg2d:n=ten"), ContractViolation);
  EXPECT_THROW(generate("gen:rgg2d:deg=4"), ContractViolation);
  EXPECT_THROW(parse_generator_spec("gen:rgg2d:n"), ContractViolation);
}

} // namespace
} // namespace dkmp
