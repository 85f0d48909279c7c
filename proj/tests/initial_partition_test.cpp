#include <gtest/gtest.h>

#include <random>
#include <set>

#include "dkmp/initial_partition.hpp"
#include "dkmp/msg/spmd.hpp"
#include "test_graphs.hpp"

namespace dkmp {
namespace {

BlockID nonempty_blocks(std::span<const BlockID> blocks) {
  return static_cast<BlockID>(std::set<BlockID>(blocks.begin(), blocks.end()).size());
}

TEST(PartitionSeqTest, DisconnectedTrianglesAreSeparated) {
  const SeqGraph graph = testing::two_triangles(false);
  const auto result = partition_seq(graph, 2, 0.03, 1);
  EXPECT_EQ(result.cut, 0);
  EXPECT_EQ(result.block_weights, (std::vector<Weight>{3, 3}));
  EXPECT_TRUE(result.feasible);
}

TEST(PartitionSeqTest, SingleBlock) {
  std::mt19937_64 rng(1);
  const auto result = partition_seq(testing::random_graph(30, 0.2, rng), 1, 0.03, 1);
  EXPECT_EQ(result.cut, 0);
  for (const BlockID b : result.blocks) {
    EXPECT_EQ(b, 0u);
  }
}

TEST(PartitionSeqTest, PathBisectionCutsOneEdge) {
  const auto result = partition_seq(testing::path_graph(4), 2, 0.0, 3);
  EXPECT_EQ(result.cut, 1);
  EXPECT_TRUE(result.feasible);
}

TEST(PartitionSeqTest, GridBisectionIsNearOptimal) {
  const SeqGraph graph = testing::grid_graph(20, 20);
  const auto result = partition_seq(graph, 2, 0.03, 5);
  EXPECT_TRUE(result.feasible);
  EXPECT_LE(result.cut, 26);
}

TEST(PartitionSeqTest, ExactlyKNonemptyFeasibleBlocks) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const LocalID n = 20 + static_cast<LocalID>(rng() % 400);
    const SeqGraph graph = testing::random_graph(n, 4.0 / n, rng, trial % 3 == 0 ? 4 : 1);
    const BlockID k = 1 + static_cast<BlockID>(rng() % 16);
    const auto result = partition_seq(graph, k, 0.03, trial);
    EXPECT_EQ(nonempty_blocks(result.blocks), std::min<BlockID>(k, n)) << "n=" << n << " k=" << k;
    EXPECT_TRUE(result.feasible) << "n=" << n << " k=" << k;
    EXPECT_EQ(result.cut, edge_cut(graph, result.blocks));
  }
}

TEST(PartitionSeqTest, MoreBlocksThanVertices) {
  const SeqGraph graph = testing::path_graph(5);
  const auto result = partition_seq(graph, 8, 0.03, 1);
  EXPECT_TRUE(result.feasible);
  EXPECT_EQ(nonempty_blocks(result.blocks), 5u);
}

TEST(PartitionSeqTest, UnevenCountsGiveProportionalWeights) {
  const SeqGraph graph = testing::grid_graph(16, 16);
  const std::vector<BlockID> counts{3, 1};
  const auto bounds = proportional_max_weights(graph, counts, 0.03);
  EXPECT_EQ(bounds, (std::vector<Weight>{198, 66}));
  const auto result = partition_seq_bounded(graph, counts, bounds, 0.03, 4);
  EXPECT_TRUE(result.feasible);
  EXPECT_GE(result.block_weights[0], 180);
}

TEST(PartitionSeqTest, Deterministic) {
  std::mt19937_64 rng(3);
  const SeqGraph graph = testing::random_graph(300, 0.02, rng);
  EXPECT_EQ(partition_seq(graph, 5, 0.03, 9).blocks, partition_seq(graph, 5, 0.03, 9).blocks);
}

TEST(PartitionSeqTest, NeverBeatsTheExhaustiveOptimum) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const LocalID n = 2 + static_cast<LocalID>(rng() % 9);
    const SeqGraph graph = testing::random_connected_graph(n, 0.3, rng);
    const Weight bound = l_max(graph.total_weight(), 2, 0.03, graph.max_vertex_weight());
    const auto result = partition_seq(graph, 2, 0.03, trial);
    ASSERT_TRUE(result.feasible);
    EXPECT_GE(result.cut, testing::brute_force_bisection_cut(graph, bound));
  }
}

TEST(ExtractBlockTest, MatchesDirectFilter) {
  std::mt19937_64 rng(5);
  const SeqGraph graph = testing::random_graph(60, 0.1, rng, 3);
  std::vector<BlockID> blocks(graph.n());
  for (auto &b : blocks) {
    b = static_cast<BlockID>(rng() % 3);
  }
  for (BlockID b = 0; b < 3; ++b) {
    const auto sub = seq::extract_block(graph, blocks, b);
    std::uint64_t expected_edges = 0;
    Weight expected_weight = 0;
    for (LocalID u = 0; u < graph.n(); ++u) {
      if (blocks[u] != b) {
        continue;
      }
      expected_weight += graph.vertex_weight(u);
      graph.for_each_neighbor(u, [&](const LocalID v, Weight) { expected_edges += blocks[v] == b; });
    }
    EXPECT_EQ(sub.graph.directed_edges(), expected_edges);
    EXPECT_EQ(sub.graph.total_weight(), expected_weight);
  }
}

TEST(SelectBestTest, Examples) {
  const std::vector<CandidateScore> all_feasible{{1, 0, 9}, {1, 0, 7}, {1, 0, 7}, {1, 0, 12}};
  EXPECT_EQ(select_best(all_feasible), 1u);
  const std::vector<CandidateScore> single{{0, 4, 3}};
  EXPECT_EQ(select_best(single), 0u);
  const std::vector<CandidateScore> mixed{{0, 1, 3}, {1, 0, 8}};
  EXPECT_EQ(select_best(mixed), 1u);
  const std::vector<CandidateScore> infeasible{{0, 5, 1}, {0, 2, 9}, {0, 2, 4}};
  EXPECT_EQ(select_best(infeasible), 2u);
}

TEST(ReplicateAndSelectTest, AllPEsHoldTheWinner) {
  std::mt19937_64 rng(6);
  const SeqGraph graph = testing::random_graph(200, 0.03, rng);
  for (const int pes : {1, 4}) {
    const auto parts = distribute(graph, pes);
    const std::vector<BlockID> counts(4, 1);
    const auto bounds = proportional_max_weights(graph, counts, 0.03);
    const auto results = msg::run_spmd(pes, [&](msg::PEGroup &group) {
      const auto &local = parts[group.rank()];
      const auto selected = replicate_and_select(local, group, counts, bounds, 0.03, 17);
      EXPECT_TRUE(ghost_labels_synchronized(local, group, selected.blocks));
      const auto all = msg::allgatherv<BlockID>(group, std::span(selected.blocks).first(local.n_owned()));
      EXPECT_EQ(edge_cut(graph, all), selected.score.cut);
      return selected.score.cut;
    });
    Weight best = std::numeric_limits<Weight>::max();
    for (int r = 0; r < pes; ++r) {
      best = std::min(best, partition_seq_bounded(graph, counts, bounds, 0.03, 17 + r).cut);
    }
    EXPECT_EQ(results[0], best);
  }
}

} // namespace
} // namespace dkmp
