#include <gtest/gtest.h>

#include <random>
#include <set>

#include "dkmp/deep_driver.hpp"
#include "dkmp/msg/spmd.hpp"
#include "test_graphs.hpp"

namespace dkmp {
namespace {

struct Run {
  std::vector<BlockID> blocks;
  Weight cut;
  bool feasible;
  DeepStats stats;
};

Run run_deep(const SeqGraph &graph, const int pes, const DeepConfig &config) {
  const auto parts = distribute(graph, pes);
  auto runs = msg::run_spmd(pes, [&](msg::PEGroup &group) {
    const auto &local = parts[group.rank()];
    auto result = deep_partition(local, group, config);
    EXPECT_TRUE(ghost_labels_synchronized(local, group, result.partition.blocks));
    EXPECT_EQ(result.partition.block_weights, compute_block_weights(local, group, result.partition.blocks, config.k));
    auto all = msg::allgatherv<BlockID>(group, std::span(result.partition.blocks).first(local.n_owned()));
    return Run{std::move(all), edge_cut(local, group, result.partition.blocks), result.feasible, result.stats};
  });
  return runs[0];
}

BlockID nonempty_blocks(std::span<const BlockID> blocks) {
  return static_cast<BlockID>(std::set<BlockID>(blocks.begin(), blocks.end()).size());
}

bool feasible(const SeqGraph &graph, std::span<const BlockID> blocks, const BlockID k, const double eps) {
  const Weight bound = l_max(graph.total_weight(), k, eps, graph.max_vertex_weight());
  for (const Weight w : block_weights(graph, blocks, k)) {
    if (w > bound) {
      return false;
    }
  }
  return true;
}

TEST(Ceil2Test, Examples) {
  EXPECT_EQ(ceil2(5), 8u);
  EXPECT_EQ(ceil2(8), 8u);
  EXPECT_EQ(ceil2(1), 1u);
}

TEST(DeepConfigTest, Presets) {
  const auto fast = DeepConfig::preset(Preset::kFast);
  EXPECT_EQ(fast.contraction_limit, 2000u);
  EXPECT_EQ(fast.lp_iterations, 3);
  const auto strong = DeepConfig::preset(Preset::kStrong);
  EXPECT_EQ(strong.contraction_limit, 5000u);
  EXPECT_EQ(strong.lp_iterations, 5);
  EXPECT_EQ(strong.K, 2u);
}

TEST(SplitCountTest, NearlyEqualLargerFirst) {
  EXPECT_EQ(split_count(5, 2), (std::vector<BlockID>{3, 2}));
  EXPECT_EQ(split_count(4, 4), (std::vector<BlockID>{1, 1, 1, 1}));
  EXPECT_EQ(split_count(7, 3), (std::vector<BlockID>{3, 2, 2}));
}

TEST(DistributeBlocksTest, ModularAssignmentMatchesFilter) {
  std::mt19937_64 rng(1);
  const SeqGraph graph = testing::random_graph(80, 0.08, rng, 3);
  std::vector<BlockID> global(graph.n());
  for (auto &b : global) {
    b = static_cast<BlockID>(rng() % 4);
  }
  const auto parts = distribute(graph, 2);
  msg::run_spmd(2, [&](msg::PEGroup &group) {
    const auto &local = parts[group.rank()];
    std::vector<BlockID> blocks(local.n_total());
    for (LocalID u = 0; u < local.n_total(); ++u) {
      blocks[u] = global[local.local_to_global(u)];
    }
    const auto subs = distribute_blocks(local, blocks, 4, group);
    ASSERT_EQ(subs.size(), 2u);
    EXPECT_EQ(subs[0].block, static_cast<BlockID>(group.rank()));
    EXPECT_EQ(subs[1].block, static_cast<BlockID>(group.rank() + 2));
    for (const auto &sub : subs) {
      const auto expected = seq::extract_block(graph, global, sub.block);
      EXPECT_EQ(sub.graph.n(), expected.graph.n());
      EXPECT_EQ(sub.graph.directed_edges(), expected.graph.directed_edges());
      EXPECT_EQ(sub.graph.total_weight(), expected.graph.total_weight());
      for (LocalID u = 0; u < sub.graph.n(); ++u) {
        EXPECT_EQ(sub.vertices[u], expected.to_parent[u]);
      }
    }
  });
}

TEST(DistributeBlocksTest, EmptyBlockGivesEmptyGraph) {
  const SeqGraph graph = testing::path_graph(6);
  const std::vector<BlockID> global{0, 0, 0, 2, 2, 2};
  const auto parts = distribute(graph, 1);
  msg::run_spmd(1, [&](msg::PEGroup &group) {
    const auto subs = distribute_blocks(parts[0], global, 3, group);
    ASSERT_EQ(subs.size(), 3u);
    EXPECT_EQ(subs[1].graph.n(), 0u);
    const std::vector<BlockID> counts{1, 1};
    const auto result = partition_seq_bounded(subs[1].graph, counts, std::vector<Weight>{1, 1}, 0.03, 1);
    EXPECT_TRUE(result.blocks.empty());
  });
}

TEST(DeepPartitionTest, SingleBlockIsAllZero) {
  const SeqGraph graph = testing::grid_graph(10, 10);
  DeepConfig config;
  config.k = 1;
  const auto run = run_deep(graph, 2, config);
  EXPECT_EQ(run.blocks, std::vector<BlockID>(graph.n(), 0));
  EXPECT_TRUE(run.stats.extensions.empty());
  EXPECT_EQ(run.cut, 0);
}

TEST(DeepPartitionTest, SmallGraphMatchesSequentialPartitioner) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const SeqGraph graph = testing::random_connected_graph(300, 0.02, rng);
    DeepConfig config;
    config.k = 2;
    config.contraction_limit = 200;
    config.seed = 10 + trial;
    const auto run = run_deep(graph, 1, config);
    const auto expected = partition_seq(graph, 2, config.eps, config.seed, config.initial);
    EXPECT_EQ(run.cut, expected.cut);
    EXPECT_TRUE(run.feasible);
  }
}

TEST(DeepPartitionTest, FourPEExtensionTrace) {
  const SeqGraph graph = testing::grid_graph(40, 40);
  DeepConfig config;
  config.k = 4;
  config.contraction_limit = 150;
  config.seed = 3;
  const auto run = run_deep(graph, 4, config);
  EXPECT_TRUE(run.feasible);
  EXPECT_TRUE(feasible(graph, run.blocks, 4, config.eps));
  EXPECT_EQ(nonempty_blocks(run.blocks), 4u);
  ASSERT_FALSE(run.stats.extensions.empty());
  EXPECT_EQ(run.stats.extensions.front().blocks_before, 1u);
  EXPECT_EQ(run.stats.extensions.back().blocks_after, 4u);
  for (const auto &step : run.stats.extensions) {
    EXPECT_EQ(step.blocks_after, std::min<BlockID>(2 * step.blocks_before, 4));
  }
  EXPECT_LE(run.cut, 120);
}

TEST(DeepPartitionTest, SmallLevelsAreReplicated) {
  // Below C * P vertices the group is split; sub-groups extend on their own.
  const SeqGraph graph = testing::grid_graph(60, 60);
  DeepConfig config;
  config.k = 4;
  config.contraction_limit = 150;
  config.seed = 5;
  const auto run = run_deep(graph, 8, config);
  EXPECT_TRUE(run.feasible);
  EXPECT_EQ(nonempty_blocks(run.blocks), 4u);
  EXPECT_GE(run.stats.replications, 1);
  bool extended_in_subgroup = false;
  for (const auto &step : run.stats.extensions) {
    extended_in_subgroup |= step.group_size < 8;
  }
  EXPECT_TRUE(extended_in_subgroup);
}

TEST(DeepPartitionTest, FeasibleWithExactlyKBlocks) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 16; ++trial) {
    const SeqGraph graph = testing::random_graph(600 + 100 * trial, 6.0 / (600 + 100 * trial), rng, trial % 4 == 0 ? 3 : 1);
    DeepConfig config;
    config.k = static_cast<BlockID>(2 + (trial * 7) % 40);
    config.contraction_limit = 40 + 10 * (trial % 3);
    config.seed = trial;
    const int pes = 1 << (trial % 4);
    const auto run = run_deep(graph, pes, config);
    EXPECT_TRUE(run.feasible) << "trial " << trial;
    EXPECT_TRUE(feasible(graph, run.blocks, config.k, config.eps)) << "trial " << trial;
    EXPECT_EQ(nonempty_blocks(run.blocks), config.k) << "trial " << trial;
    EXPECT_EQ(run.cut, edge_cut(graph, run.blocks));
  }
}

TEST(DeepPartitionTest, Deterministic) {
  std::mt19937_64 rng(5);
  const SeqGraph graph = testing::random_graph(2000, 0.004, rng);
  DeepConfig config;
  config.k = 8;
  config.contraction_limit = 100;
  config.seed = 42;
  EXPECT_EQ(run_deep(graph, 4, config).blocks, run_deep(graph, 4, config).blocks);
}

TEST(DeepPartitionTest, RejectsNonPowerOfTwoPEs) {
  const SeqGraph graph = testing::grid_graph(6, 6);
  const auto parts = distribute(graph, 3);
  EXPECT_THROW(
      msg::run_spmd(3, [&](msg::PEGroup &group) { deep_partition(parts[group.rank()], group, DeepConfig{}); }),
      ContractViolation
  );
}

TEST(ReplicationTest, SubgroupsGatherIdenticalGraphs) {
  std::mt19937_64 rng(6);
  const SeqGraph graph = testing::random_graph(300, 0.02, rng, 2);
  const auto parts = distribute(graph, 8);
  msg::run_spmd(8, [&](msg::PEGroup &group) {
    const SeqGraph whole = gather(parts[group.rank()], group);
    msg::PEGroup sub = group.split(4);
    const DistGraph replica = build_local(whole, balanced_distribution(whole.n(), sub.size()), sub.rank());
    EXPECT_EQ(gather(replica, sub), graph);
  });
}

} // namespace
} // namespace dkmp
