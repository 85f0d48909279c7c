#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "dkmp/msg/spmd.hpp"
#include "dkmp/msg/sparse_alltoall.hpp"

namespace dkmp::msg {
namespace {

struct Item {
  std::uint64_t id;
  std::int64_t value;
};

TEST(GridShapeTest, SixteenPEsRouteThroughDestinationRow) {
  const GridShape grid(16);
  EXPECT_EQ(grid.columns, 4);
  EXPECT_EQ(grid.row(14), 3);
  EXPECT_EQ(grid.column(1), 1);
  EXPECT_EQ(grid.intermediate(1, 14), 13);
}

TEST(GridShapeTest, ShortLastRowFallsBackToSourceRow) {
  const GridShape grid(5); // rows {0,1,2}, {3,4}
  EXPECT_EQ(grid.columns, 3);
  EXPECT_EQ(grid.intermediate(2, 3), 0);
  EXPECT_EQ(grid.intermediate(1, 4), 4);
  for (int from = 0; from < 5; ++from) {
    for (int to = 0; to < 5; ++to) {
      EXPECT_LT(grid.intermediate(from, to), 5);
    }
  }
}

TEST(SparseAllToAllTest, SinglePEDeliversToSelf) {
  for (const auto mode : {AllToAllMode::kDirect, AllToAllMode::kGrid}) {
    run_spmd(1, [&](PEGroup &group) {
      const std::vector<std::vector<Item>> out{{{1, 2}, {3, 4}}};
      const auto in = sparse_all_to_all(group, out, mode);
      ASSERT_EQ(in.size(), 1u);
      ASSERT_EQ(in[0].size(), 2u);
      EXPECT_EQ(in[0][1].id, 3u);
    });
  }
}

// Random batches: grid mode must deliver exactly what direct mode delivers,
// including per-(source, destination) order.
TEST(SparseAllToAllTest, GridMatchesDirectOnRandomBatches) {
  for (const int pes : {2, 3, 5, 9, 16}) {
    for (int trial = 0; trial < 200; ++trial) {
      auto received = [&](const AllToAllMode mode) {
        return run_spmd(pes, [&](PEGroup &group) {
          std::mt19937_64 rng(trial * 1000 + group.rank());
          std::uniform_int_distribution<int> count(0, 6);
          std::bernoulli_distribution sparse(0.4);
          std::vector<std::vector<Item>> out(group.size());
          for (int pe = 0; pe < group.size(); ++pe) {
            if (sparse(rng)) {
              continue;
            }
            const int c = count(rng);
            for (int i = 0; i < c; ++i) {
              out[pe].push_back({static_cast<std::uint64_t>(group.rank() * 100 + i), static_cast<std::int64_t>(rng())});
            }
          }
          return sparse_all_to_all(group, out, mode);
        });
      };
      const auto direct = received(AllToAllMode::kDirect);
      const auto grid = received(AllToAllMode::kGrid);
      for (int pe = 0; pe < pes; ++pe) {
        for (int src = 0; src < pes; ++src) {
          ASSERT_EQ(direct[pe][src].size(), grid[pe][src].size());
          for (std::size_t i = 0; i < direct[pe][src].size(); ++i) {
            EXPECT_EQ(direct[pe][src][i].id, grid[pe][src][i].id);
            EXPECT_EQ(direct[pe][src][i].value, grid[pe][src][i].value);
          }
        }
      }
    }
  }
}

TEST(SparseAllToAllTest, DestinationOutsideGroupFailsOnAllMembers) {
  std::atomic<int> failures = 0;
  EXPECT_THROW(
      run_spmd(4, [&](PEGroup &group) {
        MessageBatch<Item> batch(group.size());
        if (group.rank() == 2) {
          batch.push(7, {0, 0});
        }
        try {
          sparse_all_to_all(group, batch, AllToAllMode::kGrid);
        } catch (const ContractViolation &) {
          ++failures;
          throw;
        }
      }),
      ContractViolation
  );
  EXPECT_EQ(failures.load(), 4);
}

TEST(SparseAllToAllTest, GridSendsFewerMessagesOnDenseTraffic) {
  auto count = [](const AllToAllMode mode) {
    SpmdOptions options;
    run_spmd(
        16,
        [&](PEGroup &group) {
          std::vector<std::vector<Item>> out(group.size(), std::vector<Item>(1));
          sparse_all_to_all(group, out, mode);
        },
        options
    );
    const Collective kind = mode == AllToAllMode::kGrid ? Collective::kSparseGrid : Collective::kSparseDirect;
    return options.world->trace.stats(kind);
  };
  const auto direct = count(AllToAllMode::kDirect);
  const auto grid = count(AllToAllMode::kGrid);
  EXPECT_EQ(direct.calls, 1u);
  EXPECT_EQ(direct.phases, 1u);
  EXPECT_EQ(direct.messages, 16u * 15u);
  EXPECT_EQ(direct.max_pe_messages, 15u);
  EXPECT_EQ(grid.phases, 2u);
  EXPECT_EQ(grid.messages, 2u * 16u * 3u);
  EXPECT_EQ(grid.max_pe_messages, 3u);
}

TEST(AllreduceTest, SumIsIdenticalOnAllPEs) {
  const auto results = run_spmd(2, [](PEGroup &group) {
    const std::vector<Weight> mine = group.rank() == 0 ? std::vector<Weight>{1, 2} : std::vector<Weight>{3, 4};
    return allreduce_sum<Weight>(group, mine);
  });
  EXPECT_EQ(results[0], (std::vector<Weight>{4, 6}));
  EXPECT_EQ(results[1], (std::vector<Weight>{4, 6}));
}

TEST(AllreduceTest, SinglePEIsIdentity) {
  const auto results = run_spmd(1, [](PEGroup &group) {
    return allreduce_sum<Weight>(group, std::vector<Weight>{5, -1});
  });
  EXPECT_EQ(results[0], (std::vector<Weight>{5, -1}));
}

TEST(AllreduceTest, MatchesSequentialSum) {
  constexpr int kPEs = 4;
  auto input = [](const int rank) {
    std::mt19937_64 rng(rank + 11);
    std::vector<Weight> values(20);
    for (auto &v : values) {
      v = static_cast<Weight>(rng() % 1000) - 500;
    }
    return values;
  };
  std::vector<Weight> expected(20, 0);
  for (int rank = 0; rank < kPEs; ++rank) {
    const auto values = input(rank);
    for (std::size_t i = 0; i < values.size(); ++i) {
      expected[i] += values[i];
    }
  }
  const auto results = run_spmd(kPEs, [&](PEGroup &group) { return allreduce_sum<Weight>(group, input(group.rank())); });
  for (const auto &result : results) {
    EXPECT_EQ(result, expected);
  }
}

TEST(AllreduceTest, LengthMismatchIsAContractViolation) {
  EXPECT_THROW(
      run_spmd(3, [](PEGroup &group) { allreduce_sum<Weight>(group, std::vector<Weight>(group.rank() == 1 ? 2 : 3)); }),
      ContractViolation
  );
}

std::vector<Item> top(std::vector<Item> a, const std::vector<Item> &b, const std::size_t keep) {
  a.insert(a.end(), b.begin(), b.end());
  std::stable_sort(a.begin(), a.end(), [](const Item &x, const Item &y) { return x.value > y.value; });
  a.resize(std::min(a.size(), keep));
  return a;
}

TEST(TreeReduceTest, TopOneOfTwo) {
  const auto results = run_spmd(2, [](PEGroup &group) {
    std::vector<Item> local{{0, group.rank() == 0 ? 5 : 7}};
    return tree_reduce(group, local, [](std::vector<Item> a, std::vector<Item> b) { return top(std::move(a), b, 1); });
  });
  ASSERT_EQ(results[0].size(), 1u);
  EXPECT_EQ(results[0][0].value, 7);
  EXPECT_TRUE(results[1].empty());
}

TEST(TreeReduceTest, TopTwoEqualsFlatMerge) {
  for (const int pes : {3, 4, 7, 8}) {
    auto local = [](const int rank) {
      std::mt19937_64 rng(rank * 7 + 1);
      std::vector<Item> items(5);
      for (std::size_t i = 0; i < items.size(); ++i) {
        items[i] = {static_cast<std::uint64_t>(rank * 10 + i), static_cast<std::int64_t>(rng() % 10'000)};
      }
      std::sort(items.begin(), items.end(), [](const Item &x, const Item &y) { return x.value > y.value; });
      return items;
    };
    std::vector<Item> flat;
    for (int rank = 0; rank < pes; ++rank) {
      flat = top(std::move(flat), local(rank), 1000);
    }
    flat.resize(2);
    const auto results = run_spmd(pes, [&](PEGroup &group) {
      return tree_reduce(group, local(group.rank()), [](std::vector<Item> a, std::vector<Item> b) {
        return top(std::move(a), b, 2);
      });
    });
    ASSERT_EQ(results[0].size(), 2u);
    EXPECT_EQ(results[0][0].value, flat[0].value);
    EXPECT_EQ(results[0][1].value, flat[1].value);
  }
}

TEST(TreeReduceTest, SinglePEKeepsLocalList) {
  const auto results = run_spmd(1, [](PEGroup &group) {
    return tree_reduce(group, std::vector<Item>{{1, 1}, {2, 2}}, [](auto a, auto) { return a; });
  });
  EXPECT_EQ(results[0].size(), 2u);
}

TEST(TreeReduceTest, MergeOrderFollowsFixedPairing) {
  // Concatenation exposes the merge order: ((0 1) (2 3)) (4 5).
  const auto results = run_spmd(6, [](PEGroup &group) {
    return tree_reduce(group, std::vector<Item>{{static_cast<std::uint64_t>(group.rank()), 0}}, [](auto a, auto b) {
      a.insert(a.end(), b.begin(), b.end());
      return a;
    });
  });
  ASSERT_EQ(results[0].size(), 6u);
  for (std::uint64_t i = 0; i < 6; ++i) {
    EXPECT_EQ(results[0][i].id, i);
  }
}

TEST(SplitTest, TwoHalves) {
  const auto results = run_spmd(8, [](PEGroup &group) {
    PEGroup sub = group.split(2);
    const auto sum = allreduce_sum<std::int64_t>(sub, group.rank());
    return std::array<std::int64_t, 4>{sub.size(), sub.rank(), sub.world_first(), sum};
  });
  for (int rank = 0; rank < 8; ++rank) {
    EXPECT_EQ(results[rank][0], 4);
    EXPECT_EQ(results[rank][1], rank % 4);
    EXPECT_EQ(results[rank][2], rank < 4 ? 0 : 4);
    EXPECT_EQ(results[rank][3], rank < 4 ? 0 + 1 + 2 + 3 : 4 + 5 + 6 + 7);
  }
}

TEST(SplitTest, FourPairsRemapRanks) {
  const auto results = run_spmd(8, [](PEGroup &group) {
    PEGroup sub = group.split(4);
    return std::array<int, 3>{sub.size(), sub.rank(), sub.world_first()};
  });
  for (int rank = 0; rank < 8; ++rank) {
    EXPECT_EQ(results[rank][0], 2);
    EXPECT_EQ(results[rank][1], rank % 2);
    EXPECT_EQ(results[rank][2], rank - rank % 2);
  }
}

TEST(SplitTest, OnePartIsTheSameGroup) {
  const auto results = run_spmd(3, [](PEGroup &group) {
    PEGroup sub = group.split(1);
    return std::array<int, 2>{sub.size(), sub.rank()};
  });
  EXPECT_EQ(results[2][0], 3);
  EXPECT_EQ(results[2][1], 2);
}

TEST(SplitTest, PartsMustDivideGroupSize) {
  EXPECT_THROW(run_spmd(6, [](PEGroup &group) { (void)group.split(4); }), ContractViolation);
}

TEST(ScheduleCheckTest, MismatchedCollectivesAreDetected) {
  EXPECT_THROW(
      run_spmd(
          3,
          [](PEGroup &group) {
            if (group.rank() == 1) {
              broadcast<Weight>(group, std::vector<Weight>{1});
            } else {
              allreduce_sum<Weight>(group, Weight{1});
            }
          }
      ),
      ContractViolation
  );
}

TEST(ScheduleCheckTest, ExceptionOnOnePEReleasesTheOthers) {
  EXPECT_THROW(
      run_spmd(
          4,
          [](PEGroup &group) {
            if (group.rank() == 3) {
              throw std::runtime_error("boom");
            }
            group.barrier();
          }
      ),
      std::runtime_error
  );
}

TEST(DeterminismTest, CollectivesAreReplicatedDeterministic) {
  auto run = [] {
    return run_spmd(5, [](PEGroup &group) {
      std::mt19937_64 rng(group.rank());
      std::vector<std::vector<Item>> out(group.size());
      for (int pe = 0; pe < group.size(); ++pe) {
        out[pe].push_back({rng(), static_cast<std::int64_t>(rng() % 100)});
      }
      const auto in = sparse_all_to_all(group, out, AllToAllMode::kGrid);
      std::int64_t local = 0;
      for (const auto &list : in) {
        for (const auto &item : list) {
          local = local * 31 + item.value;
        }
      }
      return allgather_one<std::int64_t>(group, local);
    });
  };
  const auto first = run();
  const auto second = run();
  EXPECT_EQ(first, second);
  for (const auto &r : first) {
    EXPECT_EQ(r, first[0]);
  }
}

} // namespace
} // namespace dkmp::msg
