#include <gtest/gtest.h>

#include <functional>

#include "support.hpp"

using namespace gcond;
using namespace gtest_support;

namespace {

GraphDataset labelled(const Matrix& x, const std::vector<int>& labels, int classes) {
  GraphDataset g;
  g.num_nodes = static_cast<int>(x.rows());
  g.num_features = static_cast<int>(x.cols());
  g.num_classes = classes;
  g.adjacency = SparseMatrix(g.num_nodes, g.num_nodes);
  g.features = x;
  g.labels = labels;
  g.splits.train.resize(labels.size());
  std::iota(g.splits.train.begin(), g.splits.train.end(), 0);
  return g;
}

}  // namespace

TEST(KMeans, WithinFivePercentOfBruteForceOnSmallInputs) {
  int cases = 0;
  for (int n = 3; n <= 8; ++n) {
    for (int m = 1; m <= 3 && m <= n; ++m) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix x = random_matrix(n, 2, 1000 * n + 10 * m + seed, -3.0, 3.0);
        const double best = brute_force_sse(x, m);
        const auto km = kmeans(x, m, seed);
        EXPECT_LE(km.sse(), 1.05 * best + 1e-12) << "n=" << n << " m=" << m << " seed=" << seed;
        ++cases;
      }
    }
  }
  EXPECT_GT(cases, 60);
}

TEST(KMeans, LloydSseIsMonotoneNonIncreasing) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix x = random_matrix(60, 3, seed);
    const auto km = kmeans(x, 5, seed);
    for (std::size_t k = 1; k < km.sse_history.size(); ++k)
      EXPECT_LE(km.sse_history[k], km.sse_history[k - 1] + 1e-12);
  }
}

TEST(KMeans, EveryClusterNonEmptyEvenWithDuplicates) {
  Matrix x = Matrix::Zero(6, 2);
  x.row(5) << 1, 1;
  const auto km = kmeans(x, 3, 1);
  std::vector<int> counts(3, 0);
  for (int a : km.assignments) ++counts[static_cast<std::size_t>(a)];
  for (int c : counts) EXPECT_GE(c, 1);
}

TEST(KMeans, SeparatedBlobsAreRecovered) {
  Matrix x(6, 1);
  x << 0, 0.1, 0.2, 10, 10.1, 10.2;
  const auto km = kmeans(x, 2, 3);
  EXPECT_EQ(km.assignments[0], km.assignments[2]);
  EXPECT_EQ(km.assignments[3], km.assignments[5]);
  EXPECT_NE(km.assignments[0], km.assignments[3]);
  EXPECT_NEAR(km.sse(), 0.04, 1e-12);
}

TEST(KMeans, DeterministicPerSeedAndRejectsTooFewPoints) {
  const Matrix x = random_matrix(30, 2, 5);
  EXPECT_EQ(kmeans(x, 4, 9).assignments, kmeans(x, 4, 9).assignments);
  EXPECT_THROW(kmeans(x.topRows(2), 3, 1), ValidationError);
}

TEST(Budget, LargestRemainderWithFloorOfOne) {
  // class sizes 50, 30, 15, 5 of 100 train nodes
  std::vector<int> labels;
  for (int c = 0; c < 4; ++c) labels.insert(labels.end(), std::vector<int>{50, 30, 15, 5}[static_cast<std::size_t>(c)], c);
  const auto g = labelled(Matrix::Zero(100, 1), labels, 4);
  auto b = make_budget(g, 0.1);
  EXPECT_EQ(b.per_class, (std::vector<int>{5, 3, 2, 1}));  // 5, 3, 1.5, 0.5: remainders tie, first wins, then floor
  b = make_budget(g, 0.02);
  EXPECT_EQ(b.per_class, (std::vector<int>{1, 1, 1, 1}));
  b = make_budget(g, 1.0);
  EXPECT_EQ(b.per_class, (std::vector<int>{50, 30, 15, 5}));
  EXPECT_THROW(make_budget(g, 0.0), ValidationError);
}

TEST(Budget, AbsentClassGetsNothing) {
  const auto g = labelled(Matrix::Zero(10, 1), {0, 0, 0, 0, 0, 2, 2, 2, 2, 2}, 3);
  EXPECT_EQ(make_budget(g, 0.4).per_class, (std::vector<int>{2, 0, 2}));
}

TEST(SyntheticInit, KMeansRowsAreVerbatimMembersOfTheirClass) {
  const auto g = toy_graph(120, 6, 3, 31);
  const auto budget = make_budget(g, 0.2);
  const auto init = init_features_kmeans(g, budget, 4);
  ASSERT_EQ(static_cast<int>(init.labels.size()), budget.total());
  for (std::size_t r = 0; r < init.labels.size(); ++r) {
    const int src = init.source_nodes[r];
    EXPECT_EQ(g.labels[static_cast<std::size_t>(src)], init.labels[r]);
    EXPECT_TRUE(std::binary_search(g.splits.train.begin(), g.splits.train.end(), src));
    EXPECT_EQ(init.features.row(static_cast<Index>(r)), g.features.row(src));
  }
  std::vector<int> hist(3, 0);
  for (int l : init.labels) ++hist[static_cast<std::size_t>(l)];
  EXPECT_EQ(hist, budget.per_class);
}

TEST(SyntheticInit, OneRowPerCluster) {
  // Two tight blobs in one class: two picks must come from different blobs.
  Matrix x(6, 1);
  x << 0, 0.1, 0.2, 10, 10.1, 10.2;
  const auto g = labelled(x, {0, 0, 0, 0, 0, 0}, 1);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto init = init_features_kmeans(g, ClassBudget{{2}, 1.0 / 3.0}, seed);
    EXPECT_NE(init.features(0, 0) < 5.0, init.features(1, 0) < 5.0);
  }
}

TEST(SyntheticInit, RandomInitIsDistinctAndDeterministic) {
  const auto g = toy_graph(80, 3, 2, 32);
  const auto b = make_budget(g, 0.25);
  const auto a = init_features_random(g, b, 5), c = init_features_random(g, b, 5);
  EXPECT_EQ(a.source_nodes, c.source_nodes);
  auto s = a.source_nodes;
  std::sort(s.begin(), s.end());
  EXPECT_EQ(std::adjacent_find(s.begin(), s.end()), s.end());
}

TEST(SyntheticInit, BudgetAboveClassSizeIsRejected) {
  const auto g = labelled(Matrix::Zero(4, 1), {0, 0, 1, 1}, 2);
  EXPECT_THROW(init_features_kmeans(g, ClassBudget{{3, 1}, 1.0}, 1), ValidationError);
  EXPECT_THROW(init_features_random(g, ClassBudget{{1, 3}, 1.0}, 1), ValidationError);
}
