#include <gtest/gtest.h>

#include "support.hpp"

using namespace gcond;
using namespace gtest_support;

namespace {

std::vector<GraphDataset> sample_graphs() {
  std::vector<GraphDataset> out;
  for (GraphModel m : std::vector<GraphModel>{ErdosRenyi{0.15}, BarabasiAlbert{2}, WattsStrogatz{4, 0.2}}) {
    GeneratorSpec s;
    s.model = m;
    s.num_nodes = 40;
    s.num_features = 6;
    s.feature_bias = 1.0;
    s.seed = 3;
    out.push_back(generate_graph(s));
  }
  out.push_back(sbm_graph({15, 15}, 0.4, 0.05, 5, 4));
  return out;
}

}  // namespace

TEST(Laplacian, HandValuesOnSingleEdge) {
  const Matrix l = laplacian(adjacency_from_edges(2, {{0, 1}}));
  Matrix want(2, 2);
  want << 1, -1, -1, 1;
  EXPECT_LE((l - want).cwiseAbs().maxCoeff(), 1e-15);
  Matrix x(2, 2);
  x << 1, 1, -1, 1;
  const auto h = high_freq_area(l, x);
  EXPECT_NEAR(h.per_dim(0), 2.0, 1e-15);
  EXPECT_NEAR(h.per_dim(1), 0.0, 1e-15);
}

TEST(Laplacian, ConstantSignalOnRegularGraphHasZeroArea) {
  GeneratorSpec s;
  s.model = WattsStrogatz{4, 0.0};
  s.num_nodes = 12;
  s.num_features = 1;
  const auto g = generate_graph(s);
  EXPECT_NEAR(high_freq_area(laplacian(g.adjacency), Matrix::Ones(12, 1)).mean, 0.0, 1e-14);
}

TEST(Jacobi, AgreesWithReferenceSolver) {
  for (const auto& g : sample_graphs()) {
    const Matrix l = laplacian(g.adjacency);
    const auto eig = jacobi_eigh(l);
    Eigen::SelfAdjointEigenSolver<Matrix> ref(l);
    EXPECT_LE((eig.eigenvalues - ref.eigenvalues()).cwiseAbs().maxCoeff(), 1e-8);
    const Matrix recon = eig.eigenvectors * eig.eigenvalues.asDiagonal() * eig.eigenvectors.transpose();
    EXPECT_LE((recon - l).cwiseAbs().maxCoeff(), 1e-8);
    const Matrix gram = eig.eigenvectors.transpose() * eig.eigenvectors;
    EXPECT_LE((gram - Matrix::Identity(l.rows(), l.rows())).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Jacobi, TraceAndVarianceIdentities) {
  for (const auto& g : sample_graphs()) {
    const Matrix l = laplacian(g.adjacency);
    const auto eig = jacobi_eigh(l);
    const double n = static_cast<double>(l.rows());
    EXPECT_NEAR(eig.eigenvalues.sum(), l.trace(), 1e-8);
    EXPECT_NEAR(eig.eigenvalues.squaredNorm(), (l * l).trace(), 1e-8);
    const double mean = eig.eigenvalues.mean();
    const double var = (eig.eigenvalues.array() - mean).square().sum() / n;
    EXPECT_NEAR(spectral_metrics(g).eigenvalue_variance, var, 1e-8);
    EXPECT_GE(eig.eigenvalues.minCoeff(), -1e-10);
    EXPECT_LE(eig.eigenvalues.maxCoeff(), 2.0 + 1e-10);
  }
}

TEST(Jacobi, RejectsNonSymmetricInput) {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  EXPECT_THROW(jacobi_eigh(m), ValidationError);
}

TEST(Jacobi, DiagonalInputIsSortedAscending) {
  Matrix m = Vector(Eigen::Vector3d(3, 1, 2)).asDiagonal();
  const auto eig = jacobi_eigh(m);
  EXPECT_EQ(eig.eigenvalues, Vector(Eigen::Vector3d(1, 2, 3)));
}

TEST(HighFrequencyArea, QuadraticFormEqualsSpectralRoute) {
  for (const auto& g : sample_graphs()) {
    const Matrix l = laplacian(g.adjacency);
    const auto eig = jacobi_eigh(l);
    const auto h = high_freq_area(l, g.features);
    for (Index j = 0; j < g.features.cols(); ++j) {
      const Vector xh = gdft(eig.eigenvectors, g.features.col(j));
      const double spectral = (eig.eigenvalues.array() * xh.array().square()).sum() / xh.squaredNorm();
      EXPECT_NEAR(h.per_dim(j), spectral, 1e-8);
      EXPECT_GE(h.per_dim(j), eig.eigenvalues.minCoeff() - 1e-12);
      EXPECT_LE(h.per_dim(j), eig.eigenvalues.maxCoeff() + 1e-12);
      EXPECT_NEAR(xh.norm(), g.features.col(j).norm(), 1e-10);
    }
  }
}

TEST(HighFrequencyArea, AlwaysWithinZeroTwo) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = toy_graph(25, 4, 2, seed, 0.05 + 0.03 * static_cast<double>(seed % 10));
    const auto h = high_freq_area(laplacian(g.adjacency), random_matrix(25, 4, seed + 500, -5.0, 5.0));
    EXPECT_GE(h.per_dim.minCoeff(), 0.0);
    EXPECT_LE(h.per_dim.maxCoeff(), 2.0);
  }
}

TEST(HighFrequencyArea, ZeroColumnsAreFlaggedAndSkipped) {
  const auto g = sample_graphs()[0];
  Matrix x = g.features;
  x.col(2).setZero();
  const auto h = high_freq_area(laplacian(g.adjacency), x);
  EXPECT_EQ(h.zero_columns, std::vector<int>{2});
  EXPECT_EQ(h.per_dim(2), 0.0);
  double s = 0.0;
  for (Index j = 0; j < x.cols(); ++j) s += h.per_dim(j);
  EXPECT_NEAR(h.mean, s / 5.0, 1e-15);
}

TEST(SpectralMetrics, InvariantUnderNodePermutation) {
  for (const auto& g : sample_graphs()) {
    for (std::uint64_t seed : {1, 2}) {
      const auto a = spectral_metrics(g).values();
      const auto b = spectral_metrics(permuted(g, seed)).values();
      for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-10) << SpectralReport::names()[k];
    }
  }
}

TEST(SpectralMetrics, RangesAndPowerIteration) {
  for (const auto& g : sample_graphs()) {
    const auto r = spectral_metrics(g);
    EXPECT_GE(r.low_freq_energy_fraction, 0.0);
    EXPECT_LE(r.low_freq_energy_fraction, 1.0);
    EXPECT_GE(r.high_freq_area_mean, 0.0);
    EXPECT_LE(r.high_freq_area_mean, 2.0);
    EXPECT_LE(r.spectral_radius, 2.0 + 1e-10);
    EXPECT_NEAR(power_iteration_radius(laplacian(g.adjacency)), r.spectral_radius, 1e-6);
  }
}

TEST(SpectralMetrics, MomentsMatchEnergyWeightedEigenvalueDistribution) {
  const auto g = sample_graphs()[1];
  const Matrix l = laplacian(g.adjacency);
  const auto eig = jacobi_eigh(l);
  double skew = 0.0, kurt = 0.0, low = 0.0;
  for (Index j = 0; j < g.features.cols(); ++j) {
    const Vector w = gdft(eig.eigenvectors, g.features.col(j)).array().square();
    const double total = w.sum();
    const double m = (w.array() * eig.eigenvalues.array()).sum() / total;
    const Eigen::ArrayXd c = eig.eigenvalues.array() - m;
    const double var = (w.array() * c.square()).sum() / total;
    skew += (w.array() * c.cube()).sum() / total / std::pow(var, 1.5);
    kurt += (w.array() * c.square().square()).sum() / total / (var * var) - 3.0;
    low += (eig.eigenvalues.array() < 1.0 - 1e-9).select(w.array(), 0.0).sum() / total;
  }
  const double d = static_cast<double>(g.features.cols());
  const auto r = spectral_metrics(g);
  EXPECT_NEAR(r.skewness, skew / d, 1e-8);
  EXPECT_NEAR(r.peakedness, kurt / d, 1e-8);
  EXPECT_NEAR(r.low_freq_energy_fraction, low / d, 1e-10);
}

TEST(SpectralMetrics, FidelityOfIdenticalReportsIsOne) {
  const auto r = spectral_metrics(sample_graphs()[2]);
  EXPECT_NEAR(fidelity_pearson(r, r), 1.0, 1e-12);
}

TEST(Stats, PearsonAndSpearmanHandValues) {
  std::vector<double> xs{1, 2, 3, 4, 5}, ys;
  for (double x : xs) ys.push_back(2 * x + 1);
  EXPECT_NEAR(pearson(xs, ys), 1.0, 1e-15);
  std::vector<double> cubes;
  for (double x : xs) cubes.push_back(std::exp(x));
  EXPECT_NEAR(spearman(xs, cubes), 1.0, 1e-15);
  std::vector<double> a{1, 2, 3}, b{3, 1, 2};
  EXPECT_NEAR(spearman(a, b), -0.5, 1e-15);
}

TEST(Stats, PearsonMatchesDirectCovarianceFormula) {
  std::vector<double> x{0.3, -1.2, 2.5, 0.0, 4.1, -0.7}, y{1.0, 0.2, 3.3, -0.4, 2.2, 0.9};
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    mx += x[i] / 6;
    my += y[i] / 6;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  EXPECT_NEAR(pearson(x, y), sxy / std::sqrt(sxx * syy), 1e-14);
}

TEST(Stats, TiesGetAverageRanks) {
  std::vector<double> x{10, 20, 20, 30};
  EXPECT_EQ(average_ranks(x), (std::vector<double>{1, 2.5, 2.5, 4}));
}

TEST(Stats, ZeroVarianceAndLengthErrors) {
  std::vector<double> c{1, 1, 1}, v{1, 2, 3}, short_v{1};
  EXPECT_THROW(pearson(c, v), ValidationError);
  EXPECT_THROW(spearman(v, c), ValidationError);
  EXPECT_THROW(pearson(short_v, short_v), ValidationError);
}

TEST(FreqGrad, DeterministicTable) {
  FreqGradConfig cfg;
  cfg.graph.num_nodes = 40;
  cfg.graph.num_features = 8;
  cfg.trials = 10;
  cfg.epochs = 5;
  cfg.seed = 3;
  const auto a = freq_grad_experiment(cfg), b = freq_grad_experiment(cfg);
  ASSERT_EQ(a.trials.size(), 10u);
  for (std::size_t k = 0; k < 10; ++k) {
    EXPECT_EQ(a.trials[k].grad_mag, b.trials[k].grad_mag);
    EXPECT_EQ(a.trials[k].bias, cfg.biases[k % 5]);
    EXPECT_GE(a.trials[k].s_high_mean, 0.0);
    EXPECT_LE(a.trials[k].s_high_mean, 2.0);
  }
  EXPECT_EQ(a.spearman, b.spearman);
}

TEST(FreqGrad, ConstantFeatureGeneratorHasUndefinedCorrelation) {
  FreqGradConfig cfg;
  cfg.graph.num_nodes = 30;
  cfg.graph.num_features = 4;
  cfg.trials = 10;
  cfg.epochs = 3;
  cfg.biases = {2.0};
  cfg.fixed_feature_seed = 17;
  EXPECT_THROW(freq_grad_experiment(cfg), ValidationError);
}

TEST(FreqGrad, TooFewTrialsIsRejected) {
  FreqGradConfig cfg;
  cfg.trials = 5;
  EXPECT_THROW(freq_grad_experiment(cfg), ValidationError);
}
