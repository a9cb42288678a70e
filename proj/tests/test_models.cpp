#include <gtest/gtest.h>

#include "support.hpp"

using namespace gcond;
using namespace gtest_support;
namespace ad = gcond::ad;

namespace {

// Plain Eigen reference forward pass and loss.
Matrix reference_logits(const ModelSpec& spec, const std::vector<Matrix>& w, const Matrix& a_hat, const Matrix& x) {
  auto relu = [](const Matrix& m) { return Matrix(m.cwiseMax(0.0)); };
  switch (spec.arch) {
    case Arch::SGC: {
      Matrix h = x;
      for (int k = 0; k < spec.k_hops; ++k) h = a_hat * h;
      return h * w[0];
    }
    case Arch::GCN: {
      Matrix h = x;
      for (std::size_t l = 0; l < w.size(); ++l) {
        h = a_hat * (h * w[l]);
        if (l + 1 < w.size()) h = relu(h);
      }
      return h;
    }
    case Arch::MLP: {
      Matrix h = x;
      for (std::size_t l = 0; l < w.size(); ++l) {
        h = h * w[l];
        if (l + 1 < w.size()) h = relu(h);
      }
      return h;
    }
  }
  return {};
}

double reference_loss(const Matrix& logits, const std::vector<int>& labels, const std::vector<char>& mask) {
  double total = 0.0;
  int count = 0;
  for (Index i = 0; i < logits.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    total += lse - logits(i, labels[static_cast<std::size_t>(i)]);
    ++count;
  }
  return total / count;
}

ModelSpec spec_for(Arch arch, int d, int c, int layers = 2) {
  ModelSpec s;
  s.arch = arch;
  s.k_hops = 2;
  s.num_layers = layers;
  s.hidden_units = 5;
  s.num_features = d;
  s.num_classes = c;
  return s;
}

}  // namespace

class ModelGradient : public ::testing::TestWithParam<std::tuple<Arch, int>> {};

TEST_P(ModelGradient, ClassLossGradMatchesReferenceFiniteDifferences) {
  const auto [arch, layers] = GetParam();
  const auto g = toy_graph(20, 4, 3, 21);
  const ModelSpec spec = spec_for(arch, 4, 3, layers);
  const ModelParams p = init_params(spec, 5);
  const StaticGraph sg = StaticGraph::prepare(spec, g);
  const Matrix a_hat = normalize_adjacency(g.adjacency, true);
  const auto train = GraphDataset::mask_of(g.splits.train, g.num_nodes);

  for (int c = 0; c < 3; ++c) {
    const auto mask = mask_for_class(g.labels, c, train);
    if (std::count(mask.begin(), mask.end(), 1) == 0) continue;
    ad::Arena ar;
    auto w = weight_leaves(ar, p);
    auto grads = class_loss_grad(spec, w, sg.input(ar), g.labels, mask, false);
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      auto f = [&](const Matrix& wl) {
        auto ws = p.weights;
        ws[l] = wl;
        return reference_loss(reference_logits(spec, ws, a_hat, g.features), g.labels, mask);
      };
      EXPECT_LE(max_rel_error(grads[l].value(), numeric_gradient(f, p.weights[l])), 1e-5)
          << arch_name(arch) << " class " << c << " layer " << l;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Architectures, ModelGradient,
                         ::testing::Values(std::make_tuple(Arch::SGC, 1), std::make_tuple(Arch::GCN, 2),
                                           std::make_tuple(Arch::GCN, 3), std::make_tuple(Arch::MLP, 2),
                                           std::make_tuple(Arch::MLP, 3)));

TEST(Models, ForwardMatchesReferenceForEveryArchitecture) {
  const auto g = toy_graph(18, 6, 3, 22);
  const Matrix a_hat = normalize_adjacency(g.adjacency, true);
  for (Arch arch : {Arch::SGC, Arch::GCN, Arch::MLP}) {
    const ModelSpec spec = spec_for(arch, 6, 3);
    const ModelParams p = init_params(spec, 6);
    const Matrix got = predict_logits(StaticGraph::prepare(spec, g), p);
    EXPECT_LE((got - reference_logits(spec, p.weights, a_hat, g.features)).cwiseAbs().maxCoeff(), 1e-12)
        << arch_name(arch);
  }
}

TEST(Models, DensePropagatorAgreesWithCachedSparsePath) {
  const auto g = toy_graph(15, 4, 2, 23);
  for (Arch arch : {Arch::SGC, Arch::GCN}) {
    const ModelSpec spec = spec_for(arch, 4, 2);
    const ModelParams p = init_params(spec, 7);
    ad::Arena ar;
    auto w = weight_leaves(ar, p, false);
    GraphInput in{Propagator::dense(ar.constant(normalize_adjacency(g.adjacency, true))), ar.constant(g.features), 0};
    const Matrix dense = forward(spec, w, in).value();
    EXPECT_LE((dense - predict_logits(StaticGraph::prepare(spec, g), p)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Models, LayerShapes) {
  auto s = spec_for(Arch::GCN, 7, 3, 3);
  std::vector<std::pair<int, int>> want{{7, 5}, {5, 5}, {5, 3}};
  EXPECT_EQ(layer_shapes(s), want);
  s.arch = Arch::SGC;
  want = {{7, 3}};
  EXPECT_EQ(layer_shapes(s), want);
}

TEST(Models, GlorotInitIsBoundedAndDeterministic) {
  const auto s = spec_for(Arch::GCN, 10, 4);
  const auto a = init_params(s, 1), b = init_params(s, 1), c = init_params(s, 2);
  EXPECT_EQ(a.weights[0], b.weights[0]);
  EXPECT_NE(a.weights[0], c.weights[0]);
  const double bound = std::sqrt(6.0 / 15.0);
  EXPECT_LE(a.weights[0].cwiseAbs().maxCoeff(), bound);
}

TEST(Models, InvalidSpecsAreRejected) {
  auto s = spec_for(Arch::GCN, 4, 2, 4);
  EXPECT_THROW(validate(s), ValidationError);
  s = spec_for(Arch::MLP, 0, 2);
  EXPECT_THROW(validate(s), ValidationError);
  EXPECT_THROW(parse_arch("gat"), ValidationError);
}

TEST(Models, WrongFeatureWidthIsRejected) {
  const auto g = toy_graph(10, 4, 2, 24);
  const ModelSpec spec = spec_for(Arch::MLP, 5, 2);
  const ModelParams p = init_params(spec, 1);
  ad::Arena ar;
  auto w = weight_leaves(ar, p);
  GraphInput in{Propagator{}, ar.constant(g.features), 0};
  EXPECT_THROW(forward(spec, w, in), ValidationError);
}

TEST(Models, EmptyClassMaskIsRejected) {
  const auto g = toy_graph(10, 4, 2, 25);
  const ModelSpec spec = spec_for(Arch::SGC, 4, 2);
  const StaticGraph sg = StaticGraph::prepare(spec, g);
  ad::Arena ar;
  auto w = weight_leaves(ar, init_params(spec, 1));
  std::vector<char> none(10, 0);
  EXPECT_THROW(class_loss_grad(spec, w, sg.input(ar), g.labels, none, false), ValidationError);
}

TEST(Models, AccuracyCountsMatches) {
  Matrix logits(4, 2);
  logits << 1, 0, 0, 1, 2, 1, 0, 3;
  std::vector<int> labels{0, 1, 1, 1};
  std::vector<int> nodes{0, 1, 2, 3};
  EXPECT_DOUBLE_EQ(accuracy(logits, labels, nodes), 0.75);
  std::vector<int> some{2};
  EXPECT_DOUBLE_EQ(accuracy(logits, labels, some), 0.0);
}
