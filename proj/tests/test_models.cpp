#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "fgad/error.hpp"
#include "fgad/federation.hpp"
#include "fgad/model.hpp"
#include "fgad/tudataset.hpp"
#include "support.hpp"

using namespace fgad;
using fgad::test::random_graph;
using fgad::test::small_dims;

namespace {

Graph triangle() {
  Graph g;
  g.adjacency = Matrix{{0, 1, 1}, {1, 0, 1}, {1, 1, 0}};
  g.features = Matrix::ones(3, 1);
  return g;
}

Graph permuted(const Graph& g, const std::vector<std::size_t>& perm) {
  Graph out = g;
  const std::size_t n = g.node_count();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.adjacency(perm[i], perm[j]) = g.adjacency(i, j);
    for (std::size_t k = 0; k < g.feature_dim(); ++k) out.features(perm[i], k) = g.features(i, k);
  }
  return out;
}

BoundGroup single_layer(ad::Tape& tape, const Matrix& w) {
  LayerGroup grp;
  grp.layers.push_back({w, Matrix(1, w.cols())});
  return bind(tape, grp, false);
}

}  // namespace

TEST_CASE("default dims give the documented head shapes") {
  const ModelDims d;
  CHECK(d.embedding_dim() == 192);
  CHECK(d.teacher_dims() == std::vector<std::size_t>{192, 192, 128, 64, 2});
  CHECK(d.student_dims() == std::vector<std::size_t>{192, 128, 64, 2});
  CHECK(d.teacher_dims().size() == d.student_dims().size() + 1);
  const LocalModel m(d);
  CHECK(m.parameter_count(Group::StudentHead) == 33090);
  CHECK(m.parameter_count() ==
        std::accumulate(kAllGroups.begin(), kAllGroups.end(), std::size_t{0},
                        [&](std::size_t s, Group g) { return s + m.parameter_count(g); }));

  ModelDims bad = d;
  bad.teacher_hidden = {128, 64};
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = d;
  bad.layers = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("gin forward hand examples") {
  SUBCASE("single isolated node") {
    ad::Tape tape;
    Graph g;
    g.adjacency = Matrix(1, 1);
    g.features = Matrix{{1}};
    const BoundGroup layer = single_layer(tape, Matrix{{1}});
    const GinOutput out = gin_forward(layer, self_loop_adjacency(tape, g), tape.constant(g.features));
    CHECK(out.graph_embedding.value() == Matrix{{1}});
  }
  SUBCASE("triangle pre-activation is 3 per node") {
    ad::Tape tape;
    const Graph g = triangle();
    const BoundGroup layer = single_layer(tape, Matrix{{1}});
    const GinOutput out = gin_forward(layer, self_loop_adjacency(tape, g), tape.constant(g.features));
    CHECK(out.node_embeddings.value() == Matrix{{3}, {3}, {3}});
    CHECK(out.graph_embedding.value() == Matrix{{9}});
  }
  SUBCASE("continuous adjacency weights") {
    ad::Tape tape;
    ad::Var a = self_loop_adjacency(tape.constant(Matrix{{0.5, 0.5}, {0.5, 0.5}}));
    CHECK(a.value() == Matrix{{1, 0.5}, {0.5, 1}});
    const BoundGroup layer = single_layer(tape, Matrix{{1}});
    const GinOutput out = gin_forward(layer, a, tape.constant(Matrix::ones(2, 1)));
    CHECK(out.node_embeddings.value() == Matrix{{1.5}, {1.5}});
  }
  SUBCASE("negative pre-activations leak") {
    ad::Tape tape;
    const Graph g = triangle();
    const BoundGroup layer = single_layer(tape, Matrix{{-1}});
    const GinOutput out = gin_forward(layer, self_loop_adjacency(tape, g), tape.constant(g.features));
    CHECK(out.node_embeddings.value()(0, 0) == doctest::Approx(-0.03).epsilon(1e-12));
  }
  SUBCASE("feature width mismatch") {
    ad::Tape tape;
    const Graph g = triangle();
    const BoundGroup layer = single_layer(tape, Matrix(2, 1));
    CHECK_THROWS_AS(gin_forward(layer, self_loop_adjacency(tape, g), tape.constant(g.features)), DimensionError);
  }
}

TEST_CASE("backbone output concatenates every layer") {
  std::mt19937_64 rng(3);
  const ModelDims d = small_dims();
  const LocalModel m = LocalModel::initialized(d, 7);
  const Graph g = random_graph(5, d.input_dim, rng);
  ad::Tape tape;
  const BoundModel bm = fgad::bind(tape, m, kTrainNone);
  const GinOutput out = gin_forward(bm, tape, g);
  CHECK(out.node_embeddings.value().cols() == d.embedding_dim());
  CHECK(out.graph_embedding.value().rows() == 1);
  REQUIRE(out.layer_outputs.size() == d.layers);
  const Matrix& last = out.layer_outputs.back().value();
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < d.hidden_dim; ++k)
      CHECK(out.node_embeddings.value()(i, d.hidden_dim + k) == last(i, k));
}

TEST_CASE("graph embeddings are permutation invariant") {
  std::mt19937_64 rng(11);
  const ModelDims d = small_dims();
  const LocalModel m = LocalModel::initialized(d, 5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + trial % 6;
    const Graph g = random_graph(n, d.input_dim, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Graph h = permuted(g, perm);
    ad::Tape tape;
    const BoundModel bm = fgad::bind(tape, m, kTrainNone);
    const Matrix eg = gin_forward(bm, tape, g).graph_embedding.value();
    const Matrix eh = gin_forward(bm, tape, h).graph_embedding.value();
    for (std::size_t k = 0; k < eg.size(); ++k) CHECK(std::abs(eg.values()[k] - eh.values()[k]) < 1e-9);
    // node level: equivariant
    const Matrix ng = gin_forward(bm, tape, g).node_embeddings.value();
    const Matrix nh = gin_forward(bm, tape, h).node_embeddings.value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < ng.cols(); ++k) CHECK(std::abs(ng(i, k) - nh(perm[i], k)) < 1e-9);
  }
}

TEST_CASE("generator output properties") {
  std::mt19937_64 rng(19);
  const ModelDims d = small_dims();
  const LocalModel m = LocalModel::initialized(d, 9);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = random_graph(2 + trial % 7, d.input_dim, rng);
    ad::Tape tape;
    const BoundModel bm = fgad::bind(tape, m, kTrainNone);
    const Matrix eps = draw_noise(g.node_count(), d.latent_dim, static_cast<std::uint64_t>(trial));
    const GeneratorOutput out = generator_forward(bm, tape, g, eps);
    const Matrix& a = out.a_tilde.value();
    const Matrix& x = out.logits.value();
    CHECK(a.rows() == g.node_count());
    CHECK(a.cols() == g.node_count());
    CHECK(out.mu.value().cols() == d.latent_dim);
    CHECK(out.sigma.value().rows() == g.node_count());
    for (double s : out.sigma.value().values()) CHECK(s > 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < a.cols(); ++j) {
        CHECK(a(i, j) == a(j, i));
        CHECK(a(i, j) >= 0.0);
        CHECK(a(i, j) <= 1.0);
        // sigmoid rounds to exactly 0 or 1 in double once |logit| > ~37
        if (std::abs(x(i, j)) < 30.0) {
          CHECK(a(i, j) > 0.0);
          CHECK(a(i, j) < 1.0);
        }
      }
  }
}

TEST_CASE("zero noise gives z = mu; zero mu and noise give 0.5 everywhere") {
  std::mt19937_64 rng(23);
  const ModelDims d = small_dims();
  LocalModel m = LocalModel::initialized(d, 1);
  const Graph g = random_graph(4, d.input_dim, rng);
  {
    ad::Tape tape;
    const BoundModel bm = fgad::bind(tape, m, kTrainNone);
    const GeneratorOutput out = generator_forward(bm, tape, g, Matrix(4, d.latent_dim));
    CHECK(out.z.value() == out.mu.value());
  }
  for (Matrix* t : m.group(Group::GeneratorMu).tensors()) t->fill(0.0);
  ad::Tape tape;
  const BoundModel bm = fgad::bind(tape, m, kTrainNone);
  const GeneratorOutput out = generator_forward(bm, tape, g, Matrix(4, d.latent_dim));
  CHECK(out.a_tilde.value() == Matrix(4, 4, 0.5));
}

TEST_CASE("logvar is clamped before exponentiation") {
  std::mt19937_64 rng(2);
  const ModelDims d = small_dims();
  LocalModel m = LocalModel::initialized(d, 1);
  for (Matrix* t : m.group(Group::GeneratorSigma).tensors()) t->fill(100.0);
  const Graph g = random_graph(4, d.input_dim, rng);
  ad::Tape tape;
  const BoundModel bm = fgad::bind(tape, m, kTrainNone);
  const GeneratorOutput out = generator_forward(bm, tape, g, Matrix(4, d.latent_dim));
  for (double lv : out.logvar.value().values()) CHECK(lv <= kLogVarBound);
}

TEST_CASE("heads: zero last layers give zero logits, equivalent heads agree") {
  std::mt19937_64 rng(4);
  ModelDims d = small_dims();
  d.teacher_hidden = {5, 5};
  d.student_hidden = {5};
  LocalModel m = LocalModel::initialized(d, 3);
  const Graph g = random_graph(6, d.input_dim, rng);

  LocalModel zeroed = m;
  for (Group grp : {Group::TeacherHead, Group::StudentHead}) {
    DenseLayer& last = zeroed.group(grp).layers.back();
    last.weight.fill(0.0);
    last.bias.fill(0.0);
  }
  {
    ad::Tape tape;
    const BoundModel bm = fgad::bind(tape, zeroed, kTrainNone);
    ad::Var e = gin_forward(bm, tape, g).graph_embedding;
    CHECK(teacher_logits(bm, e).value() == Matrix(1, 2));
    CHECK(student_logits(bm, e).value() == Matrix(1, 2));
  }

  // Teacher = student head with an identity layer inserted; positive
  // activations pass leaky_relu unchanged, so make its input non-negative.
  LocalModel eq = m;
  LayerGroup& t = eq.group(Group::TeacherHead);
  const LayerGroup& s = eq.group(Group::StudentHead);
  for (DenseLayer& l : eq.group(Group::StudentHead).layers) {
    for (double& w : l.weight.values()) w = std::abs(w);
  }
  for (Matrix* p : eq.group(Group::Backbone).tensors()) {
    for (double& w : p->values()) w = std::abs(w);
  }
  t.layers[0] = s.layers[0];
  t.layers[1].weight = Matrix::identity(5);
  t.layers[1].bias = Matrix(1, 5);
  t.layers[2] = s.layers[1];
  ad::Tape tape;
  const BoundModel bm = fgad::bind(tape, eq, kTrainNone);
  const Graph pos = [&] {
    Graph p = g;
    for (double& x : p.features.values()) x = std::abs(x);
    return p;
  }();
  ad::Var e = gin_forward(bm, tape, pos).graph_embedding;
  CHECK(teacher_logits(bm, e).value() == student_logits(bm, e).value());
}

TEST_CASE("same graph and parameters give identical logits") {
  std::mt19937_64 rng(8);
  const ModelDims d = small_dims();
  const LocalModel m = LocalModel::initialized(d, 2);
  const Graph g = random_graph(5, d.input_dim, rng);
  auto logits = [&] {
    ad::Tape tape;
    const BoundModel bm = fgad::bind(tape, m, kTrainNone);
    return teacher_logits(bm, gin_forward(bm, tape, g).graph_embedding).value();
  };
  CHECK(logits() == logits());
}

TEST_CASE("one joint objective runs the backbone once per input graph") {
  std::mt19937_64 rng(6);
  const ModelDims d = small_dims();
  const LocalModel m = LocalModel::initialized(d, 4);
  std::vector<Graph> graphs;
  for (int i = 0; i < 3; ++i) graphs.push_back(random_graph(5, d.input_dim, rng));
  std::vector<const Graph*> batch;
  std::vector<Matrix> noise;
  for (const Graph& g : graphs) {
    batch.push_back(&g);
    noise.push_back(draw_noise(5, d.latent_dim, rng()));
  }
  ad::Tape tape;
  TrainSettings settings;
  batch_objective(tape, m, kTrainAll, batch, noise, settings, Phase::Joint);
  const std::size_t K = d.layers, B = batch.size();
  const std::size_t T = d.teacher_dims().size() - 1, S = d.student_dims().size() - 1;
  // generator: 2 encoders x K x (aggregate + transform) + z z^T; backbone on
  // the real and on the generated graph; heads on stacked embeddings.
  const std::size_t expected = B * (2 * K * 2 + 1) + B * 2 * (K * 2) + 2 * T + S;
  CHECK(tape.count(ad::Op::MatMul) == expected);
}

TEST_CASE("initialisation") {
  const ModelDims d;
  const LocalModel a = LocalModel::initialized(d, 42);
  const LocalModel b = LocalModel::initialized(d, 42);
  const LocalModel c = LocalModel::initialized(d, 43);
  for (Group g : kAllGroups) {
    const auto ta = a.group(g).tensors();
    const auto tb = b.group(g).tensors();
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i] == *tb[i]);
    for (const DenseLayer& l : a.group(g).layers)
      for (double v : l.bias.values()) CHECK(v == 0.0);
    CHECK(a.adam(g).step == 0);
  }
  CHECK(a.group(Group::Backbone).layers[0].weight != c.group(Group::Backbone).layers[0].weight);

  // Glorot uniform variance 2 / (fan_in + fan_out) over a 100 x 100 layer.
  LayerGroup big = LayerGroup::with_dims("big", std::vector<std::size_t>{100, 100});
  Rng rng(1);
  glorot_uniform(big, rng);
  const auto& w = big.layers[0].weight.values();
  const double bound = std::sqrt(6.0 / 200.0);
  double mean = 0.0, var = 0.0;
  for (double x : w) {
    CHECK(std::abs(x) <= bound);
    mean += x;
  }
  mean /= static_cast<double>(w.size());
  for (double x : w) var += (x - mean) * (x - mean);
  var /= static_cast<double>(w.size());
  CHECK(std::abs(var - 2.0 / 200.0) / (2.0 / 200.0) < 0.1);
}

TEST_CASE("threshold adjacency is binary with a zero diagonal") {
  const Matrix a{{0.9, 0.6, 0.4}, {0.6, 0.9, 0.5}, {0.4, 0.5, 0.2}};
  const Matrix t = threshold_adjacency(a);
  CHECK(t == Matrix{{0, 1, 0}, {1, 0, 0}, {0, 0, 0}});
}
