#include "fgad/model.hpp"

#include <string>
#include <utility>

#include "fgad/error.hpp"

namespace fgad {

std::vector<std::size_t> ModelDims::backbone_dims() const {
  std::vector<std::size_t> d{input_dim};
  for (std::size_t k = 0; k < layers; ++k) d.push_back(hidden_dim);
  return d;
}

std::vector<std::size_t> ModelDims::generator_dims() const {
  std::vector<std::size_t> d{input_dim};
  for (std::size_t k = 0; k + 1 < layers; ++k) d.push_back(hidden_dim);
  d.push_back(latent_dim);
  return d;
}

std::vector<std::size_t> ModelDims::teacher_dims() const {
  std::vector<std::size_t> d{embedding_dim()};
  d.insert(d.end(), teacher_hidden.begin(), teacher_hidden.end());
  d.push_back(2);
  return d;
}

std::vector<std::size_t> ModelDims::student_dims() const {
  std::vector<std::size_t> d{embedding_dim()};
  d.insert(d.end(), student_hidden.begin(), student_hidden.end());
  d.push_back(2);
  return d;
}

void ModelDims::validate() const {
  if (input_dim == 0) throw ParameterError("input_dim must be positive");
  if (layers < 1) throw ParameterError("GIN layer count must be at least 1");
  if (hidden_dim == 0 || latent_dim == 0) throw ParameterError("hidden and latent dims must be positive");
  for (std::size_t w : teacher_hidden)
    if (w == 0) throw ParameterError("teacher head has a zero-width layer");
  for (std::size_t w : student_hidden)
    if (w == 0) throw ParameterError("student head has a zero-width layer");
  if (teacher_hidden.size() != student_hidden.size() + 1) {
    throw ParameterError("teacher head must have exactly one more hidden layer than the student head");
  }
}

std::string_view group_name(Group g) {
  switch (g) {
    case Group::GeneratorMu: return "generator_mu";
    case Group::GeneratorSigma: return "generator_sigma";
    case Group::Backbone: return "backbone";
    case Group::TeacherHead: return "teacher_head";
    case Group::StudentHead: return "student_head";
  }
  return "unknown";
}

Group group_from_name(std::string_view name) {
  for (Group g : kAllGroups)
    if (group_name(g) == name) return g;
  throw FormatError("unknown parameter group '" + std::string(name) + "'");
}

LocalModel::LocalModel(const ModelDims& dims) : dims_(dims) {
  dims_.validate();
  const std::array<std::vector<std::size_t>, kGroupCount> shapes{dims_.generator_dims(), dims_.generator_dims(),
                                                                 dims_.backbone_dims(), dims_.teacher_dims(),
                                                                 dims_.student_dims()};
  for (Group g : kAllGroups) {
    const auto i = static_cast<std::size_t>(g);
    groups_[i] = LayerGroup::with_dims(std::string(group_name(g)), shapes[i]);
    auto tensors = std::as_const(groups_[i]).tensors();
    adam_[i] = AdamState::for_shapes(tensors);
  }
}

LocalModel LocalModel::initialized(const ModelDims& dims, std::uint64_t seed) {
  LocalModel m(dims);
  m.init_parameters(seed);
  return m;
}

void LocalModel::init_parameters(std::uint64_t seed) {
  for (Group g : kAllGroups) init_group(g, seed);
}

void LocalModel::init_group(Group g, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(g)}));
  glorot_uniform(group(g), rng);
  auto tensors = std::as_const(group(g)).tensors();
  adam(g) = AdamState::for_shapes(tensors);
}

std::size_t LocalModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& g : groups_) n += g.parameter_count();
  return n;
}

BoundModel bind(ad::Tape& tape, const LocalModel& model, const GroupMask& trainable) {
  BoundModel b;
  for (Group g : kAllGroups) {
    const auto i = static_cast<std::size_t>(g);
    b.groups[i] = bind(tape, model.group(g), trainable[i]);
  }
  return b;
}

ad::Var self_loop_adjacency(ad::Tape& tape, const Graph& g) {
  Matrix a = g.adjacency;
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += 1.0;
  return tape.constant(std::move(a));
}

ad::Var self_loop_adjacency(ad::Var weighted) {
  const std::size_t n = weighted.rows();
  Matrix off_diag = Matrix::ones(n, n);
  for (std::size_t i = 0; i < n; ++i) off_diag(i, i) = 0.0;
  ad::Tape& tape = weighted.tape();
  return ad::add(ad::mul(weighted, tape.constant(std::move(off_diag))), tape.constant(Matrix::identity(n)));
}

GinOutput gin_forward(const BoundGroup& layers, ad::Var adjacency, ad::Var features, bool linear_last) {
  if (layers.empty()) throw ParameterError("gin_forward: no layers");
  if (adjacency.rows() != adjacency.cols() || adjacency.rows() != features.rows()) {
    throw DimensionError("gin_forward: adjacency " + adjacency.value().shape_string() + " vs features " +
                         features.value().shape_string());
  }
  if (features.cols() != layers.front().weight.rows()) {
    throw DimensionError("gin_forward: feature dim " + std::to_string(features.cols()) + " but backbone expects " +
                         std::to_string(layers.front().weight.rows()));
  }
  GinOutput out;
  ad::Var h = features;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    ad::Var pre = dense(ad::matmul(adjacency, h), layers[k]);
    const bool last = k + 1 == layers.size();
    h = (last && linear_last) ? pre : ad::leaky_relu(pre);
    out.layer_outputs.push_back(h);
  }
  out.node_embeddings = out.layer_outputs.size() == 1 ? out.layer_outputs.front() : ad::concat_cols(out.layer_outputs);
  out.graph_embedding = ad::sum_rows(out.node_embeddings);
  return out;
}

GinOutput gin_forward(const BoundModel& model, ad::Tape& tape, const Graph& g) {
  return gin_forward(model[Group::Backbone], self_loop_adjacency(tape, g), tape.constant(g.features));
}

Matrix draw_noise(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix eps(rows, cols);
  for (double& e : eps.values()) e = n(rng);
  return eps;
}

Matrix draw_noise(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  return draw_noise(rows, cols, rng);
}

GeneratorOutput generator_forward(const BoundModel& model, ad::Var adjacency, ad::Var features, const Matrix& noise) {
  GeneratorOutput out;
  out.mu = gin_forward(model[Group::GeneratorMu], adjacency, features, true).layer_outputs.back();
  ad::Var raw_logvar = gin_forward(model[Group::GeneratorSigma], adjacency, features, true).layer_outputs.back();
  if (!noise.same_shape(out.mu.value())) {
    throw DimensionError("generator noise " + noise.shape_string() + " does not match latent " +
                         out.mu.value().shape_string());
  }
  out.logvar = ad::clamp(raw_logvar, -kLogVarBound, kLogVarBound);
  out.sigma = ad::exp(ad::scale(out.logvar, 0.5));
  ad::Tape& tape = adjacency.tape();
  out.z = ad::add(out.mu, ad::mul(tape.constant(noise), out.sigma));
  out.logits = ad::matmul(out.z, ad::transpose(out.z));
  out.a_tilde = ad::sigmoid(out.logits);
  return out;
}

GeneratorOutput generator_forward(const BoundModel& model, ad::Tape& tape, const Graph& g, const Matrix& noise) {
  return generator_forward(model, self_loop_adjacency(tape, g), tape.constant(g.features), noise);
}

ad::Var head_forward(const BoundGroup& head, ad::Var embedding) {
  if (head.empty()) throw ParameterError("head_forward: empty head");
  if (embedding.cols() != head.front().weight.rows()) {
    throw DimensionError("head expects width " + std::to_string(head.front().weight.rows()) + ", got " +
                         std::to_string(embedding.cols()));
  }
  ad::Var h = embedding;
  for (std::size_t l = 0; l < head.size(); ++l) {
    h = dense(h, head[l]);
    if (l + 1 < head.size()) h = ad::leaky_relu(h);
  }
  return h;
}

Matrix threshold_adjacency(const Matrix& a_tilde, double cut) {
  Matrix a(a_tilde.rows(), a_tilde.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) = (i != j && a_tilde(i, j) > cut) ? 1.0 : 0.0;
  return a;
}

}  // namespace fgad
