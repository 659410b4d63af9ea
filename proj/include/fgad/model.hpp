#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "fgad/adam.hpp"
#include "fgad/autodiff.hpp"
#include "fgad/graph.hpp"
#include "fgad/layers.hpp"

namespace fgad {

struct ModelDims {
  std::size_t input_dim = 65;
  std::size_t layers = 3;        // GIN depth K
  std::size_t hidden_dim = 64;
  std::size_t latent_dim = 64;   // generator d_z
  std::vector<std::size_t> teacher_hidden{192, 128, 64};
  std::vector<std::size_t> student_hidden{128, 64};

  /// Width of the concatenated backbone output, K * hidden_dim.
  std::size_t embedding_dim() const noexcept { return layers * hidden_dim; }
  std::vector<std::size_t> backbone_dims() const;
  std::vector<std::size_t> generator_dims() const;
  std::vector<std::size_t> teacher_dims() const;
  std::vector<std::size_t> student_dims() const;
  void validate() const;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

enum class Group : std::size_t { GeneratorMu = 0, GeneratorSigma, Backbone, TeacherHead, StudentHead };
inline constexpr std::size_t kGroupCount = 5;
inline constexpr std::array<Group, kGroupCount> kAllGroups{Group::GeneratorMu, Group::GeneratorSigma, Group::Backbone,
                                                           Group::TeacherHead, Group::StudentHead};

std::string_view group_name(Group g);
Group group_from_name(std::string_view name);

/// Which groups are leaves with requires_grad on a given tape.
using GroupMask = std::array<bool, kGroupCount>;
inline constexpr GroupMask kTrainAll{true, true, true, true, true};
inline constexpr GroupMask kTrainNone{false, false, false, false, false};

/// One client's parameters: generator (two GIN encoders), the backbone
/// shared by both heads, the teacher head and the student head, plus one
/// Adam state per group.
class LocalModel {
 public:
  LocalModel() = default;
  /// Zero-filled parameters with the given shapes.
  explicit LocalModel(const ModelDims& dims);

  static LocalModel initialized(const ModelDims& dims, std::uint64_t seed);
  /// Re-draws every group from `seed`; equivalent to init_group(g, seed) for all g.
  void init_parameters(std::uint64_t seed);
  /// Glorot weights, zero bias and zero Adam state for one group. The group
  /// stream depends only on (seed, group), so groups can be seeded apart.
  void init_group(Group g, std::uint64_t seed);

  const ModelDims& dims() const noexcept { return dims_; }
  LayerGroup& group(Group g) { return groups_[static_cast<std::size_t>(g)]; }
  const LayerGroup& group(Group g) const { return groups_[static_cast<std::size_t>(g)]; }
  AdamState& adam(Group g) { return adam_[static_cast<std::size_t>(g)]; }
  const AdamState& adam(Group g) const { return adam_[static_cast<std::size_t>(g)]; }

  std::size_t parameter_count() const;
  std::size_t parameter_count(Group g) const { return group(g).parameter_count(); }

 private:
  ModelDims dims_;
  std::array<LayerGroup, kGroupCount> groups_;
  std::array<AdamState, kGroupCount> adam_;
};

/// A LocalModel's parameters placed on a tape.
struct BoundModel {
  std::array<BoundGroup, kGroupCount> groups;
  const BoundGroup& operator[](Group g) const { return groups[static_cast<std::size_t>(g)]; }
};

BoundModel bind(ad::Tape& tape, const LocalModel& model, const GroupMask& trainable);

struct GinOutput {
  ad::Var node_embeddings;   // n x (K * hidden)
  ad::Var graph_embedding;   // 1 x (K * hidden), sum readout
  std::vector<ad::Var> layer_outputs;
};

/// Constant A + I for a stored graph.
ad::Var self_loop_adjacency(ad::Tape& tape, const Graph& g);
/// Continuous adjacency prepared for message passing: diagonal replaced by
/// the self-connection, off-diagonal weights kept.
ad::Var self_loop_adjacency(ad::Var weighted);

/// K rounds of H <- act((A_hat H) W + b) over a GIN stack. `adjacency` must
/// already contain self-connections. With linear_last the final layer skips
/// the activation (used by the generator encoders).
GinOutput gin_forward(const BoundGroup& layers, ad::Var adjacency, ad::Var features, bool linear_last = false);

/// Backbone forward on a stored graph.
GinOutput gin_forward(const BoundModel& model, ad::Tape& tape, const Graph& g);

struct GeneratorOutput {
  ad::Var mu;       // n x d_z
  ad::Var logvar;   // n x d_z
  ad::Var sigma;    // exp(logvar / 2)
  ad::Var z;        // mu + eps * sigma
  ad::Var logits;   // z z^T
  ad::Var a_tilde;  // sigmoid(logits), n x n
};

inline constexpr double kLogVarBound = 10.0;

/// Standard-normal reparameterisation noise.
Matrix draw_noise(std::size_t rows, std::size_t cols, Rng& rng);
Matrix draw_noise(std::size_t rows, std::size_t cols, std::uint64_t seed);

/// VGAE generator: mu and log-variance encoders over (A + I, X), sample
/// z = mu + eps * sigma with eps treated as a constant, decode a_tilde.
GeneratorOutput generator_forward(const BoundModel& model, ad::Var adjacency, ad::Var features, const Matrix& noise);
GeneratorOutput generator_forward(const BoundModel& model, ad::Tape& tape, const Graph& g, const Matrix& noise);

/// MLP head: leaky_relu between layers, raw logits out of the last one.
ad::Var head_forward(const BoundGroup& head, ad::Var embedding);
inline ad::Var teacher_logits(const BoundModel& model, ad::Var embedding) {
  return head_forward(model[Group::TeacherHead], embedding);
}
inline ad::Var student_logits(const BoundModel& model, ad::Var embedding) {
  return head_forward(model[Group::StudentHead], embedding);
}

/// Binary view of a generated adjacency (threshold 0.5, zero diagonal),
/// for diagnostics only; training always uses the continuous matrix.
Matrix threshold_adjacency(const Matrix& a_tilde, double cut = 0.5);

}  // namespace fgad
