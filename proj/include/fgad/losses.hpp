#pragma once

#include "fgad/autodiff.hpp"

namespace fgad {

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before a log.
inline constexpr double kProbClamp = 1e-7;

/// Scalar loss components of one client step (or a mean over steps).
struct LossBreakdown {
  double l_g = 0.0;
  double l_ad = 0.0;
  double l_kd = 0.0;
  double l_prior = 0.0;  // optional latent prior term, folded into l_g's weight
  double total = 0.0;
  double lambda = 1.0;
  double gamma = 1.0;
  double tau = 1.0;
};

/// Binary cross-entropy between a target adjacency and a generated one,
/// averaged over the n^2 entries (or summed when normalized is false).
ad::Var generator_loss(ad::Var target, ad::Var a_tilde, bool normalized = true);

/// The same cross-entropy written on the decoder logits, a_tilde =
/// sigmoid(logits): softplus(x) - t x per entry. No clamp, so saturated
/// entries keep their gradient; training uses this form.
ad::Var generator_loss_logits(ad::Var target, ad::Var logits, bool normalized = true);

/// Mean cross-entropy of each logits row against a fixed class index.
ad::Var cross_entropy(ad::Var logits, std::size_t class_index);

/// Normal rows are class 1, generated rows class 0; the two means are
/// averaged with equal weight.
ad::Var detector_loss(ad::Var logits_normal, ad::Var logits_generated);

/// Mean over rows of KL(softmax(q_t / tau) || softmax(q_s / tau)).
/// With detach_teacher the teacher logits are treated as constants.
ad::Var distillation_loss(ad::Var q_teacher, ad::Var q_student, double tau, bool detach_teacher = true);

/// KL(N(mu, sigma^2) || N(0, 1)) averaged over latent entries.
ad::Var latent_prior_kl(ad::Var mu, ad::Var logvar);

struct TotalLoss {
  ad::Var value;
  LossBreakdown breakdown;
};

/// l_ad + lambda * l_g + gamma * l_kd.
TotalLoss total_loss(ad::Var l_ad, ad::Var l_g, ad::Var l_kd, double lambda, double gamma, double tau);

/// l_ad + l_g.
ad::Var pretrain_loss(ad::Var l_ad, ad::Var l_g);

}  // namespace fgad
