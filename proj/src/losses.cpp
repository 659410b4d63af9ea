#include "fgad/losses.hpp"

#include "fgad/error.hpp"

namespace fgad {

ad::Var generator_loss(ad::Var target, ad::Var a_tilde, bool normalized) {
  if (!target.value().same_shape(a_tilde.value())) {
    throw DimensionError("generator_loss: target " + target.value().shape_string() + " vs generated " +
                         a_tilde.value().shape_string());
  }
  ad::Tape& tape = a_tilde.tape();
  const Matrix& t = target.value();
  ad::Var ones = tape.constant(Matrix::ones(t.rows(), t.cols()));
  ad::Var p = ad::clamp(a_tilde, kProbClamp, 1.0 - kProbClamp);
  ad::Var pos = ad::mul(target, ad::log(p));
  ad::Var neg = ad::mul(ad::sub(ones, target), ad::log(ad::sub(ones, p)));
  ad::Var ll = ad::add(pos, neg);
  return ad::scale(normalized ? ad::mean_all(ll) : ad::sum_all(ll), -1.0);
}

ad::Var generator_loss_logits(ad::Var target, ad::Var logits, bool normalized) {
  if (!target.value().same_shape(logits.value())) {
    throw DimensionError("generator_loss: target " + target.value().shape_string() + " vs generated " +
                         logits.value().shape_string());
  }
  ad::Var per_entry = ad::sub(ad::softplus(logits), ad::mul(target, logits));
  return normalized ? ad::mean_all(per_entry) : ad::sum_all(per_entry);
}

ad::Var cross_entropy(ad::Var logits, std::size_t class_index) {
  if (class_index >= logits.cols()) throw DimensionError("cross_entropy: class index out of range");
  Matrix onehot(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < onehot.rows(); ++i) onehot(i, class_index) = 1.0;
  ad::Var picked = ad::mul(logits.tape().constant(std::move(onehot)), ad::log_softmax_rows(logits));
  return ad::scale(ad::sum_all(picked), -1.0 / static_cast<double>(logits.rows()));
}

ad::Var detector_loss(ad::Var logits_normal, ad::Var logits_generated) {
  if (logits_normal.cols() != 2 || logits_generated.cols() != 2) {
    throw DimensionError("detector_loss: logits must have width 2, got " + logits_normal.value().shape_string() +
                         " and " + logits_generated.value().shape_string());
  }
  return ad::scale(ad::add(cross_entropy(logits_normal, 1), cross_entropy(logits_generated, 0)), 0.5);
}

ad::Var distillation_loss(ad::Var q_teacher, ad::Var q_student, double tau, bool detach_teacher) {
  if (!(tau > 0.0)) throw ParameterError("distillation_loss: tau must be positive");
  if (!q_teacher.value().same_shape(q_student.value())) {
    throw DimensionError("distillation_loss: teacher " + q_teacher.value().shape_string() + " vs student " +
                         q_student.value().shape_string());
  }
  ad::Var qt = detach_teacher ? ad::detach(q_teacher) : q_teacher;
  ad::Var log_pt = ad::log_softmax_rows(qt, tau);
  ad::Var pt = ad::softmax_rows(qt, tau);
  ad::Var log_ps = ad::log_softmax_rows(q_student, tau);
  ad::Var kl = ad::sum_all(ad::mul(pt, ad::sub(log_pt, log_ps)));
  return ad::scale(kl, 1.0 / static_cast<double>(q_student.rows()));
}

ad::Var latent_prior_kl(ad::Var mu, ad::Var logvar) {
  ad::Tape& tape = mu.tape();
  ad::Var ones = tape.constant(Matrix::ones(mu.rows(), mu.cols()));
  // 0.5 * (mu^2 + exp(logvar) - 1 - logvar)
  ad::Var inner = ad::sub(ad::add(ad::mul(mu, mu), ad::exp(logvar)), ad::add(ones, logvar));
  return ad::scale(ad::mean_all(inner), 0.5);
}

TotalLoss total_loss(ad::Var l_ad, ad::Var l_g, ad::Var l_kd, double lambda, double gamma, double tau) {
  if (lambda < 0.0 || gamma < 0.0) throw ParameterError("total_loss: lambda and gamma must be non-negative");
  TotalLoss out;
  out.value = ad::add(ad::add(l_ad, ad::scale(l_g, lambda)), ad::scale(l_kd, gamma));
  out.breakdown.l_ad = l_ad.item();
  out.breakdown.l_g = l_g.item();
  out.breakdown.l_kd = l_kd.item();
  out.breakdown.total = out.value.item();
  out.breakdown.lambda = lambda;
  out.breakdown.gamma = gamma;
  out.breakdown.tau = tau;
  return out;
}

ad::Var pretrain_loss(ad::Var l_ad, ad::Var l_g) { return ad::add(l_ad, l_g); }

}  // namespace fgad
