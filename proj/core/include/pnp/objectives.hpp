#pragma once

#include <vector>

#include "pnp/numerics.hpp"

namespace pnp {

/// Softmax prediction of features against a prototype buffer.
struct Prediction {
  Matrix probs;      // batch × K
  Matrix log_probs;  // same shape, computed stably
  double temperature = 1.0;
};

/// softmax(v · mᵀ / tau). Differentiable through scores_backward.
Prediction student_predict(const Matrix& v, const Matrix& buffer, double tau);

/// Same computation as student_predict; callers treat the result as a
/// constant target (no adjoint is ever formed for teacher inputs).
Prediction teacher_predict(const Matrix& v, const Matrix& buffer, double tau_t);

struct ScoresGrad {
  Matrix dv;
  Matrix dbuffer;
};
// Chains an adjoint on the raw scores s = v·mᵀ back to v and m.
ScoresGrad scores_backward(const Matrix& v, const Matrix& buffer, const Matrix& d_scores);

/// Self-distillation loss on unlabelled data:
///   (1/B) Σ_i Σ_c −p^t_ic log p^s_ic  +  γ Σ_c p̄_c log p̄_c,
/// with p̄ the batch mean of the student prediction.
struct CruLoss {
  double value = 0.0;
  double cross_entropy = 0.0;
  double regularizer = 0.0;  // R(p̄), unweighted, in [−log K, 0]
  Matrix d_scores;           // adjoint on the student's raw scores v·mᵀ
};
CruLoss loss_cru(const Prediction& student, const Prediction& teacher, double gamma);

/// Prototypical cross-entropy of labelled features against trainable class
/// prototypes. `labels` index rows of `protos`.
struct CrlLoss {
  double value = 0.0;
  Matrix dv;
  Matrix dprotos;
};
CrlLoss loss_crl(const Matrix& v, const std::vector<std::size_t>& labels, const Matrix& protos,
                 double tau);

/// Supervised contrastive loss over one view. Denominators run over every
/// other instance in the batch (positives included); the mean is taken over
/// anchors that have at least one positive.
struct SupLoss {
  double value = 0.0;
  Matrix dz;
  std::size_t anchors = 0;  // anchors with ≥1 positive; 0 means the term is inactive
};
SupLoss loss_sup(const Matrix& z, const std::vector<int>& labels, double tau_r);

/// Instance discrimination between two views. The positive is z¹_i·z²_i; the
/// denominator sums exp(z¹_i·z¹_j / tau_r) over j ≠ i, or exp(z¹_i·z²_j / tau_r)
/// when cross_view_denominator is set.
struct UnsupLoss {
  double value = 0.0;
  Matrix dz1;
  Matrix dz2;
};
UnsupLoss loss_unsup(const Matrix& z1, const Matrix& z2, double tau_r,
                     bool cross_view_denominator = false);

struct LossBreakdown {
  double l_cru = 0.0;
  double l_crl = 0.0;
  double l_cr = 0.0;
  double l_sup = 0.0;
  double l_unsup = 0.0;
  double l_ir = 0.0;
  double total = 0.0;
  double regularizer = 0.0;  // R(p̄) inside l_cru
};

inline constexpr double kDefaultAlpha1 = 0.65;
inline constexpr double kDefaultBeta1 = 0.35;
inline constexpr double kDefaultGamma = 2.0;

/// l_cr = α1·l_cru + (1−α1)·l_crl;  l_ir = β1·l_sup + (1−β1)·l_unsup;
/// total = l_cr + l_ir. Weights must lie in [0, 1].
LossBreakdown combine(double l_cru, double l_crl, double l_sup, double l_unsup, double alpha1,
                      double beta1);

}  // namespace pnp
