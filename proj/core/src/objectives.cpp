#include "pnp/objectives.hpp"

#include <cmath>
#include <string>

#include "pnp/errors.hpp"

namespace pnp {

namespace {

Prediction predict(const Matrix& v, const Matrix& buffer, double tau) {
  if (!(tau > 0.0)) throw ParameterError("prediction temperature must be > 0");
  if (v.cols() != buffer.cols())
    throw DimensionError("prediction: feature width " + std::to_string(v.cols()) +
                         " vs buffer width " + std::to_string(buffer.cols()));
  if (buffer.rows() == 0) throw DimensionError("prediction: empty buffer");
  const Matrix scores = matmul_nt(v, buffer);
  Prediction p;
  p.temperature = tau;
  p.probs = softmax_rows(scores, tau);
  p.log_probs = Matrix(scores.rows(), scores.cols());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    std::vector<double> u(scores.row(r).begin(), scores.row(r).end());
    for (double& x : u) x /= tau;
    const double lse = log_sum_exp(u);
    auto out = p.log_probs.row(r);
    for (std::size_t c = 0; c < u.size(); ++c) out[c] = u[c] - lse;
  }
  return p;
}

void require_weight(double w, const char* name) {
  if (!(w >= 0.0 && w <= 1.0))
    throw ParameterError(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

Prediction student_predict(const Matrix& v, const Matrix& buffer, double tau) {
  return predict(v, buffer, tau);
}

Prediction teacher_predict(const Matrix& v, const Matrix& buffer, double tau_t) {
  return predict(v, buffer, tau_t);
}

ScoresGrad scores_backward(const Matrix& v, const Matrix& buffer, const Matrix& d_scores) {
  auto g = matmul_nt_backward(v, buffer, d_scores);
  return {std::move(g.da), std::move(g.db)};
}

CruLoss loss_cru(const Prediction& student, const Prediction& teacher, double gamma) {
  if (!(gamma >= 0.0)) throw ParameterError("loss_cru: gamma must be >= 0");
  const Matrix& ps = student.probs;
  const Matrix& pt = teacher.probs;
  if (ps.rows() != pt.rows() || ps.cols() != pt.cols())
    throw DimensionError("loss_cru: student and teacher predictions differ in shape");
  CruLoss out;
  const std::size_t b = ps.rows();
  const std::size_t k = ps.cols();
  out.d_scores = Matrix(b, k);
  if (b == 0) return out;
  const double inv_b = 1.0 / static_cast<double>(b);
  const double tau = student.temperature;

  std::vector<double> mean(k, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      out.cross_entropy -= pt(i, c) * student.log_probs(i, c);
      mean[c] += ps(i, c) * inv_b;
    }
  }
  out.cross_entropy *= inv_b;
  for (double m : mean)
    if (m > 0.0) out.regularizer += m * std::log(m);
  out.value = out.cross_entropy + gamma * out.regularizer;

  // Cross-entropy adjoint on u = s/τ is (p^s·Σp^t − p^t)/B.
  Matrix d_reg_probs(b, k);
  for (std::size_t i = 0; i < b; ++i) {
    double mass = 0.0;
    for (std::size_t c = 0; c < k; ++c) mass += pt(i, c);
    for (std::size_t c = 0; c < k; ++c) {
      out.d_scores(i, c) = (ps(i, c) * mass - pt(i, c)) * inv_b / tau;
      d_reg_probs(i, c) = mean[c] > 0.0 ? gamma * (std::log(mean[c]) + 1.0) * inv_b : 0.0;
    }
  }
  out.d_scores += softmax_rows_backward(ps, d_reg_probs, tau);
  return out;
}

CrlLoss loss_crl(const Matrix& v, const std::vector<std::size_t>& labels, const Matrix& protos,
                 double tau) {
  if (labels.size() != v.rows()) throw DimensionError("loss_crl: label count mismatch");
  for (std::size_t y : labels)
    if (y >= protos.rows())
      throw ContractViolation("loss_crl: label " + std::to_string(y) +
                              " outside the labelled class set");
  CrlLoss out;
  out.dv = Matrix(v.rows(), v.cols());
  out.dprotos = Matrix(protos.rows(), protos.cols());
  if (v.rows() == 0) return out;
  const Prediction p = predict(v, protos, tau);
  const double inv_b = 1.0 / static_cast<double>(v.rows());
  Matrix d_scores(p.probs.rows(), p.probs.cols());
  for (std::size_t i = 0; i < v.rows(); ++i) {
    out.value -= p.log_probs(i, labels[i]);
    for (std::size_t c = 0; c < protos.rows(); ++c)
      d_scores(i, c) = (p.probs(i, c) - (c == labels[i] ? 1.0 : 0.0)) * inv_b / tau;
  }
  out.value *= inv_b;
  auto g = scores_backward(v, protos, d_scores);
  out.dv = std::move(g.dv);
  out.dprotos = std::move(g.dbuffer);
  return out;
}

SupLoss loss_sup(const Matrix& z, const std::vector<int>& labels, double tau_r) {
  if (!(tau_r > 0.0)) throw ParameterError("loss_sup: tau_r must be > 0");
  if (labels.size() != z.rows()) throw DimensionError("loss_sup: label count mismatch");
  const std::size_t b = z.rows();
  SupLoss out;
  out.dz = Matrix(b, z.cols());
  if (b < 2) return out;

  Matrix s = matmul_nt(z, z);
  s *= 1.0 / tau_r;
  Matrix g(b, b);  // adjoint on s
  std::vector<double> row;
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t positives = 0;
    for (std::size_t j = 0; j < b; ++j)
      if (j != i && labels[j] == labels[i]) ++positives;
    if (positives == 0) continue;
    ++out.anchors;
    row.clear();
    for (std::size_t j = 0; j < b; ++j)
      if (j != i) row.push_back(s(i, j));
    const double lse = log_sum_exp(row);
    double li = lse;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      const bool pos = labels[j] == labels[i];
      if (pos) li -= s(i, j) / static_cast<double>(positives);
      g(i, j) = std::exp(s(i, j) - lse) - (pos ? 1.0 / static_cast<double>(positives) : 0.0);
    }
    out.value += li;
  }
  if (out.anchors == 0) return out;
  const double inv_a = 1.0 / static_cast<double>(out.anchors);
  out.value *= inv_a;
  g *= inv_a / tau_r;
  out.dz = matmul(g + g.transpose(), z);
  return out;
}

UnsupLoss loss_unsup(const Matrix& z1, const Matrix& z2, double tau_r,
                     bool cross_view_denominator) {
  if (!(tau_r > 0.0)) throw ParameterError("loss_unsup: tau_r must be > 0");
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols())
    throw DimensionError("loss_unsup: views differ in shape");
  const std::size_t b = z1.rows();
  if (b < 2) throw ContractViolation("loss_unsup: batch needs at least 2 instances");

  const Matrix& other = cross_view_denominator ? z2 : z1;
  Matrix d = matmul_nt(z1, other);
  d *= 1.0 / tau_r;
  const double inv_b = 1.0 / static_cast<double>(b);

  UnsupLoss out;
  out.dz1 = Matrix(b, z1.cols());
  out.dz2 = Matrix(b, z2.cols());
  Matrix g(b, b);
  std::vector<double> row;
  for (std::size_t i = 0; i < b; ++i) {
    const double pos = dot(z1.row(i), z2.row(i)) / tau_r;
    row.clear();
    for (std::size_t j = 0; j < b; ++j)
      if (j != i) row.push_back(d(i, j));
    const double lse = log_sum_exp(row);
    out.value += lse - pos;
    for (std::size_t j = 0; j < b; ++j)
      if (j != i) g(i, j) = std::exp(d(i, j) - lse) * inv_b / tau_r;
    auto d1 = out.dz1.row(i);
    auto d2 = out.dz2.row(i);
    for (std::size_t c = 0; c < z1.cols(); ++c) {
      d1[c] -= z2(i, c) * inv_b / tau_r;
      d2[c] -= z1(i, c) * inv_b / tau_r;
    }
  }
  out.value *= inv_b;
  if (cross_view_denominator) {
    out.dz1 += matmul(g, z2);
    out.dz2 += matmul_tn(g, z1);
  } else {
    out.dz1 += matmul(g + g.transpose(), z1);
  }
  return out;
}

LossBreakdown combine(double l_cru, double l_crl, double l_sup, double l_unsup, double alpha1,
                      double beta1) {
  require_weight(alpha1, "alpha1");
  require_weight(beta1, "beta1");
  LossBreakdown out;
  out.l_cru = l_cru;
  out.l_crl = l_crl;
  out.l_sup = l_sup;
  out.l_unsup = l_unsup;
  out.l_cr = alpha1 * l_cru + (1.0 - alpha1) * l_crl;
  out.l_ir = beta1 * l_sup + (1.0 - beta1) * l_unsup;
  out.total = out.l_cr + out.l_ir;
  return out;
}

}  // namespace pnp
