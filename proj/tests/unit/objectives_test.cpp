#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pnp/errors.hpp"
#include "pnp/objectives.hpp"

using pnp::Matrix;

namespace {

const double e = std::exp(1.0);

}  // namespace

TEST(Predict, AlignedRowWins) {
  const Matrix buf{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const auto p = pnp::student_predict(Matrix{{0, 1, 0}}, buf, 0.1);
  EXPECT_GT(p.probs(0, 1), p.probs(0, 0));
  EXPECT_GT(p.probs(0, 1), p.probs(0, 2));
  EXPECT_NEAR(std::log(p.probs(0, 1)), p.log_probs(0, 1), 1e-12);
}

TEST(Predict, IdenticalRowsGiveUniform) {
  const auto p = pnp::student_predict(Matrix{{0.3, 0.4}}, Matrix(4, 2, 0.5), 0.1);
  for (double v : p.probs.values()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Predict, TeacherMatchesStudentAtEqualTemperature) {
  std::mt19937_64 rng(1);
  const Matrix v = oracle::random_unit_rows(3, 4, rng);
  const Matrix m = oracle::random_unit_rows(5, 4, rng);
  EXPECT_EQ(pnp::student_predict(v, m, 0.1).probs, pnp::teacher_predict(v, m, 0.1).probs);
}

TEST(Cru, UniformStudentCrossEntropyIsLogK) {
  std::mt19937_64 rng(2);
  const auto s = pnp::student_predict(Matrix(3, 2, 0.2), Matrix(6, 2, 0.3), 0.1);
  const auto t = pnp::teacher_predict(oracle::random_unit_rows(3, 2, rng),
                                      oracle::random_unit_rows(6, 2, rng), 0.04);
  const auto l = pnp::loss_cru(s, t, 2.0);
  EXPECT_NEAR(l.cross_entropy, std::log(6.0), 1e-12);
  EXPECT_NEAR(l.regularizer, -std::log(6.0), 1e-12);
  EXPECT_NEAR(l.value, std::log(6.0) - 2.0 * std::log(6.0), 1e-12);
}

TEST(Cru, SharpMatchingPredictionsVanish) {
  const Matrix buf{{1, 0}, {0, 1}};
  const auto s = pnp::student_predict(Matrix{{1, 0}, {1, 0}}, buf, 1e-3);
  const auto l = pnp::loss_cru(s, s, 2.0);
  EXPECT_NEAR(l.cross_entropy, 0.0, 1e-9);
  EXPECT_NEAR(l.regularizer, 0.0, 1e-9);
}

TEST(Cru, CrossEntropyNonNegativeAndRegularizerBounded) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const Matrix buf = oracle::random_unit_rows(7, 3, rng);
    const auto s = pnp::student_predict(oracle::random_unit_rows(5, 3, rng), buf, 0.1);
    const auto te = pnp::teacher_predict(oracle::random_unit_rows(5, 3, rng), buf, 0.05);
    const auto l = pnp::loss_cru(s, te, 2.0);
    EXPECT_GE(l.cross_entropy, 0.0);
    EXPECT_LE(l.regularizer, 1e-15);
    EXPECT_GE(l.regularizer, -std::log(7.0) - 1e-12);
  }
}

TEST(Cru, NegativeGammaThrows) {
  const auto s = pnp::student_predict(Matrix{{1, 0}}, Matrix{{1, 0}, {0, 1}}, 0.1);
  EXPECT_THROW(pnp::loss_cru(s, s, -1.0), pnp::ParameterError);
}

TEST(Crl, TwoClassDirectEvaluation) {
  const auto l = pnp::loss_crl(Matrix{{1, 0}}, {0}, Matrix{{1, 0}, {0, 1}}, 1.0);
  EXPECT_NEAR(l.value, -std::log(e / (e + 1)), 1e-12);
  EXPECT_NEAR(l.value, 0.3133, 1e-4);
}

TEST(Crl, PerfectAlignmentAtLowTemperature) {
  const auto l = pnp::loss_crl(Matrix{{0, 1}}, {1}, Matrix{{1, 0}, {0, 1}}, 1e-3);
  EXPECT_NEAR(l.value, 0.0, 1e-12);
}

TEST(Crl, IdenticalPrototypesGiveLogClasses) {
  std::mt19937_64 rng(4);
  const auto l = pnp::loss_crl(oracle::random_unit_rows(4, 3, rng), {0, 1, 2, 1}, Matrix(3, 3, 0.4), 0.1);
  EXPECT_NEAR(l.value, std::log(3.0), 1e-12);
}

TEST(Crl, LabelOutOfRangeThrows) {
  EXPECT_THROW(pnp::loss_crl(Matrix{{1, 0}}, {2}, Matrix{{1, 0}, {0, 1}}, 0.1), pnp::ContractViolation);
}

TEST(Sup, AllEqualEmbeddings) {
  const auto l = pnp::loss_sup(Matrix(4, 2, std::sqrt(0.5)), {1, 1, 1, 1}, 1.0);
  EXPECT_NEAR(l.value, std::log(3.0), 1e-12);
  EXPECT_EQ(l.anchors, 4u);
}

TEST(Sup, OnePositivePair) {
  const auto l = pnp::loss_sup(Matrix{{1, 0}, {1, 0}, {0, 1}}, {0, 0, 1}, 1.0);
  EXPECT_NEAR(l.value, -std::log(e / (e + 1)), 1e-12);
  EXPECT_EQ(l.anchors, 2u);
}

TEST(Sup, InactiveWithoutPositives) {
  const auto one = pnp::loss_sup(Matrix{{1, 0}}, {0}, 1.0);
  EXPECT_EQ(one.value, 0.0);
  EXPECT_EQ(one.anchors, 0u);
  const auto distinct = pnp::loss_sup(Matrix{{1, 0}, {0, 1}}, {0, 1}, 1.0);
  EXPECT_EQ(distinct.anchors, 0u);
  EXPECT_EQ(distinct.dz, Matrix(2, 2));
}

TEST(Unsup, OrthonormalViews) {
  const Matrix z = Matrix::identity(3);
  EXPECT_NEAR(pnp::loss_unsup(z, z, 1.0).value, -std::log(e / 2.0), 1e-12);
}

TEST(Unsup, TotalCollapse) {
  const Matrix z(5, 2, std::sqrt(0.5));
  EXPECT_NEAR(pnp::loss_unsup(z, z, 1.0).value, std::log(4.0), 1e-12);
}

TEST(Unsup, BoundedCase) {
  // Rows of norm √2 at 120°: pairwise products −1; pairing with half of
  // itself gives +1.
  const double r = std::sqrt(2.0);
  Matrix z1(3, 2);
  for (std::size_t i = 0; i < 3; ++i) {
    const double a = 2.0 * std::acos(-1.0) * static_cast<double>(i) / 3.0;
    z1(i, 0) = r * std::cos(a);
    z1(i, 1) = r * std::sin(a);
  }
  const Matrix z2 = z1 * 0.5;
  EXPECT_NEAR(pnp::loss_unsup(z1, z2, 1.0).value, -std::log(e / (2.0 / e)), 1e-12);
}

TEST(Unsup, SingleInstanceThrows) {
  EXPECT_THROW(pnp::loss_unsup(Matrix{{1, 0}}, Matrix{{1, 0}}, 1.0), pnp::ContractViolation);
}

TEST(Combine, Endpoints) {
  auto l = pnp::combine(0.7, 0.3, 0.2, 0.9, 1.0, 0.0);
  EXPECT_EQ(l.l_cr, 0.7);
  EXPECT_EQ(l.l_ir, 0.9);
  l = pnp::combine(1.0, 2.0, 0.0, 0.0, 0.65, 0.35);
  EXPECT_NEAR(l.l_cr, 1.35, 1e-15);
  EXPECT_NEAR(l.total, l.l_cr + l.l_ir, 1e-15);
  EXPECT_THROW(pnp::combine(1, 1, 1, 1, 1.5, 0.5), pnp::ParameterError);
}

TEST(LossGradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  const Matrix v = oracle::random_unit_rows(6, 4, rng);
  const Matrix m = oracle::random_unit_rows(5, 4, rng);
  const auto teacher = pnp::teacher_predict(oracle::random_unit_rows(6, 4, rng), m, 0.05);

  auto cru = [&](const Matrix& vv, const Matrix& mm) {
    return pnp::loss_cru(pnp::student_predict(vv, mm, 0.1), teacher, 2.0);
  };
  const auto l = cru(v, m);
  const auto g = pnp::scores_backward(v, m, l.d_scores);
  EXPECT_LT(oracle::max_rel_err(g.dv, oracle::numeric_grad([&](const Matrix& x) { return cru(x, m).value; }, v)), 1e-5);
  EXPECT_LT(oracle::max_rel_err(g.dbuffer, oracle::numeric_grad([&](const Matrix& x) { return cru(v, x).value; }, m)), 1e-5);

  const std::vector<std::size_t> y{0, 1, 2, 0, 1, 2};
  const Matrix protos = oracle::random_unit_rows(3, 4, rng);
  const auto crl = pnp::loss_crl(v, y, protos, 0.1);
  EXPECT_LT(oracle::max_rel_err(crl.dv, oracle::numeric_grad([&](const Matrix& x) { return pnp::loss_crl(x, y, protos, 0.1).value; }, v)), 1e-5);
  EXPECT_LT(oracle::max_rel_err(crl.dprotos, oracle::numeric_grad([&](const Matrix& x) { return pnp::loss_crl(v, y, x, 0.1).value; }, protos)), 1e-5);

  const std::vector<int> ys{0, 0, 1, 1, 2, 3};
  const auto sup = pnp::loss_sup(v, ys, 0.5);
  EXPECT_LT(oracle::max_rel_err(sup.dz, oracle::numeric_grad([&](const Matrix& x) { return pnp::loss_sup(x, ys, 0.5).value; }, v)), 1e-5);

  const Matrix w = oracle::random_unit_rows(6, 4, rng);
  for (bool cross : {false, true}) {
    const auto un = pnp::loss_unsup(v, w, 0.5, cross);
    EXPECT_LT(oracle::max_rel_err(un.dz1, oracle::numeric_grad([&](const Matrix& x) { return pnp::loss_unsup(x, w, 0.5, cross).value; }, v)), 1e-5);
    EXPECT_LT(oracle::max_rel_err(un.dz2, oracle::numeric_grad([&](const Matrix& x) { return pnp::loss_unsup(v, x, 0.5, cross).value; }, w)), 1e-5);
  }
}
