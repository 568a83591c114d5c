#include "pnp/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pnp/errors.hpp"

namespace pnp {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
  }
}

void require_finite(const Matrix& m, const char* op) {
  if (!m.all_finite()) throw NumericError(std::string(op) + ": non-finite input");
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) throw DimensionError("slice_rows: range out of bounds");
  return Matrix(end - begin, cols_,
                std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_),
                                    data_.begin() + static_cast<std::ptrdiff_t>(end * cols_)));
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw DimensionError("gather_rows: index out of bounds");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }
  return out;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

Matrix vstack(const Matrix& top, const Matrix& bottom) {
  if (top.empty()) return bottom;
  if (bottom.empty()) return top;
  if (top.cols() != bottom.cols()) throw DimensionError("vstack: column mismatch");
  std::vector<double> data(top.data());
  data.insert(data.end(), bottom.data().begin(), bottom.data().end());
  return Matrix(top.rows() + bottom.rows(), top.cols(), std::move(data));
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: " + shape(a) + " · " + shape(b));
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto crow = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw DimensionError("matmul_nt: " + shape(a) + " · " + shape(b) + "ᵀ");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows())
    throw DimensionError("matmul_tn: " + shape(a) + "ᵀ · " + shape(b));
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto crow = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

MatmulGrad matmul_backward(const Matrix& a, const Matrix& b, const Matrix& dc) {
  if (dc.rows() != a.rows() || dc.cols() != b.cols())
    throw DimensionError("matmul_backward: adjoint shape " + shape(dc));
  return {matmul_nt(dc, b), matmul_tn(a, dc)};
}

MatmulGrad matmul_nt_backward(const Matrix& a, const Matrix& b, const Matrix& dc) {
  if (dc.rows() != a.rows() || dc.cols() != b.rows())
    throw DimensionError("matmul_nt_backward: adjoint shape " + shape(dc));
  // c = a·bᵀ  =>  da = dc·b,  db = dcᵀ·a
  return {matmul(dc, b), matmul_tn(dc, a)};
}

Matrix l2_normalize_rows(const Matrix& m, double eps) {
  if (!(eps > 0.0)) throw ParameterError("l2_normalize_rows: eps must be > 0");
  require_finite(m, "l2_normalize_rows");
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double n = norm2(m.row(r));
    if (n < eps)
      throw DegenerateInputError("l2_normalize_rows: row " + std::to_string(r) +
                                 " has near-zero norm");
    for (double& v : out.row(r)) v /= n;
  }
  return out;
}

Matrix l2_normalize_rows_backward(const Matrix& x, const Matrix& y, const Matrix& dy) {
  require_same_shape(x, dy, "l2_normalize_rows_backward");
  require_same_shape(y, dy, "l2_normalize_rows_backward");
  Matrix dx(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double n = norm2(x.row(r));
    const double proj = dot(y.row(r), dy.row(r));
    auto out = dx.row(r);
    auto yr = y.row(r);
    auto dyr = dy.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) out[c] = (dyr[c] - yr[c] * proj) / n;
  }
  return dx;
}

bool rows_unit_norm(const Matrix& m, double tol) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    if (std::abs(norm2(m.row(r)) - 1.0) > tol) return false;
  return true;
}

Matrix softmax_rows(const Matrix& m, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("softmax_rows: temperature must be > 0");
  require_finite(m, "softmax_rows");
  Matrix p(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto in = m.row(r);
    auto out = p.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp((in[c] - mx) / temperature);
      z += out[c];
    }
    for (double& v : out) v /= z;
  }
  return p;
}

Matrix softmax_rows_backward(const Matrix& p, const Matrix& dp, double temperature) {
  require_same_shape(p, dp, "softmax_rows_backward");
  Matrix dm(p.rows(), p.cols());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const double inner = dot(p.row(r), dp.row(r));
    auto pr = p.row(r);
    auto dpr = dp.row(r);
    auto out = dm.row(r);
    for (std::size_t c = 0; c < p.cols(); ++c) out[c] = pr[c] * (dpr[c] - inner) / temperature;
  }
  return dm;
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

void GradientTape::accumulate(const std::string& id, const Matrix& adjoint) {
  auto it = grads_.find(id);
  if (it == grads_.end()) {
    grads_.emplace(id, adjoint);
    return;
  }
  if (it->second.rows() != adjoint.rows() || it->second.cols() != adjoint.cols())
    throw DimensionError("GradientTape: adjoint shape changed for '" + id + "'");
  it->second += adjoint;
}

const Matrix& GradientTape::get(const std::string& id) const {
  auto it = grads_.find(id);
  if (it == grads_.end()) throw ContractViolation("GradientTape: no adjoint for '" + id + "'");
  return it->second;
}

Matrix GradientTape::get_or_zero(const std::string& id, std::size_t rows, std::size_t cols) const {
  auto it = grads_.find(id);
  if (it == grads_.end()) return Matrix(rows, cols);
  return it->second;
}

std::vector<std::string> GradientTape::ids() const {
  std::vector<std::string> out;
  out.reserve(grads_.size());
  for (const auto& [k, v] : grads_) out.push_back(k);
  return out;
}

double check_gradient(const DifferentiableFn& loss, const Matrix& params,
                      GradientCheckOptions opts) {
  if (!(opts.step > 0.0)) throw ParameterError("check_gradient: step must be > 0");
  const ValueAndGrad base = loss(params);
  if (!std::isfinite(base.value)) throw NumericError("check_gradient: non-finite loss");
  if (base.grad.rows() != params.rows() || base.grad.cols() != params.cols())
    throw DimensionError("check_gradient: gradient shape differs from parameter shape");

  Matrix probe = params;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = params.values()[i];
    probe.values()[i] = orig + opts.step;
    const double up = loss(probe).value;
    probe.values()[i] = orig - opts.step;
    const double down = loss(probe).value;
    probe.values()[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("check_gradient: non-finite loss at probe");
    const double numeric = (up - down) / (2.0 * opts.step);
    const double analytic = base.grad.values()[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), opts.abs_floor});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

}  // namespace pnp
