#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace pnp {

/// Dense row-major matrix of doubles.
///
/// Rows are the natural unit everywhere in this library: one row per
/// instance, per prototype, or per output unit of a layer.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  Matrix transpose() const;
  // Rows [begin, end) as a new matrix.
  Matrix slice_rows(std::size_t begin, std::size_t end) const;
  Matrix gather_rows(std::span<const std::size_t> indices) const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  bool all_finite() const noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double max_abs_diff(const Matrix& a, const Matrix& b);

// Stacks rows of `top` above rows of `bottom`; column counts must agree.
Matrix vstack(const Matrix& top, const Matrix& bottom);

/// a · b. Throws DimensionError when a.cols() != b.rows().
Matrix matmul(const Matrix& a, const Matrix& b);
/// a · bᵀ without materializing the transpose (row dot products).
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// aᵀ · b.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

struct MatmulGrad {
  Matrix da;
  Matrix db;
};
// Adjoints of c = a·b given dc.
MatmulGrad matmul_backward(const Matrix& a, const Matrix& b, const Matrix& dc);
// Adjoints of c = a·bᵀ given dc.
MatmulGrad matmul_nt_backward(const Matrix& a, const Matrix& b, const Matrix& dc);

inline constexpr double kNormalizeEps = 1e-12;

/// Scales every row to unit Euclidean norm. Rows with norm < eps raise
/// DegenerateInputError.
Matrix l2_normalize_rows(const Matrix& m, double eps = kNormalizeEps);
// Adjoint of y = l2_normalize_rows(x), given the forward input x and output y.
Matrix l2_normalize_rows_backward(const Matrix& x, const Matrix& y, const Matrix& dy);
bool rows_unit_norm(const Matrix& m, double tol = 1e-9);

/// Row-wise softmax of m / temperature, max-subtracted.
Matrix softmax_rows(const Matrix& m, double temperature = 1.0);
// Adjoint w.r.t. the un-scaled input m of p = softmax_rows(m, temperature).
Matrix softmax_rows_backward(const Matrix& p, const Matrix& dp, double temperature = 1.0);
// log Σ_j exp(x_j), stabilized.
double log_sum_exp(std::span<const double> x);

/// Accumulated adjoints keyed by parameter name.
///
/// Accumulation is additive; the first contribution fixes the shape and
/// later contributions must match it.
class GradientTape {
 public:
  void accumulate(const std::string& id, const Matrix& adjoint);
  bool contains(const std::string& id) const { return grads_.count(id) != 0; }
  const Matrix& get(const std::string& id) const;
  // Adjoint for `id`, or zeros of the given shape when nothing was recorded.
  Matrix get_or_zero(const std::string& id, std::size_t rows, std::size_t cols) const;
  std::vector<std::string> ids() const;
  bool empty() const noexcept { return grads_.empty(); }
  void clear() { grads_.clear(); }

 private:
  std::map<std::string, Matrix> grads_;
};

struct ValueAndGrad {
  double value = 0.0;
  Matrix grad;
};

// Evaluates a scalar loss at the given parameter values with its analytic
// gradient. Must not retain the reference past the call.
using DifferentiableFn = std::function<ValueAndGrad(const Matrix& params)>;

struct GradientCheckOptions {
  double step = 1e-4;
  // Coordinates where both the analytic and numeric derivative are below this
  // magnitude are compared in absolute terms.
  double abs_floor = 1e-7;
};

/// Max over coordinates of |analytic − numeric| / max(|analytic|, |numeric|,
/// abs_floor), with the numeric derivative from central differences.
/// Throws NumericError if the loss is non-finite at any probe.
double check_gradient(const DifferentiableFn& loss, const Matrix& params,
                      GradientCheckOptions opts = {});

}  // namespace pnp
