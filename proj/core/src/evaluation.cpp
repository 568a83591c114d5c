#include "pnp/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "pnp/errors.hpp"

namespace pnp {

LinearAssignment hungarian(const Matrix& cost) {
  if (cost.rows() == 0 || cost.cols() == 0) throw ParameterError("hungarian: empty cost matrix");
  if (!cost.all_finite()) throw ParameterError("hungarian: non-finite cost");
  const std::size_t rows = cost.rows();
  const std::size_t cols = cost.cols();
  const std::size_t n = std::max(rows, cols);
  auto at = [&](std::size_t i, std::size_t j) {
    return (i < rows && j < cols) ? cost(i, j) : 0.0;
  };

  // Shortest augmenting path with potentials; 1-based, column 0 is a sentinel.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  LinearAssignment out;
  out.row_to_col.assign(rows, kUnassigned);
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t i = p[j] - 1;
    if (i < rows && j - 1 < cols) out.row_to_col[i] = j - 1;
  }
  for (std::size_t i = 0; i < rows; ++i)
    if (out.row_to_col[i] != kUnassigned) out.cost += cost(i, out.row_to_col[i]);
  return out;
}

EvalReport clustering_accuracy(const std::vector<int>& y_true,
                               const std::vector<std::size_t>& y_pred,
                               const std::vector<int>& old_classes) {
  if (y_true.size() != y_pred.size())
    throw DimensionError("clustering_accuracy: label vectors differ in length");
  if (y_true.empty()) throw ParameterError("clustering_accuracy: no instances");

  EvalReport r;
  {
    std::set<std::size_t> cs(y_pred.begin(), y_pred.end());
    std::set<int> ks(y_true.begin(), y_true.end());
    r.cluster_ids.assign(cs.begin(), cs.end());
    r.class_ids.assign(ks.begin(), ks.end());
  }
  r.k_est = r.cluster_ids.size();
  auto cluster_index = [&](std::size_t c) {
    return static_cast<std::size_t>(
        std::lower_bound(r.cluster_ids.begin(), r.cluster_ids.end(), c) - r.cluster_ids.begin());
  };
  auto class_index = [&](int k) {
    return static_cast<std::size_t>(
        std::lower_bound(r.class_ids.begin(), r.class_ids.end(), k) - r.class_ids.begin());
  };

  r.contingency.assign(r.cluster_ids.size(), std::vector<std::size_t>(r.class_ids.size(), 0));
  for (std::size_t i = 0; i < y_true.size(); ++i)
    ++r.contingency[cluster_index(y_pred[i])][class_index(y_true[i])];

  Matrix cost(r.cluster_ids.size(), r.class_ids.size());
  for (std::size_t a = 0; a < cost.rows(); ++a)
    for (std::size_t b = 0; b < cost.cols(); ++b)
      cost(a, b) = -static_cast<double>(r.contingency[a][b]);
  const LinearAssignment match = hungarian(cost);
  for (std::size_t a = 0; a < r.cluster_ids.size(); ++a) {
    const std::size_t col = match.row_to_col[a];
    r.matching[r.cluster_ids[a]] = col == kUnassigned ? kDummyClass : r.class_ids[col];
  }

  std::size_t correct_old = 0, correct_new = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool old = std::find(old_classes.begin(), old_classes.end(), y_true[i]) != old_classes.end();
    const bool hit = r.matching.at(y_pred[i]) == y_true[i];
    (old ? r.num_old : r.num_new) += 1;
    if (hit) (old ? correct_old : correct_new) += 1;
  }
  r.correct = correct_old + correct_new;
  r.acc_all = static_cast<double>(r.correct) / static_cast<double>(y_true.size());
  r.acc_old = r.num_old ? static_cast<double>(correct_old) / static_cast<double>(r.num_old) : 0.0;
  r.acc_new = r.num_new ? static_cast<double>(correct_new) / static_cast<double>(r.num_new) : 0.0;
  return r;
}

BiasReport bias_report(const std::vector<int>& y_true, const std::vector<std::size_t>& y_pred,
                       const std::map<std::size_t, int>& matching,
                       const std::vector<int>& old_classes,
                       const std::optional<std::vector<int>>& classes) {
  if (y_true.size() != y_pred.size())
    throw DimensionError("bias_report: label vectors differ in length");
  auto is_old = [&](int c) {
    return std::find(old_classes.begin(), old_classes.end(), c) != old_classes.end();
  };
  auto reported = [&](int c) {
    return !classes || std::find(classes->begin(), classes->end(), c) != classes->end();
  };

  BiasReport r;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    auto it = matching.find(y_pred[i]);
    if (it == matching.end())
      throw ContractViolation("bias_report: cluster " + std::to_string(y_pred[i]) +
                              " missing from the matching");
    const int truth = y_true[i];
    const int mapped = it->second;
    if (reported(truth)) {
      ++r.total_per_class[truth];
      r.correct_per_class.try_emplace(truth, 0);
    }
    if (mapped == truth) {
      if (reported(truth)) ++r.correct_per_class[truth];
      continue;
    }
    const bool truth_old = is_old(truth);
    const bool mapped_old = mapped != kDummyClass && is_old(mapped);
    if (truth_old && mapped_old) ++r.true_old;
    else if (truth_old) ++r.false_new;
    else if (mapped_old) ++r.false_old;
    else ++r.true_new;
  }
  if (!r.total_per_class.empty()) {
    double sum = 0.0;
    for (const auto& [c, total] : r.total_per_class)
      sum += std::abs(static_cast<double>(r.correct_per_class[c]) - static_cast<double>(total));
    r.intra_class_bias = sum / static_cast<double>(r.total_per_class.size());
  }
  return r;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename F>
double time_ms(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ClusteringTiming bench_clustering(const Matrix& full, const Matrix& unlabelled,
                                  const EstimateKOptions& opts, std::size_t repeats) {
  if (full.rows() == 0 || unlabelled.rows() == 0)
    throw ParameterError("bench_clustering: empty feature set");
  if (unlabelled.rows() > full.rows())
    throw ParameterError("bench_clustering: unlabelled set larger than the full set");
  if (repeats == 0) throw ParameterError("bench_clustering: repeats must be positive");
  ClusteringTiming t;
  t.repeats = repeats;
  std::vector<double> full_ms, unl_ms;
  for (std::size_t r = 0; r < repeats; ++r) {
    full_ms.push_back(time_ms([&] { t.full_k = estimate_k(full, opts).num_clusters; }));
    unl_ms.push_back(time_ms([&] { t.unlabelled_k = estimate_k(unlabelled, opts).num_clusters; }));
  }
  t.full_ms = median(full_ms);
  t.unlabelled_ms = median(unl_ms);
  return t;
}

}  // namespace pnp
