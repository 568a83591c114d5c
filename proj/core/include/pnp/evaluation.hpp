#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "pnp/fastcluster.hpp"
#include "pnp/numerics.hpp"

namespace pnp {

inline constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

struct LinearAssignment {
  // Column assigned to each row, or kUnassigned when the row was matched to
  // zero padding (more rows than columns).
  std::vector<std::size_t> row_to_col;
  double cost = 0.0;  // sum of cost(row, row_to_col[row]) over assigned rows, in row order
};

/// Minimum-cost one-to-one assignment. Rectangular inputs are zero-padded to
/// a square. Throws ParameterError on an empty or non-finite matrix.
LinearAssignment hungarian(const Matrix& cost);

inline constexpr int kDummyClass = -1;

struct EvalReport {
  double acc_all = 0.0;
  double acc_old = 0.0;
  double acc_new = 0.0;
  std::size_t k_est = 0;
  std::size_t num_old = 0;  // instances whose true class is old
  std::size_t num_new = 0;
  std::size_t correct = 0;
  // Predicted cluster id → matched class id, or kDummyClass for surplus clusters.
  std::map<std::size_t, int> matching;
  std::vector<std::size_t> cluster_ids;  // rows of `contingency`
  std::vector<int> class_ids;            // columns of `contingency`
  std::vector<std::vector<std::size_t>> contingency;
};

/// Accuracy under the optimal one-to-one matching of predicted clusters to
/// true classes. Old/new accuracies reuse the single global matching.
EvalReport clustering_accuracy(const std::vector<int>& y_true,
                               const std::vector<std::size_t>& y_pred,
                               const std::vector<int>& old_classes);

struct BiasReport {
  std::size_t false_old = 0;  // new-class instance mapped to an old class
  std::size_t false_new = 0;  // old-class instance mapped to a new class
  std::size_t true_old = 0;   // old-class instance mapped to another old class
  std::size_t true_new = 0;   // new-class instance mapped to another new class
  std::map<int, std::size_t> correct_per_class;
  std::map<int, std::size_t> total_per_class;
  double intra_class_bias = 0.0;  // mean |correct − total| over the reported classes
};

/// Splits misclassified instances into the four old/new confusion cases.
/// Surplus clusters (matched to kDummyClass) count as new predictions. When
/// `classes` is given, per-class tallies and the intra-class bias are
/// restricted to those classes.
BiasReport bias_report(const std::vector<int>& y_true, const std::vector<std::size_t>& y_pred,
                       const std::map<std::size_t, int>& matching,
                       const std::vector<int>& old_classes,
                       const std::optional<std::vector<int>>& classes = std::nullopt);

struct ClusteringTiming {
  double full_ms = 0.0;        // median
  double unlabelled_ms = 0.0;  // median
  std::size_t repeats = 0;
  std::size_t full_k = 0;
  std::size_t unlabelled_k = 0;

  double ratio() const { return unlabelled_ms > 0.0 ? full_ms / unlabelled_ms : 0.0; }
};

inline constexpr std::size_t kMinTimingRepeats = 5;

/// Median wall time of estimate_k on the full feature set versus the
/// unlabelled subset, interleaved over `repeats` runs.
ClusteringTiming bench_clustering(const Matrix& full, const Matrix& unlabelled,
                                  const EstimateKOptions& opts, std::size_t repeats);

}  // namespace pnp
