#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "pnp/numerics.hpp"

namespace pnp {

struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Weighted similarity graph over instances. Undirected edges are stored as
/// both directed entries, sorted by (from, to).
struct SimilarityGraph {
  std::size_t node_count = 0;
  std::vector<Edge> edges;
  bool symmetric = true;

  double total_weight() const;  // sum over directed entries
};

/// Flat partition of graph nodes. Cluster ids are 0..num_clusters-1.
struct ClusterResult {
  std::vector<std::size_t> assignment;
  std::size_t num_clusters = 0;

  // Relabels to contiguous ids in order of first appearance.
  static ClusterResult from_labels(const std::vector<std::size_t>& labels);
  std::vector<std::size_t> cluster_sizes() const;

  friend bool operator==(const ClusterResult&, const ClusterResult&) = default;
};

/// Complete cosine-similarity graph over L2-normalized rows (no self-loops).
/// Throws ContractViolation when rows are not unit norm.
SimilarityGraph build_graph(const Matrix& features);

/// Keeps entries with weight strictly above tau_f and from != to.
SimilarityGraph filter_edges(const SimilarityGraph& g, double tau_f);

enum class KnnSymmetrize {
  kUnion,         // keep an edge if either endpoint selected it
  kIntersection,  // keep an edge only if both endpoints selected it
};

/// Each node keeps its k heaviest outgoing entries (ties: lower neighbor
/// index first); the result is re-symmetrized.
SimilarityGraph knn_prune(const SimilarityGraph& g, std::size_t k,
                          KnnSymmetrize mode = KnnSymmetrize::kUnion);

/// Two-level map equation codelength in bits, with stationary visit rates
/// proportional to node strength. Non-positive weights and self-loops carry no
/// flow. Throws DegenerateInputError on a graph with no positive weight.
double map_equation(const SimilarityGraph& g, const ClusterResult& partition);

struct InfomapOptions {
  std::uint64_t seed = 0;
  int restarts = 8;
  double min_improvement = 1e-12;  // bits
};

/// Seeded local-move + aggregation search minimizing the map equation. Nodes
/// without positive edges end up as singleton clusters.
ClusterResult infomap(const SimilarityGraph& g, InfomapOptions opts = {});

struct EstimateKOptions {
  double tau_f = 0.6;
  std::size_t k = 10;
  KnnSymmetrize symmetrize = KnnSymmetrize::kUnion;
  InfomapOptions infomap;
};

/// build_graph → filter_edges → knn_prune fused row by row, so memory stays
/// O(N·k) instead of O(N²). Equivalent to composing the three operations.
SimilarityGraph knn_similarity_graph(const Matrix& features, const EstimateKOptions& opts);

/// Full clustering stage: pruned similarity graph + Infomap. num_clusters of
/// the result is the estimated category count.
ClusterResult estimate_k(const Matrix& features, const EstimateKOptions& opts);

// "i j w" per undirected edge (i < j).
void write_edge_list(std::ostream& out, const SimilarityGraph& g);

}  // namespace pnp
