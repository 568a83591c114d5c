#include "pnp/fastcluster.hpp"

#include <algorithm>
#include <ostream>
#include <unordered_map>

#include "pnp/errors.hpp"
#include "text_format.hpp"

namespace pnp {

namespace {

constexpr double kUnitNormTol = 1e-6;

void require_normalized(const Matrix& features) {
  if (!rows_unit_norm(features, kUnitNormTol))
    throw ContractViolation("similarity graph requires L2-normalized feature rows");
}

bool heavier(const Edge& a, const Edge& b) {
  if (a.weight != b.weight) return a.weight > b.weight;
  return a.to < b.to;
}

void sort_edges(std::vector<Edge>& edges) {
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.from != b.from ? a.from < b.from : a.to < b.to;
  });
}

// Keeps the k heaviest candidates in place.
void keep_top_k(std::vector<Edge>& cand, std::size_t k) {
  if (cand.size() > k) {
    std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(),
                     heavier);
    cand.resize(k);
  }
}

SimilarityGraph symmetrize(std::size_t n, std::vector<Edge> selected, KnnSymmetrize mode) {
  // Canonical (lo, hi) keys; count how many endpoints selected each pair.
  for (Edge& e : selected)
    if (e.from > e.to) std::swap(e.from, e.to);
  sort_edges(selected);

  SimilarityGraph out;
  out.node_count = n;
  for (std::size_t i = 0; i < selected.size();) {
    std::size_t j = i;
    while (j < selected.size() && selected[j].from == selected[i].from &&
           selected[j].to == selected[i].to)
      ++j;
    const bool keep = mode == KnnSymmetrize::kUnion || (j - i) >= 2;
    if (keep) {
      const Edge& e = selected[i];
      out.edges.push_back({e.from, e.to, e.weight});
      out.edges.push_back({e.to, e.from, e.weight});
    }
    i = j;
  }
  sort_edges(out.edges);
  return out;
}

}  // namespace

double SimilarityGraph::total_weight() const {
  double s = 0.0;
  for (const Edge& e : edges) s += e.weight;
  return s;
}

ClusterResult ClusterResult::from_labels(const std::vector<std::size_t>& labels) {
  ClusterResult r;
  std::unordered_map<std::size_t, std::size_t> remap;
  r.assignment.reserve(labels.size());
  for (std::size_t l : labels) {
    auto [it, inserted] = remap.emplace(l, remap.size());
    r.assignment.push_back(it->second);
  }
  r.num_clusters = remap.size();
  return r;
}

std::vector<std::size_t> ClusterResult::cluster_sizes() const {
  std::vector<std::size_t> sizes(num_clusters, 0);
  for (std::size_t a : assignment) ++sizes.at(a);
  return sizes;
}

SimilarityGraph build_graph(const Matrix& features) {
  require_normalized(features);
  const std::size_t n = features.rows();
  SimilarityGraph g;
  g.node_count = n;
  g.edges.reserve(n * (n > 0 ? n - 1 : 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) g.edges.push_back({i, j, dot(features.row(i), features.row(j))});
  return g;
}

SimilarityGraph filter_edges(const SimilarityGraph& g, double tau_f) {
  SimilarityGraph out;
  out.node_count = g.node_count;
  out.symmetric = g.symmetric;
  for (const Edge& e : g.edges)
    if (e.weight > tau_f && e.from != e.to) out.edges.push_back(e);
  return out;
}

SimilarityGraph knn_prune(const SimilarityGraph& g, std::size_t k, KnnSymmetrize mode) {
  if (k == 0) throw ParameterError("knn_prune: k must be >= 1");
  std::vector<std::vector<Edge>> incident(g.node_count);
  for (const Edge& e : g.edges)
    if (e.from != e.to) incident.at(e.from).push_back(e);
  std::vector<Edge> selected;
  for (auto& cand : incident) {
    keep_top_k(cand, k);
    selected.insert(selected.end(), cand.begin(), cand.end());
  }
  return symmetrize(g.node_count, std::move(selected), mode);
}

SimilarityGraph knn_similarity_graph(const Matrix& features, const EstimateKOptions& opts) {
  if (opts.k == 0) throw ParameterError("estimate_k: k must be >= 1");
  require_normalized(features);
  const std::size_t n = features.rows();
  std::vector<Edge> selected;
  selected.reserve(n * std::min(opts.k, n));
  std::vector<Edge> cand;
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    auto vi = features.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double w = dot(vi, features.row(j));
      if (w > opts.tau_f) cand.push_back({i, j, w});
    }
    keep_top_k(cand, opts.k);
    selected.insert(selected.end(), cand.begin(), cand.end());
  }
  return symmetrize(n, std::move(selected), opts.symmetrize);
}

ClusterResult estimate_k(const Matrix& features, const EstimateKOptions& opts) {
  if (features.rows() == 0) throw ParameterError("estimate_k: no feature rows");
  return infomap(knn_similarity_graph(features, opts), opts.infomap);
}

void write_edge_list(std::ostream& out, const SimilarityGraph& g) {
  for (const Edge& e : g.edges)
    if (e.from < e.to) out << e.from << ' ' << e.to << ' ' << text::format_double(e.weight) << '\n';
}

}  // namespace pnp
