// Two-level Infomap: greedy local moving of nodes between modules followed by
// aggregation of modules into super-nodes, repeated until no move shortens
// the description length. Each restart re-enters the search from its previous
// best partition at the level of original nodes, which lets single nodes
// escape modules that aggregation locked them into.

#include <algorithm>
#include <cmath>
#include <map>
#include <limits>

#include "pnp/errors.hpp"
#include "pnp/fastcluster.hpp"
#include "pnp/random.hpp"

namespace pnp {

namespace {

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

struct Neighbor {
  std::size_t node;
  double flow;  // flow along this direction (undirected: same both ways)
};

// Undirected flow network: node visit rates and per-direction edge flows.
struct FlowGraph {
  std::vector<double> node_flow;
  std::vector<double> exit_flow;  // flow leaving the node to other nodes
  std::vector<std::vector<Neighbor>> adj;

  std::size_t size() const { return node_flow.size(); }
};

// Returns false when the graph carries no positive weight.
bool make_flow_graph(const SimilarityGraph& g, FlowGraph& fg) {
  const std::size_t n = g.node_count;
  std::vector<std::vector<Neighbor>> raw(n);
  double total = 0.0;
  for (const Edge& e : g.edges) {
    if (e.from == e.to || !(e.weight > 0.0)) continue;
    if (e.from >= n || e.to >= n) throw DimensionError("graph edge references missing node");
    // Each directed entry contributes half its weight to the undirected edge.
    raw[e.from].push_back({e.to, 0.5 * e.weight});
    raw[e.to].push_back({e.from, 0.5 * e.weight});
    total += e.weight;
  }
  if (!(total > 0.0)) return false;

  fg.node_flow.assign(n, 0.0);
  fg.exit_flow.assign(n, 0.0);
  fg.adj.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    auto& list = raw[i];
    std::sort(list.begin(), list.end(),
              [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
    for (const Neighbor& nb : list) {
      const double f = nb.flow / total;
      if (!fg.adj[i].empty() && fg.adj[i].back().node == nb.node)
        fg.adj[i].back().flow += f;
      else
        fg.adj[i].push_back({nb.node, f});
      fg.node_flow[i] += f;
    }
    fg.exit_flow[i] = fg.node_flow[i];
  }
  return true;
}

double node_entropy_term(const FlowGraph& fg) {
  double s = 0.0;
  for (double p : fg.node_flow) s += plogp(p);
  return s;
}

// Codelength of a partition of the original flow graph.
double codelength(const FlowGraph& fg, const std::vector<std::size_t>& module,
                  std::size_t num_modules) {
  std::vector<double> flow(num_modules, 0.0), exit(num_modules, 0.0);
  for (std::size_t i = 0; i < fg.size(); ++i) {
    flow[module[i]] += fg.node_flow[i];
    for (const Neighbor& nb : fg.adj[i])
      if (module[nb.node] != module[i]) exit[module[i]] += nb.flow;
  }
  double q = 0.0, exit_log_exit = 0.0, flow_log_flow = 0.0;
  for (std::size_t m = 0; m < num_modules; ++m) {
    q += exit[m];
    exit_log_exit += plogp(exit[m]);
    flow_log_flow += plogp(exit[m] + flow[m]);
  }
  return plogp(q) - 2.0 * exit_log_exit - node_entropy_term(fg) + flow_log_flow;
}

class LocalMover {
 public:
  LocalMover(const FlowGraph& g, std::vector<std::size_t> init, double min_improvement)
      : g_(g), module_(std::move(init)), min_improvement_(min_improvement) {
    const std::size_t n = g_.size();
    mod_flow_.assign(n, 0.0);
    mod_exit_.assign(n, 0.0);
    mod_members_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      mod_flow_[module_[i]] += g_.node_flow[i];
      ++mod_members_[module_[i]];
      for (const Neighbor& nb : g_.adj[i])
        if (module_[nb.node] != module_[i]) mod_exit_[module_[i]] += nb.flow;
    }
    for (std::size_t m = 0; m < n; ++m) {
      total_exit_ += mod_exit_[m];
      if (mod_members_[m] == 0) free_.push_back(m);
    }
    link_.assign(n, 0.0);
  }

  // Sweeps until a sweep makes no move. Returns true if anything moved.
  bool run(Rng& rng, int max_sweeps = 200) {
    std::vector<std::size_t> order = iota_indices(g_.size());
    bool moved_any = false;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      shuffle_indices(order, rng);
      std::size_t moves = 0;
      for (std::size_t node : order)
        if (try_move(node)) ++moves;
      if (moves == 0) break;
      moved_any = true;
    }
    return moved_any;
  }

  const std::vector<std::size_t>& modules() const { return module_; }

 private:
  bool try_move(std::size_t node) {
    const std::size_t from = module_[node];
    const double p = g_.node_flow[node];
    const double e = g_.exit_flow[node];

    touched_.clear();
    for (const Neighbor& nb : g_.adj[node]) {
      const std::size_t m = module_[nb.node];
      if (link_[m] == 0.0) touched_.push_back(m);
      link_[m] += nb.flow;
    }
    const double link_from = link_[from];

    const double q_from = mod_exit_[from];
    const double p_from = mod_flow_[from];
    const double q_from_new = q_from - e + 2.0 * link_from;
    const double p_from_new = p_from - p;

    auto delta_for = [&](double q_to, double p_to, double link_to) {
      const double q_to_new = q_to + e - 2.0 * link_to;
      const double p_to_new = p_to + p;
      const double total_new = total_exit_ - q_from - q_to + q_from_new + q_to_new;
      const double d_exit = plogp(q_from_new) + plogp(q_to_new) - plogp(q_from) - plogp(q_to);
      const double d_flow = plogp(q_from_new + p_from_new) + plogp(q_to_new + p_to_new) -
                            plogp(q_from + p_from) - plogp(q_to + p_to);
      return plogp(total_new) - plogp(total_exit_) - 2.0 * d_exit + d_flow;
    };

    double best_delta = -min_improvement_;
    std::size_t best = from;
    double best_link = 0.0;
    for (std::size_t m : touched_) {
      if (m == from) continue;
      const double d = delta_for(mod_exit_[m], mod_flow_[m], link_[m]);
      if (d < best_delta) {
        best_delta = d;
        best = m;
        best_link = link_[m];
      }
    }
    if (mod_members_[from] > 1 && !free_.empty()) {
      const double d = delta_for(0.0, 0.0, 0.0);
      if (d < best_delta) {
        best_delta = d;
        best = free_.back();
        best_link = 0.0;
      }
    }
    for (std::size_t m : touched_) link_[m] = 0.0;

    if (best == from) return false;

    const double q_to_new = mod_exit_[best] + e - 2.0 * best_link;
    total_exit_ += q_from_new - q_from + q_to_new - mod_exit_[best];
    mod_exit_[from] = q_from_new;
    mod_flow_[from] = p_from_new;
    mod_exit_[best] = q_to_new;
    mod_flow_[best] += p;
    // Only the last free id is ever offered as an empty target.
    if (mod_members_[best] == 0) free_.pop_back();
    ++mod_members_[best];
    if (--mod_members_[from] == 0) {
      free_.push_back(from);
      total_exit_ -= mod_exit_[from];
      mod_exit_[from] = 0.0;
      mod_flow_[from] = 0.0;
    }
    module_[node] = best;
    return true;
  }

  const FlowGraph& g_;
  std::vector<std::size_t> module_;
  double min_improvement_;
  std::vector<double> mod_flow_, mod_exit_;
  std::vector<std::size_t> mod_members_;
  std::vector<std::size_t> free_;
  double total_exit_ = 0.0;
  std::vector<double> link_;
  std::vector<std::size_t> touched_;
};

// Contiguous module ids in order of first appearance; returns module count.
std::size_t compact(std::vector<std::size_t>& module) {
  std::size_t labels = 0;
  for (std::size_t m : module) labels = std::max(labels, m + 1);
  std::vector<std::size_t> remap(labels, std::numeric_limits<std::size_t>::max());
  std::size_t next = 0;
  for (std::size_t& m : module) {
    if (remap[m] == std::numeric_limits<std::size_t>::max()) remap[m] = next++;
    m = remap[m];
  }
  return next;
}

FlowGraph aggregate(const FlowGraph& g, const std::vector<std::size_t>& module,
                    std::size_t num_modules) {
  FlowGraph out;
  out.node_flow.assign(num_modules, 0.0);
  out.exit_flow.assign(num_modules, 0.0);
  out.adj.assign(num_modules, {});
  std::vector<double> acc(num_modules, 0.0);
  std::vector<std::vector<std::size_t>> members(num_modules);
  for (std::size_t i = 0; i < g.size(); ++i) {
    members[module[i]].push_back(i);
    out.node_flow[module[i]] += g.node_flow[i];
  }
  std::vector<std::size_t> touched;
  for (std::size_t m = 0; m < num_modules; ++m) {
    touched.clear();
    for (std::size_t i : members[m])
      for (const Neighbor& nb : g.adj[i]) {
        const std::size_t t = module[nb.node];
        if (t == m) continue;
        if (acc[t] == 0.0) touched.push_back(t);
        acc[t] += nb.flow;
      }
    std::sort(touched.begin(), touched.end());
    for (std::size_t t : touched) {
      out.adj[m].push_back({t, acc[t]});
      out.exit_flow[m] += acc[t];
      acc[t] = 0.0;
    }
  }
  return out;
}

// One search pass: node-level moves from `start`, then repeated aggregation
// and super-node moves until the hierarchy stops collapsing.
std::vector<std::size_t> search(const FlowGraph& g, std::vector<std::size_t> start, Rng& rng,
                                double min_improvement) {
  LocalMover fine(g, std::move(start), min_improvement);
  fine.run(rng);
  std::vector<std::size_t> node_module = fine.modules();
  std::size_t num = compact(node_module);

  FlowGraph level = aggregate(g, node_module, num);
  while (true) {
    LocalMover coarse(level, iota_indices(level.size()), min_improvement);
    if (!coarse.run(rng)) break;
    std::vector<std::size_t> super_module = coarse.modules();
    const std::size_t next = compact(super_module);
    if (next == level.size()) break;
    for (std::size_t& m : node_module) m = super_module[m];
    level = aggregate(level, super_module, next);
    num = next;
  }
  return node_module;
}

}  // namespace

double map_equation(const SimilarityGraph& g, const ClusterResult& partition) {
  if (partition.assignment.size() != g.node_count)
    throw DimensionError("map_equation: partition size does not match node count");
  for (std::size_t m : partition.assignment)
    if (m >= partition.num_clusters)
      throw ContractViolation("map_equation: cluster id out of range");
  FlowGraph fg;
  if (!make_flow_graph(g, fg))
    throw DegenerateInputError("map_equation: graph has zero total edge weight");
  return codelength(fg, partition.assignment, partition.num_clusters);
}

namespace {

// Nodes joined by positive-flow edges share a label; zero-flow nodes keep
// their own.
std::vector<std::size_t> flow_components(const FlowGraph& fg) {
  const std::size_t n = fg.node_flow.size();
  std::vector<std::size_t> parent = iota_indices(n);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t a = 0; a < n; ++a)
    for (const Neighbor& nb : fg.adj[a]) parent[find(a)] = find(nb.node);
  std::vector<std::size_t> label(n);
  for (std::size_t a = 0; a < n; ++a) label[a] = find(a);
  return label;
}

constexpr std::size_t kMaxMergeTrials = 32;
constexpr int kMaxMergeRounds = 16;

// Module pairs joined by flow, heaviest first, at most `limit` of them.
std::vector<std::pair<std::size_t, std::size_t>> linked_modules(
    const FlowGraph& fg, const std::vector<std::size_t>& module, std::size_t limit) {
  std::map<std::pair<std::size_t, std::size_t>, double> flow;
  for (std::size_t a = 0; a < fg.size(); ++a)
    for (const Neighbor& nb : fg.adj[a]) {
      const std::size_t ma = module[a], mb = module[nb.node];
      if (ma < mb) flow[{ma, mb}] += nb.flow;
    }
  std::vector<std::pair<double, std::pair<std::size_t, std::size_t>>> ranked;
  for (const auto& [pair, f] : flow) ranked.push_back({f, pair});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < ranked.size() && i < limit; ++i) out.push_back(ranked[i].second);
  return out;
}

constexpr std::size_t kMaxSplitTrials = 32;
constexpr int kSubmoduleRestarts = 2;
constexpr std::size_t kExhaustiveSplitSize = 10;

// Best partition of the subgraph induced by `members`, as local labels.
std::vector<std::size_t> submodules(const FlowGraph& fg, const std::vector<std::size_t>& members,
                                    Rng& rng, double min_improvement) {
  std::vector<std::size_t> local(fg.size(), members.size());
  for (std::size_t i = 0; i < members.size(); ++i) local[members[i]] = i;
  SimilarityGraph sub;
  sub.node_count = members.size();
  for (std::size_t i = 0; i < members.size(); ++i)
    for (const Neighbor& nb : fg.adj[members[i]])
      if (local[nb.node] < members.size()) sub.edges.push_back({i, local[nb.node], nb.flow});
  FlowGraph sfg;
  if (!make_flow_graph(sub, sfg)) return iota_indices(members.size());
  std::vector<std::size_t> best;
  double best_len = std::numeric_limits<double>::infinity();
  for (int r = 0; r < kSubmoduleRestarts; ++r) {
    std::vector<std::size_t> cand = search(sfg, iota_indices(members.size()), rng, min_improvement);
    const std::size_t num = compact(cand);
    const double len = codelength(sfg, cand, num);
    if (len < best_len - min_improvement) {
      best_len = len;
      best = std::move(cand);
    }
  }
  return best;
}

// Candidates that pull structure out of existing modules: each submodule
// split off on its own, and each module split into all of its submodules.
std::vector<std::vector<std::size_t>> split_candidates(const FlowGraph& fg,
                                                       const std::vector<std::size_t>& module,
                                                       Rng& rng, double min_improvement) {
  const std::size_t n = module.size();
  std::size_t next_id = 0;
  for (std::size_t m : module) next_id = std::max(next_id, m + 1);
  std::vector<std::vector<std::size_t>> members(next_id);
  for (std::size_t a = 0; a < n; ++a)
    if (fg.node_flow[a] > 0.0) members[module[a]].push_back(a);

  std::vector<std::vector<std::size_t>> out;
  for (const auto& group : members) {
    if (group.size() < 2) continue;
    if (group.size() <= kExhaustiveSplitSize) {
      // Small module: the best of all its bisections.
      std::vector<std::size_t> best_split;
      double best_len = std::numeric_limits<double>::infinity();
      const std::size_t masks = std::size_t{1} << (group.size() - 1);
      for (std::size_t mask = 1; mask < masks; ++mask) {
        std::vector<std::size_t> cand = module;
        for (std::size_t i = 0; i + 1 < group.size(); ++i)
          if (mask >> i & 1) cand[group[i + 1]] = next_id;
        std::vector<std::size_t> compacted = cand;
        const std::size_t num = compact(compacted);
        const double len = codelength(fg, compacted, num);
        if (len < best_len) {
          best_len = len;
          best_split = std::move(cand);
        }
      }
      out.push_back(std::move(best_split));
      if (out.size() >= kMaxSplitTrials) break;
      continue;
    }
    std::vector<std::size_t> sub = submodules(fg, group, rng, min_improvement);
    const std::size_t parts = compact(sub);
    if (parts < 2) continue;
    std::vector<std::size_t> all = module;
    for (std::size_t i = 0; i < group.size(); ++i) all[group[i]] = next_id + sub[i];
    out.push_back(std::move(all));
    for (std::size_t s = 0; s < parts && out.size() < kMaxSplitTrials; ++s) {
      std::vector<std::size_t> one = module;
      for (std::size_t i = 0; i < group.size(); ++i)
        if (sub[i] == s) one[group[i]] = next_id;
      out.push_back(std::move(one));
    }
    if (out.size() >= kMaxSplitTrials) break;
  }
  return out;
}

}  // namespace

ClusterResult infomap(const SimilarityGraph& g, InfomapOptions opts) {
  const std::size_t n = g.node_count;
  FlowGraph fg;
  if (n == 0) return {};
  if (!make_flow_graph(g, fg)) return ClusterResult::from_labels(iota_indices(n));

  std::vector<std::size_t> best;
  double best_len = std::numeric_limits<double>::infinity();
  auto offer = [&](std::vector<std::size_t> candidate) {
    const std::size_t num = compact(candidate);
    const double len = codelength(fg, candidate, num);
    if (len < best_len - opts.min_improvement) {
      best_len = len;
      best = std::move(candidate);
    }
  };
  auto refine = [&](std::vector<std::size_t> current, Rng& rng) {
    double current_len = codelength(fg, current, compact(current));
    // Re-enter the search from the incumbent until it stops improving.
    for (int round = 0; round < 32; ++round) {
      std::vector<std::size_t> next = search(fg, current, rng, opts.min_improvement);
      const std::size_t num = compact(next);
      const double len = codelength(fg, next, num);
      if (!(len < current_len - opts.min_improvement)) break;
      current = std::move(next);
      current_len = len;
    }
    return current;
  };

  const int restarts = std::max(1, opts.restarts);
  for (int r = 0; r < restarts; ++r) {
    Rng rng = make_rng({opts.seed, static_cast<std::uint64_t>(r), 0x696e666fULL});
    offer(refine(iota_indices(n), rng));
  }

  // Coarse starts that local moves from singletons cannot always reach: one
  // module per connected component, and every connected node in one module.
  const std::vector<std::size_t> components = flow_components(fg);
  Rng rng = make_rng({opts.seed, 0x636f6d70ULL});
  offer(refine(components, rng));
  std::vector<std::size_t> one = iota_indices(n);
  const auto first = static_cast<std::size_t>(
      std::find_if(fg.node_flow.begin(), fg.node_flow.end(), [](double f) { return f > 0.0; }) -
      fg.node_flow.begin());
  for (std::size_t a = 0; a < n; ++a)
    if (fg.node_flow[a] > 0.0) one[a] = first;
  offer(std::move(one));

  // Merge and split phases: merging two linked modules, or pulling
  // submodules out of a module, followed by local moves can escape optima
  // that single-node moves cannot.
  for (int round = 0; round < kMaxMergeRounds; ++round) {
    const double before = best_len;
    const std::vector<std::size_t> incumbent = best;
    for (const auto& [ma, mb] : linked_modules(fg, incumbent, kMaxMergeTrials)) {
      std::vector<std::size_t> merged = incumbent;
      for (std::size_t& m : merged)
        if (m == mb) m = ma;
      offer(refine(std::move(merged), rng));
    }
    for (auto& split : split_candidates(fg, incumbent, rng, opts.min_improvement))
      offer(refine(std::move(split), rng));
    if (!(best_len < before - opts.min_improvement)) break;
  }
  return ClusterResult::from_labels(best);
}

}  // namespace pnp
