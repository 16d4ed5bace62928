#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "dagmix/dpmix.hpp"
#include "dagmix/error.hpp"
#include "dagmix/graph.hpp"

namespace dagmix {

/// Dense square matrix of doubles, row-major.
struct SquareMatrix {
  std::size_t dim = 0;
  std::vector<double> values;

  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t d, double fill = 0.0) : dim(d), values(d * d, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return values[r * dim + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * dim + c]; }
};

/// Posterior co-clustering frequencies (n x n).
using SimilarityMatrix = SquareMatrix;
/// Posterior edge-inclusion frequencies (q x q), entry (u, v) for u -> v.
using PpiMatrix = SquareMatrix;

/// Cluster labels 1..K in order of first appearance.
using Partition = std::vector<std::size_t>;

template <class Label>
Partition canonical_partition(const std::vector<Label>& labels) {
  Partition out(labels.size());
  std::map<Label, std::size_t> code;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = code.try_emplace(labels[i], code.size() + 1);
    out[i] = it->second;
  }
  return out;
}

inline std::size_t cluster_count(const Partition& p) {
  return p.empty() ? 0 : *std::max_element(p.begin(), p.end());
}

inline SimilarityMatrix similarity(const Trace& trace) {
  if (trace.records.empty()) throw InvalidInput("similarity: empty trace");
  const std::size_t n = trace.n;
  std::vector<std::uint32_t> together(n * n, 0);
  std::vector<std::vector<std::size_t>> groups;
  for (const auto& rec : trace.records) {
    groups.assign(rec.dags.size(), {});
    for (std::size_t i = 0; i < n; ++i) groups[rec.labels[i]].push_back(i);
    for (const auto& g : groups)
      for (std::size_t a = 0; a < g.size(); ++a) {
        std::uint32_t* row = together.data() + g[a] * n;
        for (std::size_t b = a + 1; b < g.size(); ++b) ++row[g[b]];
      }
  }
  SimilarityMatrix s(n);
  const double R = static_cast<double>(trace.records.size());
  for (std::size_t i = 0; i < n; ++i) {
    s(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = static_cast<double>(together[i * n + j]) / R;
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

/// Variation of information H(p1) + H(p2) - 2 I(p1, p2) in nats.
template <class A, class B>
double variation_of_information(const std::vector<A>& p1, const std::vector<B>& p2) {
  if (p1.size() != p2.size()) throw InvalidInput("variation_of_information: partitions differ in length");
  if (p1.empty()) return 0.0;
  std::map<A, double> m1;
  std::map<B, double> m2;
  std::map<std::pair<A, B>, double> joint;
  for (std::size_t i = 0; i < p1.size(); ++i) {
    m1[p1[i]] += 1.0;
    m2[p2[i]] += 1.0;
    joint[{p1[i], p2[i]}] += 1.0;
  }
  const double n = static_cast<double>(p1.size());
  // VI = sum_ij r_ij (2 log r_ij - log p_i - log q_j) with r, p, q proportions.
  double vi = 0.0;
  for (const auto& [key, c] : joint) {
    const double r = c / n;
    vi += r * (2.0 * std::log(r) - std::log(m1[key.first] / n) - std::log(m2[key.second] / n));
  }
  return std::max(0.0, -vi);
}

/// Connected components of the graph joining i and j when S(i, j) > z.
inline Partition point_clustering_threshold(const SimilarityMatrix& s, double z) {
  if (!(z > 0.0 && z < 1.0)) throw InvalidInput("point_clustering_threshold: z must lie in (0, 1)");
  const std::size_t n = s.dim;
  std::vector<std::size_t> label(n, 0);
  std::size_t next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t root = 0; root < n; ++root) {
    if (label[root] != 0) continue;
    label[root] = ++next;
    stack.assign(1, root);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      for (std::size_t j = 0; j < n; ++j)
        if (label[j] == 0 && s(i, j) > z) {
          label[j] = next;
          stack.push_back(j);
        }
    }
  }
  return label;
}

/// Lower bound on the posterior expected VI of partition `c` (Jensen's
/// inequality applied to the pairwise co-clustering probabilities):
/// (1/n) sum_i [log |c_i| + log sum_j S_ij - 2 log sum_{j in c_i} S_ij].
inline double expected_vi_lower_bound(const Partition& c, const SimilarityMatrix& s) {
  const std::size_t n = c.size();
  if (s.dim != n) throw InvalidInput("expected_vi_lower_bound: size mismatch");
  if (n == 0) return 0.0;
  const std::size_t K = cluster_count(c);
  std::vector<std::vector<std::size_t>> groups(K + 1);
  for (std::size_t i = 0; i < n; ++i) groups[c[i]].push_back(i);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = s.values.data() + i * n;
    double row_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) row_sum += row[j];
    double within = 0.0;
    for (std::size_t j : groups[c[i]]) within += row[j];
    total += std::log(static_cast<double>(groups[c[i]].size())) + std::log(row_sum) - 2.0 * std::log(within);
  }
  return total / static_cast<double>(n);
}

/// Among the distinct partitions visited by the chain, the one with the
/// smallest expected-VI lower bound; ties go to fewer clusters, then to the
/// earliest record.
inline Partition point_clustering_minvi(const SimilarityMatrix& s, const Trace& trace) {
  if (trace.records.empty()) throw InvalidInput("point_clustering_minvi: empty trace");
  std::map<Partition, std::size_t> seen;
  Partition best;
  double best_score = std::numeric_limits<double>::infinity();
  for (const auto& rec : trace.records) {
    Partition p = canonical_partition(rec.labels);
    if (!seen.emplace(p, 0).second) continue;
    const double score = expected_vi_lower_bound(p, s);
    // Tolerance keeps ties robust to summation-order noise.
    const double tol = 1e-12 * std::max(1.0, std::abs(best_score));
    if (best.empty() || score < best_score - tol ||
        (std::abs(score - best_score) <= tol && cluster_count(p) < cluster_count(best))) {
      best = std::move(p);
      best_score = score;
    }
  }
  return best;
}

/// Edge-inclusion frequencies for the cluster DAG carrying subject i.
inline PpiMatrix ppi(const Trace& trace, std::size_t i) {
  if (trace.records.empty()) throw InvalidInput("ppi: empty trace");
  if (i >= trace.n) throw InvalidInput("ppi: subject out of range");
  const std::size_t q = trace.q;
  PpiMatrix p(q);
  for (const auto& rec : trace.records) {
    const Dag& d = rec.dags[rec.labels[i]];
    for (std::size_t v = 0; v < q; ++v)
      for (std::size_t u : d.parents(v)) p(u, v) += 1.0;
  }
  const double R = static_cast<double>(trace.records.size());
  for (double& v : p.values) v /= R;
  return p;
}

/// Edges with PPI > z; any directed cycle is broken by dropping its
/// lowest-PPI edge (ties: the edge appearing last in the cycle) until acyclic.
inline Dag point_dag(const PpiMatrix& p, double z) {
  if (!(z > 0.0 && z < 1.0)) throw InvalidInput("point_dag: z must lie in (0, 1)");
  const std::size_t q = p.dim;
  AdjacencyMatrix a(q, std::vector<std::uint8_t>(q, 0));
  for (std::size_t u = 0; u < q; ++u)
    for (std::size_t v = 0; v < q; ++v)
      if (u != v && p(u, v) > z) a[u][v] = 1;
  // Two-cycles cannot both exceed z > 0.5, but a lower threshold allows them.
  for (;;) {
    // Find a directed cycle by DFS with colouring.
    std::vector<int> colour(q, 0);
    std::vector<std::size_t> parent(q, q);
    std::vector<std::size_t> cycle;
    std::vector<std::pair<std::size_t, std::size_t>> stack;
    for (std::size_t root = 0; root < q && cycle.empty(); ++root) {
      if (colour[root] != 0) continue;
      stack.assign(1, {root, 0});
      colour[root] = 1;
      while (!stack.empty() && cycle.empty()) {
        auto& [u, next] = stack.back();
        if (next == q) {
          colour[u] = 2;
          stack.pop_back();
          continue;
        }
        const std::size_t v = next++;
        if (!a[u][v]) continue;
        if (colour[v] == 1) {
          // Cycle v -> ... -> u -> v.
          for (std::size_t w = u; w != v; w = parent[w]) cycle.push_back(w);
          cycle.push_back(v);
          std::reverse(cycle.begin(), cycle.end());
        } else if (colour[v] == 0) {
          colour[v] = 1;
          parent[v] = u;
          stack.emplace_back(v, 0);
        }
      }
    }
    if (cycle.empty()) break;
    std::size_t drop = 0;
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      const std::size_t u = cycle[k];
      const std::size_t v = cycle[(k + 1) % cycle.size()];
      if (p(u, v) <= lowest) {
        lowest = p(u, v);
        drop = k;
      }
    }
    a[cycle[drop]][cycle[(drop + 1) % cycle.size()]] = 0;
  }
  return Dag::from_adjacency(a);
}

} // namespace dagmix
