#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dagmix/error.hpp"
#include "dagmix/random.hpp"

namespace dagmix {

using Edge = std::pair<std::size_t, std::size_t>;

/// Dense q x q binary matrix, row u / column v set iff u -> v.
using AdjacencyMatrix = std::vector<std::vector<std::uint8_t>>;

/// True iff the directed graph encoded by `adjacency` has no directed cycle.
/// Throws InvalidInput for non-square input or self loops.
inline bool is_acyclic(const AdjacencyMatrix& adjacency) {
  const std::size_t q = adjacency.size();
  for (std::size_t u = 0; u < q; ++u) {
    if (adjacency[u].size() != q) throw InvalidInput("is_acyclic: adjacency matrix is not square");
    if (adjacency[u][u] != 0) throw InvalidInput("is_acyclic: nonzero diagonal entry");
  }
  // Kahn elimination.
  std::vector<std::size_t> indegree(q, 0);
  for (std::size_t u = 0; u < q; ++u)
    for (std::size_t v = 0; v < q; ++v)
      if (adjacency[u][v]) ++indegree[v];
  std::vector<std::size_t> ready;
  for (std::size_t v = 0; v < q; ++v)
    if (indegree[v] == 0) ready.push_back(v);
  std::size_t removed = 0;
  while (!ready.empty()) {
    const std::size_t u = ready.back();
    ready.pop_back();
    ++removed;
    for (std::size_t v = 0; v < q; ++v)
      if (adjacency[u][v] && --indegree[v] == 0) ready.push_back(v);
  }
  return removed == q;
}

class Dag;
struct DagOperator;
Dag apply_operator(const Dag& d, const DagOperator& op);

/// Directed acyclic graph over nodes 0..q-1. Stores a dense adjacency matrix
/// and sorted parent lists; values are immutable once built.
class Dag {
public:
  Dag() = default;
  explicit Dag(std::size_t q) : q_(q), adj_(q * q, 0), parents_(q) {}

  /// Builds a DAG from an edge list. Throws InvalidInput on out-of-range
  /// nodes, self loops, duplicate/antiparallel edges or cycles.
  static Dag from_edges(std::size_t q, const std::vector<Edge>& edges) {
    Dag d(q);
    for (const auto& [u, v] : edges) {
      if (u >= q || v >= q) throw InvalidInput("Dag: edge endpoint out of range");
      if (u == v) throw InvalidInput("Dag: self loop");
      if (d.has_edge(u, v) || d.has_edge(v, u)) throw InvalidInput("Dag: duplicate or antiparallel edge");
      d.set_edge(u, v);
    }
    if (!is_acyclic(d.adjacency())) throw InvalidInput("Dag: edges contain a directed cycle");
    return d;
  }

  static Dag from_adjacency(const AdjacencyMatrix& adjacency) {
    if (!is_acyclic(adjacency)) throw InvalidInput("Dag: adjacency contains a directed cycle");
    const std::size_t q = adjacency.size();
    std::vector<Edge> edges;
    for (std::size_t u = 0; u < q; ++u)
      for (std::size_t v = 0; v < q; ++v)
        if (adjacency[u][v]) edges.emplace_back(u, v);
    return from_edges(q, edges);
  }

  std::size_t size() const { return q_; }
  std::size_t edge_count() const { return edges_; }
  bool has_edge(std::size_t u, std::size_t v) const { return adj_[u * q_ + v] != 0; }
  bool adjacent(std::size_t u, std::size_t v) const { return has_edge(u, v) || has_edge(v, u); }
  const std::vector<std::size_t>& parents(std::size_t v) const { return parents_[v]; }

  std::vector<std::size_t> children(std::size_t u) const {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < q_; ++v)
      if (has_edge(u, v)) out.push_back(v);
    return out;
  }

  /// Edges sorted by (u, v).
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(edges_);
    for (std::size_t u = 0; u < q_; ++u)
      for (std::size_t v = 0; v < q_; ++v)
        if (has_edge(u, v)) out.emplace_back(u, v);
    return out;
  }

  AdjacencyMatrix adjacency() const {
    AdjacencyMatrix a(q_, std::vector<std::uint8_t>(q_, 0));
    for (std::size_t u = 0; u < q_; ++u)
      for (std::size_t v = 0; v < q_; ++v) a[u][v] = adj_[u * q_ + v];
    return a;
  }

  /// reach[a * q + b] != 0 iff there is a directed path of length >= 1 from a to b.
  std::vector<std::uint8_t> reachability() const {
    std::vector<std::uint8_t> reach(q_ * q_, 0);
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < q_; ++s) {
      stack.assign(1, s);
      while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        for (std::size_t v = 0; v < q_; ++v) {
          if (has_edge(u, v) && !reach[s * q_ + v]) {
            reach[s * q_ + v] = 1;
            stack.push_back(v);
          }
        }
      }
    }
    return reach;
  }

  /// Nodes in a topological order (parents before children, ties by index).
  std::vector<std::size_t> topological_order() const {
    std::vector<std::size_t> indegree(q_);
    for (std::size_t v = 0; v < q_; ++v) indegree[v] = parents_[v].size();
    std::vector<std::size_t> order;
    order.reserve(q_);
    std::vector<std::uint8_t> done(q_, 0);
    while (order.size() < q_) {
      for (std::size_t v = 0; v < q_; ++v) {
        if (!done[v] && indegree[v] == 0) {
          done[v] = 1;
          order.push_back(v);
          for (std::size_t w = 0; w < q_; ++w)
            if (has_edge(v, w)) --indegree[w];
          break;
        }
      }
    }
    return order;
  }

  friend bool operator==(const Dag& a, const Dag& b) { return a.q_ == b.q_ && a.adj_ == b.adj_; }

private:
  friend Dag apply_operator(const Dag& d, const DagOperator& op);

  void set_edge(std::size_t u, std::size_t v) {
    adj_[u * q_ + v] = 1;
    auto& pa = parents_[v];
    pa.insert(std::lower_bound(pa.begin(), pa.end(), u), u);
    ++edges_;
  }
  void clear_edge(std::size_t u, std::size_t v) {
    adj_[u * q_ + v] = 0;
    auto& pa = parents_[v];
    pa.erase(std::lower_bound(pa.begin(), pa.end(), u));
    --edges_;
  }

  std::size_t q_ = 0;
  std::size_t edges_ = 0;
  std::vector<std::uint8_t> adj_;
  std::vector<std::vector<std::size_t>> parents_;
};

/// Forbidden directed edges, plus an optional cap on parent-set size.
class StructuralConstraints {
public:
  StructuralConstraints() = default;
  explicit StructuralConstraints(std::size_t q) : q_(q), forbidden_(q * q, 0) {}

  std::size_t size() const { return q_; }

  void forbid(std::size_t u, std::size_t v) {
    check(u);
    check(v);
    if (u == v) throw InvalidInput("constraints: cannot forbid a self loop");
    forbidden_[u * q_ + v] = 1;
  }
  /// No edge may point into `u`.
  void exogenous(std::size_t u) {
    check(u);
    for (std::size_t w = 0; w < q_; ++w)
      if (w != u) forbidden_[w * q_ + u] = 1;
  }
  /// No edge may leave `u`.
  void response(std::size_t u) {
    check(u);
    for (std::size_t w = 0; w < q_; ++w)
      if (w != u) forbidden_[u * q_ + w] = 1;
  }

  bool is_forbidden(std::size_t u, std::size_t v) const { return forbidden_[u * q_ + v] != 0; }

  void set_max_parents(std::optional<std::size_t> cap) { max_parents_ = cap; }
  std::optional<std::size_t> max_parents() const { return max_parents_; }

  bool parent_room(const Dag& d, std::size_t v) const {
    return !max_parents_ || d.parents(v).size() < *max_parents_;
  }

  bool satisfied_by(const Dag& d) const {
    if (d.size() != q_) return false;
    for (std::size_t v = 0; v < q_; ++v) {
      if (max_parents_ && d.parents(v).size() > *max_parents_) return false;
      for (std::size_t u : d.parents(v))
        if (is_forbidden(u, v)) return false;
    }
    return true;
  }

  std::vector<Edge> forbidden_edges() const {
    std::vector<Edge> out;
    for (std::size_t u = 0; u < q_; ++u)
      for (std::size_t v = 0; v < q_; ++v)
        if (is_forbidden(u, v)) out.emplace_back(u, v);
    return out;
  }

private:
  void check(std::size_t u) const {
    if (u >= q_) throw InvalidInput("constraints: node index out of range");
  }

  std::size_t q_ = 0;
  std::vector<std::uint8_t> forbidden_;
  std::optional<std::size_t> max_parents_;
};

/// Parses a constraint file: one directive per line (`forbid u v`,
/// `exogenous u`, `response u`), `#` starts a comment. Nodes are 0-based
/// indices or column names.
inline StructuralConstraints parse_constraints(std::istream& in, std::size_t q,
                                               const std::vector<std::string>& names = {}) {
  StructuralConstraints c(q);
  std::string line;
  std::size_t lineno = 0;
  auto node = [&](const std::string& tok) -> std::size_t {
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j] == tok) return j;
    std::size_t pos = 0;
    unsigned long value = 0;
    try {
      value = std::stoul(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != tok.size() || tok.empty())
      throw ConfigError("constraints line " + std::to_string(lineno) + ": unknown node '" + tok + "'");
    if (value >= q)
      throw ConfigError("constraints line " + std::to_string(lineno) + ": node index " + tok + " out of range");
    return value;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    for (std::string tok; ss >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    const std::string& directive = tokens[0];
    if (directive == "forbid" && tokens.size() == 3) {
      const auto u = node(tokens[1]);
      const auto v = node(tokens[2]);
      if (u == v) throw ConfigError("constraints line " + std::to_string(lineno) + ": self loop");
      c.forbid(u, v);
    } else if (directive == "exogenous" && tokens.size() == 2) {
      c.exogenous(node(tokens[1]));
    } else if (directive == "response" && tokens.size() == 2) {
      c.response(node(tokens[1]));
    } else {
      throw ConfigError("constraints line " + std::to_string(lineno) + ": cannot parse '" + line + "'");
    }
  }
  return c;
}

enum class OpKind { Insert, Delete, Reverse };

/// Local move on a DAG. Insert adds u -> v; Delete removes the existing
/// u -> v; Reverse turns the existing u -> v into v -> u.
struct DagOperator {
  OpKind kind;
  std::size_t u;
  std::size_t v;

  friend bool operator==(const DagOperator&, const DagOperator&) = default;
};

inline DagOperator inverse(const DagOperator& op) {
  switch (op.kind) {
  case OpKind::Insert: return {OpKind::Delete, op.u, op.v};
  case OpKind::Delete: return {OpKind::Insert, op.u, op.v};
  case OpKind::Reverse: return {OpKind::Reverse, op.v, op.u};
  }
  return op;
}

namespace detail {

/// Is there a directed path u ~> v that does not use the edge u -> v itself?
inline bool alternative_path(const Dag& d, const std::vector<std::uint8_t>& reach, std::size_t u,
                             std::size_t v) {
  const std::size_t q = d.size();
  for (std::size_t w = 0; w < q; ++w)
    if (w != v && d.has_edge(u, w) && reach[w * q + v]) return true;
  return false;
}

template <class Visit>
void for_each_valid_operator(const Dag& d, const StructuralConstraints& c, Visit&& visit) {
  const std::size_t q = d.size();
  const auto reach = d.reachability();
  for (std::size_t u = 0; u < q; ++u)
    for (std::size_t v = 0; v < q; ++v)
      if (u != v && !d.adjacent(u, v) && !c.is_forbidden(u, v) && !reach[v * q + u] && c.parent_room(d, v))
        visit(DagOperator{OpKind::Insert, u, v});
  for (std::size_t u = 0; u < q; ++u)
    for (std::size_t v = 0; v < q; ++v)
      if (d.has_edge(u, v)) visit(DagOperator{OpKind::Delete, u, v});
  for (std::size_t u = 0; u < q; ++u)
    for (std::size_t v = 0; v < q; ++v)
      if (d.has_edge(u, v) && !c.is_forbidden(v, u) && c.parent_room(d, u) && !alternative_path(d, reach, u, v))
        visit(DagOperator{OpKind::Reverse, u, v});
}

} // namespace detail

/// All operators whose result is acyclic and satisfies `c`, ordered by
/// kind (Insert, Delete, Reverse), then u, then v.
inline std::vector<DagOperator> enumerate_operators(const Dag& d, const StructuralConstraints& c) {
  if (c.size() != d.size()) throw InvalidInput("enumerate_operators: constraint size mismatch");
  std::vector<DagOperator> ops;
  detail::for_each_valid_operator(d, c, [&](const DagOperator& op) { ops.push_back(op); });
  return ops;
}

inline std::size_t count_operators(const Dag& d, const StructuralConstraints& c) {
  if (c.size() != d.size()) throw InvalidInput("count_operators: constraint size mismatch");
  std::size_t n = 0;
  detail::for_each_valid_operator(d, c, [&](const DagOperator&) { ++n; });
  return n;
}

/// Applies `op`. Throws ContractViolation if the operator does not fit `d`
/// or would create a cycle.
inline Dag apply_operator(const Dag& d, const DagOperator& op) {
  const std::size_t q = d.size();
  if (op.u >= q || op.v >= q || op.u == op.v) throw ContractViolation("apply_operator: bad node indices");
  Dag out = d;
  switch (op.kind) {
  case OpKind::Insert: {
    if (d.adjacent(op.u, op.v)) throw ContractViolation("apply_operator: insert on adjacent pair");
    const auto reach = d.reachability();
    if (reach[op.v * q + op.u]) throw ContractViolation("apply_operator: insert would create a cycle");
    out.set_edge(op.u, op.v);
    break;
  }
  case OpKind::Delete:
    if (!d.has_edge(op.u, op.v)) throw ContractViolation("apply_operator: delete of a missing edge");
    out.clear_edge(op.u, op.v);
    break;
  case OpKind::Reverse: {
    if (!d.has_edge(op.u, op.v)) throw ContractViolation("apply_operator: reverse of a missing edge");
    const auto reach = d.reachability();
    if (detail::alternative_path(d, reach, op.u, op.v))
      throw ContractViolation("apply_operator: reverse would create a cycle");
    out.clear_edge(op.u, op.v);
    out.set_edge(op.v, op.u);
    break;
  }
  }
  return out;
}

/// Nodes whose parent set differs after applying `op`.
inline std::vector<std::size_t> touched_nodes(const DagOperator& op) {
  if (op.kind == OpKind::Reverse) return {std::min(op.u, op.v), std::max(op.u, op.v)};
  return {op.v};
}

/// Beta hyperparameters (a, b) of the edge-inclusion probability.
struct DagPriorParams {
  double a = 1.0;
  double b = 1.0;

  void validate() const {
    if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("DAG prior hyperparameters must be positive");
  }
};

/// Unnormalized log p(D) = log Gamma(|S| + a) + log Gamma(M - |S| + b), M = q(q-1)/2.
inline double log_dag_prior(std::size_t q, std::size_t edges, const DagPriorParams& p) {
  const double max_edges = 0.5 * static_cast<double>(q) * static_cast<double>(q > 0 ? q - 1 : 0);
  const double s = static_cast<double>(edges);
  return std::lgamma(s + p.a) + std::lgamma(max_edges - s + p.b);
}

/// log p(d_new) - log p(d_old) under the Beta-Binomial skeleton prior.
inline double log_prior_ratio(const Dag& d_new, const Dag& d_old, const DagPriorParams& p) {
  if (d_new.size() != d_old.size()) throw InvalidInput("log_prior_ratio: node counts differ");
  const std::size_t q = d_new.size();
  const std::size_t s_new = d_new.edge_count();
  const std::size_t s_old = d_old.edge_count();
  if (s_new == s_old) return 0.0;
  const double max_edges = 0.5 * static_cast<double>(q) * static_cast<double>(q - 1);
  // Gamma(x + 1) = x Gamma(x) for single-edge moves.
  if (s_new == s_old + 1) {
    const double s = static_cast<double>(s_old);
    return std::log(s + p.a) - std::log(max_edges - s - 1.0 + p.b);
  }
  if (s_old == s_new + 1) {
    const double s = static_cast<double>(s_new);
    return std::log(max_edges - s - 1.0 + p.b) - std::log(s + p.a);
  }
  return log_dag_prior(q, s_new, p) - log_dag_prior(q, s_old, p);
}

/// Draws from the skeleton prior restricted to DAGs satisfying `c` by running
/// `burn` Metropolis-Hastings moves from the empty graph. With
/// `exact_hastings` the proposal ratio |O_D| / |O_D'| is included;
/// otherwise it is taken as 1.
inline Dag sample_baseline_dag(const StructuralConstraints& c, const DagPriorParams& p, std::size_t burn, Rng& rng,
                               bool exact_hastings = true) {
  if (burn < 1) throw InvalidInput("sample_baseline_dag: burn must be >= 1");
  Dag d(c.size());
  std::vector<DagOperator> ops = enumerate_operators(d, c);
  for (std::size_t t = 0; t < burn; ++t) {
    if (ops.empty()) break;
    const DagOperator op = ops[uniform_index(rng, ops.size())];
    Dag proposal = apply_operator(d, op);
    std::vector<DagOperator> proposal_ops = enumerate_operators(proposal, c);
    double log_r = log_prior_ratio(proposal, d, p);
    if (exact_hastings)
      log_r += std::log(static_cast<double>(ops.size())) - std::log(static_cast<double>(proposal_ops.size()));
    if (log_r >= 0.0 || std::log(uniform01(rng)) < log_r) {
      d = std::move(proposal);
      ops = std::move(proposal_ops);
    }
  }
  return d;
}

/// Structural Hamming distance: node pairs on which the graphs disagree
/// (missing, extra or reversed edge each count once).
inline std::size_t shd(const Dag& d1, const Dag& d2) {
  if (d1.size() != d2.size()) throw InvalidInput("shd: node counts differ");
  const std::size_t q = d1.size();
  std::size_t dist = 0;
  for (std::size_t u = 0; u < q; ++u)
    for (std::size_t v = u + 1; v < q; ++v)
      if (d1.has_edge(u, v) != d2.has_edge(u, v) || d1.has_edge(v, u) != d2.has_edge(v, u)) ++dist;
  return dist;
}

} // namespace dagmix
