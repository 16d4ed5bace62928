#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "dagmix/dataset.hpp"
#include "dagmix/error.hpp"
#include "dagmix/graph.hpp"
#include "dagmix/random.hpp"

namespace dagmix {

/// BDEu equivalent sample size. Cell pseudo-count a/|X_fa(j)|, margin
/// pseudo-count a/|X_pa(j)| (|X_pa(j)| = 1 for an empty parent set).
struct BdeuParams {
  double a = 1.0;

  void validate() const {
    if (!(a > 0.0)) throw ConfigError("BDEu equivalent sample size must be positive");
  }
};

/// Mixed-radix index of parent configurations: parents in ascending node
/// order, the last parent varying fastest.
class ParentIndexer {
public:
  ParentIndexer() = default;
  ParentIndexer(const std::vector<std::size_t>& all_levels, std::vector<std::size_t> parents)
      : parents_(std::move(parents)), parent_levels_(parents_.size()), strides_(parents_.size(), 1) {
    constexpr std::uint64_t kMax = std::uint64_t{1} << 62;
    std::uint64_t total = 1;
    for (std::size_t k = parents_.size(); k-- > 0;) {
      strides_[k] = total;
      const std::uint64_t lv = all_levels[parents_[k]];
      parent_levels_[k] = all_levels[parents_[k]];
      if (total > kMax / lv) throw TooLarge("parent configuration space exceeds 2^62");
      total *= lv;
    }
    configs_ = total;
  }

  const std::vector<std::size_t>& parents() const { return parents_; }
  std::uint64_t configs() const { return configs_; }

  std::uint64_t index(std::span<const Level> row) const {
    std::uint64_t s = 0;
    for (std::size_t k = 0; k < parents_.size(); ++k) s += strides_[k] * static_cast<std::uint64_t>(row[parents_[k]]);
    return s;
  }

  /// Level of the k-th parent in configuration s.
  std::size_t digit(std::uint64_t s, std::size_t k) const {
    return static_cast<std::size_t>((s / strides_[k]) % parent_levels_[k]);
  }

private:
  std::vector<std::size_t> parents_;
  std::vector<std::size_t> parent_levels_;
  std::vector<std::uint64_t> strides_;
  std::uint64_t configs_ = 1;
};

/// Counts n_(m,s) of child level m under parent configuration s, with margins
/// n_s. Small configuration spaces use a dense table, larger ones a hash map
/// holding only observed configurations.
class FamilyCounts {
public:
  static constexpr std::uint64_t kDenseCells = 4096;

  FamilyCounts() = default;
  FamilyCounts(const Dataset& ds, std::size_t node, std::vector<std::size_t> parents)
      : node_(node), levels_(ds.levels(node)), index_(ds.all_levels(), std::move(parents)) {
    for (std::size_t p : index_.parents())
      if (p == node) throw InvalidInput("FamilyCounts: node listed among its own parents");
    pa_configs_ = 1.0;
    for (std::size_t p : index_.parents()) pa_configs_ *= static_cast<double>(ds.levels(p));
    dense_ = index_.configs() * (levels_ + 1) <= kDenseCells;
    if (dense_) table_.assign(index_.configs() * (levels_ + 1), 0);
  }

  std::size_t node() const { return node_; }
  const std::vector<std::size_t>& parents() const { return index_.parents(); }
  const ParentIndexer& indexer() const { return index_; }
  std::size_t child_levels() const { return levels_; }
  /// |X_pa(j)| as a real number (1 for no parents).
  double parent_configurations() const { return pa_configs_; }
  std::size_t total() const { return total_; }

  std::uint64_t config_of(std::span<const Level> row) const { return index_.index(row); }

  void add(std::span<const Level> row) {
    int* cell = cell_for(config_of(row), true);
    ++cell[0];
    ++cell[1 + static_cast<std::size_t>(row[node_])];
    ++total_;
  }

  void remove(std::span<const Level> row) {
    const std::uint64_t s = config_of(row);
    int* cell = cell_for(s, false);
    const auto m = 1 + static_cast<std::size_t>(row[node_]);
    if (cell == nullptr || cell[0] <= 0 || cell[m] <= 0)
      throw InvariantError("FamilyCounts::remove: count would become negative");
    --cell[0];
    --cell[m];
    --total_;
    if (!dense_ && cell[0] == 0) sparse_.erase(s);
  }

  int margin(std::uint64_t s) const {
    const int* cell = find(s);
    return cell ? cell[0] : 0;
  }
  int count(std::uint64_t s, std::size_t m) const {
    const int* cell = find(s);
    return cell ? cell[1 + m] : 0;
  }

  /// Calls f(s, margin, child_counts) for every configuration with margin > 0.
  template <class F>
  void for_each_config(F&& f) const {
    if (dense_) {
      const std::size_t width = levels_ + 1;
      for (std::uint64_t s = 0; s < index_.configs(); ++s) {
        const int* cell = table_.data() + s * width;
        if (cell[0] > 0) f(s, cell[0], std::span<const int>(cell + 1, levels_));
      }
    } else {
      for (const auto& [s, cell] : sparse_) f(s, cell[0], std::span<const int>(cell.data() + 1, levels_));
    }
  }

  bool same_counts(const FamilyCounts& other) const {
    if (node_ != other.node_ || parents() != other.parents() || total_ != other.total_) return false;
    bool equal = true;
    std::size_t seen = 0;
    for_each_config([&](std::uint64_t s, int margin, std::span<const int> counts) {
      ++seen;
      if (other.margin(s) != margin) equal = false;
      for (std::size_t m = 0; m < counts.size(); ++m)
        if (other.count(s, m) != counts[m]) equal = false;
    });
    std::size_t other_seen = 0;
    other.for_each_config([&](std::uint64_t, int, std::span<const int>) { ++other_seen; });
    return equal && seen == other_seen;
  }

private:
  const int* find(std::uint64_t s) const {
    if (dense_) return table_.data() + s * (levels_ + 1);
    auto it = sparse_.find(s);
    return it == sparse_.end() ? nullptr : it->second.data();
  }
  int* cell_for(std::uint64_t s, bool create) {
    if (dense_) return table_.data() + s * (levels_ + 1);
    auto it = sparse_.find(s);
    if (it == sparse_.end()) {
      if (!create) return nullptr;
      it = sparse_.emplace(s, std::vector<int>(levels_ + 1, 0)).first;
    }
    return it->second.data();
  }

  std::size_t node_ = 0;
  std::size_t levels_ = 0;
  ParentIndexer index_;
  double pa_configs_ = 1.0;
  std::size_t total_ = 0;
  bool dense_ = true;
  std::vector<int> table_;
  std::unordered_map<std::uint64_t, std::vector<int>> sparse_;
};

/// Per-node family counts of one cluster under one DAG.
using NodeCounts = std::vector<FamilyCounts>;

inline FamilyCounts count_family(const Dataset& ds, std::span<const std::size_t> rows, std::size_t j,
                                 const std::vector<std::size_t>& pa) {
  FamilyCounts fc(ds, j, pa);
  for (std::size_t i : rows) fc.add(ds.row(i));
  return fc;
}

inline NodeCounts count_all(const Dataset& ds, std::span<const std::size_t> rows, const Dag& d) {
  NodeCounts out;
  out.reserve(ds.q());
  for (std::size_t j = 0; j < ds.q(); ++j) out.push_back(count_family(ds, rows, j, d.parents(j)));
  return out;
}

/// log m(X_j | X_pa(j)) from a count table; unobserved configurations
/// contribute a factor of one.
inline double log_marginal_counts(const FamilyCounts& fc, const BdeuParams& b) {
  const double a_pa = b.a / fc.parent_configurations();
  const double a_fa = a_pa / static_cast<double>(fc.child_levels());
  const double lg_pa = std::lgamma(a_pa);
  const double lg_fa = std::lgamma(a_fa);
  double total = 0.0;
  fc.for_each_config([&](std::uint64_t, int margin, std::span<const int> counts) {
    total += lg_pa - std::lgamma(a_pa + margin);
    for (int c : counts)
      if (c > 0) total += std::lgamma(a_fa + c) - lg_fa;
  });
  return total;
}

inline double log_marginal_node(const Dataset& ds, std::span<const std::size_t> rows, std::size_t j,
                                const std::vector<std::size_t>& pa, const BdeuParams& b) {
  return log_marginal_counts(count_family(ds, rows, j, pa), b);
}

/// BDEu log marginal likelihood of the rows under DAG d.
inline double log_marginal_dag(const Dataset& ds, std::span<const std::size_t> rows, const Dag& d,
                               const BdeuParams& b) {
  if (d.size() != ds.q()) throw InvalidInput("log_marginal_dag: DAG size differs from variable count");
  double total = 0.0;
  for (std::size_t j = 0; j < ds.q(); ++j) total += log_marginal_node(ds, rows, j, d.parents(j), b);
  return total;
}

/// Closed-form log posterior predictive of row x given a cluster's counts.
/// `in_cluster` says whether x is already included in those counts.
inline double log_posterior_predictive(std::span<const Level> x, const NodeCounts& counts, bool in_cluster,
                                       const BdeuParams& b) {
  const int self = in_cluster ? 1 : 0;
  double total = 0.0;
  for (const FamilyCounts& fc : counts) {
    const std::uint64_t s = fc.config_of(x);
    const int n_fa = fc.count(s, static_cast<std::size_t>(x[fc.node()])) - self;
    const int n_pa = fc.margin(s) - self;
    if (n_fa < 0 || n_pa < 0) throw InvariantError("log_posterior_predictive: negative effective count");
    const double a_pa = b.a / fc.parent_configurations();
    const double a_fa = a_pa / static_cast<double>(fc.child_levels());
    total += std::log(a_fa + n_fa) - std::log(a_pa + n_pa);
  }
  return total;
}

/// Log predictive of x for an empty cluster: -sum_j log |X_j|, whatever the DAG.
inline double log_prior_predictive_empty(std::span<const Level> /*x*/, const Dataset& ds) {
  double total = 0.0;
  for (std::size_t j = 0; j < ds.q(); ++j) total -= std::log(static_cast<double>(ds.levels(j)));
  return total;
}

/// Conditional probability tables of one node: probs[s * levels + m] is
/// Pr(X_j = m | X_pa(j) = s).
struct NodeTheta {
  std::size_t node = 0;
  std::size_t levels = 0;
  ParentIndexer index;
  std::vector<double> probs;

  std::uint64_t configs() const { return index.configs(); }
  const std::vector<std::size_t>& parents() const { return index.parents(); }
  double prob(std::uint64_t s, std::size_t m) const { return probs[s * levels + m]; }
  std::span<const double> distribution(std::uint64_t s) const { return {probs.data() + s * levels, levels}; }
};

/// One draw of every conditional probability table of a DAG model.
struct ThetaDraw {
  std::vector<NodeTheta> nodes;

  std::size_t size() const { return nodes.size(); }
  /// Pr(X_j = x_j | X_pa(j) = x_pa(j)) for a full configuration x.
  double conditional(std::size_t j, std::span<const Level> x) const {
    const NodeTheta& nt = nodes[j];
    return nt.prob(nt.index.index(x), static_cast<std::size_t>(x[j]));
  }
};

inline constexpr std::uint64_t kMaxThetaConfigs = 10'000'000;

/// Posterior draw theta_s ~ Dirichlet(a/|X_fa| + n_(., s)) for every node and
/// every parent configuration, observed or not.
inline ThetaDraw sample_theta_from_counts(const NodeCounts& counts, const BdeuParams& b, Rng& rng) {
  ThetaDraw out;
  out.nodes.reserve(counts.size());
  std::vector<double> conc;
  for (const FamilyCounts& fc : counts) {
    NodeTheta nt;
    nt.node = fc.node();
    nt.levels = fc.child_levels();
    nt.index = fc.indexer();
    if (nt.configs() > kMaxThetaConfigs) throw TooLarge("sample_theta: parent configuration space too large");
    nt.probs.assign(nt.configs() * nt.levels, 0.0);
    const double a_fa = b.a / fc.parent_configurations() / static_cast<double>(nt.levels);
    conc.assign(nt.levels, a_fa);
    for (std::uint64_t s = 0; s < nt.configs(); ++s) {
      for (std::size_t m = 0; m < nt.levels; ++m) conc[m] = a_fa + fc.count(s, m);
      dirichlet_draw(rng, conc, std::span<double>(nt.probs.data() + s * nt.levels, nt.levels));
    }
    out.nodes.push_back(std::move(nt));
  }
  return out;
}

inline ThetaDraw sample_theta(const Dataset& ds, std::span<const std::size_t> rows, const Dag& d, const BdeuParams& b,
                              Rng& rng) {
  return sample_theta_from_counts(count_all(ds, rows, d), b, rng);
}

} // namespace dagmix
