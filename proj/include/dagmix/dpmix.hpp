/**
 * @file dpmix.hpp
 * @brief Collapsed Gibbs sampler for a Dirichlet-process mixture of
 * categorical DAG models.
 *
 * Each iteration sweeps the cluster indicators (Neal's Algorithm 2 with the
 * DAG parameters integrated out), refreshes the concentration parameter with
 * the Escobar-West auxiliary-variable scheme, and makes Metropolis-Hastings
 * moves on every cluster DAG. Thinned post-burn-in states are stored in a
 * Trace, optionally together with posterior draws of the DAG parameters.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "dagmix/catmodel.hpp"
#include "dagmix/dataset.hpp"
#include "dagmix/error.hpp"
#include "dagmix/graph.hpp"
#include "dagmix/random.hpp"

namespace dagmix {

struct McmcConfig {
  std::size_t iterations = 100000;
  std::size_t burn_in = 10000;
  std::size_t thin = 1;
  BdeuParams bdeu{1.0};
  double dag_a = 1.0;
  std::optional<double> dag_b; ///< defaults to 2q
  double alpha_c = 3.0;        ///< Gamma(c, d) prior on alpha, d is a rate
  double alpha_d = 1.0;
  std::uint64_t seed = 1;
  std::size_t baseline_burn = 0; ///< moves per baseline DAG draw; 0 means max(10, q(q-1))
  bool no_dag = false;
  bool no_mixture = false;
  bool approx_hastings = false;
  std::optional<double> fixed_alpha;
  std::size_t init_clusters = 1; ///< > 1 assigns labels uniformly among this many clusters
  std::size_t dag_moves_per_iter = 1;
  bool random_scan = false;
  std::optional<std::size_t> max_parents;
  bool record_theta = false;
  bool debug_recount = false;
  std::size_t progress_every = 0;
  /// When non-empty (0-based, one per row) the partition is fixed to these
  /// labels and indicator updates are skipped.
  std::vector<std::size_t> fixed_labels;

  void validate() const {
    if (iterations == 0) throw ConfigError("iterations must be positive");
    if (burn_in >= iterations) throw ConfigError("burn-in must be smaller than iterations");
    if (thin == 0) throw ConfigError("thin must be >= 1");
    bdeu.validate();
    if (!(dag_a > 0.0) || (dag_b && !(*dag_b > 0.0))) throw ConfigError("DAG prior hyperparameters must be positive");
    if (!(alpha_c > 0.0) || !(alpha_d > 0.0)) throw ConfigError("alpha prior hyperparameters must be positive");
    if (fixed_alpha && !(*fixed_alpha > 0.0)) throw ConfigError("fixed alpha must be positive");
    if (init_clusters == 0) throw ConfigError("init clusters must be >= 1");
    if (dag_moves_per_iter == 0) throw ConfigError("dag-moves-per-iter must be >= 1");
  }

  DagPriorParams dag_prior(std::size_t q) const { return {dag_a, dag_b.value_or(2.0 * static_cast<double>(q))}; }

  std::size_t baseline_moves(std::size_t q) const {
    if (baseline_burn > 0) return baseline_burn;
    return std::max<std::size_t>(10, q * (q > 0 ? q - 1 : 0));
  }

  std::size_t record_count() const { return (iterations - burn_in) / thin; }
};

/// Dataset, constraints and resolved hyperparameters shared by all updates.
struct Model {
  Model(const Dataset& ds, const StructuralConstraints& c, McmcConfig cfg)
      : data(ds), constraints(c), config(std::move(cfg)), dag_prior(config.dag_prior(ds.q())),
        baseline_moves(config.baseline_moves(ds.q())) {
    config.validate();
    if (config.max_parents) constraints.set_max_parents(config.max_parents);
    if (c.size() != ds.q()) throw InvalidInput("Model: constraint size differs from variable count");
    if (!config.fixed_labels.empty() && config.fixed_labels.size() != ds.n())
      throw InvalidInput("Model: fixed labels length differs from row count");
  }

  const Dataset& data;
  StructuralConstraints constraints;
  McmcConfig config;
  DagPriorParams dag_prior;
  std::size_t baseline_moves;

  bool labels_frozen() const { return config.no_mixture || !config.fixed_labels.empty(); }
};

struct Cluster {
  Dag dag;
  NodeCounts counts;
  std::size_t size = 0;
};

/// Current partition (0-based labels), cluster DAGs with their count caches,
/// and the concentration parameter.
struct ClusterState {
  std::vector<std::size_t> labels;
  std::vector<Cluster> clusters;
  double alpha = 1.0;

  std::size_t K() const { return clusters.size(); }

  std::vector<std::size_t> members(std::size_t k) const {
    std::vector<std::size_t> rows;
    rows.reserve(clusters[k].size);
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == k) rows.push_back(i);
    return rows;
  }
};

/// Full recount of every cache plus the structural invariants.
inline void check_state(const ClusterState& state, const Dataset& ds, const StructuralConstraints& c) {
  const std::size_t K = state.K();
  std::vector<std::size_t> sizes(K, 0);
  for (std::size_t l : state.labels) {
    if (l >= K) throw InvariantError("state: label out of range");
    ++sizes[l];
  }
  for (std::size_t k = 0; k < K; ++k) {
    const Cluster& cl = state.clusters[k];
    if (sizes[k] == 0) throw InvariantError("state: empty cluster " + std::to_string(k));
    if (sizes[k] != cl.size) throw InvariantError("state: occupancy mismatch in cluster " + std::to_string(k));
    if (!c.satisfied_by(cl.dag)) throw InvariantError("state: cluster DAG violates constraints");
    const auto rows = state.members(k);
    const NodeCounts fresh = count_all(ds, rows, cl.dag);
    for (std::size_t j = 0; j < ds.q(); ++j)
      if (!fresh[j].same_counts(cl.counts[j]))
        throw InvariantError("state: count cache of cluster " + std::to_string(k) + ", node " + std::to_string(j) +
                             " differs from recount");
  }
}

namespace detail {

inline Dag draw_cluster_dag(const Model& model, Rng& rng) {
  if (model.config.no_dag) return Dag(model.data.q());
  return sample_baseline_dag(model.constraints, model.dag_prior, model.baseline_moves, rng,
                             !model.config.approx_hastings);
}

inline Cluster make_cluster(const Model& model, Dag dag, std::span<const std::size_t> rows) {
  Cluster cl;
  cl.counts = count_all(model.data, rows, dag);
  cl.dag = std::move(dag);
  cl.size = rows.size();
  return cl;
}

inline void delete_cluster(ClusterState& state, std::size_t k) {
  const std::size_t last = state.K() - 1;
  if (k != last) {
    state.clusters[k] = std::move(state.clusters[last]);
    for (auto& l : state.labels)
      if (l == last) l = k;
  }
  state.clusters.pop_back();
}

/// Relabels to 0..K-1 in order of first appearance.
inline std::vector<std::size_t> compact_labels(const std::vector<std::size_t>& raw) {
  std::vector<std::size_t> out(raw.size());
  std::vector<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::size_t code = seen.size();
    for (const auto& [from, to] : seen)
      if (from == raw[i]) code = to;
    if (code == seen.size()) seen.emplace_back(raw[i], code);
    out[i] = code;
  }
  return out;
}

} // namespace detail

/// Initial state: one cluster (default), `init_clusters` random clusters, or
/// the fixed partition; baseline DAG per cluster; alpha from its prior
/// unless fixed.
inline ClusterState init_state(const Model& model, Rng& rng) {
  const auto& cfg = model.config;
  const std::size_t n = model.data.n();
  ClusterState state;
  state.alpha = cfg.fixed_alpha ? *cfg.fixed_alpha : gamma_draw(rng, cfg.alpha_c, cfg.alpha_d);
  std::vector<std::size_t> raw(n, 0);
  if (!cfg.fixed_labels.empty()) {
    raw = cfg.fixed_labels;
  } else if (!cfg.no_mixture && cfg.init_clusters > 1) {
    for (auto& l : raw) l = uniform_index(rng, cfg.init_clusters);
  }
  state.labels = detail::compact_labels(raw);
  const std::size_t K = n == 0 ? 0 : *std::max_element(state.labels.begin(), state.labels.end()) + 1;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i)
      if (state.labels[i] == k) rows.push_back(i);
    state.clusters.push_back(detail::make_cluster(model, detail::draw_cluster_dag(model, rng), rows));
  }
  return state;
}

/// Unnormalized log full-conditional weights of row i: one entry per existing
/// cluster (log n_k^{-i} + log predictive, -inf for i's own singleton) and a
/// final entry for a new cluster (log alpha + log prior predictive).
inline std::vector<double> log_assignment_weights(const ClusterState& state, std::size_t i, const Model& model) {
  const auto x = model.data.row(i);
  const std::size_t own = state.labels[i];
  std::vector<double> w(state.K() + 1);
  for (std::size_t k = 0; k < state.K(); ++k) {
    const Cluster& cl = state.clusters[k];
    const bool in = (k == own);
    const std::size_t others = cl.size - (in ? 1 : 0);
    if (others == 0) {
      w[k] = -std::numeric_limits<double>::infinity();
      continue;
    }
    w[k] = std::log(static_cast<double>(others)) + log_posterior_predictive(x, cl.counts, in, model.config.bdeu);
  }
  w[state.K()] = std::log(state.alpha) + log_prior_predictive_empty(x, model.data);
  return w;
}

/// Gibbs update of one indicator. The DAG of a newly opened cluster is drawn
/// from the baseline only when that branch is selected; its weight does not
/// depend on the DAG.
inline void update_indicator(ClusterState& state, std::size_t i, const Model& model, Rng& rng) {
  const auto x = model.data.row(i);
  const std::vector<double> w = log_assignment_weights(state, i, model);
  const std::size_t choice = sample_log_categorical(rng, w);
  const std::size_t own = state.labels[i];
  if (choice == own) return;

  Cluster& old = state.clusters[own];
  for (auto& fc : old.counts) fc.remove(x);
  if (old.size == 0) throw InvariantError("update_indicator: occupancy underflow");
  --old.size;

  if (choice == state.K()) {
    const std::size_t rows[1] = {i};
    state.clusters.push_back(detail::make_cluster(model, detail::draw_cluster_dag(model, rng), rows));
    state.labels[i] = state.K() - 1;
  } else {
    Cluster& target = state.clusters[choice];
    for (auto& fc : target.counts) fc.add(x);
    ++target.size;
    state.labels[i] = choice;
  }
  if (old.size == 0) detail::delete_cluster(state, own);
}

/// Weight g of the Gamma(c + K, d - log eta) component:
/// g / (1 - g) = (c + K - 1) / (n (d - log eta)).
inline double alpha_mixture_weight(double c, double d, std::size_t K, std::size_t n, double eta) {
  const double rate = d - std::log(eta);
  const double odds = (c + static_cast<double>(K) - 1.0) / (static_cast<double>(n) * rate);
  return odds / (1.0 + odds);
}

/// Draws alpha | eta, K from the two-component Gamma mixture.
inline double sample_alpha_given_eta(double c, double d, std::size_t K, std::size_t n, double eta, Rng& rng) {
  const double rate = d - std::log(eta);
  const double g = alpha_mixture_weight(c, d, K, n, eta);
  const double shape = c + static_cast<double>(K) - (uniform01(rng) < g ? 0.0 : 1.0);
  return gamma_draw(rng, shape, rate);
}

/// Escobar-West update with auxiliary eta ~ Beta(alpha + 1, n).
inline void update_alpha(ClusterState& state, const Model& model, Rng& rng) {
  const auto& cfg = model.config;
  if (cfg.fixed_alpha) return;
  const std::size_t n = model.data.n();
  if (n == 0) return;
  const double eta = beta_draw(rng, state.alpha + 1.0, static_cast<double>(n));
  state.alpha = sample_alpha_given_eta(cfg.alpha_c, cfg.alpha_d, state.K(), n, eta, rng);
}

/// One Metropolis-Hastings move on the DAG of cluster k. Only the nodes whose
/// parent set changes are rescored. Returns true when the move is accepted.
inline bool update_dag(ClusterState& state, std::size_t k, const Model& model, Rng& rng) {
  Cluster& cl = state.clusters[k];
  const auto ops = enumerate_operators(cl.dag, model.constraints);
  if (ops.empty()) return false;
  const DagOperator op = ops[uniform_index(rng, ops.size())];
  Dag proposal = apply_operator(cl.dag, op);

  const auto rows = state.members(k);
  const auto touched = touched_nodes(op);
  std::vector<FamilyCounts> fresh;
  double log_r = log_prior_ratio(proposal, cl.dag, model.dag_prior);
  for (std::size_t j : touched) {
    fresh.push_back(count_family(model.data, rows, j, proposal.parents(j)));
    log_r += log_marginal_counts(fresh.back(), model.config.bdeu) - log_marginal_counts(cl.counts[j], model.config.bdeu);
  }
  if (!model.config.approx_hastings)
    log_r += std::log(static_cast<double>(ops.size())) -
             std::log(static_cast<double>(count_operators(proposal, model.constraints)));
  if (log_r >= 0.0 || std::log(uniform01(rng)) < log_r) {
    for (std::size_t t = 0; t < touched.size(); ++t) cl.counts[touched[t]] = std::move(fresh[t]);
    cl.dag = std::move(proposal);
    return true;
  }
  return false;
}

struct TraceRecord {
  std::size_t iteration = 0;
  std::vector<std::uint32_t> labels; ///< 0-based cluster of each row
  double alpha = 0.0;
  std::vector<Dag> dags;
  std::vector<ThetaDraw> theta; ///< empty unless theta was recorded
};

struct Trace {
  std::size_t n = 0;
  std::size_t q = 0;
  std::vector<TraceRecord> records;
  std::size_t dag_proposals = 0;
  std::size_t dag_accepts = 0;

  bool has_theta() const {
    if (records.empty()) return false;
    for (const auto& r : records)
      if (r.theta.size() != r.dags.size()) return false;
    return true;
  }
};

struct Progress {
  std::size_t iteration;
  std::size_t K;
  double alpha;
  double acceptance_rate;
};

inline TraceRecord snapshot(const ClusterState& state, std::size_t iteration, const Model& model, Rng& rng) {
  TraceRecord rec;
  rec.iteration = iteration;
  rec.labels.assign(state.labels.begin(), state.labels.end());
  rec.alpha = state.alpha;
  for (const Cluster& cl : state.clusters) {
    rec.dags.push_back(cl.dag);
    if (model.config.record_theta) rec.theta.push_back(sample_theta_from_counts(cl.counts, model.config.bdeu, rng));
  }
  return rec;
}

/// One full iteration: indicator sweep, alpha, DAG moves. Returns the number
/// of accepted DAG moves; `proposals` is incremented per proposal made.
inline std::size_t mcmc_step(ClusterState& state, const Model& model, Rng& rng, std::size_t& proposals,
                             std::vector<std::size_t>& order) {
  const auto& cfg = model.config;
  if (!model.labels_frozen()) {
    const std::size_t n = model.data.n();
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.random_scan)
      for (std::size_t t = n; t > 1; --t) std::swap(order[t - 1], order[uniform_index(rng, t)]);
    for (std::size_t i : order) update_indicator(state, i, model, rng);
  }
  update_alpha(state, model, rng);
  std::size_t accepted = 0;
  if (!cfg.no_dag) {
    for (std::size_t k = 0; k < state.K(); ++k)
      for (std::size_t m = 0; m < cfg.dag_moves_per_iter; ++m) {
        ++proposals;
        if (update_dag(state, k, model, rng)) ++accepted;
      }
  }
  if (cfg.debug_recount) check_state(state, model.data, model.constraints);
  return accepted;
}

/// Runs the sampler and returns the thinned post-burn-in trace.
inline Trace run_mcmc(const Model& model, Rng& rng, const std::function<void(const Progress&)>& progress = {}) {
  const auto& cfg = model.config;
  Trace trace;
  trace.n = model.data.n();
  trace.q = model.data.q();
  trace.records.reserve(cfg.record_count());
  ClusterState state = init_state(model, rng);
  std::vector<std::size_t> order;
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    trace.dag_accepts += mcmc_step(state, model, rng, trace.dag_proposals, order);
    if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) trace.records.push_back(snapshot(state, it, model, rng));
    if (progress && cfg.progress_every > 0 && it % cfg.progress_every == 0) {
      const double rate = trace.dag_proposals == 0
                              ? 0.0
                              : static_cast<double>(trace.dag_accepts) / static_cast<double>(trace.dag_proposals);
      progress(Progress{it, state.K(), state.alpha, rate});
    }
  }
  return trace;
}

} // namespace dagmix
