#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dagmix/catmodel.hpp"
#include "dagmix/dataset.hpp"
#include "dagmix/dpmix.hpp"
#include "dagmix/error.hpp"
#include "dagmix/graph.hpp"
#include "dagmix/random.hpp"
#include "dagmix/summaries.hpp"

namespace dagmix {

struct SynthConfig {
  std::size_t q = 10;
  std::size_t K = 2;
  std::size_t n_k = 100;
  double edge_prob = 0.2;
  double alpha_q = 0.1;
  std::size_t replicates = 40;
  std::uint64_t seed = 1;

  void validate() const {
    if (q == 0 || K == 0 || n_k == 0 || replicates == 0) throw ConfigError("synth: q, K, n_k and replicates must be positive");
    if (!(edge_prob >= 0.0 && edge_prob <= 1.0)) throw ConfigError("synth: edge probability must lie in [0, 1]");
    if (!(alpha_q > 0.0 && alpha_q < 0.5)) throw ConfigError("synth: alpha_q must lie in (0, 0.5)");
  }
};

/// Random node order, then each order-respecting pair u -> v independently
/// with probability `edge_prob`.
inline Dag random_dag(std::size_t q, double edge_prob, Rng& rng) {
  std::vector<std::size_t> order(q);
  for (std::size_t j = 0; j < q; ++j) order[j] = j;
  for (std::size_t t = q; t > 1; --t) std::swap(order[t - 1], order[uniform_index(rng, t)]);
  AdjacencyMatrix a(q, std::vector<std::uint8_t>(q, 0));
  for (std::size_t x = 0; x < q; ++x)
    for (std::size_t y = x + 1; y < q; ++y)
      if (uniform01(rng) < edge_prob) a[order[x]][order[y]] = 1;
  return Dag::from_adjacency(a);
}

/// Unit-diagonal matrix L (q x q, row-major) with L[u][v] nonzero iff u -> v.
inline std::vector<double> draw_latent_weights(const Dag& d, Rng& rng) {
  const std::size_t q = d.size();
  std::vector<double> L(q * q, 0.0);
  for (std::size_t j = 0; j < q; ++j) L[j * q + j] = 1.0;
  for (const auto& [u, v] : d.edges()) {
    const double mag = 1.0 + uniform01(rng);
    L[u * q + v] = uniform01(rng) < 0.5 ? -mag : mag;
  }
  return L;
}

/// n x q draws (row-major) of Z with L^T Z = eps, eps ~ N(0, I), so
/// Cov(Z) = L^{-T} L^{-1}.
inline std::vector<double> gaussian_latents(const Dag& d, const std::vector<double>& L, std::size_t n, Rng& rng) {
  const std::size_t q = d.size();
  const auto topo = d.topological_order();
  std::vector<double> Z(n * q, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* z = Z.data() + i * q;
    for (std::size_t v : topo) {
      double val = standard_normal(rng);
      for (std::size_t u : d.parents(v)) val -= L[u * q + v] * z[u];
      z[v] = val;
    }
  }
  return Z;
}

/// Analytic covariance L^{-T} L^{-1} of the latent vector.
inline std::vector<double> latent_covariance(const Dag& d, const std::vector<double>& L) {
  const std::size_t q = d.size();
  std::vector<double> B(q * q, 0.0); // B[v][k] = dZ_v / d eps_k
  const auto topo = d.topological_order();
  for (std::size_t k = 0; k < q; ++k)
    for (std::size_t v : topo) {
      double val = (v == k) ? 1.0 : 0.0;
      for (std::size_t u : d.parents(v)) val -= L[u * q + v] * B[u * q + k];
      B[v * q + k] = val;
    }
  std::vector<double> S(q * q, 0.0);
  for (std::size_t a = 0; a < q; ++a)
    for (std::size_t b = 0; b < q; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < q; ++k) s += B[a * q + k] * B[b * q + k];
      S[a * q + b] = s;
    }
  return S;
}

/// Sample quantile with linear interpolation between order statistics.
inline double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidInput("empirical_quantile: no values");
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct Discretized {
  std::vector<Level> cells; ///< n x q, row-major
  std::vector<double> thresholds;
};

/// X = 1{Z >= g_j} with g_j uniform between the alpha_q and 1 - alpha_q
/// empirical quantiles of column j.
inline Discretized discretize(const std::vector<double>& Z, std::size_t n, std::size_t q, double alpha_q, Rng& rng) {
  if (!(alpha_q > 0.0 && alpha_q < 0.5)) throw InvalidInput("discretize: alpha_q must lie in (0, 0.5)");
  if (Z.size() != n * q) throw InvalidInput("discretize: matrix size mismatch");
  Discretized out;
  out.cells.assign(n * q, 0);
  out.thresholds.resize(q);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < q; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = Z[i * q + j];
    const double lo = empirical_quantile(col, alpha_q);
    const double hi = empirical_quantile(col, 1.0 - alpha_q);
    const double g = lo + (hi - lo) * uniform01(rng);
    out.thresholds[j] = g;
    for (std::size_t i = 0; i < n; ++i) out.cells[i * q + j] = Z[i * q + j] >= g ? 1 : 0;
  }
  return out;
}

struct SynthOutput {
  Dataset data;
  std::vector<std::size_t> labels; ///< 0-based true cluster of each row
  std::vector<Dag> dags;
  std::vector<std::vector<double>> thresholds; ///< [cluster][variable]
};

/// K blocks of n_k rows, each block from its own random DAG and thresholds.
inline SynthOutput generate(const SynthConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t q = cfg.q;
  SynthOutput out;
  std::vector<Level> cells;
  cells.reserve(cfg.K * cfg.n_k * q);
  for (std::size_t k = 0; k < cfg.K; ++k) {
    Dag d = random_dag(q, cfg.edge_prob, rng);
    const auto L = draw_latent_weights(d, rng);
    const auto Z = gaussian_latents(d, L, cfg.n_k, rng);
    Discretized x = discretize(Z, cfg.n_k, q, cfg.alpha_q, rng);
    cells.insert(cells.end(), x.cells.begin(), x.cells.end());
    out.labels.insert(out.labels.end(), cfg.n_k, k);
    out.dags.push_back(std::move(d));
    out.thresholds.push_back(std::move(x.thresholds));
  }
  out.data = Dataset(std::vector<std::size_t>(q, 2), std::move(cells));
  return out;
}

enum class BenchMode { Mixture, NoDag, NoMixture, Oracle };

inline const char* mode_name(BenchMode m) {
  switch (m) {
  case BenchMode::Mixture: return "mixture";
  case BenchMode::NoDag: return "no_dag";
  case BenchMode::NoMixture: return "no_mixture";
  case BenchMode::Oracle: return "oracle";
  }
  return "?";
}

inline BenchMode parse_mode(const std::string& s) {
  if (s == "mixture") return BenchMode::Mixture;
  if (s == "no_dag" || s == "no-dag") return BenchMode::NoDag;
  if (s == "no_mixture" || s == "no-mixture") return BenchMode::NoMixture;
  if (s == "oracle") return BenchMode::Oracle;
  throw ConfigError("unknown benchmark mode '" + s + "'");
}

struct BenchRow {
  std::size_t replicate = 0; ///< 1-based
  std::size_t n_k = 0;
  double alpha_q = 0.0;
  std::string mode;
  std::string metric;
  double value = 0.0;
};

struct BenchGrid {
  std::vector<std::size_t> n_k{100, 200, 500};
  std::vector<double> alpha_q{0.1, 0.4};
  std::vector<BenchMode> modes{BenchMode::Mixture, BenchMode::NoDag, BenchMode::NoMixture, BenchMode::Oracle};
  /// Point-estimate thresholds.
  double ppi_threshold = 0.5;
  std::size_t threads = 1;
};

/// RNG stream of the data for one grid cell and replicate; `simulate` and
/// `benchmark` share it so exported data matches what was scored.
inline std::uint64_t data_stream(std::size_t cell, std::size_t replicate) {
  return (static_cast<std::uint64_t>(cell) << 32) | (static_cast<std::uint64_t>(replicate) << 4);
}

inline std::uint64_t mode_stream(std::size_t cell, std::size_t replicate, BenchMode m) {
  return data_stream(cell, replicate) | (1u + static_cast<std::uint64_t>(m));
}

/// Mean over subjects of SHD(point DAG of subject i, true DAG of its cluster).
inline double mean_subject_shd(const Trace& trace, const SynthOutput& truth, double z) {
  double total = 0.0;
  // Subjects sharing a label sequence share a PPI matrix.
  std::map<std::vector<std::uint32_t>, Dag> cache;
  std::vector<std::uint32_t> key(trace.records.size());
  for (std::size_t i = 0; i < trace.n; ++i) {
    for (std::size_t r = 0; r < trace.records.size(); ++r) key[r] = trace.records[r].labels[i];
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, point_dag(ppi(trace, i), z)).first;
    total += static_cast<double>(shd(it->second, truth.dags[truth.labels[i]]));
  }
  return total / static_cast<double>(trace.n);
}

/// Runs one mode on one generated dataset and appends its metrics.
inline void score_mode(const SynthOutput& truth, const McmcConfig& base, BenchMode mode, const BenchGrid& grid,
                       Rng& rng, BenchRow stem, std::vector<BenchRow>& rows) {
  McmcConfig cfg = base;
  cfg.record_theta = false;
  cfg.progress_every = 0;
  switch (mode) {
  case BenchMode::Mixture: break;
  case BenchMode::NoDag: cfg.no_dag = true; break;
  case BenchMode::NoMixture: cfg.no_mixture = true; break;
  case BenchMode::Oracle: cfg.fixed_labels = truth.labels; break;
  }
  const StructuralConstraints none(truth.data.q());
  const Model model(truth.data, none, cfg);
  const Trace trace = run_mcmc(model, rng);
  stem.mode = mode_name(mode);
  if (mode != BenchMode::Oracle) {
    const Partition c = point_clustering_minvi(similarity(trace), trace);
    stem.metric = "vi";
    stem.value = variation_of_information(c, truth.labels);
    rows.push_back(stem);
  }
  if (mode != BenchMode::NoDag) {
    stem.metric = "shd";
    stem.value = mean_subject_shd(trace, truth, grid.ppi_threshold);
    rows.push_back(stem);
  }
}

/// Every (n_k, alpha_q) cell of the grid times every replicate, each with its
/// own data and sampler streams. Rows come back ordered by cell, replicate,
/// then mode, whatever the thread count.
inline std::vector<BenchRow> benchmark_run(const SynthConfig& base_cfg, const McmcConfig& mcfg, const BenchGrid& grid) {
  base_cfg.validate();
  mcfg.validate();
  struct Job {
    std::size_t cell, replicate, n_k;
    double alpha_q;
  };
  std::vector<Job> jobs;
  std::size_t cell = 0;
  for (std::size_t nk : grid.n_k)
    for (double aq : grid.alpha_q) {
      for (std::size_t r = 0; r < base_cfg.replicates; ++r) jobs.push_back({cell, r, nk, aq});
      ++cell;
    }
  std::vector<std::vector<BenchRow>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_lock;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= jobs.size()) return;
      try {
        const Job& job = jobs[t];
        SynthConfig cfg = base_cfg;
        cfg.n_k = job.n_k;
        cfg.alpha_q = job.alpha_q;
        Rng data_rng = make_rng(base_cfg.seed, data_stream(job.cell, job.replicate));
        const SynthOutput truth = generate(cfg, data_rng);
        BenchRow stem;
        stem.replicate = job.replicate + 1;
        stem.n_k = job.n_k;
        stem.alpha_q = job.alpha_q;
        for (BenchMode m : grid.modes) {
          McmcConfig run = mcfg;
          run.seed = base_cfg.seed;
          Rng rng = make_rng(base_cfg.seed, mode_stream(job.cell, job.replicate, m));
          score_mode(truth, run, m, grid, rng, stem, results[t]);
        }
      } catch (...) {
        std::lock_guard<std::mutex> g(error_lock);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t nthreads = std::max<std::size_t>(1, std::min(grid.threads, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < nthreads; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  std::vector<BenchRow> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

} // namespace dagmix
