#include <cmath>

#include <gtest/gtest.h>

#include "dagmix/synth.hpp"

using namespace dagmix;

TEST(RandomDag, ExtremeEdgeProbabilities) {
  Rng rng = make_rng(1);
  EXPECT_EQ(random_dag(6, 0.0, rng).edge_count(), 0u);
  const Dag full = random_dag(6, 1.0, rng);
  EXPECT_EQ(full.edge_count(), 15u);
  EXPECT_TRUE(is_acyclic(full.adjacency()));
}

TEST(RandomDag, EdgeCountAndPairFrequency) {
  Rng rng = make_rng(2);
  const std::size_t q = 10, draws = 4000;
  double total = 0.0;
  std::vector<double> pair(q * q, 0.0);
  for (std::size_t t = 0; t < draws; ++t) {
    const Dag d = random_dag(q, 0.2, rng);
    total += static_cast<double>(d.edge_count());
    for (const auto& [u, v] : d.edges()) pair[u * q + v] += 1.0;
  }
  EXPECT_NEAR(total / draws, 9.0, 0.3);
  // Either orientation of a pair is equally likely.
  for (std::size_t u = 0; u < q; ++u)
    for (std::size_t v = u + 1; v < q; ++v) {
      EXPECT_NEAR((pair[u * q + v] + pair[v * q + u]) / draws, 0.2, 0.03);
      EXPECT_NEAR(pair[u * q + v] / draws, 0.1, 0.025);
    }
}

TEST(Latents, WeightsHaveUnitDiagonalAndBoundedMagnitude) {
  Rng rng = make_rng(3);
  const Dag d = random_dag(8, 0.5, rng);
  const auto L = draw_latent_weights(d, rng);
  for (std::size_t u = 0; u < 8; ++u)
    for (std::size_t v = 0; v < 8; ++v) {
      const double w = L[u * 8 + v];
      if (u == v)
        EXPECT_EQ(w, 1.0);
      else if (d.has_edge(u, v))
        EXPECT_TRUE(std::abs(w) >= 1.0 && std::abs(w) <= 2.0);
      else
        EXPECT_EQ(w, 0.0);
    }
}

TEST(Latents, EmpiricalCovarianceMatchesModel) {
  Rng rng = make_rng(4);
  const Dag d = Dag::from_edges(4, {{0, 1}, {1, 2}, {0, 3}, {2, 3}});
  const auto L = draw_latent_weights(d, rng);
  const std::size_t n = 100000, q = 4;
  const auto Z = gaussian_latents(d, L, n, rng);
  const auto cov = latent_covariance(d, L);
  for (std::size_t a = 0; a < q; ++a)
    for (std::size_t b = 0; b < q; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += Z[i * q + a] * Z[i * q + b];
      const double emp = s / n;
      EXPECT_NEAR(emp, cov[a * q + b], 0.05 * std::max(1.0, std::abs(cov[a * q + b])));
    }
}

TEST(EmpiricalQuantile, Examples) {
  EXPECT_DOUBLE_EQ(empirical_quantile({1, 2, 3, 4, 5}, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1}, 1.0), 4.0);
  EXPECT_THROW(empirical_quantile({}, 0.5), InvalidInput);
}

TEST(Discretize, ThresholdsStayBetweenQuantiles) {
  Rng rng = make_rng(5);
  const std::size_t n = 500, q = 3;
  std::vector<double> Z(n * q);
  for (auto& z : Z) z = standard_normal(rng);
  for (double aq : {0.1, 0.4}) {
    const auto x = discretize(Z, n, q, aq, rng);
    for (std::size_t j = 0; j < q; ++j) {
      std::vector<double> col(n);
      std::size_t ones = 0;
      for (std::size_t i = 0; i < n; ++i) {
        col[i] = Z[i * q + j];
        ones += static_cast<std::size_t>(x.cells[i * q + j]);
        EXPECT_EQ(x.cells[i * q + j], Z[i * q + j] >= x.thresholds[j] ? 1 : 0);
      }
      EXPECT_GE(x.thresholds[j], empirical_quantile(col, aq));
      EXPECT_LE(x.thresholds[j], empirical_quantile(col, 1.0 - aq));
      const double frac = static_cast<double>(ones) / n;
      EXPECT_GE(frac, aq - 0.01);
      EXPECT_LE(frac, 1.0 - aq + 0.01);
    }
  }
  EXPECT_THROW(discretize(Z, n, q, 0.5, rng), InvalidInput);
  EXPECT_THROW(discretize(Z, n, q + 1, 0.1, rng), InvalidInput);
}

TEST(Generate, ShapeAndDeterminism) {
  SynthConfig cfg;
  cfg.q = 5;
  cfg.K = 3;
  cfg.n_k = 40;
  Rng a = make_rng(9, data_stream(0, 0)), b = make_rng(9, data_stream(0, 0));
  const auto ga = generate(cfg, a), gb = generate(cfg, b);
  EXPECT_EQ(ga.data.n(), 120u);
  EXPECT_EQ(ga.data.q(), 5u);
  EXPECT_EQ(ga.dags.size(), 3u);
  EXPECT_EQ(ga.labels[0], 0u);
  EXPECT_EQ(ga.labels[119], 2u);
  EXPECT_EQ(ga.data.cells(), gb.data.cells());
  EXPECT_EQ(ga.thresholds, gb.thresholds);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(ga.dags[k], gb.dags[k]);
  Rng c = make_rng(9, data_stream(0, 1));
  EXPECT_NE(generate(cfg, c).data.cells(), ga.data.cells());
}

TEST(Generate, RejectsBadConfig) {
  SynthConfig cfg;
  Rng rng = make_rng(1);
  cfg.K = 0;
  EXPECT_THROW(generate(cfg, rng), ConfigError);
  cfg = {};
  cfg.alpha_q = 0.6;
  EXPECT_THROW(generate(cfg, rng), ConfigError);
  cfg = {};
  cfg.edge_prob = 1.5;
  EXPECT_THROW(generate(cfg, rng), ConfigError);
}

TEST(BenchMode, NamesRoundTrip) {
  for (BenchMode m : {BenchMode::Mixture, BenchMode::NoDag, BenchMode::NoMixture, BenchMode::Oracle})
    EXPECT_EQ(parse_mode(mode_name(m)), m);
  EXPECT_EQ(parse_mode("no-dag"), BenchMode::NoDag);
  EXPECT_THROW(parse_mode("bogus"), ConfigError);
}

TEST(Benchmark, SmallRunRowsAndMetrics) {
  SynthConfig cfg;
  cfg.q = 4;
  cfg.K = 2;
  cfg.replicates = 2;
  cfg.seed = 11;
  McmcConfig m;
  m.iterations = 60;
  m.burn_in = 20;
  m.thin = 2;
  BenchGrid grid;
  grid.n_k = {20};
  grid.alpha_q = {0.1};
  const auto rows = benchmark_run(cfg, m, grid);
  // mixture: vi + shd, no_dag: vi, no_mixture: vi + shd, oracle: shd.
  ASSERT_EQ(rows.size(), 2u * 6u);
  const double h_true = std::log(2.0);
  for (const auto& r : rows) {
    EXPECT_EQ(r.n_k, 20u);
    if (r.mode == "oracle") EXPECT_EQ(r.metric, "shd");
    if (r.mode == "no_dag") EXPECT_EQ(r.metric, "vi");
    if (r.mode == "no_mixture" && r.metric == "vi") EXPECT_NEAR(r.value, h_true, 1e-12);
    if (r.metric == "shd") {
      EXPECT_GE(r.value, 0.0);
      EXPECT_LE(r.value, 6.0);
    }
  }
  EXPECT_EQ(rows.front().replicate, 1u);
  EXPECT_EQ(rows.back().replicate, 2u);

  grid.threads = 3;
  const auto threaded = benchmark_run(cfg, m, grid);
  ASSERT_EQ(threaded.size(), rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    EXPECT_EQ(threaded[t].mode, rows[t].mode);
    EXPECT_EQ(threaded[t].value, rows[t].value);
  }
}
