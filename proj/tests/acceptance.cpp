// Acceptance checks: one PASS/FAIL line per criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "dagmix/causal.hpp"
#include "dagmix/commands.hpp"
#include "dagmix/synth.hpp"

using namespace dagmix;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(const std::string& id, bool pass, const std::string& what, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("criterion %s: %s  %s [%s]\n", id.c_str(), pass ? "PASS" : "FAIL", what.c_str(), detail.c_str());
  std::fflush(stdout);
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<Dag> all_dags(std::size_t q) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t u = 0; u < q; ++u)
    for (std::size_t v = u + 1; v < q; ++v) pairs.emplace_back(u, v);
  std::vector<Dag> out;
  std::size_t total = 1;
  for (std::size_t t = 0; t < pairs.size(); ++t) total *= 3;
  for (std::size_t code = 0; code < total; ++code) {
    AdjacencyMatrix adj(q, std::vector<std::uint8_t>(q, 0));
    std::size_t c = code;
    for (const auto& [u, v] : pairs) {
      if (c % 3 == 1) adj[u][v] = 1;
      if (c % 3 == 2) adj[v][u] = 1;
      c /= 3;
    }
    if (is_acyclic(adj)) out.push_back(Dag::from_adjacency(adj));
  }
  return out;
}

Dag random_order_dag(std::size_t q, double p, Rng& rng) { return random_dag(q, p, rng); }

Dataset random_dataset(std::size_t n, const std::vector<std::size_t>& levels, Rng& rng) {
  std::vector<Level> cells;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t L : levels) cells.push_back(static_cast<Level>(uniform_index(rng, L)));
  return Dataset(levels, cells);
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = i;
  return r;
}

/// Skeleton plus v-structures, which identify the Markov equivalence class.
std::pair<std::set<std::pair<std::size_t, std::size_t>>, std::set<std::tuple<std::size_t, std::size_t, std::size_t>>>
equivalence_key(const Dag& d) {
  std::set<std::pair<std::size_t, std::size_t>> skel;
  for (const auto& [u, v] : d.edges()) skel.emplace(std::min(u, v), std::max(u, v));
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> vs;
  for (std::size_t c = 0; c < d.size(); ++c) {
    const auto& pa = d.parents(c);
    for (std::size_t x = 0; x < pa.size(); ++x)
      for (std::size_t y = x + 1; y < pa.size(); ++y)
        if (!d.has_edge(pa[x], pa[y]) && !d.has_edge(pa[y], pa[x]))
          vs.emplace(std::min(pa[x], pa[y]), std::max(pa[x], pa[y]), c);
  }
  return {skel, vs};
}

/// Asymptotic two-sample Kolmogorov-Smirnov p-value.
double ks_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  const double ne = static_cast<double>(a.size()) * b.size() / (a.size() + b.size());
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0.0;
  for (int k = 1; k <= 200; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void criterion1() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(101);
  double worst = 0.0;
  const std::size_t trials = 2000;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t q = 1 + uniform_index(rng, 4);
    std::vector<std::size_t> levels(q);
    for (auto& l : levels) l = 2 + uniform_index(rng, 2);
    const std::size_t n = 1 + uniform_index(rng, 12);
    const Dataset ds = random_dataset(n, levels, rng);
    const Dag d = random_order_dag(q, 0.5, rng);
    const BdeuParams b{0.5 + 4.0 * uniform01(rng)};
    const std::size_t i = uniform_index(rng, n);
    std::vector<std::size_t> rest;
    for (std::size_t r = 0; r < n; ++r)
      if (r != i) rest.push_back(r);
    const auto counts = count_all(ds, rest, d);
    const double closed = log_posterior_predictive(ds.row(i), counts, false, b);
    const double diff = log_marginal_dag(ds, all_rows(n), d, b) - log_marginal_dag(ds, rest, d, b);
    worst = std::max(worst, std::abs(closed - diff));
  }
  const double secs = seconds_since(t0);
  report("1", worst < 1e-10 && secs < 10.0, "closed-form predictive equals marginal difference",
         fmt("%zu instances, max abs error %.2e, %.2f s", trials, worst, secs));
}

void criterion2() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(102);
  double worst = 0.0;
  bool dag_free = true;
  for (int t = 0; t < 100; ++t) {
    const std::size_t q = 1 + uniform_index(rng, 6);
    std::vector<std::size_t> levels(q);
    double expect = 1.0;
    for (auto& l : levels) {
      l = 1 + uniform_index(rng, 5);
      expect /= static_cast<double>(l);
    }
    const Dataset ds = random_dataset(1, levels, rng);
    const double value = std::exp(log_prior_predictive_empty(ds.row(0), ds));
    worst = std::max(worst, std::abs(value - expect) / expect);
    const StructuralConstraints none(q);
    for (int r = 0; r < 20; ++r) {
      const Dag d = sample_baseline_dag(none, {1.0, 2.0 * q}, 30, rng);
      const double via_dag = std::exp(log_posterior_predictive(ds.row(0), count_all(ds, {}, d), false, {1.0}));
      if (std::abs(via_dag - expect) > 1e-12 * expect) dag_free = false;
    }
  }
  const double secs = seconds_since(t0);
  report("2", worst < 1e-14 && dag_free && secs < 1.0, "empty-cluster predictive is prod 1/|X_j| for every DAG",
         fmt("100 level configurations x 20 DAGs, max rel error %.2e, %.3f s", worst, secs));
}

void criterion3() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(103);
  const auto dags = all_dags(3);
  std::map<decltype(equivalence_key(dags[0])), std::vector<std::size_t>> classes;
  for (std::size_t k = 0; k < dags.size(); ++k) classes[equivalence_key(dags[k])].push_back(k);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    std::vector<std::size_t> levels(3);
    for (auto& l : levels) l = 2 + uniform_index(rng, 2);
    const Dataset ds = random_dataset(30, levels, rng);
    const BdeuParams b{0.5 + 4.0 * uniform01(rng)};
    for (const auto& [key, members] : classes) {
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t k : members) {
        const double v = log_marginal_dag(ds, all_rows(30), dags[k], b);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      worst = std::max(worst, hi - lo);
    }
  }
  const double secs = seconds_since(t0);
  report("3", dags.size() == 25 && classes.size() == 11 && worst < 1e-10 && secs < 30.0,
         "BDEu score is constant within Markov equivalence classes",
         fmt("%zu DAGs in %zu classes, 50 datasets, max spread %.2e, %.2f s", dags.size(), classes.size(), worst, secs));
}

void criterion4() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(104);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t q = 1 + uniform_index(rng, 4);
    std::vector<std::size_t> levels(q);
    for (auto& l : levels) l = 2 + uniform_index(rng, 2);
    const std::size_t n = 1 + uniform_index(rng, 25);
    const Dataset ds = random_dataset(n, levels, rng);
    const Dag d = random_order_dag(q, 0.5, rng);
    const BdeuParams b{0.5 + 4.0 * uniform01(rng)};
    auto order = all_rows(n);
    for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[uniform_index(rng, k)]);
    auto counts = count_all(ds, {}, d);
    double sum = 0.0;
    for (std::size_t i : order) {
      sum += log_posterior_predictive(ds.row(i), counts, false, b);
      for (auto& fc : counts) fc.add(ds.row(i));
    }
    worst = std::max(worst, std::abs(sum - log_marginal_dag(ds, all_rows(n), d, b)));
  }
  report("4", worst < 1e-9, "marginal equals chain of one-row predictives in any order",
         fmt("200 triples, max abs error %.2e, %.2f s", worst, seconds_since(t0)));
}

void criterion5() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(105);
  const StructuralConstraints none(2);
  const DagPriorParams p{1.0, 1.0};
  const std::size_t draws = 100000;
  std::array<double, 3> freq{0, 0, 0};
  for (std::size_t t = 0; t < draws; ++t) {
    const Dag d = sample_baseline_dag(none, p, 30, rng);
    freq[d.edge_count() == 0 ? 0 : (d.has_edge(0, 1) ? 1 : 2)] += 1.0 / draws;
  }
  const double secs = seconds_since(t0);

  const std::array<double, 3> stated{0.5, 0.25, 0.25};
  double dev_stated = 0.0;
  for (int k = 0; k < 3; ++k) dev_stated = std::max(dev_stated, std::abs(freq[k] - stated[k]));
  report("5", dev_stated <= 0.02 && secs < 30.0, "q=2 baseline frequencies match (1/2, 1/4, 1/4)",
         fmt("observed (%.4f, %.4f, %.4f), max deviation %.4f, %.2f s; the per-DAG prior "
             "Gamma(|S|+a)Gamma(M-|S|+b) gives 1/3 each at a=b=1",
             freq[0], freq[1], freq[2], dev_stated, secs));

  // The same draws against the normalized prior enumerated over all three DAGs.
  std::array<double, 3> w{};
  double z = 0.0;
  for (int k = 0; k < 3; ++k) z += (w[k] = std::exp(log_dag_prior(2, k == 0 ? 0 : 1, p)));
  double dev_enum = 0.0;
  for (int k = 0; k < 3; ++k) dev_enum = std::max(dev_enum, std::abs(freq[k] - w[k] / z));
  report("5b", dev_enum <= 0.02 && secs < 30.0, "q=2 baseline frequencies match the enumerated prior",
         fmt("expected (%.4f, %.4f, %.4f), max deviation %.4f", w[0] / z, w[1] / z, w[2] / z, dev_enum));
}

void criterion6() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(106);
  double worst = 0.0, worst_null = 0.0;
  std::size_t nulls = 0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t q = 2 + uniform_index(rng, 4);
    const std::vector<std::size_t> levels(q, 2);
    const Dag d = random_order_dag(q, 0.5, rng);
    const Dataset empty(levels, {});
    const ThetaDraw th = sample_theta(empty, {}, d, {1.0}, rng);
    const std::size_t h = uniform_index(rng, q);
    std::size_t y = uniform_index(rng, q - 1);
    if (y >= h) ++y;
    const double effect = causal_effect(th, d, {y, h, 1, 0, 1});
    const double direct = post_intervention_expectation(th, d, h, 1, y, 1) - post_intervention_expectation(th, d, h, 0, y, 1);
    worst = std::max(worst, std::abs(effect - direct));
    if (!d.reachability()[h * q + y]) {
      ++nulls;
      worst_null = std::max(worst_null, std::abs(effect));
    }
  }
  report("6", worst < 1e-12 && worst_null < 1e-12 && nulls > 0, "causal effect equals truncated-factorization enumeration",
         fmt("500 binary models, max abs error %.2e; %zu non-ancestor exposures, max |effect| %.2e, %.2f s", worst,
             nulls, worst_null, seconds_since(t0)));
}

void criterion7() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (double c : {0.5, 1.0, 3.0})
    for (double d : {0.5, 1.0, 2.0})
      for (std::size_t K : {1u, 3u, 10u})
        for (std::size_t n : {5u, 50u, 500u})
          for (double eta : {0.01, 0.3, 0.9}) {
            const double g = alpha_mixture_weight(c, d, K, n, eta);
            const double odds = (c + K - 1.0) / (n * (d - std::log(eta)));
            worst = std::max(worst, std::abs(g / (1.0 - g) - odds) / odds);
          }
  Rng rng = make_rng(107);
  double worst_mean = 0.0;
  const std::size_t draws = 1000000;
  struct Case {
    double c, d;
    std::size_t K, n;
    double eta;
  };
  for (const Case& cs : {Case{3.0, 1.0, 2, 10, 0.5}, Case{1.0, 0.5, 5, 100, 0.05}, Case{0.5, 2.0, 1, 20, 0.9}}) {
    double sum = 0.0;
    for (std::size_t t = 0; t < draws; ++t) sum += sample_alpha_given_eta(cs.c, cs.d, cs.K, cs.n, cs.eta, rng);
    const double rate = cs.d - std::log(cs.eta);
    const double g = alpha_mixture_weight(cs.c, cs.d, cs.K, cs.n, cs.eta);
    const double mean = (g * (cs.c + cs.K) + (1.0 - g) * (cs.c + cs.K - 1.0)) / rate;
    worst_mean = std::max(worst_mean, std::abs(sum / draws - mean) / mean);
  }
  report("7", worst < 1e-12 && worst_mean < 0.01, "alpha mixture weight and draw means",
         fmt("243 grid points, max rel odds error %.2e; 3 cases x 1e6 draws, max rel mean error %.4f, %.2f s", worst,
             worst_mean, seconds_since(t0)));
}

void criterion8() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(108);
  std::size_t collapsed = 0, stayed = 0, slowest = 0;
  std::string stuck;
  for (int t = 0; t < 10; ++t) {
    const std::size_t q = 2 + uniform_index(rng, 3);
    std::vector<std::size_t> levels(q);
    for (auto& l : levels) l = 2 + uniform_index(rng, 2);
    const Dataset ds = random_dataset(20 + uniform_index(rng, 40), levels, rng);
    for (std::size_t start : {4u, 1u}) {
      McmcConfig c;
      c.iterations = 50;
      c.burn_in = 0;
      c.fixed_alpha = 1e-8;
      c.init_clusters = start;
      const Model model(ds, StructuralConstraints(q), c);
      ClusterState state = init_state(model, rng);
      std::vector<std::size_t> order;
      std::size_t proposals = 0, first_one = 0, max_k = state.K();
      for (std::size_t sweep = 1; sweep <= 50; ++sweep) {
        mcmc_step(state, model, rng, proposals, order);
        max_k = std::max(max_k, state.K());
        if (state.K() == 1 && first_one == 0) first_one = sweep;
      }
      if (start == 1) {
        stayed += max_k == 1;
      } else if (first_one > 0) {
        ++collapsed;
        slowest = std::max(slowest, first_one);
      } else {
        stuck += fmt(" n=%zu sizes", ds.n());
        for (const auto& cl : state.clusters) stuck += fmt(" %zu", cl.size);
        stuck += ";";
      }
    }
  }

  const Dataset ds = random_dataset(40, {2, 3, 4}, rng);
  McmcConfig c;
  c.iterations = 200;
  c.burn_in = 50;
  c.no_dag = true;
  c.no_mixture = true;
  c.bdeu = {1.5};
  const Model model(ds, StructuralConstraints(3), c);
  const Trace tr = run_mcmc(model, rng);
  bool degenerate = true;
  for (const auto& rec : tr.records)
    degenerate = degenerate && rec.dags.size() == 1 && rec.dags[0].edge_count() == 0 &&
                 std::all_of(rec.labels.begin(), rec.labels.end(), [](auto l) { return l == 0; });
  const double implied = log_marginal_dag(ds, all_rows(ds.n()), tr.records.back().dags[0], c.bdeu);
  double polya = 0.0;
  for (std::size_t j = 0; j < ds.q(); ++j) {
    const double L = static_cast<double>(ds.levels(j));
    std::vector<double> n_m(ds.levels(j), 0.0);
    for (std::size_t i = 0; i < ds.n(); ++i) n_m[ds.row(i)[j]] += 1.0;
    polya += std::lgamma(c.bdeu.a) - std::lgamma(c.bdeu.a + ds.n());
    for (double k : n_m) polya += std::lgamma(c.bdeu.a / L + k) - std::lgamma(c.bdeu.a / L);
  }
  const double err = std::abs(implied - polya);
  const bool polya_ok = degenerate && err < 1e-9;
  const std::string polya_detail =
      fmt("no_mixture+no_dag: K=1 with empty DAG in every record %s, |marginal - Polya product| %.2e",
          degenerate ? "yes" : "no", err);
  report("8", collapsed == 10 && polya_ok, "degenerate limits from a 4-cluster random start",
         fmt("alpha=1e-8: %zu/10 trials reached K=1 within 50 sweeps (slowest %zu)%s%s; %s; %.2f s", collapsed, slowest,
             stuck.empty() ? "" : ", still split:", stuck.c_str(), polya_detail.c_str(), seconds_since(t0)));
  report("8b", stayed == 10 && polya_ok, "degenerate limits from the default single-cluster start",
         fmt("alpha=1e-8: %zu/10 trials at K=1 for all 50 sweeps; %s", stayed, polya_detail.c_str()));
}

void criterion9() {
  const auto t0 = Clock::now();
  SynthConfig cfg;
  cfg.q = 10;
  cfg.K = 2;
  cfg.replicates = 10;
  cfg.seed = 2024;
  McmcConfig m = benchmark_defaults();
  m.iterations = 5000;
  m.burn_in = 1000;
  BenchGrid grid;
  grid.n_k = {100, 500};
  grid.alpha_q = {0.1};
  const auto rows = benchmark_run(cfg, m, grid);
  const double secs = seconds_since(t0);

  // value[n_k][mode + "/" + metric][replicate - 1]
  std::map<std::size_t, std::map<std::string, std::vector<double>>> v;
  for (const auto& r : rows) {
    auto& slot = v[r.n_k][r.mode + "/" + r.metric];
    slot.resize(cfg.replicates);
    slot[r.replicate - 1] = r.value;
  }
  bool pass = secs < 1800.0;
  std::string detail;
  for (std::size_t nk : grid.n_k) {
    auto& c = v[nk];
    const auto& vi_mix = c["mixture/vi"];
    const auto& vi_nodag = c["no_dag/vi"];
    const auto& shd_or = c["oracle/shd"];
    const auto& shd_mix = c["mixture/shd"];
    const auto& shd_nomix = c["no_mixture/shd"];
    std::size_t vi_wins = 0, shd_wins = 0;
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
      vi_wins += vi_mix[r] < vi_nodag[r];
      shd_wins += shd_mix[r] < shd_nomix[r];
    }
    const double mv = median(vi_mix), nv = median(vi_nodag);
    const double os = median(shd_or), ms = median(shd_mix), ns = median(shd_nomix);
    const bool ok = mv < nv && os <= ms && ms < ns && vi_wins >= 8 && shd_wins >= 8;
    pass = pass && ok;
    detail += fmt("n_k=%zu: median VI mixture %.3f vs no_dag %.3f (%zu/10); median SHD oracle %.2f, mixture %.2f, "
                  "no_mixture %.2f (%zu/10); ",
                  nk, mv, nv, vi_wins, os, ms, ns, shd_wins);
  }
  detail += fmt("%.0f s", secs);
  report("9", pass, "simulation-study orderings at q=10, K=2, S=5000, B=1000", detail);
}

void criterion10() {
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / "dagmix_acceptance_c10";
  fs::remove_all(root);
  fs::create_directories(root);
  SynthConfig sc;
  sc.q = 5;
  sc.n_k = 40;
  Rng rng = make_rng(110);
  const SynthOutput so = generate(sc, rng);
  {
    std::ofstream out(root / "data.csv");
    out << "A,B,C,D,E\n";
    for (std::size_t i = 0; i < so.data.n(); ++i) {
      const auto row = so.data.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
      out << '\n';
    }
  }
  std::ostringstream sink;
  auto fit = [&](const std::string& out) {
    FitOptions opt;
    opt.data = root / "data.csv";
    opt.out = root / out;
    opt.chains = 2;
    opt.flags = {{"iterations", "300"}, {"burn_in", "50"}, {"record_theta", "true"}, {"seed", "77"}};
    cmd_fit(opt, sink);
  };
  fit("a");
  fit("b");
  auto listing = [](const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
      if (e.is_regular_file()) {
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        files[fs::relative(e.path(), dir).string()] = s.str();
      }
    return files;
  };
  std::size_t files = 0;
  bool same = true;
  for (const char* chain : {"_chain1", "_chain2"}) {
    const auto a = listing(root / (std::string("a") + chain));
    const auto b = listing(root / (std::string("b") + chain));
    same = same && a == b && !a.empty();
    files += a.size();
  }
  fs::remove_all(root);
  report("10", same, "identical seed and config give byte-identical trace directories",
         fmt("2 chains, %zu files compared, %.2f s", files, seconds_since(t0)));
}

/// Draws a dataset for the given partition and cluster DAGs, with fresh CPTs
/// from their BDEu prior.
Dataset regenerate(const std::vector<std::size_t>& labels, const std::vector<Dag>& dags,
                   const std::vector<std::size_t>& levels, Rng& rng) {
  const Dataset empty(levels, {});
  const std::size_t q = levels.size();
  std::vector<Level> cells(labels.size() * q);
  std::vector<ThetaDraw> theta;
  std::vector<std::vector<std::size_t>> orders;
  for (const Dag& d : dags) {
    theta.push_back(sample_theta(empty, {}, d, {1.0}, rng));
    orders.push_back(d.topological_order());
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t k = labels[i];
    std::span<Level> row(cells.data() + i * q, q);
    for (std::size_t j : orders[k]) {
      const NodeTheta& nt = theta[k].nodes[j];
      const auto dist = nt.distribution(nt.index.index(row));
      double u = uniform01(rng);
      std::size_t m = 0;
      while (m + 1 < dist.size() && u >= dist[m]) u -= dist[m++];
      row[j] = static_cast<Level>(m);
    }
  }
  return Dataset(levels, cells);
}

void criterion11() {
  const auto t0 = Clock::now();
  const std::size_t n = 4, q = 2, samples = 10000, thin = 10, burn = 1000;
  const std::vector<std::size_t> levels(q, 2);
  McmcConfig cfg;
  cfg.iterations = 1;
  cfg.burn_in = 0;
  cfg.baseline_burn = 50;
  const DagPriorParams dp = cfg.dag_prior(q);
  const StructuralConstraints none(q);
  Rng rng = make_rng(111);

  // Exact prior over the three DAGs on two nodes.
  const std::vector<Dag> dags = all_dags(q);
  std::vector<double> dag_w;
  for (const Dag& d : dags) dag_w.push_back(log_dag_prior(q, d.edge_count(), dp));
  auto prior_dag = [&] { return dags[sample_log_categorical(rng, dag_w)]; };

  // Marginal-conditional draws of (K, edges of subject 1's DAG).
  std::vector<double> prior_k, prior_e, chain_k, chain_e;
  for (std::size_t t = 0; t < samples; ++t) {
    const double alpha = gamma_draw(rng, cfg.alpha_c, cfg.alpha_d);
    std::vector<std::size_t> sizes;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> w;
      for (std::size_t s : sizes) w.push_back(std::log(static_cast<double>(s)));
      w.push_back(std::log(alpha));
      const std::size_t k = sample_log_categorical(rng, w);
      if (k == sizes.size()) sizes.push_back(0);
      ++sizes[k];
    }
    prior_k.push_back(static_cast<double>(sizes.size()));
    prior_e.push_back(static_cast<double>(prior_dag().edge_count()));
  }

  // Successive-conditional chain: sampler step given X, then X given the rest.
  ClusterState state;
  state.alpha = gamma_draw(rng, cfg.alpha_c, cfg.alpha_d);
  state.labels.assign(n, 0);
  Cluster first;
  first.dag = prior_dag();
  first.size = n;
  state.clusters.push_back(first);
  std::vector<std::size_t> order;
  std::size_t proposals = 0;
  auto refresh = [&]() {
    std::vector<Dag> ds;
    for (const auto& cl : state.clusters) ds.push_back(cl.dag);
    Dataset data = regenerate(state.labels, ds, levels, rng);
    for (std::size_t k = 0; k < state.K(); ++k)
      state.clusters[k].counts = count_all(data, state.members(k), state.clusters[k].dag);
    return data;
  };
  Dataset data = refresh();
  for (std::size_t it = 1; it <= burn + samples * thin; ++it) {
    const Model model(data, none, cfg);
    mcmc_step(state, model, rng, proposals, order);
    data = refresh();
    if (it > burn && (it - burn) % thin == 0) {
      chain_k.push_back(static_cast<double>(state.K()));
      chain_e.push_back(static_cast<double>(state.clusters[state.labels[0]].dag.edge_count()));
    }
  }
  const double pk = ks_pvalue(prior_k, chain_k), pe = ks_pvalue(prior_e, chain_e);
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / v.size();
  };
  report("11", pk > 0.01 && pe > 0.01, "Geweke joint test at n=4, q=2",
         fmt("KS p-value K %.3f (mean %.3f vs %.3f), edges %.3f (mean %.3f vs %.3f), %zu samples, %.1f s", pk,
             mean(prior_k), mean(chain_k), pe, mean(prior_e), mean(chain_e), samples, seconds_since(t0)));
}

} // namespace

int main(int argc, char** argv) {
  std::set<std::size_t> only;
  for (int a = 1; a < argc; ++a) only.insert(std::stoul(argv[a]));
  const std::vector<void (*)()> checks{criterion1, criterion2, criterion3, criterion4,  criterion5, criterion6,
                                       criterion7, criterion8, criterion9, criterion10, criterion11};
  for (std::size_t k = 0; k < checks.size(); ++k) {
    if (!only.empty() && !only.count(k + 1)) continue;
    try {
      checks[k]();
    } catch (const std::exception& e) {
      report(std::to_string(k + 1), false, "threw", e.what());
    }
  }
  std::printf("%d failing\n", failures);
  return failures == 0 ? 0 : 1;
}
