#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dagmix/causal.hpp"
#include "dagmix/config.hpp"
#include "dagmix/dataset.hpp"
#include "dagmix/dpmix.hpp"
#include "dagmix/error.hpp"
#include "dagmix/graph.hpp"
#include "dagmix/summaries.hpp"
#include "dagmix/synth.hpp"
#include "dagmix/trace_io.hpp"

namespace dagmix {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitData = 3, kExitInvariant = 4 };

/// Process exit status for an exception escaping a command.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  if (dynamic_cast<const InvariantError*>(&e)) return kExitInvariant;
  return kExitFailure;
}

inline Dataset load_dataset(const fs::path& p, std::ostream& log) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open data file " + p.string());
  CsvReadResult r = read_dataset_csv(in);
  for (const auto& w : r.warnings) log << "warning: " << w << '\n';
  return std::move(r.data);
}

inline KeyValues load_config_file(const std::optional<fs::path>& p) {
  if (!p) return {};
  std::ifstream in(*p);
  if (!in) throw ConfigError("cannot open config file " + p->string());
  return parse_config(in);
}

inline StructuralConstraints load_constraints(const std::optional<fs::path>& p, const Dataset& ds) {
  if (!p) return StructuralConstraints(ds.q());
  std::ifstream in(*p);
  if (!in) throw ConfigError("cannot open constraints file " + p->string());
  return parse_constraints(in, ds.q(), ds.names());
}

/// Trace directory of chain c (1-based) out of m.
inline fs::path chain_dir(const fs::path& out, std::size_t c, std::size_t m) {
  if (m == 1) return out;
  return fs::path(out.string() + "_chain" + std::to_string(c));
}

struct FitOptions {
  fs::path data;
  std::optional<fs::path> config;
  std::optional<fs::path> constraints;
  fs::path out;
  std::size_t chains = 1;
  KeyValues flags;
};

/// Runs the sampler and writes one trace directory per chain. Chain c uses
/// RNG stream c - 1 of the configured seed.
inline void cmd_fit(const FitOptions& opt, std::ostream& log) {
  if (opt.chains == 0) throw ConfigError("--chains must be >= 1");
  const McmcConfig cfg = resolve_config(load_config_file(opt.config), opt.flags);
  const Dataset ds = load_dataset(opt.data, log);
  const StructuralConstraints constraints = load_constraints(opt.constraints, ds);
  const Model model(ds, constraints, cfg);
  std::mutex log_lock;
  std::vector<std::exception_ptr> errors(opt.chains);
  auto run_chain = [&](std::size_t c) {
    try {
      const auto start = std::chrono::steady_clock::now();
      Rng rng = make_rng(cfg.seed, c - 1);
      auto progress = [&](const Progress& p) {
        std::lock_guard<std::mutex> g(log_lock);
        char buf[160];
        std::snprintf(buf, sizeof buf, "chain %zu iter %zu K %zu alpha %.4f accept %.3f\n", c, p.iteration, p.K,
                      p.alpha, p.acceptance_rate);
        log << buf;
      };
      const Trace trace = run_mcmc(model, rng, progress);
      const fs::path dir = chain_dir(opt.out, c, opt.chains);
      write_trace(dir, trace, make_meta(ds, cfg, c - 1));
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::lock_guard<std::mutex> g(log_lock);
      log << "chain " << c << ": " << trace.records.size() << " records written to " << dir.string() << " in "
          << secs << " s\n";
    } catch (...) {
      errors[c - 1] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t c = 2; c <= opt.chains; ++c) pool.emplace_back(run_chain, c);
  run_chain(1);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Concatenates the records of several traces of the same dataset.
inline TraceFile pool_traces(const std::vector<fs::path>& dirs) {
  if (dirs.empty()) throw ConfigError("no trace directory given");
  TraceFile out = read_trace(dirs.front());
  for (std::size_t d = 1; d < dirs.size(); ++d) {
    TraceFile next = read_trace(dirs[d]);
    if (next.meta.fingerprint != out.meta.fingerprint || next.meta.n != out.meta.n || next.meta.q != out.meta.q)
      throw DataError("cannot pool traces of different datasets: " + dirs[d].string());
    auto& recs = out.trace.records;
    recs.insert(recs.end(), std::make_move_iterator(next.trace.records.begin()),
                std::make_move_iterator(next.trace.records.end()));
    out.trace.dag_proposals += next.trace.dag_proposals;
    out.trace.dag_accepts += next.trace.dag_accepts;
  }
  if (out.trace.records.empty()) throw DataError("trace has no records");
  return out;
}

struct SummarizeOptions {
  std::vector<fs::path> traces;
  bool pool = false;
  fs::path out;
  bool minvi = false;
  double threshold = 0.5;
  double ppi_threshold = 0.5;
  std::vector<std::size_t> subjects; ///< 1-based; empty means all
};

inline void write_matrix_csv(const fs::path& p, const SquareMatrix& m, const std::vector<std::string>& labels) {
  auto out = detail::open_out(p);
  out << "";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (std::size_t r = 0; r < m.dim; ++r) {
    out << labels[r];
    for (std::size_t c = 0; c < m.dim; ++c) out << ',' << detail::format_real(m(r, c));
    out << '\n';
  }
}

/// similarity.csv, partition.csv, ppi/subject<i>.csv and
/// point_dag/subject<i>.edgelist.
inline void cmd_summarize(const SummarizeOptions& opt, std::ostream& log) {
  if (opt.traces.size() > 1 && !opt.pool) throw ConfigError("several traces given; pass --pool to combine them");
  const TraceFile tf = pool_traces(opt.traces);
  const Trace& trace = tf.trace;
  const std::size_t n = trace.n;
  fs::create_directories(opt.out / "ppi");
  fs::create_directories(opt.out / "point_dag");

  const SimilarityMatrix s = similarity(trace);
  std::vector<std::string> subjects;
  for (std::size_t i = 1; i <= n; ++i) subjects.push_back(std::to_string(i));
  write_matrix_csv(opt.out / "similarity.csv", s, subjects);

  const Partition c = opt.minvi ? point_clustering_minvi(s, trace) : point_clustering_threshold(s, opt.threshold);
  {
    auto out = detail::open_out(opt.out / "partition.csv");
    out << "subject,label\n";
    for (std::size_t i = 0; i < n; ++i) out << (i + 1) << ',' << c[i] << '\n';
  }
  std::vector<std::size_t> which = opt.subjects;
  if (which.empty())
    for (std::size_t i = 1; i <= n; ++i) which.push_back(i);
  for (std::size_t i : which) {
    if (i == 0 || i > n) throw ConfigError("subject " + std::to_string(i) + " out of range");
    const PpiMatrix p = ppi(trace, i - 1);
    write_matrix_csv(opt.out / "ppi" / ("subject" + std::to_string(i) + ".csv"), p, tf.meta.names);
    auto el = detail::open_out(opt.out / "point_dag" / ("subject" + std::to_string(i) + ".edgelist"));
    for (const auto& [u, v] : point_dag(p, opt.ppi_threshold).edges()) el << u << ' ' << v << '\n';
  }
  log << "summarized " << trace.records.size() << " records; point clustering has " << cluster_count(c)
      << " clusters\n";
}

struct CausalOptions {
  fs::path trace;
  std::string y;
  std::string h;
  std::string treat = "1";
  std::string ref = "0";
  std::optional<std::string> success;
  bool battery = false;
  double lower = 0.025;
  double upper = 0.975;
  fs::path out;
};

namespace detail {

inline std::size_t resolve_node(const std::string& s, const TraceMeta& m) {
  for (std::size_t j = 0; j < m.names.size(); ++j)
    if (m.names[j] == s) return j;
  if (is_code(s)) {
    const auto j = static_cast<std::size_t>(std::stoul(s));
    if (j < m.q) return j;
  }
  throw ConfigError("unknown variable '" + s + "'");
}

inline std::size_t resolve_level(const std::string& s, std::size_t node, const TraceMeta& m) {
  const auto& labels = m.level_labels.at(node);
  for (std::size_t l = 0; l < labels.size(); ++l)
    if (labels[l] == s) return l;
  if (is_code(s)) {
    const auto l = static_cast<std::size_t>(std::stoul(s));
    if (l < m.levels[node]) return l;
  }
  throw ConfigError("unknown level '" + s + "' of variable '" + m.names[node] + "'");
}

inline void write_effects(const fs::path& p, const CausalEstimate& e) {
  auto out = open_out(p);
  out << "subject,estimate,lower,upper\n";
  for (std::size_t i = 0; i < e.estimate.size(); ++i)
    out << (i + 1) << ',' << format_real(e.estimate[i]) << ',' << format_real(e.lower[i]) << ','
        << format_real(e.upper[i]) << '\n';
}

} // namespace detail

/// effects.csv, or in battery mode effects_level<l>.csv for every level code
/// l other than the reference.
inline void cmd_causal(const CausalOptions& opt, std::ostream& log) {
  const TraceFile tf = read_trace(opt.trace);
  if (!tf.trace.has_theta())
    throw ConfigError("trace has no parameter draws; re-run fit with --record-theta");
  const TraceMeta& m = tf.meta;
  const std::size_t y = detail::resolve_node(opt.y, m);
  const std::size_t h = detail::resolve_node(opt.h, m);
  if (y == h) throw ConfigError("response and exposure must differ");
  const std::size_t success = opt.success ? detail::resolve_level(*opt.success, y, m) : (m.levels[y] > 1 ? 1 : 0);
  fs::create_directories(opt.out);
  const std::size_t ref = detail::resolve_level(opt.ref, h, m);
  if (opt.battery) {
    for (std::size_t l = 0; l < m.levels[h]; ++l) {
      if (l == ref) continue;
      CausalQuery query{y, h, l, ref, success};
      detail::write_effects(opt.out / ("effects_level" + std::to_string(l) + ".csv"),
                            bma_effects(tf.trace, query, opt.lower, opt.upper));
    }
    log << "wrote " << (m.levels[h] - 1) << " effect files to " << opt.out.string() << '\n';
  } else {
    CausalQuery query{y, h, detail::resolve_level(opt.treat, h, m), ref, success};
    detail::write_effects(opt.out / "effects.csv", bma_effects(tf.trace, query, opt.lower, opt.upper));
    log << "wrote " << (opt.out / "effects.csv").string() << '\n';
  }
}

struct SimulateOptions {
  SynthConfig synth;
  std::vector<std::size_t> n_k{100, 200, 500};
  std::vector<double> alpha_q{0.1, 0.4};
  fs::path out;
};

inline std::string cell_name(std::size_t n_k, double alpha_q) {
  return "nk" + std::to_string(n_k) + "_aq" + detail::format_real(alpha_q);
}

/// One directory per grid cell and replicate with data.csv, labels.csv,
/// dag_k<k>.edgelist and thresholds.csv; the data match `benchmark` under
/// the same seed and grid.
inline void cmd_simulate(const SimulateOptions& opt, std::ostream& log) {
  opt.synth.validate();
  std::size_t cell = 0, written = 0;
  for (std::size_t nk : opt.n_k)
    for (double aq : opt.alpha_q) {
      SynthConfig cfg = opt.synth;
      cfg.n_k = nk;
      cfg.alpha_q = aq;
      cfg.validate();
      for (std::size_t r = 0; r < cfg.replicates; ++r) {
        Rng rng = make_rng(cfg.seed, data_stream(cell, r));
        const SynthOutput s = generate(cfg, rng);
        const fs::path dir = opt.out / cell_name(nk, aq) / ("rep" + std::to_string(r + 1));
        fs::create_directories(dir);
        {
          auto out = detail::open_out(dir / "data.csv");
          const auto& names = s.data.names();
          for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
          out << '\n';
          for (std::size_t i = 0; i < s.data.n(); ++i) {
            for (std::size_t j = 0; j < s.data.q(); ++j) out << (j ? "," : "") << s.data.value(i, j);
            out << '\n';
          }
        }
        {
          auto out = detail::open_out(dir / "labels.csv");
          out << "subject,label\n";
          for (std::size_t i = 0; i < s.labels.size(); ++i) out << (i + 1) << ',' << (s.labels[i] + 1) << '\n';
        }
        for (std::size_t k = 0; k < s.dags.size(); ++k) {
          auto out = detail::open_out(dir / ("dag_k" + std::to_string(k + 1) + ".edgelist"));
          for (const auto& [u, v] : s.dags[k].edges()) out << u << ' ' << v << '\n';
        }
        {
          auto out = detail::open_out(dir / "thresholds.csv");
          out << "cluster,variable,threshold\n";
          for (std::size_t k = 0; k < s.thresholds.size(); ++k)
            for (std::size_t j = 0; j < s.thresholds[k].size(); ++j)
              out << (k + 1) << ',' << s.data.names()[j] << ',' << detail::format_real(s.thresholds[k][j]) << '\n';
        }
        ++written;
      }
      ++cell;
    }
  log << "wrote " << written << " replicate directories under " << opt.out.string() << '\n';
}

struct BenchmarkOptions {
  SynthConfig synth;
  BenchGrid grid;
  std::optional<fs::path> config;
  KeyValues flags;
  fs::path out;
};

/// Sampler defaults for the benchmark when neither file nor flags set them.
inline McmcConfig benchmark_defaults() {
  McmcConfig c;
  c.iterations = 5000;
  c.burn_in = 1000;
  c.thin = 5;
  return c;
}

inline void write_bench_rows(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "replicate,n_k,alpha_q,mode,metric,value\n";
  for (const auto& r : rows)
    out << r.replicate << ',' << r.n_k << ',' << detail::format_real(r.alpha_q) << ',' << r.mode << ',' << r.metric
        << ',' << detail::format_real(r.value) << '\n';
}

inline void cmd_benchmark(const BenchmarkOptions& opt, std::ostream& log) {
  McmcConfig mcfg = resolve_config(load_config_file(opt.config), opt.flags, benchmark_defaults());
  mcfg.seed = opt.synth.seed;
  const auto start = std::chrono::steady_clock::now();
  const auto rows = benchmark_run(opt.synth, mcfg, opt.grid);
  if (opt.out.has_parent_path()) fs::create_directories(opt.out.parent_path());
  auto out = detail::open_out(opt.out);
  write_bench_rows(out, rows);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log << "wrote " << rows.size() << " rows to " << opt.out.string() << " in " << secs << " s\n";
}

} // namespace dagmix
