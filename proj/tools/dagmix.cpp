#include <iostream>
#include <algorithm>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dagmix/commands.hpp"

namespace {

using namespace dagmix;

/// Registers one flag per sampler config key; values given on the command
/// line land in `flags`.
struct SamplerFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, std::optional<bool>> switches;

  void attach(CLI::App* app, bool with_seed = true) {
    static const std::map<std::string, bool> is_switch{
        {"no_dag", true},      {"no_mixture", true},    {"approx_hastings", true},
        {"random_scan", true}, {"record_theta", true},  {"debug_recount", true}};
    for (const auto& key : config_keys()) {
      if (key == "seed" && !with_seed) continue;
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      if (is_switch.count(key)) {
        switches[key];
        app->add_flag(flag, switches[key], "sampler setting '" + key + "'");
      } else {
        values[key];
        app->add_option(flag, values[key], "sampler setting '" + key + "'");
      }
    }
  }

  KeyValues collect() const {
    KeyValues out;
    for (const auto& [k, v] : values)
      if (!v.empty()) out[k] = v;
    for (const auto& [k, on] : switches)
      if (on) out[k] = *on ? "true" : "false";
    return out;
  }
};

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dirichlet-process mixtures of categorical DAG models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  FitOptions fit;
  SamplerFlags fit_flags;
  std::string fit_config, fit_constraints;
  auto* fit_cmd = app.add_subcommand("fit", "run the sampler and write a trace directory");
  fit_cmd->add_option("--data", fit.data, "CSV with a header row")->required();
  fit_cmd->add_option("--config", fit_config, "key = value config file");
  fit_cmd->add_option("--constraints", fit_constraints, "forbid/exogenous/response directives");
  fit_cmd->add_option("--out", fit.out, "trace directory")->required();
  fit_cmd->add_option("--chains", fit.chains, "independent chains, written to <out>_chain<c>");
  fit_flags.attach(fit_cmd);

  SummarizeOptions sum;
  std::vector<std::string> sum_traces;
  auto* sum_cmd = app.add_subcommand("summarize", "similarity, partition, PPI and point DAGs from traces");
  sum_cmd->add_option("--trace", sum_traces, "trace directory (repeatable)")->required();
  sum_cmd->add_flag("--pool", sum.pool, "pool the records of several traces");
  sum_cmd->add_option("--out", sum.out, "output directory")->required();
  sum_cmd->add_flag("--minvi", sum.minvi, "minimum expected-VI point clustering");
  sum_cmd->add_option("--threshold", sum.threshold, "similarity threshold for the point clustering");
  sum_cmd->add_option("--ppi-threshold", sum.ppi_threshold, "edge threshold for point DAGs");
  sum_cmd->add_option("--subjects", sum.subjects, "1-based subjects for PPI output (default all)")->delimiter(',');

  CausalOptions cau;
  std::string cau_success;
  auto* cau_cmd = app.add_subcommand("causal", "BMA subject-specific causal effects");
  cau_cmd->set_help_flag("--help", "Print this help message and exit");
  cau_cmd->add_option("--trace", cau.trace, "trace directory with parameter draws")->required();
  cau_cmd->add_option("--y", cau.y, "response variable (name or 0-based index)")->required();
  cau_cmd->add_option("--h", cau.h, "exposure variable (name or 0-based index)")->required();
  cau_cmd->add_option("--treat", cau.treat, "treatment level");
  cau_cmd->add_option("--ref", cau.ref, "reference level");
  cau_cmd->add_option("--success", cau_success, "level of the response counted as the event");
  cau_cmd->add_flag("--battery", cau.battery, "every level of the exposure against level 0");
  cau_cmd->add_option("--lower", cau.lower, "lower quantile of the interval");
  cau_cmd->add_option("--upper", cau.upper, "upper quantile of the interval");
  cau_cmd->add_option("--out", cau.out, "output directory")->required();

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "write synthetic replicate datasets");
  auto add_synth = [](CLI::App* c, SynthConfig& s, std::vector<std::size_t>& nk, std::vector<double>& aq) {
    c->add_option("--q", s.q, "variables");
    c->add_option("--K", s.K, "clusters");
    c->add_option("--n-k", nk, "rows per cluster (repeatable grid)");
    c->add_option("--alpha-q", aq, "discretization quantile (repeatable grid)");
    c->add_option("--edge-prob", s.edge_prob, "edge inclusion probability");
    c->add_option("--replicates", s.replicates, "replicates per grid cell");
    c->add_option("--seed", s.seed, "seed");
  };
  add_synth(sim_cmd, sim.synth, sim.n_k, sim.alpha_q);
  sim_cmd->add_option("--out", sim.out, "output directory")->required();

  BenchmarkOptions bench;
  SamplerFlags bench_flags;
  std::string bench_config;
  std::vector<std::string> bench_modes;
  auto* bench_cmd = app.add_subcommand("benchmark", "score the sampler and its baselines on synthetic data");
  add_synth(bench_cmd, bench.synth, bench.grid.n_k, bench.grid.alpha_q);
  bench_cmd->add_option("--modes", bench_modes, "mixture, no_dag, no_mixture, oracle");
  bench_cmd->add_option("--threads", bench.grid.threads, "worker threads");
  bench_cmd->add_option("--ppi-threshold", bench.grid.ppi_threshold, "edge threshold for point DAGs");
  bench_cmd->add_option("--config", bench_config, "key = value sampler config file");
  bench_cmd->add_option("--out", bench.out, "results CSV")->required();
  bench_flags.attach(bench_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (fit_cmd->parsed()) {
      if (!fit_config.empty()) fit.config = fit_config;
      if (!fit_constraints.empty()) fit.constraints = fit_constraints;
      fit.flags = fit_flags.collect();
      cmd_fit(fit, std::cerr);
    } else if (sum_cmd->parsed()) {
      for (const auto& t : sum_traces) sum.traces.emplace_back(t);
      cmd_summarize(sum, std::cerr);
    } else if (cau_cmd->parsed()) {
      if (!cau_success.empty()) cau.success = cau_success;
      cmd_causal(cau, std::cerr);
    } else if (sim_cmd->parsed()) {
      cmd_simulate(sim, std::cerr);
    } else if (bench_cmd->parsed()) {
      if (!bench_config.empty()) bench.config = bench_config;
      if (!bench_modes.empty()) {
        bench.grid.modes.clear();
        for (const auto& m : bench_modes) bench.grid.modes.push_back(parse_mode(m));
      }
      bench.flags = bench_flags.collect();
      cmd_benchmark(bench, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitOk;
}
