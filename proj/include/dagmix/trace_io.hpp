#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dagmix/catmodel.hpp"
#include "dagmix/config.hpp"
#include "dagmix/dataset.hpp"
#include "dagmix/dpmix.hpp"
#include "dagmix/error.hpp"
#include "dagmix/graph.hpp"

namespace dagmix {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr std::uint32_t kThetaFormat = 1;

namespace fs = std::filesystem;

/// Dataset description stored alongside a trace.
struct TraceMeta {
  std::size_t n = 0;
  std::size_t q = 0;
  std::vector<std::string> names;
  std::vector<std::size_t> levels;
  std::vector<std::vector<std::string>> level_labels;
  std::uint64_t fingerprint = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::vector<std::pair<std::string, std::string>> config;
};

struct TraceFile {
  TraceMeta meta;
  Trace trace;
};

inline TraceMeta make_meta(const Dataset& ds, const McmcConfig& cfg, std::uint64_t stream) {
  TraceMeta m;
  m.n = ds.n();
  m.q = ds.q();
  m.names = ds.names();
  m.levels = ds.all_levels();
  m.level_labels = ds.level_labels();
  if (m.level_labels.empty()) m.level_labels.assign(ds.q(), {});
  m.fingerprint = ds.fingerprint();
  m.seed = cfg.seed;
  m.stream = stream;
  m.config = config_echo(cfg);
  return m;
}

namespace detail {

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int k = 0; k < 4; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xffu);
  out.write(b, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xffu);
  out.write(b, 8);
}

inline void put_f64(std::ostream& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  put_u64(out, bits);
}

inline std::uint64_t get_bytes(std::istream& in, int width, const std::string& what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), width)) throw DataError("trace: truncated " + what);
  std::uint64_t v = 0;
  for (int k = 0; k < width; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return v;
}

inline double get_f64(std::istream& in, const std::string& what) {
  const std::uint64_t bits = get_bytes(in, 8, what);
  double x;
  std::memcpy(&x, &bits, sizeof x);
  return x;
}

inline std::string record_stem(std::size_t t, std::size_t k) {
  return "rec" + std::to_string(t) + "_k" + std::to_string(k);
}

inline std::ofstream open_out(const fs::path& p, bool binary = false) {
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

inline std::ifstream open_in(const fs::path& p, bool binary = false) {
  std::ifstream in(p, binary ? std::ios::binary : std::ios::in);
  if (!in) throw DataError("trace: missing " + p.string());
  return in;
}

} // namespace detail

inline void write_theta(std::ostream& out, const ThetaDraw& theta) {
  out.write("DMTH", 4);
  detail::put_u32(out, kThetaFormat);
  detail::put_u32(out, static_cast<std::uint32_t>(theta.size()));
  for (const NodeTheta& nt : theta.nodes) {
    detail::put_u32(out, static_cast<std::uint32_t>(nt.node));
    detail::put_u32(out, static_cast<std::uint32_t>(nt.levels));
    detail::put_u32(out, static_cast<std::uint32_t>(nt.parents().size()));
    for (std::size_t p : nt.parents()) detail::put_u32(out, static_cast<std::uint32_t>(p));
    detail::put_u64(out, nt.configs());
    for (double x : nt.probs) detail::put_f64(out, x);
  }
}

inline ThetaDraw read_theta(std::istream& in, const std::vector<std::size_t>& all_levels) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "DMTH", 4) != 0) throw DataError("trace: bad theta header");
  if (detail::get_bytes(in, 4, "theta version") != kThetaFormat) throw DataError("trace: unsupported theta version");
  const std::size_t q = detail::get_bytes(in, 4, "theta node count");
  if (q != all_levels.size()) throw DataError("trace: theta node count differs from dataset");
  ThetaDraw out;
  for (std::size_t j = 0; j < q; ++j) {
    NodeTheta nt;
    nt.node = detail::get_bytes(in, 4, "theta node");
    nt.levels = detail::get_bytes(in, 4, "theta levels");
    const std::size_t np = detail::get_bytes(in, 4, "theta parent count");
    std::vector<std::size_t> pa(np);
    for (auto& p : pa) p = detail::get_bytes(in, 4, "theta parent");
    const std::uint64_t configs = detail::get_bytes(in, 8, "theta configurations");
    if (nt.node != j || nt.levels != all_levels[j]) throw DataError("trace: theta block does not match dataset");
    for (std::size_t p : pa)
      if (p >= q) throw DataError("trace: theta parent out of range");
    nt.index = ParentIndexer(all_levels, pa);
    if (nt.configs() != configs || configs > kMaxThetaConfigs) throw DataError("trace: theta configuration count mismatch");
    nt.probs.resize(configs * nt.levels);
    for (double& x : nt.probs) x = detail::get_f64(in, "theta probabilities");
    out.nodes.push_back(std::move(nt));
  }
  return out;
}

/// Writes meta.json, xi.csv, alpha.csv, K.csv, dags/ and (when recorded)
/// theta/. Labels and cluster indices in file names are 1-based; node
/// indices in edge lists are 0-based.
inline void write_trace(const fs::path& dir, const Trace& trace, const TraceMeta& meta) {
  fs::create_directories(dir / "dags");
  const bool theta = trace.has_theta();
  if (theta) fs::create_directories(dir / "theta");

  nlohmann::ordered_json j;
  j["format"] = "dagmix-trace";
  j["version"] = kVersion;
  j["n"] = meta.n;
  j["q"] = meta.q;
  j["records"] = trace.records.size();
  j["names"] = meta.names;
  j["levels"] = meta.levels;
  j["level_labels"] = meta.level_labels;
  j["dataset_hash"] = detail::hex64(meta.fingerprint);
  j["seed"] = meta.seed;
  j["stream"] = meta.stream;
  j["dag_proposals"] = trace.dag_proposals;
  j["dag_accepts"] = trace.dag_accepts;
  j["theta"] = theta;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : meta.config) cfg[k] = v;
  j["config"] = cfg;
  detail::open_out(dir / "meta.json") << j.dump(2) << '\n';

  auto xi = detail::open_out(dir / "xi.csv");
  auto alpha = detail::open_out(dir / "alpha.csv");
  auto K = detail::open_out(dir / "K.csv");
  xi << "iteration";
  for (std::size_t i = 1; i <= trace.n; ++i) xi << ",s" << i;
  xi << '\n';
  alpha << "iteration,alpha\n";
  K << "iteration,K\n";
  for (std::size_t t = 0; t < trace.records.size(); ++t) {
    const TraceRecord& rec = trace.records[t];
    xi << rec.iteration;
    for (auto l : rec.labels) xi << ',' << (l + 1);
    xi << '\n';
    alpha << rec.iteration << ',' << detail::format_real(rec.alpha) << '\n';
    K << rec.iteration << ',' << rec.dags.size() << '\n';
    for (std::size_t k = 0; k < rec.dags.size(); ++k) {
      const std::string stem = detail::record_stem(t + 1, k + 1);
      auto el = detail::open_out(dir / "dags" / (stem + ".edgelist"));
      for (const auto& [u, v] : rec.dags[k].edges()) el << u << ' ' << v << '\n';
      if (theta) {
        auto bin = detail::open_out(dir / "theta" / (stem + ".bin"), true);
        write_theta(bin, rec.theta[k]);
      }
    }
  }
}

namespace detail {

inline std::vector<std::vector<std::string>> read_csv_body(const fs::path& p) {
  auto in = open_in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

inline std::uint64_t to_u64(const std::string& s, const fs::path& p) {
  try {
    return parse_count("value", s);
  } catch (const ConfigError&) {
    throw DataError("trace: bad integer '" + s + "' in " + p.string());
  }
}

} // namespace detail

inline TraceFile read_trace(const fs::path& dir) {
  TraceFile out;
  nlohmann::json j;
  try {
    detail::open_in(dir / "meta.json") >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("trace: malformed meta.json: ") + e.what());
  }
  TraceMeta& m = out.meta;
  try {
    m.n = j.at("n").get<std::size_t>();
    m.q = j.at("q").get<std::size_t>();
    m.names = j.at("names").get<std::vector<std::string>>();
    m.levels = j.at("levels").get<std::vector<std::size_t>>();
    m.level_labels = j.at("level_labels").get<std::vector<std::vector<std::string>>>();
    m.fingerprint = std::stoull(j.at("dataset_hash").get<std::string>(), nullptr, 16);
    m.seed = j.at("seed").get<std::uint64_t>();
    m.stream = j.at("stream").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("config").items()) m.config.emplace_back(k, v.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("trace: meta.json field: ") + e.what());
  }
  const bool theta = j.value("theta", false);

  Trace& tr = out.trace;
  tr.n = m.n;
  tr.q = m.q;
  tr.dag_proposals = j.value("dag_proposals", std::size_t{0});
  tr.dag_accepts = j.value("dag_accepts", std::size_t{0});
  const auto xi = detail::read_csv_body(dir / "xi.csv");
  const auto alpha = detail::read_csv_body(dir / "alpha.csv");
  if (alpha.size() != xi.size()) throw DataError("trace: alpha.csv and xi.csv differ in length");
  for (std::size_t t = 0; t < xi.size(); ++t) {
    if (xi[t].size() != m.n + 1) throw DataError("trace: xi.csv row " + std::to_string(t + 1) + " has wrong width");
    TraceRecord rec;
    rec.iteration = detail::to_u64(xi[t][0], dir / "xi.csv");
    std::size_t K = 0;
    for (std::size_t i = 0; i < m.n; ++i) {
      const auto l = detail::to_u64(xi[t][i + 1], dir / "xi.csv");
      if (l == 0) throw DataError("trace: xi.csv labels must be 1-based");
      rec.labels.push_back(static_cast<std::uint32_t>(l - 1));
      K = std::max<std::size_t>(K, l);
    }
    rec.alpha = std::strtod(alpha[t].at(1).c_str(), nullptr);
    for (std::size_t k = 0; k < K; ++k) {
      const std::string stem = detail::record_stem(t + 1, k + 1);
      auto el = detail::open_in(dir / "dags" / (stem + ".edgelist"));
      std::vector<Edge> edges;
      std::size_t u, v;
      while (el >> u >> v) edges.emplace_back(u, v);
      rec.dags.push_back(Dag::from_edges(m.q, edges));
      if (theta) {
        auto bin = detail::open_in(dir / "theta" / (stem + ".bin"), true);
        rec.theta.push_back(read_theta(bin, m.levels));
      }
    }
    tr.records.push_back(std::move(rec));
  }
  return out;
}

} // namespace dagmix
