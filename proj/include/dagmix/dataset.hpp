#pragma once

#include <cstdint>
#include <istream>
#include <sstream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dagmix/error.hpp"

namespace dagmix {

using Level = std::int32_t;

/// n x q table of integer-coded categorical observations, stored row-major.
class Dataset {
public:
  Dataset() = default;

  Dataset(std::vector<std::size_t> levels, std::vector<Level> cells, std::vector<std::string> names = {})
      : levels_(std::move(levels)), cells_(std::move(cells)), names_(std::move(names)) {
    const std::size_t q = levels_.size();
    if (q == 0) throw InvalidInput("Dataset: no variables");
    if (cells_.size() % q != 0) throw InvalidInput("Dataset: cell count is not a multiple of q");
    n_ = cells_.size() / q;
    for (std::size_t j = 0; j < q; ++j)
      if (levels_[j] < 1) throw InvalidInput("Dataset: variable with zero levels");
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < q; ++j) {
        const Level x = cells_[i * q + j];
        if (x < 0 || static_cast<std::size_t>(x) >= levels_[j])
          throw InvalidInput("Dataset: cell (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range");
      }
    if (names_.empty()) {
      for (std::size_t j = 0; j < q; ++j) names_.push_back("X" + std::to_string(j + 1));
    } else if (names_.size() != q) {
      throw InvalidInput("Dataset: name count differs from variable count");
    }
    for (std::size_t a = 0; a < q; ++a)
      for (std::size_t b = a + 1; b < q; ++b)
        if (names_[a] == names_[b]) throw InvalidInput("Dataset: duplicate column name '" + names_[a] + "'");
  }

  std::size_t n() const { return n_; }
  std::size_t q() const { return levels_.size(); }
  std::size_t levels(std::size_t j) const { return levels_[j]; }
  const std::vector<std::size_t>& all_levels() const { return levels_; }
  Level value(std::size_t i, std::size_t j) const { return cells_[i * q() + j]; }
  std::span<const Level> row(std::size_t i) const { return {cells_.data() + i * q(), q()}; }
  const std::vector<Level>& cells() const { return cells_; }
  const std::vector<std::string>& names() const { return names_; }

  /// Original labels per column when the data was read from strings; empty
  /// vectors for columns that were already integer coded.
  const std::vector<std::vector<std::string>>& level_labels() const { return labels_; }
  void set_level_labels(std::vector<std::vector<std::string>> labels) { labels_ = std::move(labels); }

  /// FNV-1a over dimensions, levels and cells.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
      for (int b = 0; b < 8; ++b) {
        h ^= (v >> (8 * b)) & 0xffu;
        h *= 1099511628211ull;
      }
    };
    mix(n_);
    mix(q());
    for (auto l : levels_) mix(l);
    for (auto x : cells_) mix(static_cast<std::uint64_t>(x));
    return h;
  }

  Dataset subset(std::span<const std::size_t> rows) const {
    std::vector<Level> cells;
    cells.reserve(rows.size() * q());
    for (std::size_t i : rows) {
      auto r = row(i);
      cells.insert(cells.end(), r.begin(), r.end());
    }
    Dataset out(levels_, std::move(cells), names_);
    out.labels_ = labels_;
    return out;
  }

private:
  std::size_t n_ = 0;
  std::vector<std::size_t> levels_;
  std::vector<Level> cells_;
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> labels_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur.push_back('"');
        ++k;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

inline bool is_code(const std::string& s) {
  if (s.empty() || s.size() > 9) return false;
  for (char ch : s)
    if (ch < '0' || ch > '9') return false;
  return true;
}

} // namespace detail

struct CsvReadResult {
  Dataset data;
  std::vector<std::string> warnings;
};

/// Reads a CSV with a header row. A column whose cells are all non-negative
/// integers keeps those codes (levels = max + 1); any other column maps its
/// labels to 0..L-1 in order of first appearance.
inline CsvReadResult read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("data: empty input, expected a header row");
  const auto names = detail::split_csv_line(line);
  const std::size_t q = names.size();
  std::vector<std::vector<std::string>> raw;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != q)
      throw DataError("data line " + std::to_string(lineno) + ": expected " + std::to_string(q) + " fields, got " +
                      std::to_string(fields.size()));
    for (std::size_t j = 0; j < q; ++j)
      if (fields[j].empty())
        throw DataError("data line " + std::to_string(lineno) + ", column '" + names[j] + "': missing value");
    raw.push_back(std::move(fields));
  }
  const std::size_t n = raw.size();
  std::vector<Level> cells(n * q);
  std::vector<std::size_t> levels(q, 0);
  std::vector<std::vector<std::string>> labels(q);
  std::vector<std::string> warnings;
  for (std::size_t j = 0; j < q; ++j) {
    bool coded = true;
    for (std::size_t i = 0; i < n && coded; ++i) coded = detail::is_code(raw[i][j]);
    if (coded) {
      std::size_t hi = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = static_cast<std::size_t>(std::stoul(raw[i][j]));
        cells[i * q + j] = static_cast<Level>(v);
        hi = std::max(hi, v + 1);
      }
      levels[j] = std::max<std::size_t>(hi, 1);
    } else {
      std::unordered_map<std::string, Level> code;
      for (std::size_t i = 0; i < n; ++i) {
        auto [it, inserted] = code.try_emplace(raw[i][j], static_cast<Level>(labels[j].size()));
        if (inserted) labels[j].push_back(raw[i][j]);
        cells[i * q + j] = it->second;
      }
      levels[j] = std::max<std::size_t>(labels[j].size(), 1);
    }
    if (levels[j] < 2)
      warnings.push_back("column '" + names[j] + "' takes a single value; kept with 1 level");
  }
  try {
    Dataset ds(std::move(levels), std::move(cells), names);
    ds.set_level_labels(std::move(labels));
    return {std::move(ds), std::move(warnings)};
  } catch (const InvalidInput& e) {
    throw DataError(std::string("data: ") + e.what());
  }
}

} // namespace dagmix
