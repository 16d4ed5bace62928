#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "dagmix/catmodel.hpp"
#include "dagmix/dpmix.hpp"
#include "dagmix/error.hpp"
#include "dagmix/graph.hpp"

namespace dagmix {

/// Effect of do(X_h = treat) versus do(X_h = ref) on Pr(Y = success).
struct CausalQuery {
  std::size_t y = 0;
  std::size_t h = 0;
  std::size_t treat_level = 1;
  std::size_t ref_level = 0;
  std::size_t success_level = 1;

  void validate(const std::vector<std::size_t>& levels) const {
    if (y >= levels.size() || h >= levels.size()) throw InvalidInput("causal query: node out of range");
    if (y == h) throw InvalidInput("causal query: response and exposure must differ");
    if (treat_level >= levels[h] || ref_level >= levels[h]) throw InvalidInput("causal query: exposure level out of range");
    if (success_level >= levels[y]) throw InvalidInput("causal query: success level out of range");
  }
};

namespace detail {

/// Table over a sorted set of variables, last variable varying fastest.
struct Factor {
  std::vector<std::size_t> vars;
  std::vector<std::size_t> card;
  std::vector<double> values;

  std::size_t position(std::size_t var) const {
    return static_cast<std::size_t>(std::find(vars.begin(), vars.end(), var) - vars.begin());
  }
};

inline constexpr std::size_t kMaxFactorCells = 50'000'000;

inline std::size_t table_size(const std::vector<std::size_t>& card) {
  std::size_t total = 1;
  for (std::size_t c : card) {
    if (total > kMaxFactorCells / c) throw TooLarge("variable elimination: intermediate factor too large");
    total *= c;
  }
  return total;
}

/// Iterates `assignment` over all configurations of `card` (odometer).
inline bool advance(std::vector<std::size_t>& assignment, const std::vector<std::size_t>& card) {
  for (std::size_t k = assignment.size(); k-- > 0;) {
    if (++assignment[k] < card[k]) return true;
    assignment[k] = 0;
  }
  return false;
}

inline Factor multiply(const Factor& f, const Factor& g) {
  Factor out;
  std::set_union(f.vars.begin(), f.vars.end(), g.vars.begin(), g.vars.end(), std::back_inserter(out.vars));
  for (std::size_t v : out.vars) {
    const std::size_t pf = f.position(v);
    out.card.push_back(pf < f.vars.size() ? f.card[pf] : g.card[g.position(v)]);
  }
  out.values.assign(table_size(out.card), 0.0);
  auto strides_in = [&](const Factor& src) {
    std::vector<std::size_t> st(out.vars.size(), 0);
    std::size_t stride = 1;
    for (std::size_t k = src.vars.size(); k-- > 0;) {
      st[out.position(src.vars[k])] = stride;
      stride *= src.card[k];
    }
    return st;
  };
  const auto sf = strides_in(f);
  const auto sg = strides_in(g);
  std::vector<std::size_t> a(out.vars.size(), 0);
  std::size_t idx = 0;
  do {
    std::size_t i_f = 0, i_g = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      i_f += a[k] * sf[k];
      i_g += a[k] * sg[k];
    }
    out.values[idx++] = f.values[i_f] * g.values[i_g];
  } while (advance(a, out.card));
  return out;
}

inline Factor sum_out(const Factor& f, std::size_t var) {
  const std::size_t p = f.position(var);
  Factor out;
  for (std::size_t k = 0; k < f.vars.size(); ++k)
    if (k != p) {
      out.vars.push_back(f.vars[k]);
      out.card.push_back(f.card[k]);
    }
  out.values.assign(table_size(out.card), 0.0);
  std::size_t inner = 1;
  for (std::size_t k = p + 1; k < f.vars.size(); ++k) inner *= f.card[k];
  const std::size_t outer = f.values.size() / (inner * f.card[p]);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t m = 0; m < f.card[p]; ++m)
      for (std::size_t i = 0; i < inner; ++i) out.values[o * inner + i] += f.values[(o * f.card[p] + m) * inner + i];
  return out;
}

inline Factor cpt_factor(const NodeTheta& nt, const std::vector<std::size_t>& levels) {
  Factor f;
  f.vars = nt.parents();
  f.vars.insert(std::lower_bound(f.vars.begin(), f.vars.end(), nt.node), nt.node);
  for (std::size_t v : f.vars) f.card.push_back(levels[v]);
  f.values.assign(table_size(f.card), 0.0);
  std::vector<std::size_t> a(f.vars.size(), 0);
  std::vector<Level> row(levels.size(), 0);
  std::size_t idx = 0;
  do {
    for (std::size_t k = 0; k < a.size(); ++k) row[f.vars[k]] = static_cast<Level>(a[k]);
    f.values[idx++] = nt.prob(nt.index.index(row), static_cast<std::size_t>(row[nt.node]));
  } while (advance(a, f.card));
  return f;
}

inline std::vector<std::size_t> theta_levels(const ThetaDraw& theta) {
  std::vector<std::size_t> levels(theta.size());
  for (const auto& nt : theta.nodes) levels[nt.node] = nt.levels;
  return levels;
}

/// Sum over all variables outside `keep` of the product of the CPTs of the
/// ancestral closure of `keep`, omitting the CPT of `drop` (the truncated
/// factorization of do(X_drop = .)). Returns a factor over exactly `keep`.
inline Factor truncated_marginal(const ThetaDraw& theta, const Dag& d, std::vector<std::size_t> keep, std::size_t drop) {
  const auto levels = theta_levels(theta);
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  const std::size_t q = d.size();
  std::vector<std::uint8_t> relevant(q, 0);
  std::vector<std::size_t> stack(keep.begin(), keep.end());
  for (std::size_t v : keep) relevant[v] = 1;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (v == drop) continue;
    for (std::size_t p : d.parents(v))
      if (!relevant[p]) {
        relevant[p] = 1;
        stack.push_back(p);
      }
  }
  std::vector<Factor> factors;
  Factor unit;
  unit.vars = keep;
  for (std::size_t v : keep) unit.card.push_back(levels[v]);
  unit.values.assign(table_size(unit.card), 1.0);
  factors.push_back(std::move(unit));
  for (std::size_t v = 0; v < q; ++v)
    if (relevant[v] && v != drop) factors.push_back(cpt_factor(theta.nodes[v], levels));

  std::vector<std::size_t> hidden;
  for (std::size_t v = 0; v < q; ++v)
    if (relevant[v] && !std::binary_search(keep.begin(), keep.end(), v)) hidden.push_back(v);

  while (!hidden.empty()) {
    // Greedy min-size elimination order.
    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < hidden.size(); ++k) {
      std::vector<std::size_t> scope;
      for (const auto& f : factors)
        if (std::binary_search(f.vars.begin(), f.vars.end(), hidden[k]))
          scope.insert(scope.end(), f.vars.begin(), f.vars.end());
      std::sort(scope.begin(), scope.end());
      scope.erase(std::unique(scope.begin(), scope.end()), scope.end());
      double cost = 1.0;
      for (std::size_t v : scope) cost *= static_cast<double>(levels[v]);
      if (cost < best_cost) {
        best_cost = cost;
        best = k;
      }
    }
    const std::size_t var = hidden[best];
    hidden.erase(hidden.begin() + static_cast<std::ptrdiff_t>(best));
    std::vector<Factor> rest;
    Factor prod;
    bool any = false;
    for (auto& f : factors) {
      if (std::binary_search(f.vars.begin(), f.vars.end(), var)) {
        prod = any ? multiply(prod, f) : std::move(f);
        any = true;
      } else {
        rest.push_back(std::move(f));
      }
    }
    if (any) rest.push_back(sum_out(prod, var));
    factors = std::move(rest);
  }
  Factor out = std::move(factors.front());
  for (std::size_t k = 1; k < factors.size(); ++k) out = multiply(out, factors[k]);
  return out;
}

} // namespace detail

/// Adjustment-formula effect with adjustment set pa(h):
/// sum_s (Pr(Y = succ | treat, s) - Pr(Y = succ | ref, s)) Pr(pa(h) = s),
/// with the conditionals and marginals obtained by exact variable
/// elimination over the DAG factorization.
inline double causal_effect(const ThetaDraw& theta, const Dag& d, const CausalQuery& query) {
  const auto levels = detail::theta_levels(theta);
  if (theta.size() != d.size()) throw InvalidInput("causal_effect: theta and DAG sizes differ");
  query.validate(levels);
  const auto& pa = d.parents(query.h);
  if (std::binary_search(pa.begin(), pa.end(), query.y)) return 0.0; // Y is a parent of h
  std::vector<std::size_t> keep(pa.begin(), pa.end());
  keep.push_back(query.h);
  keep.push_back(query.y);
  // F(y, h, s) = Pr(Y = y, pa(h) = s | do(h)); Pr(pa(h) = s) = sum_y F(y, l, s) for any l.
  const detail::Factor f = detail::truncated_marginal(theta, d, keep, query.h);
  const std::size_t py = f.position(query.y);
  const std::size_t ph = f.position(query.h);
  std::vector<std::size_t> strides(f.vars.size(), 1);
  for (std::size_t k = f.vars.size(); k-- > 1;) strides[k - 1] = strides[k] * f.card[k];

  std::vector<std::size_t> pa_card;
  for (std::size_t p : pa) pa_card.push_back(levels[p]);
  std::vector<std::size_t> s(pa.size(), 0);
  double effect = 0.0;
  auto conditional = [&](std::size_t base, std::size_t level, double& margin) {
    const std::size_t at = base + level * strides[ph];
    margin = 0.0;
    for (std::size_t yv = 0; yv < f.card[py]; ++yv) margin += f.values[at + yv * strides[py]];
    return margin > 0.0 ? f.values[at + query.success_level * strides[py]] / margin : 0.0;
  };
  do {
    std::size_t base = 0;
    for (std::size_t k = 0; k < pa.size(); ++k) base += s[k] * strides[f.position(pa[k])];
    double margin_t = 0.0, margin_r = 0.0;
    const double cond_t = conditional(base, query.treat_level, margin_t);
    const double cond_r = conditional(base, query.ref_level, margin_r);
    effect += (cond_t - cond_r) * margin_t;
  } while (!pa.empty() && detail::advance(s, pa_card));
  return effect;
}

inline constexpr double kMaxEnumeration = 1e7;

/// E[1{Y = success} | do(X_h = level)] by brute-force enumeration of the
/// truncated factorization.
inline double post_intervention_expectation(const ThetaDraw& theta, const Dag& d, std::size_t h, std::size_t level,
                                            std::size_t y, std::size_t success_level) {
  const auto levels = detail::theta_levels(theta);
  const std::size_t q = levels.size();
  if (h >= q || y >= q || level >= levels[h] || success_level >= levels[y])
    throw InvalidInput("post_intervention_expectation: index out of range");
  if (d.size() != q) throw InvalidInput("post_intervention_expectation: DAG size differs");
  double space = 1.0;
  for (std::size_t j = 0; j < q; ++j)
    if (j != h) space *= static_cast<double>(levels[j]);
  if (space > kMaxEnumeration)
    throw TooLarge("post_intervention_expectation: state space too large to enumerate; use causal_effect");
  std::vector<std::size_t> card = levels;
  card[h] = 1;
  std::vector<std::size_t> a(q, 0);
  std::vector<Level> x(q, 0);
  double total = 0.0;
  do {
    for (std::size_t j = 0; j < q; ++j) x[j] = static_cast<Level>(a[j]);
    x[h] = static_cast<Level>(level);
    if (static_cast<std::size_t>(x[y]) != success_level) continue;
    double p = 1.0;
    for (std::size_t j = 0; j < q; ++j)
      if (j != h) p *= theta.conditional(j, x);
    total += p;
  } while (detail::advance(a, card));
  return total;
}

/// Per-subject model-averaged effects and their draw sequences.
struct CausalEstimate {
  std::vector<double> estimate;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::vector<double>> draws; ///< draws[i][r]: effect for subject i at record r
};

/// Linear-interpolation sample quantile.
inline double quantile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double h = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline CausalEstimate bma_effects(const Trace& trace, const CausalQuery& query, double lower_p = 0.025,
                                  double upper_p = 0.975) {
  if (trace.records.empty()) throw InvalidInput("bma_effects: empty trace");
  if (!trace.has_theta()) throw InvalidInput("bma_effects: trace has no theta draws; re-run the sampler with theta recording");
  CausalEstimate out;
  const std::size_t n = trace.n;
  const std::size_t R = trace.records.size();
  out.draws.assign(n, std::vector<double>(R, 0.0));
  for (std::size_t r = 0; r < R; ++r) {
    const auto& rec = trace.records[r];
    std::vector<double> per_cluster(rec.dags.size());
    for (std::size_t k = 0; k < rec.dags.size(); ++k) per_cluster[k] = causal_effect(rec.theta[k], rec.dags[k], query);
    for (std::size_t i = 0; i < n; ++i) out.draws[i][r] = per_cluster[rec.labels[i]];
  }
  out.estimate.resize(n);
  out.lower.resize(n);
  out.upper.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (double v : out.draws[i]) sum += v;
    out.estimate[i] = sum / static_cast<double>(R);
    out.lower[i] = quantile(out.draws[i], lower_p);
    out.upper[i] = quantile(out.draws[i], upper_p);
  }
  return out;
}

/// One estimate per non-reference exposure level 1..L, each against level 0.
inline std::vector<CausalEstimate> bma_battery(const Trace& trace, std::size_t y, std::size_t h,
                                               std::size_t success_level = 1) {
  if (!trace.has_theta()) throw InvalidInput("bma_battery: trace has no theta draws; re-run the sampler with theta recording");
  const std::size_t levels_h = trace.records.front().theta.front().nodes[h].levels;
  std::vector<CausalEstimate> out;
  for (std::size_t l = 1; l < levels_h; ++l) out.push_back(bma_effects(trace, {y, h, l, 0, success_level}));
  return out;
}

} // namespace dagmix
