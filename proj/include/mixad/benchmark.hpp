// Scaled-down experiment suites comparing EM, AD-GD and SIA on the
// simulation designs. Every fit becomes one row; rows are aggregated per
// (setting, method).

#pragma once

#include "mixad/concurrency.hpp"
#include "mixad/em.hpp"
#include "mixad/io.hpp"
#include "mixad/metrics.hpp"
#include "mixad/model_select.hpp"
#include "mixad/optimize.hpp"
#include "mixad/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace mixad {

inline const std::vector<std::string>& benchmark_suites() {
  static const std::vector<std::string> names = {"sep-lambda", "unbalanced", "highdim-np", "contaminated",
                                                 "noise",      "modelsel",   "em-vs-gd"};
  return names;
}

struct BenchmarkConfig {
  std::string suite;
  int datasets = 0;  // 0: suite default
  int inits = 0;     // 0: suite default
  std::uint64_t seed = 0;
  // Primary setting axis (lambda, N2, p, dof, noise count, lambda, k_mu);
  // empty means the suite default. em-vs-gd also reads `secondary` (k_sigma).
  std::vector<double> settings;
  std::vector<double> secondary;
  std::optional<InitMethod> init;  // unset: suite default
  OptimizerConfig optimizer = [] {
    OptimizerConfig c;
    c.max_iter = 100;
    return c;
  }();
  EmConfig em;
  int latent_dim = 1;  // MFA fits in highdim-np
  int replicates = 5;  // modelsel
  int workers = worker_count();
};

struct BenchRow {
  std::string setting;
  int dataset = 0;
  int init = 0;
  std::string method;
  bool ok = true;
  double ari = std::numeric_limits<double>::quiet_NaN();
  double log_likelihood = std::numeric_limits<double>::quiet_NaN();
  double mpkl = std::numeric_limits<double>::quiet_NaN();
  double klf = std::numeric_limits<double>::quiet_NaN();
  double klb = std::numeric_limits<double>::quiet_NaN();
  double max_weight = std::numeric_limits<double>::quiet_NaN();
  double chosen_k = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  std::string termination;
  std::string message;
};

struct BenchAggregate {
  std::string setting;
  std::string method;
  std::string metric;
  int count = 0;    // finite values
  int missing = 0;  // failed fits or non-finite values
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();  // population sd
};

struct BenchmarkResult {
  std::string suite;
  std::vector<BenchRow> rows;
  std::vector<BenchAggregate> aggregates;

  // Aggregate lookup; throws when absent.
  const BenchAggregate& at(const std::string& setting, const std::string& method, const std::string& metric) const {
    for (const auto& a : aggregates)
      if (a.setting == setting && a.method == method && a.metric == metric) return a;
    throw std::out_of_range("no aggregate " + setting + "/" + method + "/" + metric);
  }
};

// splitmix64 over a sequence of words.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t w : words) {
    h += w + 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    h = z ^ (z >> 31);
  }
  return h;
}

namespace detail {

template <MixtureParameters P>
BenchRow row_from(const FitReport<P>& r, const Dataset& d, std::string method) {
  BenchRow row;
  row.method = std::move(method);
  row.ari = d.labels ? ari(*d.labels, r.assignments) : std::numeric_limits<double>::quiet_NaN();
  row.log_likelihood = r.log_likelihood;
  row.mpkl = r.mpkl;
  row.klf = r.klf;
  row.klb = r.klb;
  row.max_weight = r.params.weights().maxCoeff();
  row.iterations = r.iterations;
  row.termination = to_string(r.termination);
  row.message = r.message;
  return row;
}

inline BenchRow failed_row(std::string method, const std::string& message, std::string termination = "error") {
  BenchRow row;
  row.method = std::move(method);
  row.ok = false;
  row.termination = std::move(termination);
  row.message = message;
  return row;
}

// Runs fn, turning an exception into a failed row for `method`.
inline void attempt(std::vector<BenchRow>& out, const std::string& method, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const DegenerateFit& e) {
    out.push_back(failed_row(method, e.what(), "degenerate"));
  } catch (const std::exception& e) {
    out.push_back(failed_row(method, e.what()));
  }
}

inline OptimizerConfig with_objective(OptimizerConfig c, ObjectiveKind kind) {
  c.objective = kind;
  return c;
}

// EM, AD-GD (= SIA Step I) and SIA Step II from one shared init.
inline void em_adgd_sia(std::vector<BenchRow>& out, const Dataset& d, const GmmParams& init,
                        const BenchmarkConfig& cfg) {
  attempt(out, "em", [&] { out.push_back(row_from(em_fit(d, init, cfg.em), d, "em")); });
  attempt(out, "adgd", [&] {
    const auto s = sia_fit(d, init, with_objective(cfg.optimizer, ObjectiveKind::kSia));
    out.push_back(row_from(s.step1, d, "adgd"));
    out.push_back(row_from(s.step2, d, "sia"));
  });
  if (!out.empty() && out.back().method == "adgd" && !out.back().ok) out.push_back(failed_row("sia", out.back().message));
}

inline void sia_steps(std::vector<BenchRow>& out, const Dataset& d, const GmmParams& init, const BenchmarkConfig& cfg) {
  attempt(out, "sia-step1", [&] {
    const auto s = sia_fit(d, init, with_objective(cfg.optimizer, ObjectiveKind::kSia));
    out.push_back(row_from(s.step1, d, "sia-step1"));
    out.push_back(row_from(s.step2, d, "sia-step2"));
  });
  if (!out.empty() && out.back().method == "sia-step1" && !out.back().ok) {
    out.push_back(failed_row("sia-step2", out.back().message));
  }
}

struct Cell {
  std::string setting;
  double a = 0.0;
  double b = 0.0;
  int setting_index = 0;
  int dataset = 0;
  int init = 0;
};

inline std::string label(const std::string& name, double v) { return name + "=" + format_double(v); }

struct SuiteDefaults {
  std::vector<double> settings;
  std::vector<double> secondary;
  int datasets;
  int inits;
  InitMethod init;
};

inline SuiteDefaults suite_defaults(const std::string& suite) {
  if (suite == "sep-lambda") return {{3, 4, 5, 7}, {}, 10, 5, InitMethod::kKmeans};
  if (suite == "unbalanced") return {{100, 50, 20}, {}, 5, 3, InitMethod::kKmeans};
  if (suite == "highdim-np") return {{200, 100, 50, 10}, {}, 5, 1, InitMethod::kKmeans};
  if (suite == "contaminated") return {{2, 3, 4, 5, 10}, {}, 10, 1, InitMethod::kKmeans};
  if (suite == "noise") return {{10, 20, 30, 40, 50}, {}, 10, 1, InitMethod::kKmeans};
  if (suite == "modelsel") return {{1, 5, 10}, {}, 10, 1, InitMethod::kKmeans};
  if (suite == "em-vs-gd")
    return {{0.25, 0.5, 0.75, 1.0, 1.25, 1.5}, {0.05, 0.15, 0.25, 0.35, 0.45, 0.55}, 5, 5, InitMethod::kRandom};
  throw ConfigError("unknown benchmark suite '" + suite + "'");
}

inline std::string setting_name(const std::string& suite) {
  if (suite == "sep-lambda" || suite == "modelsel") return "lambda";
  if (suite == "unbalanced") return "n2";
  if (suite == "highdim-np") return "p";
  if (suite == "contaminated") return "dof";
  if (suite == "noise") return "noise";
  return "k_mu";
}

inline int positive_int(double v, const std::string& what) {
  if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError(what + " must be a positive integer");
  return static_cast<int>(v);
}

inline std::vector<BenchRow> run_cell(const std::string& suite, const Cell& cell, const BenchmarkConfig& cfg,
                                      InitMethod init_method) {
  const std::uint64_t data_seed =
      derive_seed({cfg.seed, static_cast<std::uint64_t>(cell.setting_index), static_cast<std::uint64_t>(cell.dataset)});
  const std::uint64_t init_seed = derive_seed({data_seed, static_cast<std::uint64_t>(cell.init)});
  std::vector<BenchRow> out;

  if (suite == "sep-lambda") {
    const Dataset d = gen_gmm(separation_design(cell.a, 100, data_seed));
    em_adgd_sia(out, d, init_gmm(d, 3, init_method, init_seed), cfg);
  } else if (suite == "unbalanced") {
    const Dataset d = gen_gmm(unbalanced_design(100, positive_int(cell.a, "N2"), data_seed));
    em_adgd_sia(out, d, init_gmm(d, 2, init_method, init_seed), cfg);
  } else if (suite == "highdim-np") {
    const Dataset d = gen_highdim(two_group_design(positive_int(cell.a, "p"), 50, data_seed));
    const GmmParams g = init_gmm(d, 2, init_method, init_seed);
    attempt(out, "em", [&] { out.push_back(row_from(em_fit(d, g, cfg.em), d, "em")); });
    attempt(out, "adgd", [&] {
      const auto s = sia_fit(d, g, with_objective(cfg.optimizer, ObjectiveKind::kSiaHd));
      out.push_back(row_from(s.step1, d, "adgd"));
      out.push_back(row_from(s.step2, d, "sia-hd"));
    });
    if (cfg.latent_dim < d.dim()) {
      attempt(out, "adgd-mfa", [&] {
        const MfaParams m = mfa_from_means(g.means, cfg.latent_dim);
        const auto s = sia_fit(d, m, with_objective(cfg.optimizer, ObjectiveKind::kSiaHd));
        out.push_back(row_from(s.step1, d, "adgd-mfa"));
        out.push_back(row_from(s.step2, d, "sia-hd-mfa"));
      });
    }
  } else if (suite == "contaminated") {
    const Dataset d = gen_contaminated(contamination_design(3.0, 50, data_seed), cell.a, {50, 50, 50, 50});
    sia_steps(out, d, init_gmm(d, 4, init_method, init_seed), cfg);
  } else if (suite == "noise") {
    const int noise = static_cast<int>(cell.a);
    if (cell.a < 0 || cell.a != noise) throw ConfigError("noise count must be a non-negative integer");
    const Dataset d = noise_design(50, noise, data_seed);
    sia_steps(out, d, init_gmm(d, 4, init_method, init_seed), cfg);
  } else if (suite == "modelsel") {
    const Dataset d = gen_highdim(model_selection_design(cell.a, 10, data_seed));
    SelectConfig sc;
    sc.optimizer = with_objective(cfg.optimizer, ObjectiveKind::kSiaHd);
    sc.replicates = cfg.replicates;
    sc.init = init_method;
    sc.seed = init_seed;
    sc.workers = 1;
    const Selection s = select_k(d, {3, 4, 5}, sc);
    for (const auto& [name, choice] : {std::pair{"mpkl", s.by_mpkl}, {"aic", s.by_aic}, {"bic", s.by_bic}}) {
      if (choice) {
        BenchRow row;
        row.method = name;
        row.chosen_k = *choice;
        out.push_back(row);
      } else {
        out.push_back(failed_row(name, "no candidate K succeeded"));
      }
    }
  } else if (suite == "em-vs-gd") {
    const Dataset d = gen_gmm(scaled_random_design(cell.a, cell.b, 3, 2, 100, data_seed));
    const GmmParams g = init_gmm(d, 3, init_method, init_seed);
    attempt(out, "em", [&] { out.push_back(row_from(em_fit(d, g, cfg.em), d, "em")); });
    attempt(out, "adgd", [&] { out.push_back(row_from(adgd_fit(d, g, cfg.optimizer), d, "adgd")); });
  }
  for (auto& r : out) {
    r.setting = cell.setting;
    r.dataset = cell.dataset;
    r.init = cell.init;
  }
  return out;
}

inline std::vector<BenchAggregate> aggregate(const std::vector<BenchRow>& rows) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::vector<double>> values;
  std::map<Key, int> missing;
  const std::vector<std::pair<std::string, double BenchRow::*>> metrics = {
      {"ari", &BenchRow::ari},   {"log_likelihood", &BenchRow::log_likelihood}, {"mpkl", &BenchRow::mpkl},
      {"max_weight", &BenchRow::max_weight}, {"chosen_k", &BenchRow::chosen_k}};
  for (const auto& r : rows) {
    for (const auto& [name, member] : metrics) {
      const Key key{r.setting, r.method, name};
      const double v = r.*member;
      if (name == "chosen_k" && r.ok && std::isnan(v)) continue;
      if (name != "chosen_k" && r.ok && std::isnan(v) && !std::isnan(r.chosen_k)) continue;
      if (r.ok && std::isfinite(v)) {
        values[key].push_back(v);
        if (name == "chosen_k") values[Key{r.setting, r.method, "picked_" + std::to_string(int(v))}];
      } else {
        ++missing[key];
      }
    }
  }
  // Selection counts: fraction of datasets whose choice was K.
  for (auto& [key, vs] : values) {
    const auto& [setting, method, metric] = key;
    if (metric.rfind("picked_", 0) != 0) continue;
    const int k = std::stoi(metric.substr(7));
    for (double c : values[Key{setting, method, "chosen_k"}]) vs.push_back(c == k ? 1.0 : 0.0);
  }
  std::vector<BenchAggregate> out;
  std::map<Key, bool> seen;
  for (const auto& [key, vs] : values) seen[key] = true;
  for (const auto& [key, m] : missing) seen[key] = true;
  for (const auto& [key, unused] : seen) {
    BenchAggregate a;
    std::tie(a.setting, a.method, a.metric) = key;
    const auto it = values.find(key);
    if (it != values.end() && !it->second.empty()) {
      const auto& vs = it->second;
      a.count = static_cast<int>(vs.size());
      double sum = 0.0;
      for (double v : vs) sum += v;
      a.mean = sum / a.count;
      double ss = 0.0;
      for (double v : vs) ss += (v - a.mean) * (v - a.mean);
      a.sd = std::sqrt(ss / a.count);
    }
    const auto mi = missing.find(key);
    a.missing = mi == missing.end() ? 0 : mi->second;
    out.push_back(a);
  }
  return out;
}

}  // namespace detail

inline BenchmarkResult run_benchmark(const BenchmarkConfig& cfg) {
  const auto defaults = detail::suite_defaults(cfg.suite);
  cfg.optimizer.validate();
  cfg.em.validate();
  const auto settings = cfg.settings.empty() ? defaults.settings : cfg.settings;
  const auto secondary = cfg.secondary.empty() ? defaults.secondary : cfg.secondary;
  const int datasets = cfg.datasets > 0 ? cfg.datasets : defaults.datasets;
  const int inits = cfg.suite == "modelsel" ? 1 : (cfg.inits > 0 ? cfg.inits : defaults.inits);
  const InitMethod init_method = cfg.init.value_or(defaults.init);
  if (cfg.datasets < 0 || cfg.inits < 0) throw ConfigError("dataset and init counts must be >= 0");

  std::vector<detail::Cell> cells;
  const std::string axis = detail::setting_name(cfg.suite);
  int index = 0;
  for (double a : settings) {
    const std::vector<double> bs = cfg.suite == "em-vs-gd" ? secondary : std::vector<double>{0.0};
    for (double b : bs) {
      std::string name = detail::label(axis, a);
      if (cfg.suite == "em-vs-gd") name += ";" + detail::label("k_sigma", b);
      for (int ds = 0; ds < datasets; ++ds)
        for (int in = 0; in < inits; ++in) cells.push_back({name, a, b, index, ds, in});
      ++index;
    }
  }

  std::vector<std::vector<BenchRow>> results(cells.size());
  parallel_for(
      static_cast<int>(cells.size()),
      [&](int i) { results[i] = detail::run_cell(cfg.suite, cells[i], cfg, init_method); }, cfg.workers);

  BenchmarkResult out;
  out.suite = cfg.suite;
  for (auto& r : results)
    for (auto& row : r) out.rows.push_back(std::move(row));
  out.aggregates = detail::aggregate(out.rows);
  return out;
}

// ---------------------------------------------------------------------------
// CSV output. Rows keep cell order (settings, dataset, init); aggregates are
// sorted by (setting, method, metric).

inline void write_benchmark_rows(std::ostream& out, const BenchmarkResult& r) {
  out << "suite,setting,dataset,init,method,status,ari,log_likelihood,mpkl,klf,klb,max_weight,chosen_k,iterations,"
         "termination\n";
  for (const auto& row : r.rows) {
    auto num = [&](double v) { return row.ok ? format_double(v) : std::string(); };
    out << r.suite << ',' << row.setting << ',' << row.dataset << ',' << row.init << ',' << row.method << ','
        << (row.ok ? "ok" : "failed") << ',' << num(row.ari) << ',' << num(row.log_likelihood) << ','
        << num(row.mpkl) << ',' << num(row.klf) << ',' << num(row.klb) << ',' << num(row.max_weight) << ','
        << num(row.chosen_k) << ',' << row.iterations << ',' << row.termination << '\n';
  }
}

inline void write_benchmark_aggregates(std::ostream& out, const BenchmarkResult& r) {
  out << "suite,setting,method,metric,count,missing,mean,sd\n";
  for (const auto& a : r.aggregates) {
    out << r.suite << ',' << a.setting << ',' << a.method << ',' << a.metric << ',' << a.count << ',' << a.missing
        << ',' << (a.count ? format_double(a.mean) : "") << ',' << (a.count ? format_double(a.sd) : "") << '\n';
  }
}

}  // namespace mixad
