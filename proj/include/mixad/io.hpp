// CSV datasets, JSON parameters/reports, and JSON simulation specs.

#pragma once

#include "mixad/dataset.hpp"
#include "mixad/mixture.hpp"
#include "mixad/penalty.hpp"
#include "mixad/report.hpp"
#include "mixad/simulate.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixad {

using json = nlohmann::json;

// Unreadable or malformed files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid specs and option values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// 17 significant digits: round-trips every double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// CSV

struct CsvOptions {
  bool header = true;
  // Label column by header name or zero-based index. Without either, a
  // header column named "label" is used when present.
  std::optional<std::string> label_name;
  std::optional<int> label_index;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  for (auto& c : out) {
    const auto first = c.find_first_not_of(" \t\r");
    const auto last = c.find_last_not_of(" \t\r");
    c = first == std::string::npos ? "" : c.substr(first, last - first + 1);
  }
  return out;
}

inline double parse_cell(const std::string& cell, int line) {
  if (cell.empty()) throw IoError("line " + std::to_string(line) + ": empty cell");
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) {
    throw IoError("line " + std::to_string(line) + ": '" + cell + "' is not a number");
  }
  return v;
}

inline int parse_label(const std::string& cell, int line) {
  const double v = parse_cell(cell, line);
  if (v != std::floor(v) || std::abs(v) > std::numeric_limits<int>::max()) {
    throw IoError("line " + std::to_string(line) + ": label '" + cell + "' is not an integer");
  }
  return static_cast<int>(v);
}

}  // namespace detail

inline Dataset read_csv(std::istream& in, const CsvOptions& opts = {}) {
  std::string line;
  int line_no = 0;
  std::vector<std::string> names;
  // -1 means no label column.
  int label_col = opts.label_index ? *opts.label_index : -1;
  if (opts.label_index && label_col < 0) throw ConfigError("label column index must be >= 0");
  if (opts.header) {
    do {
      if (!std::getline(in, line)) throw IoError("CSV has no header row");
      ++line_no;
    } while (line.find_first_not_of(" \t\r") == std::string::npos);
    names = detail::split_csv_line(line);
    if (opts.label_name) {
      label_col = -1;
      for (int j = 0; j < static_cast<int>(names.size()); ++j)
        if (names[j] == *opts.label_name) label_col = j;
      if (label_col < 0) throw IoError("no column named '" + *opts.label_name + "'");
    } else if (label_col < 0) {
      for (int j = 0; j < static_cast<int>(names.size()); ++j)
        if (names[j] == "label") label_col = j;
    }
  } else if (opts.label_name) {
    throw ConfigError("a label column name needs a header row");
  }

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  int width = opts.header ? static_cast<int>(names.size()) : -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    if (width < 0) width = static_cast<int>(cells.size());
    if (static_cast<int>(cells.size()) != width) {
      throw IoError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) + " columns, got " +
                    std::to_string(cells.size()));
    }
    if (label_col >= width) throw IoError("label column index out of range");
    std::vector<double> row;
    for (int j = 0; j < width; ++j) {
      if (j == label_col) {
        labels.push_back(detail::parse_label(cells[j], line_no));
      } else {
        row.push_back(detail::parse_cell(cells[j], line_no));
      }
    }
    rows.push_back(std::move(row));
  }

  Dataset d;
  const int p = width < 0 ? 0 : width - (label_col >= 0 ? 1 : 0);
  d.x.resize(static_cast<Eigen::Index>(rows.size()), p);
  for (Eigen::Index i = 0; i < d.x.rows(); ++i)
    for (int j = 0; j < p; ++j) d.x(i, j) = rows[i][j];
  if (label_col >= 0) d.labels = std::move(labels);
  return d;
}

inline Dataset read_csv_file(const std::string& path, const CsvOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  Dataset d = read_csv(in, opts);
  d.provenance = path;
  return d;
}

// Header x1..xp[,label]; the label column is written when labels exist.
inline void write_csv(std::ostream& out, const Dataset& d, int dim = -1) {
  const int p = dim >= 0 ? dim : d.dim();
  for (int j = 0; j < p; ++j) out << (j ? "," : "") << 'x' << (j + 1);
  if (d.labels) out << (p ? "," : "") << "label";
  out << '\n';
  for (int i = 0; i < d.size(); ++i) {
    for (int j = 0; j < p; ++j) out << (j ? "," : "") << format_double(d.x(i, j));
    if (d.labels) out << (p ? "," : "") << (*d.labels)[i];
    out << '\n';
  }
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

inline void write_csv_file(const std::string& path, const Dataset& d, int dim = -1) {
  auto out = open_output(path);
  write_csv(out, d, dim);
  if (!out) throw IoError("write failed for '" + path + "'");
}

// Loss-surface grid as rows (alpha index, beta index, value); missing cells
// are written as "nan".
inline void write_surface_csv(std::ostream& out, const Eigen::MatrixXd& s) {
  out << "alpha_index,beta_index,value\n";
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j) out << i << ',' << j << ',' << format_double(s(i, j)) << '\n';
}

// ---------------------------------------------------------------------------
// JSON helpers

namespace detail {

// Non-finite doubles become null, matching what read_number accepts.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double read_number(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) throw ConfigError("expected a number, got " + j.dump());
  return j.get<double>();
}

inline json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

inline json matrix_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i).transpose()));
  return a;
}

inline Eigen::VectorXd read_vector(const json& j) {
  if (!j.is_array()) throw ConfigError("expected an array, got " + j.dump());
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = read_number(j[i]);
  return v;
}

inline Eigen::MatrixXd read_matrix(const json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("expected a non-empty array of rows");
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw ConfigError("ragged matrix rows");
    m.row(static_cast<Eigen::Index>(i)) = read_vector(j[i]).transpose();
  }
  return m;
}

template <class T>
T field(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("field '" + key + "': " + e.what());
  }
}

template <class T>
T field_or(const json& j, const std::string& key, T fallback) {
  return j.contains(key) ? field<T>(j, key) : fallback;
}

inline void allow_keys(const json& j, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError("expected a JSON object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown field '" + k + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parameters

inline json to_json(const GmmParams& g) {
  json j;
  j["model"] = "gmm";
  j["alphas"] = detail::vector_json(g.alphas);
  j["means"] = json::array();
  j["factors"] = json::array();
  for (int k = 0; k < g.components(); ++k) {
    j["means"].push_back(detail::vector_json(g.means[k]));
    j["factors"].push_back(detail::matrix_json(g.factors[k]));
  }
  return j;
}

inline json to_json(const MfaParams& m) {
  json j;
  j["model"] = "mfa";
  j["alphas"] = detail::vector_json(m.alphas);
  j["means"] = json::array();
  j["loadings"] = json::array();
  j["log_uniquenesses"] = json::array();
  for (int k = 0; k < m.components(); ++k) {
    j["means"].push_back(detail::vector_json(m.means[k]));
    j["loadings"].push_back(detail::matrix_json(m.loadings[k]));
    j["log_uniquenesses"].push_back(detail::vector_json(m.log_uniquenesses[k]));
  }
  return j;
}

template <MixtureParameters P>
P params_from_json(const json& j);

template <>
inline GmmParams params_from_json<GmmParams>(const json& j) {
  if (detail::field_or<std::string>(j, "model", "gmm") != "gmm") throw ConfigError("parameters are not a GMM");
  GmmParams g;
  g.alphas = detail::read_vector(j.at("alphas"));
  for (const auto& m : j.at("means")) g.means.push_back(detail::read_vector(m));
  for (const auto& f : j.at("factors")) g.factors.push_back(detail::read_matrix(f));
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return g;
}

template <>
inline MfaParams params_from_json<MfaParams>(const json& j) {
  if (detail::field<std::string>(j, "model") != "mfa") throw ConfigError("parameters are not an MFA");
  MfaParams m;
  m.alphas = detail::read_vector(j.at("alphas"));
  for (const auto& v : j.at("means")) m.means.push_back(detail::read_vector(v));
  for (const auto& l : j.at("loadings")) m.loadings.push_back(detail::read_matrix(l));
  for (const auto& u : j.at("log_uniquenesses")) m.log_uniquenesses.push_back(detail::read_vector(u));
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Fit reports. Wall time is left out unless asked for, so reruns produce
// identical files.

inline json to_json(const PenaltyWeights& w) {
  json j;
  j["w1"] = w.w1;
  j["w2"] = w.w2;
  j["w3"] = w.w3;
  j["scale"] = to_string(w.scale);
  j["anchors"] = json::array();
  for (double a : w.anchors) j["anchors"].push_back(detail::number(a));
  return j;
}

inline PenaltyWeights weights_from_json(const json& j) {
  PenaltyWeights w;
  w.w1 = detail::read_number(j.at("w1"));
  w.w2 = detail::read_number(j.at("w2"));
  w.w3 = detail::read_number(j.at("w3"));
  w.scale = parse_weight_scale(detail::field<std::string>(j, "scale"));
  for (const auto& a : j.at("anchors")) w.anchors.push_back(detail::read_number(a));
  return w;
}

template <MixtureParameters P>
json to_json(const FitReport<P>& r, bool with_timing = false) {
  json j;
  j["method"] = r.method;
  j["objective"] = to_string(r.objective);
  j["weights"] = to_json(r.weights);
  j["termination"] = to_string(r.termination);
  j["message"] = r.message;
  j["iterations"] = r.iterations;
  j["n"] = r.n;
  j["initial_objective"] = detail::number(r.initial_objective);
  j["final_objective"] = detail::number(r.final_objective());
  j["log_likelihood"] = detail::number(r.log_likelihood);
  j["total_log_likelihood"] = detail::number(r.total_log_likelihood);
  j["klf"] = detail::number(r.klf);
  j["klb"] = detail::number(r.klb);
  j["mpkl"] = detail::number(r.mpkl);
  j["free_parameters"] = r.free_parameters;
  j["aic"] = detail::number(r.aic);
  j["bic"] = detail::number(r.bic);
  j["trace"] = json::array();
  for (double v : r.trace) j["trace"].push_back(detail::number(v));
  j["assignments"] = r.assignments;
  j["params"] = to_json(r.params);
  if (with_timing) j["wall_seconds"] = r.wall_seconds;
  return j;
}

template <MixtureParameters P>
FitReport<P> report_from_json(const json& j) {
  FitReport<P> r;
  try {
    r.params = params_from_json<P>(j.at("params"));
    r.method = detail::field<std::string>(j, "method");
    r.objective = parse_objective_kind(detail::field<std::string>(j, "objective"));
    r.weights = weights_from_json(j.at("weights"));
    r.termination = parse_termination(detail::field<std::string>(j, "termination"));
    r.message = detail::field_or<std::string>(j, "message", "");
    r.iterations = detail::field<int>(j, "iterations");
    r.n = detail::field<int>(j, "n");
    r.initial_objective = detail::read_number(j.at("initial_objective"));
    r.log_likelihood = detail::read_number(j.at("log_likelihood"));
    r.total_log_likelihood = detail::read_number(j.at("total_log_likelihood"));
    r.klf = detail::read_number(j.at("klf"));
    r.klb = detail::read_number(j.at("klb"));
    r.mpkl = detail::read_number(j.at("mpkl"));
    r.free_parameters = detail::field<long>(j, "free_parameters");
    r.aic = detail::read_number(j.at("aic"));
    r.bic = detail::read_number(j.at("bic"));
    for (const auto& v : j.at("trace")) r.trace.push_back(detail::read_number(v));
    r.assignments = detail::field<std::vector<int>>(j, "assignments");
    r.wall_seconds = detail::field_or<double>(j, "wall_seconds", 0.0);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return r;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

// Pretty-printed with a trailing newline.
inline void write_json_file(const std::string& path, const json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Simulation specs. "type" selects the generator; gmm, contaminated and
// highdim accept either explicit parameters or a named design.
//
//   pinwheel      arms, radial_sd, tangential_sd, rate, points_per_arm, seed
//   gmm           means, factors, counts, transform, seed
//                 | design: separation (lambda, per_component, seed)
//                 | design: unbalanced (n1, n2, seed)
//                 | design: scaled-random (k_mu, k_sigma, components, dim, per_component, seed)
//                 | design: contamination (beta, per_component, seed)
//   contaminated  gaussian (a gmm spec), dof, t_counts
//   noise         base (any spec), count, lo, hi, seed
//                 | design: noise (per_component, count, seed)
//   highdim       dim, blocks, level, sd, counts, seed
//                 | design: two-group (dim, per_component, seed)
//                 | design: dominating (per_component, seed)
//                 | design: model-selection (lambda, per_component, seed)

namespace detail {

inline GmmSimSpec gmm_spec_from_json(const json& j) {
  const auto seed = field_or<std::uint64_t>(j, "seed", 0);
  if (j.contains("design")) {
    const auto design = field<std::string>(j, "design");
    if (design == "separation") {
      allow_keys(j, {"type", "design", "lambda", "per_component", "seed"});
      return separation_design(field<double>(j, "lambda"), field<int>(j, "per_component"), seed);
    }
    if (design == "unbalanced") {
      allow_keys(j, {"type", "design", "n1", "n2", "seed"});
      return unbalanced_design(field<int>(j, "n1"), field<int>(j, "n2"), seed);
    }
    if (design == "scaled-random") {
      allow_keys(j, {"type", "design", "k_mu", "k_sigma", "components", "dim", "per_component", "seed"});
      return scaled_random_design(field<double>(j, "k_mu"), field<double>(j, "k_sigma"), field<int>(j, "components"),
                                  field<int>(j, "dim"), field<int>(j, "per_component"), seed);
    }
    if (design == "contamination") {
      allow_keys(j, {"type", "design", "beta", "per_component", "seed"});
      return contamination_design(field<double>(j, "beta"), field<int>(j, "per_component"), seed);
    }
    throw ConfigError("unknown gmm design '" + design + "'");
  }
  allow_keys(j, {"type", "means", "factors", "counts", "transform", "seed"});
  GmmSimSpec s;
  for (const auto& m : j.at("means")) s.means.push_back(read_vector(m));
  for (const auto& f : j.at("factors")) s.factors.push_back(read_matrix(f));
  s.counts = field<std::vector<int>>(j, "counts");
  const auto transform = field_or<std::string>(j, "transform", "none");
  if (transform == "cube") {
    s.transform = PostTransform::kCube;
  } else if (transform != "none") {
    throw ConfigError("unknown transform '" + transform + "'");
  }
  s.seed = seed;
  return s;
}

inline BlockMeanSpec highdim_spec_from_json(const json& j) {
  const auto seed = field_or<std::uint64_t>(j, "seed", 0);
  if (j.contains("design")) {
    const auto design = field<std::string>(j, "design");
    if (design == "two-group") {
      allow_keys(j, {"type", "design", "dim", "per_component", "seed"});
      return two_group_design(field<int>(j, "dim"), field<int>(j, "per_component"), seed);
    }
    if (design == "dominating") {
      allow_keys(j, {"type", "design", "per_component", "seed"});
      return dominating_design(field<int>(j, "per_component"), seed);
    }
    if (design == "model-selection") {
      allow_keys(j, {"type", "design", "lambda", "per_component", "seed"});
      return model_selection_design(field<double>(j, "lambda"), field<int>(j, "per_component"), seed);
    }
    throw ConfigError("unknown highdim design '" + design + "'");
  }
  allow_keys(j, {"type", "dim", "blocks", "level", "sd", "counts", "seed"});
  BlockMeanSpec b;
  b.dim = field<int>(j, "dim");
  b.blocks = field<std::vector<std::pair<int, int>>>(j, "blocks");
  b.level = field_or<double>(j, "level", 1.0);
  b.sd = field_or<double>(j, "sd", 1.0);
  b.counts = field<std::vector<int>>(j, "counts");
  b.seed = seed;
  return b;
}

inline Dataset simulate_checked(const json& spec) {
  const auto type = field<std::string>(spec, "type");
  if (type == "pinwheel") {
    allow_keys(spec, {"type", "arms", "radial_sd", "tangential_sd", "rate", "points_per_arm", "seed"});
    PinwheelSpec p;
    p.arms = field_or<int>(spec, "arms", p.arms);
    p.radial_sd = field_or<double>(spec, "radial_sd", p.radial_sd);
    p.tangential_sd = field_or<double>(spec, "tangential_sd", p.tangential_sd);
    p.rate = field_or<double>(spec, "rate", p.rate);
    p.points_per_arm = field_or<int>(spec, "points_per_arm", p.points_per_arm);
    p.seed = field_or<std::uint64_t>(spec, "seed", 0);
    return gen_pinwheel(p);
  }
  if (type == "gmm") return gen_gmm(gmm_spec_from_json(spec));
  if (type == "contaminated") {
    allow_keys(spec, {"type", "gaussian", "dof", "t_counts"});
    return gen_contaminated(gmm_spec_from_json(spec.at("gaussian")), field<double>(spec, "dof"),
                            field<std::vector<int>>(spec, "t_counts"));
  }
  if (type == "noise") {
    if (field_or<std::string>(spec, "design", "") == "noise") {
      allow_keys(spec, {"type", "design", "per_component", "count", "seed"});
      return noise_design(field<int>(spec, "per_component"), field<int>(spec, "count"),
                          field_or<std::uint64_t>(spec, "seed", 0));
    }
    allow_keys(spec, {"type", "base", "count", "lo", "hi", "seed"});
    return gen_noise_uniform(simulate_checked(spec.at("base")), field<int>(spec, "count"),
                             field_or<double>(spec, "lo", -6.0), field_or<double>(spec, "hi", 6.0),
                             field_or<std::uint64_t>(spec, "seed", 0));
  }
  if (type == "highdim") return gen_highdim(highdim_spec_from_json(spec));
  throw ConfigError("unknown simulation type '" + type + "'");
}

}  // namespace detail

// Generator errors surface as ConfigError.
inline Dataset simulate_from_json(const json& spec) {
  try {
    return detail::simulate_checked(spec);
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("simulation spec: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("simulation spec: ") + e.what());
  }
}

}  // namespace mixad
