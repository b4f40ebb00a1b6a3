// mixad: simulate, fit, select, surface and benchmark from the command line.
//
// Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 degenerate
// fit (the report is still written).

#include "mixad/benchmark.hpp"
#include "mixad/em.hpp"
#include "mixad/io.hpp"
#include "mixad/metrics.hpp"
#include "mixad/model_select.hpp"
#include "mixad/optimize.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace {

using namespace mixad;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDegenerate = 4;

struct DataOptions {
  std::string path;
  std::string label_column;
  bool standardize = false;

  Dataset load() const {
    CsvOptions opts;
    if (!label_column.empty()) opts.label_name = label_column;
    Dataset d = read_csv_file(path, opts);
    return standardize ? standardized(d) : d;
  }

  json to_json() const { return {{"path", path}, {"label_column", label_column}, {"standardize", standardize}}; }
};

struct FitOptions {
  std::string model = "gmm";
  int k = 2;
  int q = 1;
  std::string method = "gd";
  std::string objective = "plain";
  double w1 = 1.0, w2 = 1.0, w3 = 1.0;
  std::string weight_scale = "per-observation";
  double lr = 1e-2;
  double tol = 1e-5;
  int max_iter = 2000;
  std::string init = "kmeans";
  std::uint64_t seed = 0;
  std::string init_from;
  bool timing = false;

  OptimizerConfig optimizer() const {
    OptimizerConfig c;
    c.learning_rate = lr;
    c.tol = tol;
    c.max_iter = max_iter;
    c.objective = parse_objective_kind(objective);
    c.weights.w1 = w1;
    c.weights.w2 = w2;
    c.weights.w3 = w3;
    c.weights.scale = parse_weight_scale(weight_scale);
    c.validate();
    return c;
  }

  json to_json() const {
    return {{"model", model},   {"k", k},       {"q", q},         {"method", method},
            {"objective", objective}, {"w1", w1}, {"w2", w2}, {"w3", w3},
            {"weight_scale", weight_scale}, {"learning_rate", lr}, {"tol", tol}, {"max_iter", max_iter},
            {"init", init},     {"seed", seed}, {"init_from", init_from}};
  }
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.path, "Input CSV")->required();
  cmd->add_option("--label-column", d.label_column, "Name of the integer label column (default: 'label' if present)");
  cmd->add_flag("--standardize", d.standardize, "Z-score every column before fitting");
}

void add_optimizer_options(CLI::App* cmd, FitOptions& f) {
  cmd->add_option("--objective", f.objective, "plain | sia | sia-hd")->capture_default_str();
  cmd->add_option("--w1", f.w1, "KLF weight")->capture_default_str();
  cmd->add_option("--w2", f.w2, "KLB weight")->capture_default_str();
  cmd->add_option("--w3", f.w3, "Determinant anchor weight (sia-hd)")->capture_default_str();
  cmd->add_option("--weight-scale", f.weight_scale, "per-observation | absolute")->capture_default_str();
  cmd->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--tol", f.tol, "Convergence tolerance on the objective")->capture_default_str();
  cmd->add_option("--max-iter", f.max_iter, "Iteration cap")->capture_default_str();
  cmd->add_option("--init", f.init, "kmeans | random")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Initialization seed")->capture_default_str();
}

void add_model_options(CLI::App* cmd, FitOptions& f) {
  cmd->add_option("--model", f.model, "gmm | mfa")->capture_default_str();
  cmd->add_option("--q", f.q, "MFA latent dimension")->capture_default_str();
}

// Parameters out of a report file: the SIA Step II report when present.
json report_section(const json& j) {
  if (j.contains("step2")) return j.at("step2");
  if (j.contains("report")) return j.at("report");
  return j;
}

template <MixtureParameters P>
P params_from_report_file(const std::string& path) {
  return report_from_json<P>(report_section(read_json_file(path))).params;
}

template <MixtureParameters P>
void print_summary(const std::string& tag, const FitReport<P>& r, const Dataset& d) {
  std::printf("%s LL=%.6f KLF=%.6f KLB=%.6f MPKL=%.6f AIC=%.6f", tag.c_str(), r.log_likelihood, r.klf, r.klb, r.mpkl,
              r.aic);
  if (d.labels) std::printf(" ARI=%.6f", ari(*d.labels, r.assignments));
  std::printf(" iterations=%d termination=%s\n", r.iterations, to_string(r.termination).c_str());
}

template <MixtureParameters P>
P fit_init(const Dataset& d, const FitOptions& f) {
  if (!f.init_from.empty()) return params_from_report_file<P>(f.init_from);
  const InitMethod m = parse_init_method(f.init);
  if constexpr (std::is_same_v<P, GmmParams>) {
    return init_gmm(d, f.k, m, f.seed);
  } else {
    return init_mfa(d, f.k, f.q, m, f.seed);
  }
}

template <MixtureParameters P>
int run_fit(const Dataset& d, const DataOptions& data, const FitOptions& f, const std::string& out) {
  const P init = fit_init<P>(d, f);
  json j{{"command", "fit"}, {"data", data.to_json()}, {"config", f.to_json()}};
  bool degenerate = false;
  if (f.method == "em") {
    if constexpr (std::is_same_v<P, GmmParams>) {
      EmConfig c;
      c.tol = f.tol;
      c.max_iter = f.max_iter;
      FitReport<GmmParams> r;
      try {
        r = em_fit(d, init, c);
      } catch (const DegenerateFit& e) {
        r = e.report();
        degenerate = true;
      }
      j["report"] = to_json(r, f.timing);
      print_summary("em", r, d);
    } else {
      throw ConfigError("EM is only available for --model gmm");
    }
  } else if (f.method != "gd") {
    throw ConfigError("--method must be gd or em");
  } else {
    const OptimizerConfig c = f.optimizer();
    if (c.objective == ObjectiveKind::kPlain) {
      const auto r = adgd_fit(d, init, c);
      degenerate = r.termination == Termination::kDegenerate;
      j["report"] = to_json(r, f.timing);
      print_summary("adgd", r, d);
    } else {
      const auto r = sia_fit(d, init, c);
      degenerate = r.step1.termination == Termination::kDegenerate || r.step2.termination == Termination::kDegenerate;
      j["step1"] = to_json(r.step1, f.timing);
      j["step2"] = to_json(r.step2, f.timing);
      print_summary("step1", r.step1, d);
      print_summary("step2", r.step2, d);
    }
  }
  write_json_file(out, j);
  return degenerate ? kExitDegenerate : 0;
}

void write_text_file(const std::string& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture-model fitting by gradient ascent with KL-penalized likelihood"};
  app.require_subcommand(1);

  // simulate
  std::string sim_config, sim_out, sim_manifest;
  auto* simulate = app.add_subcommand("simulate", "Generate a dataset from a JSON spec");
  simulate->add_option("--config", sim_config, "Simulation spec JSON")->required();
  simulate->add_option("--out", sim_out, "Output CSV")->required();
  simulate->add_option("--manifest", sim_manifest, "Manifest JSON (default: <out>.manifest.json)");

  // fit
  DataOptions fit_data;
  FitOptions fit_opts;
  std::string fit_out;
  auto* fit = app.add_subcommand("fit", "Fit a GMM or MFA by EM, AD-GD or SIA");
  add_data_options(fit, fit_data);
  add_model_options(fit, fit_opts);
  add_optimizer_options(fit, fit_opts);
  fit->add_option("--k", fit_opts.k, "Number of components")->capture_default_str();
  fit->add_option("--method", fit_opts.method, "gd | em")->capture_default_str();
  fit->add_option("--init-from", fit_opts.init_from, "Start from the parameters of a report JSON");
  fit->add_flag("--timing", fit_opts.timing, "Record wall-clock seconds in the report");
  fit->add_option("--out", fit_out, "Report JSON")->required();

  // select
  DataOptions sel_data;
  FitOptions sel_opts;
  sel_opts.objective = "sia";
  int k_min = 2, k_max = 6, replicates = 5;
  std::string sel_out, sel_manifest;
  auto* select = app.add_subcommand("select", "Choose K by MPKL, AIC and BIC");
  add_data_options(select, sel_data);
  add_model_options(select, sel_opts);
  add_optimizer_options(select, sel_opts);
  select->add_option("--k-min", k_min, "Smallest K")->capture_default_str();
  select->add_option("--k-max", k_max, "Largest K")->capture_default_str();
  select->add_option("--replicates", replicates, "Initializations per K")->capture_default_str();
  select->add_option("--out", sel_out, "Selection table CSV")->required();
  select->add_option("--manifest", sel_manifest, "Manifest JSON with the choices (default: <out>.manifest.json)");

  // surface
  DataOptions surf_data;
  FitOptions surf_opts;
  std::string report1, report2, surf_out;
  int grid = 21;
  auto* surface = app.add_subcommand("surface", "Objective on the plane a*theta1 + b*theta2");
  add_data_options(surface, surf_data);
  surface->add_option("--report1", report1, "Report JSON for theta1")->required();
  surface->add_option("--report2", report2, "Report JSON for theta2")->required();
  surface->add_option("--grid", grid, "Points per axis over [0, 1]")->capture_default_str();
  surface->add_option("--model", surf_opts.model, "gmm | mfa")->capture_default_str();
  surface->add_option("--objective", surf_opts.objective, "plain | sia | sia-hd")->capture_default_str();
  surface->add_option("--w1", surf_opts.w1, "KLF weight")->capture_default_str();
  surface->add_option("--w2", surf_opts.w2, "KLB weight")->capture_default_str();
  surface->add_option("--w3", surf_opts.w3, "Determinant anchor weight")->capture_default_str();
  surface->add_option("--weight-scale", surf_opts.weight_scale, "per-observation | absolute")->capture_default_str();
  surface->add_option("--out", surf_out, "Grid CSV")->required();

  // benchmark
  std::string suite, bench_out, bench_rows, bench_init;
  std::vector<double> settings, secondary;
  int seeds = 0, inits = 0, bench_iter = 100, latent = 1, bench_reps = 5;
  std::uint64_t bench_seed = 0;
  auto* benchmark = app.add_subcommand("benchmark", "Run a scaled-down experiment suite");
  benchmark->add_option("suite", suite, "sep-lambda | unbalanced | highdim-np | contaminated | noise | modelsel | em-vs-gd")
      ->required();
  benchmark->add_option("--seeds", seeds, "Datasets per setting (0: suite default)");
  benchmark->add_option("--inits", inits, "Initializations per dataset (0: suite default)");
  benchmark->add_option("--seed", bench_seed, "Base seed")->capture_default_str();
  benchmark->add_option("--settings", settings, "Comma-separated primary setting values")->delimiter(',');
  benchmark->add_option("--k-sigma", secondary, "Comma-separated k_sigma values (em-vs-gd)")->delimiter(',');
  benchmark->add_option("--init", bench_init, "kmeans | random (default: per suite)");
  benchmark->add_option("--max-iter", bench_iter, "Iteration cap for every method")->capture_default_str();
  benchmark->add_option("--q", latent, "MFA latent dimension (highdim-np)")->capture_default_str();
  benchmark->add_option("--replicates", bench_reps, "Initializations per K (modelsel)")->capture_default_str();
  benchmark->add_option("--out", bench_out, "Aggregate CSV")->required();
  benchmark->add_option("--rows", bench_rows, "Per-fit CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) {
      const json spec = read_json_file(sim_config);
      const Dataset d = simulate_from_json(spec);
      write_csv_file(sim_out, d);
      json manifest{{"command", "simulate"}, {"spec", spec}, {"seed", spec.value("seed", json(nullptr))},
                    {"output", sim_out},     {"rows", d.size()}, {"columns", d.dim()}};
      write_json_file(sim_manifest.empty() ? sim_out + ".manifest.json" : sim_manifest, manifest);
      std::printf("wrote %d rows x %d columns to %s\n", d.size(), d.dim(), sim_out.c_str());
      return 0;
    }

    if (*fit) {
      const Dataset d = fit_data.load();
      const ModelKind kind = parse_model_kind(fit_opts.model);
      return kind == ModelKind::kGmm ? run_fit<GmmParams>(d, fit_data, fit_opts, fit_out)
                                     : run_fit<MfaParams>(d, fit_data, fit_opts, fit_out);
    }

    if (*select) {
      const Dataset d = sel_data.load();
      if (k_min > k_max) throw ConfigError("--k-min exceeds --k-max");
      SelectConfig c;
      c.optimizer = sel_opts.optimizer();
      c.replicates = replicates;
      c.init = parse_init_method(sel_opts.init);
      c.seed = sel_opts.seed;
      c.model = parse_model_kind(sel_opts.model);
      c.latent_dim = sel_opts.q;
      std::vector<int> ks;
      for (int k = k_min; k <= k_max; ++k) ks.push_back(k);
      const Selection s = select_k(d, ks, c);
      {
        auto out = open_output(sel_out);
        out << "k,ok,replicate,succeeded,mpkl,aic,bic,log_likelihood,klf,klb\n";
        for (const auto& r : s.rows) {
          auto num = [&](double v) { return r.ok ? format_double(v) : std::string(); };
          out << r.k << ',' << (r.ok ? 1 : 0) << ',' << r.replicate << ',' << r.succeeded << ',' << num(r.mpkl) << ','
              << num(r.aic) << ',' << num(r.bic) << ',' << num(r.log_likelihood) << ',' << num(r.klf) << ','
              << num(r.klb) << '\n';
        }
        if (!out) throw IoError("write failed for '" + sel_out + "'");
      }
      auto choice = [](const std::optional<int>& k) { return k ? json(*k) : json(nullptr); };
      json errors = json::object();
      for (const auto& r : s.rows)
        if (!r.ok) errors[std::to_string(r.k)] = r.error;
      json manifest{{"command", "select"},     {"data", sel_data.to_json()}, {"config", sel_opts.to_json()},
                    {"k_min", k_min},          {"k_max", k_max},             {"replicates", replicates},
                    {"by_mpkl", choice(s.by_mpkl)}, {"by_aic", choice(s.by_aic)}, {"by_bic", choice(s.by_bic)},
                    {"errors", errors},        {"table", sel_out}};
      write_json_file(sel_manifest.empty() ? sel_out + ".manifest.json" : sel_manifest, manifest);
      std::printf("K by MPKL=%s AIC=%s BIC=%s\n", choice(s.by_mpkl).dump().c_str(), choice(s.by_aic).dump().c_str(),
                  choice(s.by_bic).dump().c_str());
      return 0;
    }

    if (*surface) {
      const Dataset d = surf_data.load();
      const ObjectiveKind kind = parse_objective_kind(surf_opts.objective);
      PenaltyWeights w;
      w.w1 = surf_opts.w1;
      w.w2 = surf_opts.w2;
      w.w3 = surf_opts.w3;
      w.scale = parse_weight_scale(surf_opts.weight_scale);
      Eigen::MatrixXd s;
      if (parse_model_kind(surf_opts.model) == ModelKind::kGmm) {
        const auto t1 = params_from_report_file<GmmParams>(report1);
        if (kind == ObjectiveKind::kSiaHd) w.anchors = default_anchors(t1);
        s = loss_surface(d, t1, params_from_report_file<GmmParams>(report2), grid, kind, w);
      } else {
        const auto t1 = params_from_report_file<MfaParams>(report1);
        if (kind == ObjectiveKind::kSiaHd) w.anchors = default_anchors(t1);
        s = loss_surface(d, t1, params_from_report_file<MfaParams>(report2), grid, kind, w);
      }
      auto out = open_output(surf_out);
      write_surface_csv(out, s);
      if (!out) throw IoError("write failed for '" + surf_out + "'");
      return 0;
    }

    if (*benchmark) {
      BenchmarkConfig c;
      c.suite = suite;
      c.datasets = seeds;
      c.inits = inits;
      c.seed = bench_seed;
      c.settings = settings;
      c.secondary = secondary;
      if (!bench_init.empty()) c.init = parse_init_method(bench_init);
      c.optimizer.max_iter = bench_iter;
      c.em.max_iter = bench_iter;
      c.latent_dim = latent;
      c.replicates = bench_reps;
      const BenchmarkResult r = run_benchmark(c);
      std::ostringstream agg;
      write_benchmark_aggregates(agg, r);
      write_text_file(bench_out, agg.str());
      if (!bench_rows.empty()) {
        std::ostringstream rows;
        write_benchmark_rows(rows, r);
        write_text_file(bench_rows, rows.str());
      }
      std::printf("%zu fits, %zu aggregate rows written to %s\n", r.rows.size(), r.aggregates.size(), bench_out.c_str());
      return 0;
    }
  } catch (const IoError& e) {
    std::fprintf(stderr, "mixad: %s\n", e.what());
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "mixad: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mixad: %s\n", e.what());
    return 1;
  }
  return 0;
}
