// Fit results shared by EM and the gradient optimizers.

#pragma once

#include "mixad/dataset.hpp"
#include "mixad/mixture.hpp"
#include "mixad/penalty.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixad {

enum class Termination { kConverged, kMaxIter, kDegenerate };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::kConverged: return "converged";
    case Termination::kMaxIter: return "max-iter";
    case Termination::kDegenerate: return "degenerate";
  }
  return "max-iter";
}

inline Termination parse_termination(const std::string& s) {
  if (s == "converged") return Termination::kConverged;
  if (s == "max-iter") return Termination::kMaxIter;
  if (s == "degenerate") return Termination::kDegenerate;
  throw std::invalid_argument("unknown termination '" + s + "'");
}

// AIC = 2 p_e - 2 LL and BIC = p_e ln(n) - 2 LL, LL summed over points.
inline double aic(long free_parameters, double total_log_likelihood) {
  return 2.0 * static_cast<double>(free_parameters) - 2.0 * total_log_likelihood;
}

inline double bic(long free_parameters, double total_log_likelihood, double n) {
  return static_cast<double>(free_parameters) * std::log(n) - 2.0 * total_log_likelihood;
}

template <MixtureParameters P>
struct FitReport {
  P params;
  std::string method;  // "em", "adgd", "sia-step1", "sia-step2"
  ObjectiveKind objective = ObjectiveKind::kPlain;
  PenaltyWeights weights;
  std::vector<double> trace;  // active objective after each iteration
  double initial_objective = 0.0;
  double log_likelihood = 0.0;        // per-point average
  double total_log_likelihood = 0.0;  // summed over points
  double klf = 0.0;
  double klb = 0.0;
  double mpkl = 0.0;
  long free_parameters = 0;
  double aic = 0.0;
  double bic = 0.0;
  int n = 0;
  int iterations = 0;
  Termination termination = Termination::kMaxIter;
  std::string message;
  std::vector<int> assignments;
  double wall_seconds = 0.0;

  double final_objective() const { return trace.empty() ? initial_objective : trace.back(); }
};

// Fills the summary statistics from params and data.
template <MixtureParameters P>
void summarize(FitReport<P>& r, const Dataset& data) {
  r.n = data.size();
  r.log_likelihood = log_likelihood(r.params, data);
  r.total_log_likelihood = r.log_likelihood * static_cast<double>(data.size());
  const KlSummary kl = klf_klb(r.params);
  r.klf = kl.klf;
  r.klb = kl.klb;
  r.mpkl = kl.mpkl;
  r.free_parameters = free_parameter_count(r.params);
  r.aic = aic(r.free_parameters, r.total_log_likelihood);
  r.bic = bic(r.free_parameters, r.total_log_likelihood, static_cast<double>(data.size()));
  r.assignments = hard_assign(r.params, data);
}

}  // namespace mixad
