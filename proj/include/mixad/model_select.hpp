// AIC/BIC from fit reports and the MPKL sweep over candidate K.

#pragma once

#include "mixad/concurrency.hpp"
#include "mixad/dataset.hpp"
#include "mixad/optimize.hpp"
#include "mixad/report.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixad {

template <MixtureParameters P>
double aic(const FitReport<P>& r) {
  return aic(r.free_parameters, r.total_log_likelihood);
}

template <MixtureParameters P>
double bic(const FitReport<P>& r, double n) {
  return bic(r.free_parameters, r.total_log_likelihood, n);
}

struct SelectConfig {
  OptimizerConfig optimizer = [] {
    OptimizerConfig c;
    c.objective = ObjectiveKind::kSia;
    return c;
  }();
  int replicates = 5;
  InitMethod init = InitMethod::kKmeans;
  std::uint64_t seed = 0;
  ModelKind model = ModelKind::kGmm;
  int latent_dim = 1;  // MFA only
  int workers = worker_count();

  void validate() const {
    optimizer.validate();
    if (optimizer.objective == ObjectiveKind::kPlain) throw std::invalid_argument("selection needs sia or sia-hd");
    if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  }
};

// Seed of replicate r for candidate k.
inline std::uint64_t replicate_seed(std::uint64_t seed, int k, int r) {
  return seed + 1000003ULL * static_cast<std::uint64_t>(k) + static_cast<std::uint64_t>(r);
}

struct SelectionRow {
  int k = 0;
  bool ok = false;
  int replicate = -1;  // replicate with the lowest AIC
  int succeeded = 0;
  double mpkl = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  double log_likelihood = 0.0;
  double klf = 0.0;
  double klb = 0.0;
  std::string error;  // first failure when no replicate succeeded
};

struct Selection {
  std::vector<SelectionRow> rows;
  std::optional<int> by_mpkl;
  std::optional<int> by_aic;
  std::optional<int> by_bic;
};

namespace detail {

struct ReplicateOutcome {
  bool ok = false;
  double mpkl = 0.0, aic = 0.0, bic = 0.0, ll = 0.0, klf = 0.0, klb = 0.0;
  std::string error;
};

template <MixtureParameters P>
ReplicateOutcome outcome_of(const FitReport<P>& r) {
  ReplicateOutcome o;
  o.ok = true;
  o.mpkl = r.mpkl;
  o.aic = r.aic;
  o.bic = r.bic;
  o.ll = r.log_likelihood;
  o.klf = r.klf;
  o.klb = r.klb;
  return o;
}

// argmin over successful rows, ties toward the smaller K (rows are sorted).
template <class Key>
std::optional<int> argmin_k(const std::vector<SelectionRow>& rows, Key key) {
  std::optional<int> best;
  double value = std::numeric_limits<double>::infinity();
  for (const auto& row : rows) {
    if (row.ok && key(row) < value) {
      value = key(row);
      best = row.k;
    }
  }
  return best;
}

}  // namespace detail

// Runs `replicates` SIA fits per K. For each K the replicate with the lowest
// Step II AIC supplies MPKL, AIC and BIC. K failing on every replicate is
// kept as a row with ok = false and skipped by the choices.
inline Selection select_k(const Dataset& data, std::vector<int> ks, const SelectConfig& config) {
  config.validate();
  data.validate();
  if (ks.empty()) throw std::invalid_argument("empty K range");
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.front() < 2) throw std::invalid_argument("MPKL needs K >= 2");

  const int reps = config.replicates;
  std::vector<detail::ReplicateOutcome> outcomes(ks.size() * static_cast<std::size_t>(reps));
  parallel_for(
      static_cast<int>(outcomes.size()),
      [&](int job) {
        const int k = ks[job / reps];
        const int r = job % reps;
        const std::uint64_t seed = replicate_seed(config.seed, k, r);
        try {
          if (config.model == ModelKind::kGmm) {
            outcomes[job] = detail::outcome_of(sia_fit(data, init_gmm(data, k, config.init, seed), config.optimizer).step2);
          } else {
            const MfaParams init = init_mfa(data, k, config.latent_dim, config.init, seed);
            outcomes[job] = detail::outcome_of(sia_fit(data, init, config.optimizer).step2);
          }
        } catch (const std::exception& e) {
          outcomes[job].error = e.what();
        }
      },
      config.workers);

  Selection out;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    SelectionRow row;
    row.k = ks[i];
    for (int r = 0; r < reps; ++r) {
      const auto& o = outcomes[i * reps + r];
      if (!o.ok) {
        if (row.error.empty()) row.error = o.error;
        continue;
      }
      ++row.succeeded;
      if (!row.ok || o.aic < row.aic) {
        row.ok = true;
        row.replicate = r;
        row.mpkl = o.mpkl;
        row.aic = o.aic;
        row.bic = o.bic;
        row.log_likelihood = o.ll;
        row.klf = o.klf;
        row.klb = o.klb;
      }
    }
    if (row.ok) row.error.clear();
    out.rows.push_back(row);
  }
  out.by_mpkl = detail::argmin_k(out.rows, [](const SelectionRow& r) { return r.mpkl; });
  out.by_aic = detail::argmin_k(out.rows, [](const SelectionRow& r) { return r.aic; });
  out.by_bic = detail::argmin_k(out.rows, [](const SelectionRow& r) { return r.bic; });
  return out;
}

}  // namespace mixad
