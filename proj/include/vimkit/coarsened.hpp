#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vimkit/dataset.hpp"
#include "vimkit/errors.hpp"
#include "vimkit/estimators.hpp"
#include "vimkit/folds.hpp"
#include "vimkit/learners.hpp"
#include "vimkit/normal.hpp"

namespace vimkit {

// Observed-data unit (X, A, Y) for the mean-outcome-under-a-rule measure.
struct TreatmentDataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd treatment;
  Eigen::VectorXd outcome;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index p() const { return features.cols(); }

  void validate() const {
    if (features.rows() < 1 || features.cols() < 1)
      throw DataError("treatment dataset requires n >= 1 and p >= 1");
    if (treatment.size() != features.rows() || outcome.size() != features.rows())
      throw DataError("treatment/outcome length does not match feature rows");
    if (!is_zero_one(treatment)) throw DataError("treatment must take values in {0, 1}");
    if (!features.allFinite() || !outcome.allFinite())
      throw DataError("treatment dataset contains non-finite values");
  }
};

// Observed-data unit (X, Delta, U) with U = Delta * Y for classification
// accuracy under outcome missingness.
struct MissingnessDataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd observed;        // Delta
  Eigen::VectorXd masked_outcome;  // U

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index p() const { return features.cols(); }

  void validate() const {
    if (features.rows() < 1 || features.cols() < 1)
      throw DataError("missingness dataset requires n >= 1 and p >= 1");
    if (observed.size() != features.rows() || masked_outcome.size() != features.rows())
      throw DataError("indicator/outcome length does not match feature rows");
    if (!is_zero_one(observed)) throw DataError("missingness indicator must take values in {0, 1}");
    for (Eigen::Index i = 0; i < observed.size(); ++i)
      if (observed(i) == 0.0 && masked_outcome(i) != 0.0)
        throw DataError("masked outcome must be 0 where the indicator is 0");
    if (observed.sum() == 0.0)
      throw DegeneracyError("all outcomes are missing");
    if (!features.allFinite() || !masked_outcome.allFinite())
      throw DataError("missingness dataset contains non-finite values");
  }
};

inline TreatmentDataset subset_rows(const TreatmentDataset& d, const std::vector<int>& rows) {
  TreatmentDataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), d.p());
  out.treatment.resize(static_cast<Eigen::Index>(rows.size()));
  out.outcome.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = d.features.row(rows[i]);
    out.treatment(static_cast<Eigen::Index>(i)) = d.treatment(rows[i]);
    out.outcome(static_cast<Eigen::Index>(i)) = d.outcome(rows[i]);
  }
  return out;
}

inline MissingnessDataset subset_rows(const MissingnessDataset& d, const std::vector<int>& rows) {
  MissingnessDataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), d.p());
  out.observed.resize(static_cast<Eigen::Index>(rows.size()));
  out.masked_outcome.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = d.features.row(rows[i]);
    out.observed(static_cast<Eigen::Index>(i)) = d.observed(rows[i]);
    out.masked_outcome(static_cast<Eigen::Index>(i)) = d.masked_outcome(rows[i]);
  }
  return out;
}

// Per-observation nuisance predictions, aligned with the dataset rows. The
// fitting helpers below clip the propensity at the truncation level; values
// supplied directly are used verbatim.
struct RuleNuisance {
  Eigen::VectorXd outcome_treated;  // Q(1, x_i)
  Eigen::VectorXd outcome_control;  // Q(0, x_i)
  Eigen::VectorXd propensity;       // P(A = 1 | x_i)
  double truncation = 0.025;
};

struct MissingnessNuisance {
  Eigen::VectorXd outcome_prob;  // pi(x_i) = P(Y = 1 | Delta = 1, X = x_i)
  Eigen::VectorXd obs_prob;      // g(x_i) = P(Delta = 1 | X = x_i)
  double truncation = 0.025;
};

struct CoarsenedDiagnostics {
  double truncated_fraction = 0.0;  // propensities at a truncation bound
  bool positivity_warning = false;  // truncated_fraction > 5%
  double near_tie_fraction = 0.0;   // |Q(1,x) - Q(0,x)| < 0.01 (rule value only)
  bool near_tie_warning = false;
};

namespace detail {

// Cross-fits `learner` over `plan` folds or fits once on the whole sample;
// returns predictions for every row of each target matrix (all aligned with
// train_all's rows). A single fit per fold serves every target, so e.g. both
// treatment arms come from the same fitted outcome regression.
inline std::vector<Eigen::VectorXd> fitted_values(
    const Learner& learner, const Dataset& train_all,
    const std::vector<const Eigen::MatrixXd*>& targets, std::uint64_t seed,
    const FoldPlan* plan, const std::vector<int>* train_rows_of = nullptr) {
  std::vector<Eigen::VectorXd> out(targets.size());
  if (!plan) {
    ModelPtr m;
    if (train_rows_of) {
      std::vector<int> usable;
      for (std::size_t i = 0; i < train_rows_of->size(); ++i)
        if ((*train_rows_of)[i]) usable.push_back(static_cast<int>(i));
      if (usable.empty()) throw DegeneracyError("no usable training rows");
      m = learner.fit(subset_rows(train_all, usable), seed);
    } else {
      m = learner.fit(train_all, seed);
    }
    for (std::size_t t = 0; t < targets.size(); ++t) out[t] = m->predict(*targets[t]);
    return out;
  }
  for (std::size_t t = 0; t < targets.size(); ++t)
    out[t].resize(targets[t]->rows());
  for (int k = 1; k <= plan->folds; ++k) {
    std::vector<int> train, eval;
    for (std::size_t i = 0; i < plan->n(); ++i)
      (plan->fold_assignment[i] == k ? eval : train).push_back(static_cast<int>(i));
    // Optional row filter for the training side (e.g. complete cases only).
    std::vector<int> usable;
    if (train_rows_of) {
      for (const int i : train)
        if ((*train_rows_of)[static_cast<std::size_t>(i)]) usable.push_back(i);
    } else {
      usable = train;
    }
    if (usable.empty())
      throw DegeneracyError("fold " + std::to_string(k) + ": no usable training rows");
    const ModelPtr m = learner.fit(subset_rows(train_all, usable),
                                   derive_seed(seed, static_cast<std::uint64_t>(k)));
    for (std::size_t t = 0; t < targets.size(); ++t) {
      Eigen::MatrixXd xe(static_cast<Eigen::Index>(eval.size()), targets[t]->cols());
      for (std::size_t i = 0; i < eval.size(); ++i)
        xe.row(static_cast<Eigen::Index>(i)) = targets[t]->row(eval[i]);
      const Eigen::VectorXd pred = m->predict(xe);
      for (std::size_t i = 0; i < eval.size(); ++i)
        out[t](eval[i]) = pred(static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

inline Eigen::VectorXd fitted_values(const Learner& learner, const Dataset& train_all,
                                     const Eigen::MatrixXd& features,
                                     std::uint64_t seed, const FoldPlan* plan,
                                     const std::vector<int>* train_rows_of = nullptr) {
  return fitted_values(learner, train_all, std::vector<const Eigen::MatrixXd*>{&features},
                       seed, plan, train_rows_of)[0];
}

}  // namespace detail

// Fits Q(a, x) by regressing Y on [A | X] and the propensity by regressing A
// on X, optionally cross-fitted over `plan` (which must cover d's rows).
// Propensity predictions are clipped to [truncation, 1 - truncation]: both
// treatment arms inverse-weight, so both tails need protection.
inline RuleNuisance fit_rule_nuisance(const TreatmentDataset& d,
                                      const Learner& outcome_learner,
                                      const Learner& propensity_learner,
                                      std::uint64_t seed, double truncation = 0.025,
                                      const FoldPlan* plan = nullptr) {
  d.validate();
  if (!(truncation > 0.0 && truncation < 0.5))
    throw ConfigError("propensity truncation must lie in (0, 0.5)");
  const double treated = d.treatment.sum();
  if (treated == 0.0 || treated == static_cast<double>(d.n()))
    throw DegeneracyError("one treatment arm absent: cannot fit outcome/propensity nuisances");

  Eigen::MatrixXd az(d.n(), d.p() + 1);
  az.col(0) = d.treatment;
  az.rightCols(d.p()) = d.features;
  Dataset outcome_d = make_dataset(az, d.outcome);

  Eigen::MatrixXd x1 = az, x0 = az;
  x1.col(0).setOnes();
  x0.col(0).setZero();

  RuleNuisance nuis;
  nuis.truncation = truncation;
  // Same folds drive Q and g; each observation's predictions come from the
  // models not trained on its fold.
  auto arms = detail::fitted_values(outcome_learner, outcome_d,
                                    std::vector<const Eigen::MatrixXd*>{&x1, &x0},
                                    derive_seed(seed, 11), plan);
  nuis.outcome_treated = std::move(arms[0]);
  nuis.outcome_control = std::move(arms[1]);
  Dataset prop_d{d.features, d.treatment, OutcomeKind::binary};
  nuis.propensity = detail::fitted_values(propensity_learner, prop_d, d.features,
                                          derive_seed(seed, 13), plan)
                        .array()
                        .min(1.0 - truncation)
                        .max(truncation);
  return nuis;
}

// Fits pi(x) on complete cases and g(x) on all rows. Only small g breaks the
// inverse weights here, so g is clipped from below only; g identically 1
// (no missingness) passes through exactly.
inline MissingnessNuisance fit_missingness_nuisance(const MissingnessDataset& d,
                                                    const Learner& outcome_learner,
                                                    const Learner& propensity_learner,
                                                    std::uint64_t seed,
                                                    double truncation = 0.025,
                                                    const FoldPlan* plan = nullptr) {
  d.validate();
  if (!(truncation > 0.0 && truncation < 0.5))
    throw ConfigError("propensity truncation must lie in (0, 0.5)");

  std::vector<int> complete;
  std::vector<int> is_complete(static_cast<std::size_t>(d.n()), 0);
  for (Eigen::Index i = 0; i < d.n(); ++i)
    if (d.observed(i) == 1.0) {
      complete.push_back(static_cast<int>(i));
      is_complete[static_cast<std::size_t>(i)] = 1;
    }

  if (complete.empty()) throw DegeneracyError("all outcomes are missing");
  MissingnessNuisance nuis;
  nuis.truncation = truncation;
  const Dataset all{d.features, d.masked_outcome,
                    is_zero_one(d.masked_outcome) ? OutcomeKind::binary
                                                  : OutcomeKind::continuous};
  nuis.outcome_prob = detail::fitted_values(outcome_learner, all, d.features,
                                            derive_seed(seed, 21), plan, &is_complete);
  Dataset obs_d{d.features, d.observed, OutcomeKind::binary};
  nuis.obs_prob = detail::fitted_values(propensity_learner, obs_d, d.features,
                                        derive_seed(seed, 23), plan)
                      .array()
                      .max(truncation);
  return nuis;
}

// Treatment rule implied by the outcome regressions: treat iff Q(1,x) > Q(0,x)
// (ties assign control).
inline Eigen::VectorXd treatment_rule(const RuleNuisance& nuis) {
  return (nuis.outcome_treated.array() > nuis.outcome_control.array()).cast<double>();
}

// Reduced rule: each arm's fitted values are regressed onto the complement
// columns (pseudo-outcome regression) and the rule is recomputed from the
// reduced regressions. Pseudo-outcomes can leave [0,1], so reduced
// predictions are clipped back when the outcome is binary.
inline Eigen::VectorXd reduced_treatment_rule(const TreatmentDataset& d,
                                              const RuleNuisance& nuis,
                                              const FeatureSet& s,
                                              const Learner& regression_learner,
                                              std::uint64_t seed,
                                              const FoldPlan* plan = nullptr) {
  d.validate();
  s.validate_for(d.p());
  const Eigen::MatrixXd xr = drop_columns(d.features, s);
  if (xr.cols() == 0) throw ConfigError("reduced rule: feature set covers all columns");
  const bool binary_outcome = is_zero_one(d.outcome);
  auto reduce = [&](const Eigen::VectorXd& pseudo, std::uint64_t salt) {
    Dataset pd{xr, pseudo, OutcomeKind::continuous};
    Eigen::VectorXd fitted = detail::fitted_values(regression_learner, pd, xr,
                                                   derive_seed(seed, salt), plan);
    if (binary_outcome) fitted = fitted.array().min(1.0).max(0.0);
    return fitted;
  };
  const Eigen::VectorXd q1 = reduce(nuis.outcome_treated, 31);
  const Eigen::VectorXd q0 = reduce(nuis.outcome_control, 32);
  return (q1.array() > q0.array()).cast<double>();
}

// One-step debiased estimate of the mean outcome under `rule`:
//   mean_i [ I{A_i = f(X_i)} / g(f(X_i), X_i) * {Y_i - Q(f(X_i), X_i)}
//            + Q(f(X_i), X_i) ].
// The influence values are the centered summands, so they average to zero by
// construction.
inline PredictivenessEstimate onestep_rule_value(const TreatmentDataset& d,
                                                 const RuleNuisance& nuis,
                                                 const Eigen::VectorXd& rule,
                                                 CoarsenedDiagnostics* diag = nullptr) {
  d.validate();
  const Eigen::Index n = d.n();
  if (nuis.outcome_treated.size() != n || nuis.outcome_control.size() != n ||
      nuis.propensity.size() != n || rule.size() != n)
    throw ConfigError("nuisance/rule vectors must align with the dataset rows");
  if (!is_zero_one(rule)) throw ConfigError("treatment rule must be 0/1");

  Eigen::VectorXd integrand(n);
  double truncated = 0.0, near_tie = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool treat = rule(i) == 1.0;
    const double q = treat ? nuis.outcome_treated(i) : nuis.outcome_control(i);
    const double g_rule = treat ? nuis.propensity(i) : 1.0 - nuis.propensity(i);
    if (g_rule <= 0.0)
      throw DegeneracyError("propensity of the assigned arm is zero at row " +
                            std::to_string(i));
    const double w = d.treatment(i) == rule(i) ? 1.0 / g_rule : 0.0;
    integrand(i) = w * (d.outcome(i) - q) + q;
    if (nuis.propensity(i) <= nuis.truncation ||
        nuis.propensity(i) >= 1.0 - nuis.truncation)
      truncated += 1.0;
    if (std::abs(nuis.outcome_treated(i) - nuis.outcome_control(i)) < 0.01)
      near_tie += 1.0;
  }

  PredictivenessEstimate est;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) sum += integrand(i);
  est.value = sum / static_cast<double>(n);
  est.eif_values = integrand.array() - est.value;
  est.eif_second_moment =
      est.eif_values.squaredNorm() / static_cast<double>(n);

  if (diag) {
    diag->truncated_fraction = truncated / static_cast<double>(n);
    diag->positivity_warning = diag->truncated_fraction > 0.05;
    diag->near_tie_fraction = near_tie / static_cast<double>(n);
    diag->near_tie_warning = diag->near_tie_fraction > 0.05;
  }
  return est;
}

inline PredictivenessEstimate onestep_rule_value(const TreatmentDataset& d,
                                                 const RuleNuisance& nuis,
                                                 CoarsenedDiagnostics* diag = nullptr) {
  return onestep_rule_value(d, nuis, treatment_rule(nuis), diag);
}

// Classification rule implied by pi: predict 1 iff pi(x) > 1/2 (ties to 0).
inline Eigen::VectorXd classification_rule(const MissingnessNuisance& nuis) {
  return (nuis.outcome_prob.array() > 0.5).cast<double>();
}

inline Eigen::VectorXd reduced_classification_rule(const MissingnessDataset& d,
                                                   const MissingnessNuisance& nuis,
                                                   const FeatureSet& s,
                                                   const Learner& regression_learner,
                                                   std::uint64_t seed,
                                                   const FoldPlan* plan = nullptr) {
  d.validate();
  s.validate_for(d.p());
  const Eigen::MatrixXd xr = drop_columns(d.features, s);
  if (xr.cols() == 0) throw ConfigError("reduced rule: feature set covers all columns");
  Dataset pd{xr, nuis.outcome_prob, OutcomeKind::continuous};
  Eigen::VectorXd fitted = detail::fitted_values(regression_learner, pd, xr,
                                                 derive_seed(seed, 41), plan);
  fitted = fitted.array().min(1.0).max(0.0);
  return (fitted.array() > 0.5).cast<double>();
}

// One-step debiased estimate of classification accuracy under outcome
// missingness:
//   mean_i [ Delta_i / g(X_i) * {I(U_i = f(X_i)) - Q(X_i)} + Q(X_i) ],
//   Q(x) = f(x) pi(x) + (1 - f(x))(1 - pi(x)).
// With no missingness and g = 1 this telescopes to the plain empirical
// accuracy, summed in the same index order as the accuracy measure.
inline PredictivenessEstimate onestep_accuracy_missing(
    const MissingnessDataset& d, const MissingnessNuisance& nuis,
    const Eigen::VectorXd& rule, CoarsenedDiagnostics* diag = nullptr) {
  d.validate();
  const Eigen::Index n = d.n();
  if (nuis.outcome_prob.size() != n || nuis.obs_prob.size() != n || rule.size() != n)
    throw ConfigError("nuisance/rule vectors must align with the dataset rows");
  if (!is_zero_one(rule)) throw ConfigError("classification rule must be 0/1");

  Eigen::VectorXd integrand(n);
  double truncated = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double g = nuis.obs_prob(i);
    if (g <= 0.0)
      throw DegeneracyError("observation probability is zero at row " + std::to_string(i));
    const double q = rule(i) == 1.0 ? nuis.outcome_prob(i) : 1.0 - nuis.outcome_prob(i);
    const double hit = d.masked_outcome(i) == rule(i) ? 1.0 : 0.0;
    integrand(i) = d.observed(i) / g * (hit - q) + q;
    if (g <= nuis.truncation) truncated += 1.0;
  }

  PredictivenessEstimate est;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) sum += integrand(i);
  est.value = sum / static_cast<double>(n);
  est.eif_values = integrand.array() - est.value;
  est.eif_second_moment =
      est.eif_values.squaredNorm() / static_cast<double>(n);

  if (diag) {
    diag->truncated_fraction = truncated / static_cast<double>(n);
    diag->positivity_warning = diag->truncated_fraction > 0.05;
  }
  return est;
}

inline PredictivenessEstimate onestep_accuracy_missing(
    const MissingnessDataset& d, const MissingnessNuisance& nuis,
    CoarsenedDiagnostics* diag = nullptr) {
  return onestep_accuracy_missing(d, nuis, classification_rule(nuis), diag);
}

// Contrast of two one-step estimates with the split-test arithmetic. The
// halves must be disjoint for the beta-null test to be valid; callers that
// evaluated both estimates on the same observations must say so and are
// refused.
inline VimResult coarsened_vim(const PredictivenessEstimate& full,
                               const PredictivenessEstimate& reduced, double beta,
                               double alpha, std::size_t n_full,
                               std::size_t n_reduced, bool disjoint_halves) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (beta < 0.0) throw ConfigError("beta must be >= 0");
  if (!disjoint_halves)
    throw ConfigError("beta-null testing requires the full and reduced estimates "
                      "to come from disjoint halves");
  if (n_full == 0 || n_reduced == 0) throw ConfigError("half sizes must be positive");

  VimResult r;
  r.psi = full.value - reduced.value;
  const double omega = full.eif_second_moment / static_cast<double>(n_full) +
                       reduced.eif_second_moment / static_cast<double>(n_reduced);
  const double se = std::sqrt(omega);
  r.std_error = se;
  const double z_two = normal_quantile(1.0 - alpha / 2.0);
  const double z_one = normal_quantile(1.0 - alpha);
  r.ci_lower = r.psi - z_two * se;
  r.ci_upper = r.psi + z_two * se;
  r.ci_one_sided_lower = r.psi - z_one * se;
  const double shift = r.psi - beta;
  double t;
  if (se > 0.0)
    t = shift / se;
  else
    t = shift == 0.0 ? 0.0
                     : std::copysign(std::numeric_limits<double>::infinity(), shift);
  r.test_stat = t;
  r.p_value = 1.0 - normal_cdf(t);
  r.reject = *r.p_value < alpha;
  r.test_valid = true;
  r.beta = beta;
  r.alpha = alpha;
  r.n_full = n_full;
  r.n_reduced = n_reduced;
  return r;
}

namespace detail {

inline void append_diag_notes(VimResult& r, const CoarsenedDiagnostics& diag,
                              const char* which) {
  if (diag.positivity_warning)
    r.notes.push_back(std::string(which) + ": positivity warning, " +
                      std::to_string(100.0 * diag.truncated_fraction) +
                      "% of propensity predictions at the truncation bound");
  if (diag.near_tie_warning)
    r.notes.push_back(std::string(which) + ": " +
                      std::to_string(100.0 * diag.near_tie_fraction) +
                      "% of |Q(1,x) - Q(0,x)| below 0.01; the rule value may be "
                      "nearly non-differentiable");
}

// Same-sample contrast of two one-step estimates (no test; the variance uses
// the pooled difference of the aligned influence values).
inline VimResult coarsened_contrast(const PredictivenessEstimate& full,
                                    const PredictivenessEstimate& reduced,
                                    const EstimationConfig& cfg, std::size_t n) {
  VimResult r;
  r.psi = full.value - reduced.value;
  const double tau2 = (full.eif_values - reduced.eif_values).squaredNorm() /
                      static_cast<double>(n);
  finish_wald(r, std::sqrt(tau2 / static_cast<double>(n)), cfg);
  r.n_full = r.n_reduced = n;
  note_no_split(r);
  return r;
}

inline LearnerPtr coarsened_outcome_learner(const EstimationConfig& cfg,
                                            const Eigen::VectorXd& outcome) {
  if (cfg.learner) return cfg.learner;
  return default_learner(is_zero_one(outcome) ? OutcomeKind::binary
                                              : OutcomeKind::continuous);
}

inline LearnerPtr coarsened_reduction_learner(const EstimationConfig& cfg) {
  return cfg.reduction_learner ? cfg.reduction_learner : make_linear_learner();
}

}  // namespace detail

// Full pipeline for the rule-value measure: nuisances (cross-fit when
// configured), the full and reduced one-step estimates, and the contrast.
// With sample splitting the full estimate comes from half 1 and the reduced
// estimate from half 2, exactly as in the fully observed case.
inline VimResult coarsened_rule_vim(const TreatmentDataset& d, const FeatureSet& s,
                                    const EstimationConfig& cfg) {
  d.validate();
  cfg.validate();
  s.validate_for(d.p());
  const LearnerPtr outcome_learner = detail::coarsened_outcome_learner(cfg, d.outcome);
  const LearnerPtr propensity_learner = make_logistic_learner();
  const LearnerPtr reduction_learner = detail::coarsened_reduction_learner(cfg);
  const auto n = static_cast<std::size_t>(d.n());

  auto estimate_half = [&](const TreatmentDataset& half, bool reduced,
                           std::uint64_t salt, CoarsenedDiagnostics& diag) {
    std::optional<FoldPlan> plan;
    if (cfg.cross_fit)
      plan = make_fold_plan(static_cast<std::size_t>(half.n()), cfg.folds, false,
                            derive_seed(cfg.seed, salt));
    const FoldPlan* plan_ptr = plan ? &*plan : nullptr;
    const RuleNuisance nuis =
        fit_rule_nuisance(half, *outcome_learner, *propensity_learner,
                          derive_seed(cfg.seed, salt + 1), cfg.propensity_truncation,
                          plan_ptr);
    if (!reduced) return onestep_rule_value(half, nuis, &diag);
    const Eigen::VectorXd rule = reduced_treatment_rule(
        half, nuis, s, *reduction_learner, derive_seed(cfg.seed, salt + 2), plan_ptr);
    return onestep_rule_value(half, nuis, rule, &diag);
  };

  CoarsenedDiagnostics diag_full, diag_red;
  VimResult r;
  if (cfg.sample_split) {
    FoldPlanOptions opt;
    opt.folds = cfg.folds;
    opt.sample_split = true;
    opt.seed = cfg.seed;
    opt.mode = cfg.fold_mode;
    opt.split_fraction = cfg.split_fraction;
    const FoldPlan split = make_fold_plan(n, opt);
    const TreatmentDataset d1 = subset_rows(d, split.half_indices(1));
    const TreatmentDataset d2 = subset_rows(d, split.half_indices(2));
    const PredictivenessEstimate full = estimate_half(d1, false, 0xA10, diag_full);
    const PredictivenessEstimate red = estimate_half(d2, true, 0xA20, diag_red);
    r = coarsened_vim(full, red, cfg.beta, cfg.alpha,
                      static_cast<std::size_t>(d1.n()),
                      static_cast<std::size_t>(d2.n()), true);
  } else {
    const PredictivenessEstimate full = estimate_half(d, false, 0xA10, diag_full);
    const PredictivenessEstimate red = estimate_half(d, true, 0xA10, diag_red);
    r = detail::coarsened_contrast(full, red, cfg, n);
  }
  detail::append_diag_notes(r, diag_full, "full model");
  detail::append_diag_notes(r, diag_red, "reduced model");
  return r;
}

// Same pipeline for classification accuracy under outcome missingness.
inline VimResult coarsened_missing_vim(const MissingnessDataset& d,
                                       const FeatureSet& s,
                                       const EstimationConfig& cfg) {
  d.validate();
  cfg.validate();
  s.validate_for(d.p());
  const LearnerPtr outcome_learner = detail::coarsened_outcome_learner(cfg, d.masked_outcome);
  const LearnerPtr propensity_learner = make_logistic_learner();
  const LearnerPtr reduction_learner = detail::coarsened_reduction_learner(cfg);
  const auto n = static_cast<std::size_t>(d.n());

  auto estimate_half = [&](const MissingnessDataset& half, bool reduced,
                           std::uint64_t salt, CoarsenedDiagnostics& diag) {
    std::optional<FoldPlan> plan;
    if (cfg.cross_fit)
      plan = make_fold_plan(static_cast<std::size_t>(half.n()), cfg.folds, false,
                            derive_seed(cfg.seed, salt));
    const FoldPlan* plan_ptr = plan ? &*plan : nullptr;
    const MissingnessNuisance nuis = fit_missingness_nuisance(
        half, *outcome_learner, *propensity_learner, derive_seed(cfg.seed, salt + 1),
        cfg.propensity_truncation, plan_ptr);
    if (!reduced) return onestep_accuracy_missing(half, nuis, &diag);
    const Eigen::VectorXd rule = reduced_classification_rule(
        half, nuis, s, *reduction_learner, derive_seed(cfg.seed, salt + 2), plan_ptr);
    return onestep_accuracy_missing(half, nuis, rule, &diag);
  };

  CoarsenedDiagnostics diag_full, diag_red;
  VimResult r;
  if (cfg.sample_split) {
    FoldPlanOptions opt;
    opt.folds = cfg.folds;
    opt.sample_split = true;
    opt.seed = cfg.seed;
    opt.mode = cfg.fold_mode;
    opt.split_fraction = cfg.split_fraction;
    const FoldPlan split = make_fold_plan(n, opt);
    const MissingnessDataset d1 = subset_rows(d, split.half_indices(1));
    const MissingnessDataset d2 = subset_rows(d, split.half_indices(2));
    const PredictivenessEstimate full = estimate_half(d1, false, 0xB10, diag_full);
    const PredictivenessEstimate red = estimate_half(d2, true, 0xB20, diag_red);
    r = coarsened_vim(full, red, cfg.beta, cfg.alpha,
                      static_cast<std::size_t>(d1.n()),
                      static_cast<std::size_t>(d2.n()), true);
  } else {
    const PredictivenessEstimate full = estimate_half(d, false, 0xB10, diag_full);
    const PredictivenessEstimate red = estimate_half(d, true, 0xB10, diag_red);
    r = detail::coarsened_contrast(full, red, cfg, n);
  }
  detail::append_diag_notes(r, diag_full, "full model");
  detail::append_diag_notes(r, diag_red, "reduced model");
  return r;
}

}  // namespace vimkit
