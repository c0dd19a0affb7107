#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vimkit/dataset.hpp"
#include "vimkit/errors.hpp"
#include "vimkit/folds.hpp"
#include "vimkit/learners.hpp"
#include "vimkit/measures.hpp"
#include "vimkit/normal.hpp"
#include "vimkit/parallel.hpp"
#include "vimkit/rng.hpp"

namespace vimkit {

// An estimated predictiveness value with its influence-function material:
// per-observation influence values over the evaluation observations and
// their mean square (eta^2), which drives the Wald variance.
struct PredictivenessEstimate {
  double value = 0.0;
  Eigen::VectorXd eif_values;
  double eif_second_moment = 0.0;
};

// Point estimate, interval and test output for one feature group.
struct VimResult {
  double psi = 0.0;
  double std_error = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double ci_one_sided_lower = 0.0;
  std::optional<double> test_stat;
  std::optional<double> p_value;
  bool reject = false;
  bool test_valid = false;  // true only under sample splitting
  double beta = 0.0;
  double alpha = 0.05;
  std::size_t n_full = 0;
  std::size_t n_reduced = 0;
  std::vector<std::string> notes;

  // Display-only clamp of the point estimate at zero; never feeds the test
  // statistic or intervals, which would bias coverage.
  double psi_clamped() const { return psi < 0.0 ? 0.0 : psi; }
};

struct EstimationConfig {
  MeasureKind measure = MeasureKind::accuracy;
  int folds = 5;
  bool cross_fit = true;
  bool sample_split = true;
  double beta = 0.0;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  LearnerPtr learner;  // default: stack of {mean, glm} for the outcome kind
  FoldAssignMode fold_mode = FoldAssignMode::balanced;
  double split_fraction = 0.5;
  bool stratify_folds = false;
  MeasureOptions measure_options{};
  // Coarsened-data settings: inverse-weight truncation and the learner used
  // to regress fitted nuisance values onto the complement columns (default:
  // ordinary least squares).
  double propensity_truncation = 0.025;
  LearnerPtr reduction_learner;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (beta < 0.0) throw ConfigError("beta must be >= 0");
    if (folds < 2) throw ConfigError("fold count K must be >= 2");
  }
};

inline void check_measure_outcome(MeasureKind kind, const Dataset& d) {
  if (measure_requires_binary(kind) && d.outcome_kind != OutcomeKind::binary)
    throw ConfigError(std::string(measure_name(kind)) +
                      " requires a binary outcome");
}

namespace detail {

inline LearnerPtr resolve_learner(const EstimationConfig& cfg, const Dataset& d) {
  return cfg.learner ? cfg.learner : default_learner(d.outcome_kind);
}

struct MeasureEval {
  double value;
  Eigen::VectorXd phi;
};

// Value + influence values of one measure on one evaluation set, with the
// moments taken from that same set.
inline MeasureEval eval_with_eif(MeasureKind kind, const Eigen::VectorXd& mu,
                                 const Eigen::VectorXd& y, const MeasureOptions& opt) {
  const double v = kind == MeasureKind::accuracy
                       ? evaluate(kind, to_class_labels(mu), y, opt)
                       : evaluate(kind, mu, y, opt);
  return {v, eif(kind, mu, y, EmpiricalMoments::from(y), v, opt)};
}

inline FoldPlanOptions plan_options(const EstimationConfig& cfg, const Dataset& d,
                                    bool split) {
  FoldPlanOptions opt;
  opt.folds = cfg.folds;
  opt.sample_split = split;
  opt.seed = cfg.seed;
  opt.mode = cfg.fold_mode;
  opt.split_fraction = cfg.split_fraction;
  if (cfg.stratify_folds) opt.stratify_outcome = d.outcome;
  return opt;
}

}  // namespace detail

// K-fold cross-fitted predictiveness of the model class using all columns
// (drop = nullopt) or the complement of `drop`, over the observations of
// `half` in `plan`. Fold k's model is fitted on the other folds of the same
// half and evaluated on fold k; the value is the mean of the K fold values
// and the influence values are pooled in observation order.
inline PredictivenessEstimate crossfit_predictiveness(
    const Dataset& d, const std::optional<FeatureSet>& drop,
    const EstimationConfig& cfg, const FoldPlan& plan, int half) {
  d.validate();
  cfg.validate();
  check_measure_outcome(cfg.measure, d);
  if (drop) drop->validate_for(d.p());
  const LearnerPtr learner = detail::resolve_learner(cfg, d);

  const int K = plan.folds;
  std::vector<double> fold_values(static_cast<std::size_t>(K));
  std::vector<Eigen::VectorXd> fold_phis(static_cast<std::size_t>(K));
  std::vector<std::vector<int>> fold_members(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k)
    fold_members[static_cast<std::size_t>(k - 1)] = plan.fold_indices(half, k);

  parallel_for(static_cast<std::size_t>(K), [&](std::size_t ki) {
    const int k = static_cast<int>(ki) + 1;
    std::vector<int> train;
    for (int j = 1; j <= K; ++j) {
      if (j == k) continue;
      const auto& m = fold_members[static_cast<std::size_t>(j - 1)];
      train.insert(train.end(), m.begin(), m.end());
    }
    std::sort(train.begin(), train.end());
    const auto& eval_rows = fold_members[ki];
    const Dataset train_d = subset_rows(d, train);
    const std::uint64_t fit_seed =
        derive_seed(cfg.seed, 8000u + 100u * static_cast<std::uint64_t>(half) +
                                  static_cast<std::uint64_t>(k) * 2u +
                                  (drop ? 1u : 0u));
    const ModelPtr model = drop ? fit_reduced(*learner, train_d, *drop, fit_seed)
                                : learner->fit(train_d, fit_seed);

    Eigen::MatrixXd xe(static_cast<Eigen::Index>(eval_rows.size()), d.p());
    Eigen::VectorXd ye(static_cast<Eigen::Index>(eval_rows.size()));
    for (std::size_t i = 0; i < eval_rows.size(); ++i) {
      xe.row(static_cast<Eigen::Index>(i)) = d.features.row(eval_rows[i]);
      ye(static_cast<Eigen::Index>(i)) = d.outcome(eval_rows[i]);
    }
    try {
      const detail::MeasureEval ev =
          detail::eval_with_eif(cfg.measure, model->predict(xe), ye, cfg.measure_options);
      fold_values[ki] = ev.value;
      fold_phis[ki] = ev.phi;
    } catch (const DegeneracyError& e) {
      throw DegeneracyError("fold " + std::to_string(k) + " of half " +
                            std::to_string(half) + ": " + e.what());
    }
  });

  PredictivenessEstimate est;
  for (int k = 0; k < K; ++k) est.value += fold_values[static_cast<std::size_t>(k)];
  est.value /= static_cast<double>(K);

  // Pool influence values back into the half's observation order.
  const std::vector<int> half_rows = plan.half_indices(half);
  std::vector<double> by_row(plan.n(), 0.0);
  for (int k = 0; k < K; ++k) {
    const auto& members = fold_members[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < members.size(); ++i)
      by_row[static_cast<std::size_t>(members[i])] =
          fold_phis[static_cast<std::size_t>(k)](static_cast<Eigen::Index>(i));
  }
  est.eif_values.resize(static_cast<Eigen::Index>(half_rows.size()));
  for (std::size_t i = 0; i < half_rows.size(); ++i)
    est.eif_values(static_cast<Eigen::Index>(i)) =
        by_row[static_cast<std::size_t>(half_rows[i])];
  est.eif_second_moment = est.eif_values.squaredNorm() /
                          static_cast<double>(est.eif_values.size());
  return est;
}

inline PredictivenessEstimate crossfit_predictiveness(
    const Dataset& d, const std::optional<FeatureSet>& drop,
    const EstimationConfig& cfg) {
  const FoldPlan plan = make_fold_plan(static_cast<std::size_t>(d.n()),
                                       detail::plan_options(cfg, d, false));
  return crossfit_predictiveness(d, drop, cfg, plan, 1);
}

namespace detail {

inline void finish_wald(VimResult& r, double se, const EstimationConfig& cfg) {
  r.std_error = se;
  const double z_two = normal_quantile(1.0 - cfg.alpha / 2.0);
  const double z_one = normal_quantile(1.0 - cfg.alpha);
  r.ci_lower = r.psi - z_two * se;
  r.ci_upper = r.psi + z_two * se;
  r.ci_one_sided_lower = r.psi - z_one * se;
  r.beta = cfg.beta;
  r.alpha = cfg.alpha;
}

inline void note_no_split(VimResult& r) {
  r.notes.push_back(
      "sample splitting is off: the beta-null test is not valid when the "
      "true importance may be zero, so test fields are not populated");
}

}  // namespace detail

// Plug-in estimator: both prediction functions fitted on the full sample,
// contrast and influence functions evaluated on the same sample.
inline VimResult plugin_vim(const Dataset& d, const FeatureSet& s,
                            const EstimationConfig& cfg) {
  d.validate();
  cfg.validate();
  check_measure_outcome(cfg.measure, d);
  s.validate_for(d.p());
  const LearnerPtr learner = detail::resolve_learner(cfg, d);

  const ModelPtr full = learner->fit(d, derive_seed(cfg.seed, 1));
  const ModelPtr reduced = fit_reduced(*learner, d, s, derive_seed(cfg.seed, 2));
  const detail::MeasureEval ev_full = detail::eval_with_eif(
      cfg.measure, full->predict(d.features), d.outcome, cfg.measure_options);
  const detail::MeasureEval ev_red = detail::eval_with_eif(
      cfg.measure, reduced->predict(d.features), d.outcome, cfg.measure_options);

  VimResult r;
  r.psi = ev_full.value - ev_red.value;
  const double tau2 = (ev_full.phi - ev_red.phi).squaredNorm() /
                      static_cast<double>(d.n());
  detail::finish_wald(r, std::sqrt(tau2 / static_cast<double>(d.n())), cfg);
  r.n_full = r.n_reduced = static_cast<std::size_t>(d.n());
  detail::note_no_split(r);
  return r;
}

// Cross-fitted estimator: the full and reduced predictiveness are evaluated
// on the same folds and differenced within fold.
inline VimResult crossfit_vim(const Dataset& d, const FeatureSet& s,
                              const EstimationConfig& cfg) {
  d.validate();
  cfg.validate();
  s.validate_for(d.p());
  const FoldPlan plan = make_fold_plan(static_cast<std::size_t>(d.n()),
                                       detail::plan_options(cfg, d, false));
  const PredictivenessEstimate full =
      crossfit_predictiveness(d, std::nullopt, cfg, plan, 1);
  const PredictivenessEstimate red = crossfit_predictiveness(d, s, cfg, plan, 1);

  VimResult r;
  r.psi = full.value - red.value;
  const double tau2 = (full.eif_values - red.eif_values).squaredNorm() /
                      static_cast<double>(d.n());
  detail::finish_wald(r, std::sqrt(tau2 / static_cast<double>(d.n())), cfg);
  r.n_full = r.n_reduced = static_cast<std::size_t>(d.n());
  detail::note_no_split(r);
  return r;
}

// Sample-split cross-fitted test of the beta-null: the full-model
// predictiveness comes from half 1, the reduced-model predictiveness from the
// disjoint half 2, making the Wald statistic non-degenerate even at zero
// importance. omega = eta1^2/n1 + eta2^2/n2, t = (psi - beta)/sqrt(omega),
// p = 1 - Phi(t); rejection at p < alpha.
inline VimResult split_test_vim(const Dataset& d, const FeatureSet& s,
                                const EstimationConfig& cfg) {
  d.validate();
  cfg.validate();
  s.validate_for(d.p());
  const FoldPlan plan = make_fold_plan(static_cast<std::size_t>(d.n()),
                                       detail::plan_options(cfg, d, true));
  const PredictivenessEstimate full =
      crossfit_predictiveness(d, std::nullopt, cfg, plan, 1);
  const PredictivenessEstimate red = crossfit_predictiveness(d, s, cfg, plan, 2);
  const auto n1 = static_cast<double>(full.eif_values.size());
  const auto n2 = static_cast<double>(red.eif_values.size());

  VimResult r;
  r.psi = full.value - red.value;
  const double omega =
      full.eif_second_moment / n1 + red.eif_second_moment / n2;
  const double se = std::sqrt(omega);
  detail::finish_wald(r, se, cfg);
  const double shift = r.psi - cfg.beta;
  double t;
  if (se > 0.0)
    t = shift / se;
  else
    t = shift == 0.0 ? 0.0
                     : std::copysign(std::numeric_limits<double>::infinity(), shift);
  r.test_stat = t;
  r.p_value = 1.0 - normal_cdf(t);
  r.reject = *r.p_value < cfg.alpha;
  r.test_valid = true;
  r.n_full = static_cast<std::size_t>(n1);
  r.n_reduced = static_cast<std::size_t>(n2);
  return r;
}

// Routes on the (cross_fit, sample_split) flags.
inline VimResult estimate_vim(const Dataset& d, const FeatureSet& s,
                              const EstimationConfig& cfg) {
  cfg.validate();
  if (cfg.sample_split) {
    if (!cfg.cross_fit)
      throw ConfigError("sample splitting is implemented with cross-fitting; "
                        "enable cross_fit");
    return split_test_vim(d, s, cfg);
  }
  return cfg.cross_fit ? crossfit_vim(d, s, cfg) : plugin_vim(d, s, cfg);
}

}  // namespace vimkit
