#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "vimkit/dataset.hpp"
#include "vimkit/errors.hpp"

namespace vimkit {

// The four predictiveness measures. R-squared accepts continuous or binary
// outcomes; the other three require binary outcomes.
enum class MeasureKind { r_squared, deviance, accuracy, auc };

inline const char* measure_name(MeasureKind k) {
  switch (k) {
    case MeasureKind::r_squared: return "r_squared";
    case MeasureKind::deviance: return "deviance";
    case MeasureKind::accuracy: return "accuracy";
    case MeasureKind::auc: return "auc";
  }
  return "?";
}

inline bool measure_requires_binary(MeasureKind k) {
  return k != MeasureKind::r_squared;
}

struct MeasureOptions {
  // Probabilities are clipped to [gamma, 1 - gamma] before entering the
  // deviance log-likelihood.
  double deviance_clip = 1e-3;
  // Strict-inequality AUC (ties score 0 instead of 1/2); a constant predictor
  // then scores 0 rather than 0.5.
  bool auc_strict_ties = false;
};

// Marginal outcome moments of an evaluation set, with the V-statistic
// convention of divisor n for the variance. entropy_denom is NaN when the
// outcome prevalence is degenerate.
struct EmpiricalMoments {
  double mean_y = 0.0;
  double var_y = 0.0;
  double prob_y1 = 0.0;
  double entropy_denom = std::numeric_limits<double>::quiet_NaN();

  static EmpiricalMoments from(const Eigen::VectorXd& y) {
    EmpiricalMoments m;
    m.mean_y = y.mean();
    m.var_y = (y.array() - m.mean_y).square().mean();
    m.prob_y1 = m.mean_y;
    if (m.prob_y1 > 0.0 && m.prob_y1 < 1.0)
      m.entropy_denom = m.prob_y1 * std::log(m.prob_y1) +
                        (1.0 - m.prob_y1) * std::log(1.0 - m.prob_y1);
    return m;
  }
};

// Bayes decision for a binary outcome: I{mu > 1/2}, ties to class 0.
inline Eigen::VectorXd to_class_labels(const Eigen::VectorXd& mu) {
  return (mu.array() > 0.5).cast<double>();
}

namespace detail {

inline void check_eval_inputs(const Eigen::VectorXd& f, const Eigen::VectorXd& y) {
  if (f.size() != y.size()) throw ConfigError("predictions and outcomes differ in length");
  if (f.size() < 2) throw ConfigError("measure evaluation needs at least 2 observations");
  if (!f.allFinite() || !y.allFinite())
    throw ConfigError("measure evaluation inputs must be finite");
}

inline void check_binary_outcomes(const Eigen::VectorXd& y, const char* what) {
  if (!is_zero_one(y)) throw ConfigError(std::string(what) + " requires a {0,1} outcome");
}

inline Eigen::VectorXd clip(const Eigen::VectorXd& f, double lo, double hi) {
  return f.array().min(hi).max(lo);
}

// Sorted tie-group sweep shared by the AUC value and its influence function.
// Calls visit(first, last, pos_below, neg_below, pos_in, neg_in) per group,
// where [first, last) indexes the sorted order.
template <typename Visit>
void auc_tie_groups(const Eigen::VectorXd& f, const Eigen::VectorXd& y, Visit visit) {
  const Eigen::Index n = f.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return f(a) < f(b); });

  double pos_below = 0.0, neg_below = 0.0;
  std::size_t first = 0;
  while (first < order.size()) {
    std::size_t last = first;
    double pos_in = 0.0, neg_in = 0.0;
    while (last < order.size() && f(order[last]) == f(order[first])) {
      (y(order[last]) == 1.0 ? pos_in : neg_in) += 1.0;
      ++last;
    }
    visit(order, first, last, pos_below, neg_below, pos_in, neg_in);
    pos_below += pos_in;
    neg_below += neg_in;
    first = last;
  }
}

}  // namespace detail

// Empirical predictiveness V(f, P_n).
//
//   r_squared: 1 - sum(y - f)^2 / sum(y - ybar)^2
//   deviance:  1 - mean(y log ft + (1-y) log(1-ft)) / entropy_denom,
//              ft = clip(f, gamma, 1-gamma)
//   accuracy:  mean I{y = f}, f must be 0/1 labels
//   auc:       Mann-Whitney with ties scoring 1/2 (strict mode: 0)
inline double evaluate(MeasureKind kind, const Eigen::VectorXd& predictions,
                       const Eigen::VectorXd& outcomes,
                       const MeasureOptions& opt = {}) {
  detail::check_eval_inputs(predictions, outcomes);
  const Eigen::Index n = outcomes.size();

  switch (kind) {
    case MeasureKind::r_squared: {
      const double ybar = outcomes.mean();
      const double denom = (outcomes.array() - ybar).square().sum();
      if (denom == 0.0)
        throw DegeneracyError("r_squared undefined: outcome variance is zero");
      const double sse = (outcomes - predictions).squaredNorm();
      return 1.0 - sse / denom;
    }

    case MeasureKind::deviance: {
      detail::check_binary_outcomes(outcomes, "deviance");
      if ((predictions.array() < 0.0).any() || (predictions.array() > 1.0).any())
        throw ConfigError("deviance requires probability predictions in [0, 1]");
      const EmpiricalMoments m = EmpiricalMoments::from(outcomes);
      if (!(m.prob_y1 > 0.0 && m.prob_y1 < 1.0))
        throw DegeneracyError("deviance undefined: outcomes are all one class");
      const double g = opt.deviance_clip;
      const Eigen::VectorXd ft = detail::clip(predictions, g, 1.0 - g);
      const double loglik =
          (outcomes.array() * ft.array().log() +
           (1.0 - outcomes.array()) * (1.0 - ft.array()).log())
              .mean();
      return 1.0 - loglik / m.entropy_denom;
    }

    case MeasureKind::accuracy: {
      detail::check_binary_outcomes(outcomes, "accuracy");
      if (!is_zero_one(predictions))
        throw ConfigError("accuracy requires 0/1 class-label predictions");
      // Index-order accumulation; the coarsened no-missingness reduction is
      // required to reproduce this sum bit for bit.
      double hits = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        hits += predictions(i) == outcomes(i) ? 1.0 : 0.0;
      return hits / static_cast<double>(n);
    }

    case MeasureKind::auc: {
      detail::check_binary_outcomes(outcomes, "auc");
      const double n1 = outcomes.sum();
      const double n0 = static_cast<double>(n) - n1;
      if (n1 == 0.0 || n0 == 0.0)
        throw DegeneracyError("auc undefined: outcomes contain a single class");
      // Rank sweep; all per-group contributions are half-integers, so the
      // result matches the exhaustive pairwise double loop exactly.
      double concordant = 0.0;
      detail::auc_tie_groups(
          predictions, outcomes,
          [&](const std::vector<Eigen::Index>&, std::size_t, std::size_t,
              double, double neg_below, double pos_in, double neg_in) {
            concordant += pos_in * neg_below;
            if (!opt.auc_strict_ties) concordant += 0.5 * pos_in * neg_in;
          });
      return concordant / (n0 * n1);
    }
  }
  throw ConfigError("unknown measure");
}

// Influence function of the empirical predictiveness, evaluated at each
// observation of the evaluation set. `mu_predictions` are conditional-mean
// scale values; the accuracy formula thresholds them at 1/2 internally. `v`
// must be the measure value already computed on the same inputs, and
// `moments` the same set's outcome moments, so that the returned vector is
// exactly centered.
//
// r_squared and the deviance are ratios of two linear functionals of P; their
// influence functions follow from the quotient rule, e.g. for r_squared
//   phi(z) = [ -(y - mu(x))^2 + (1 - v) (y - ybar)^2 ] / var(y).
// Accuracy is linear in P:
//   phi(z) = I{y = I(mu(x) > 1/2)} - v.
// The AUC is a degree-2 V-statistic over a normalizer; the two conditional
// exceedance probabilities are estimated by within-set empirical proportions
// over the opposite outcome class, ties counting 1/2:
//   phi(z) = (1-y) A(x) / (1-pi) + y B(x) / pi
//            - v [ 2 + (1 - 2 pi)(y - pi) / {pi (1 - pi)} ],
//   A(x) = Pn{mu(X) > mu(x) | Y = 1},  B(x) = Pn{mu(x) > mu(X) | Y = 0}.
inline Eigen::VectorXd eif(MeasureKind kind, const Eigen::VectorXd& mu_predictions,
                           const Eigen::VectorXd& outcomes,
                           const EmpiricalMoments& moments, double v,
                           const MeasureOptions& opt = {}) {
  detail::check_eval_inputs(mu_predictions, outcomes);
  const Eigen::Index n = outcomes.size();
  Eigen::VectorXd phi(n);

  switch (kind) {
    case MeasureKind::r_squared: {
      if (moments.var_y <= 0.0)
        throw DegeneracyError("r_squared influence function undefined: zero outcome variance");
      const double one_minus_v = 1.0 - v;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double res = outcomes(i) - mu_predictions(i);
        const double dev = outcomes(i) - moments.mean_y;
        phi(i) = (-res * res + one_minus_v * dev * dev) / moments.var_y;
      }
      return phi;
    }

    case MeasureKind::deviance: {
      detail::check_binary_outcomes(outcomes, "deviance");
      if (!(moments.prob_y1 > 0.0 && moments.prob_y1 < 1.0) ||
          !std::isfinite(moments.entropy_denom))
        throw DegeneracyError("deviance influence function undefined: degenerate prevalence");
      const double g = opt.deviance_clip;
      const Eigen::VectorXd ft = detail::clip(mu_predictions, g, 1.0 - g);
      const double pi = moments.prob_y1;
      const double denom = moments.entropy_denom;
      const double mean_loglik = (1.0 - v) * denom;
      const double logit_pi = std::log(pi / (1.0 - pi));
      for (Eigen::Index i = 0; i < n; ++i) {
        const double ll = outcomes(i) * std::log(ft(i)) +
                          (1.0 - outcomes(i)) * std::log(1.0 - ft(i));
        phi(i) = (-(ll - mean_loglik) +
                  (1.0 - v) * (outcomes(i) - pi) * logit_pi) /
                 denom;
      }
      return phi;
    }

    case MeasureKind::accuracy: {
      detail::check_binary_outcomes(outcomes, "accuracy");
      for (Eigen::Index i = 0; i < n; ++i) {
        const double label = mu_predictions(i) > 0.5 ? 1.0 : 0.0;
        phi(i) = (outcomes(i) == label ? 1.0 : 0.0) - v;
      }
      return phi;
    }

    case MeasureKind::auc: {
      detail::check_binary_outcomes(outcomes, "auc");
      const double pi = moments.prob_y1;
      if (!(pi > 0.0 && pi < 1.0))
        throw DegeneracyError("auc influence function undefined: outcomes contain a single class");
      const double n1 = pi * static_cast<double>(n);
      const double n0 = static_cast<double>(n) - n1;
      const double tie = opt.auc_strict_ties ? 0.0 : 0.5;
      Eigen::VectorXd exceed_pos(n);  // A(x): positives scored above f(x)
      Eigen::VectorXd below_neg(n);   // B(x): negatives scored below f(x)
      detail::auc_tie_groups(
          mu_predictions, outcomes,
          [&](const std::vector<Eigen::Index>& order, std::size_t first,
              std::size_t last, double pos_below, double neg_below,
              double pos_in, double neg_in) {
            const double a = (n1 - pos_below - pos_in + tie * pos_in) / n1;
            const double b = (neg_below + tie * neg_in) / n0;
            for (std::size_t k = first; k < last; ++k) {
              exceed_pos(order[k]) = a;
              below_neg(order[k]) = b;
            }
          });
      const double skew = (1.0 - 2.0 * pi) / (pi * (1.0 - pi));
      for (Eigen::Index i = 0; i < n; ++i)
        phi(i) = (1.0 - outcomes(i)) * exceed_pos(i) / (1.0 - pi) +
                 outcomes(i) * below_neg(i) / pi -
                 v * (2.0 + skew * (outcomes(i) - pi));
      return phi;
    }
  }
  throw ConfigError("unknown measure");
}

}  // namespace vimkit
