#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "vimkit/dataset.hpp"
#include "vimkit/errors.hpp"
#include "vimkit/folds.hpp"
#include "vimkit/rng.hpp"

namespace vimkit {

// A fitted conditional-mean estimator. Predictions are on the mean scale
// (probabilities for binary outcomes) and deterministic given the model.
class Model {
 public:
  virtual ~Model() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& features) const = 0;
  virtual bool converged() const { return true; }
};
using ModelPtr = std::shared_ptr<const Model>;

class Learner {
 public:
  virtual ~Learner() = default;
  virtual ModelPtr fit(const Dataset& d, std::uint64_t seed) const = 0;
  virtual std::string name() const = 0;
};
using LearnerPtr = std::shared_ptr<const Learner>;

inline double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace detail {

inline double log1pexp(double x) {  // log(1 + e^x) without overflow
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

class ConstantModel final : public Model {
 public:
  explicit ConstantModel(double value) : value_(value) {}
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    return Eigen::VectorXd::Constant(x.rows(), value_);
  }

 private:
  double value_;
};

// Intercept-first coefficient vector, optional logistic link. Predictions of
// the identity-link model are clipped to [0,1] when fitted to a binary
// outcome so they stay valid probability inputs downstream.
class GlmModel final : public Model {
 public:
  GlmModel(Eigen::VectorXd coef, bool logistic_link, bool clip01, bool converged)
      : coef_(std::move(coef)), logistic_(logistic_link), clip01_(clip01),
        converged_(converged) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    if (x.cols() + 1 != coef_.size())
      throw ConfigError("model expects " + std::to_string(coef_.size() - 1) +
                        " feature columns, got " + std::to_string(x.cols()));
    Eigen::VectorXd eta =
        (x * coef_.tail(coef_.size() - 1)).array() + coef_(0);
    if (logistic_)
      return eta.unaryExpr([](double e) { return expit(e); });
    if (clip01_) return eta.array().min(1.0).max(0.0);
    return eta;
  }
  bool converged() const override { return converged_; }
  const Eigen::VectorXd& coefficients() const { return coef_; }

 private:
  Eigen::VectorXd coef_;
  bool logistic_;
  bool clip01_;
  bool converged_;
};

struct Stump {
  int feature = -1;  // -1: constant adjustment in `left`
  double threshold = 0.0;
  double left = 0.0;  // applied where x(feature) <= threshold
  double right = 0.0;
};

class StumpModel final : public Model {
 public:
  StumpModel(double base_score, std::vector<Stump> stumps, bool logistic_link,
             Eigen::Index width)
      : base_(base_score), stumps_(std::move(stumps)), logistic_(logistic_link),
        width_(width) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    if (x.cols() != width_)
      throw ConfigError("model expects " + std::to_string(width_) +
                        " feature columns, got " + std::to_string(x.cols()));
    Eigen::VectorXd score = Eigen::VectorXd::Constant(x.rows(), base_);
    for (const Stump& s : stumps_) {
      if (s.feature < 0) {
        score.array() += s.left;
        continue;
      }
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        score(i) += x(i, s.feature) <= s.threshold ? s.left : s.right;
    }
    if (logistic_)
      return score.unaryExpr([](double e) { return expit(e); });
    return score;
  }

 private:
  double base_;
  std::vector<Stump> stumps_;
  bool logistic_;
  Eigen::Index width_;
};

// Least-squares stump on a residual vector; maximizes SL^2/nL + SR^2/nR over
// features and midpoint thresholds. Deterministic tie-break: first feature,
// lowest threshold.
inline Stump fit_stump(const Eigen::MatrixXd& x, const Eigen::VectorXd& r,
                       const std::vector<std::vector<Eigen::Index>>& sorted) {
  const auto n = static_cast<double>(x.rows());
  const double total = r.sum();
  Stump best;
  best.left = total / n;  // constant fallback
  double best_gain = total * total / n;
  for (int j = 0; j < x.cols(); ++j) {
    const auto& ord = sorted[static_cast<std::size_t>(j)];
    double sl = 0.0;
    for (std::size_t k = 0; k + 1 < ord.size(); ++k) {
      sl += r(ord[k]);
      const double a = x(ord[k], j), b = x(ord[k + 1], j);
      if (a == b) continue;
      const double nl = static_cast<double>(k + 1), nr = n - nl;
      const double sr = total - sl;
      const double gain = sl * sl / nl + sr * sr / nr;
      if (gain > best_gain) {
        best_gain = gain;
        best.feature = j;
        best.threshold = 0.5 * (a + b);
        best.left = sl / nl;
        best.right = sr / nr;
      }
    }
  }
  return best;
}

}  // namespace detail

// Predicts the marginal outcome mean everywhere.
inline ModelPtr fit_intercept_only(const Dataset& d) {
  d.validate();
  return std::make_shared<detail::ConstantModel>(d.outcome.mean());
}

// Logistic regression by iteratively reweighted least squares with a small
// ridge penalty (lambda = 1e-8) for conditioning. Under perfect separation
// the iteration walks toward the ridge solution and simply stops at max_iter
// with converged() false; that is not an error.
inline ModelPtr fit_logistic(const Dataset& d, int max_iter = 100, double tol = 1e-8) {
  d.validate();
  if (d.outcome_kind != OutcomeKind::binary)
    throw ConfigError("fit_logistic requires a binary outcome");
  if (d.n() <= d.p()) throw ConfigError("fit_logistic requires n > p");

  const double lambda = 1e-8;
  const Eigen::Index q = d.p() + 1;
  Eigen::MatrixXd z(d.n(), q);
  z.col(0).setOnes();
  z.rightCols(d.p()) = d.features;
  const Eigen::VectorXd& y = d.outcome;

  auto penalized_loglik = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = z * b;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i)
      ll += y(i) * eta(i) - detail::log1pexp(eta(i));
    return ll - 0.5 * lambda * b.squaredNorm();
  };

  Eigen::VectorXd b = Eigen::VectorXd::Zero(q);
  double ll = penalized_loglik(b);
  bool converged = false;
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd eta = z * b;
    const Eigen::VectorXd mu = eta.unaryExpr([](double e) { return expit(e); });
    const Eigen::VectorXd score = z.transpose() * (y - mu) - lambda * b;
    if (score.cwiseAbs().maxCoeff() < tol) {
      converged = true;
      break;
    }
    const Eigen::VectorXd w = (mu.array() * (1.0 - mu.array())).max(1e-10);
    Eigen::MatrixXd h = z.transpose() * w.asDiagonal() * z;
    h.diagonal().array() += lambda;
    const Eigen::VectorXd delta = h.ldlt().solve(score);
    // Step-halving guards against divergence; decreases within roundoff of
    // the current value are accepted so the quadratic phase is not stalled.
    const double ll_tol = 1e-10 * (std::abs(ll) + 1.0);
    double step = 1.0;
    Eigen::VectorXd b_new = b + delta;
    double ll_new = penalized_loglik(b_new);
    for (int h2 = 0; h2 < 30 && ll_new < ll - ll_tol; ++h2) {
      step *= 0.5;
      b_new = b + step * delta;
      ll_new = penalized_loglik(b_new);
    }
    b = b_new;
    ll = ll_new;
  }
  return std::make_shared<detail::GlmModel>(std::move(b), true, false, converged);
}

// Ordinary least squares with ridge lambda = 1e-8; always solvable.
inline ModelPtr fit_linear(const Dataset& d) {
  d.validate();
  if (d.n() <= d.p()) throw ConfigError("fit_linear requires n > p");
  const double lambda = 1e-8;
  const Eigen::Index q = d.p() + 1;
  Eigen::MatrixXd z(d.n(), q);
  z.col(0).setOnes();
  z.rightCols(d.p()) = d.features;
  Eigen::MatrixXd h = z.transpose() * z;
  h.diagonal().array() += lambda;
  Eigen::VectorXd b = h.ldlt().solve(z.transpose() * d.outcome);
  return std::make_shared<detail::GlmModel>(
      std::move(b), false, d.outcome_kind == OutcomeKind::binary, true);
}

// Gradient boosting with depth-1 stumps. Binary outcomes: additive logit
// score fitted to y - expit(score) gradients, predictions squashed through
// the logistic link. Continuous outcomes: plain residual fitting.
inline ModelPtr fit_boosted_stumps(const Dataset& d, int rounds = 200,
                                   double shrinkage = 0.1) {
  d.validate();
  if (d.n() < 10) throw ConfigError("fit_boosted_stumps requires n >= 10");
  if (rounds < 0 || shrinkage <= 0.0)
    throw ConfigError("fit_boosted_stumps requires rounds >= 0 and shrinkage > 0");
  if (rounds == 0) return fit_intercept_only(d);

  const bool binary = d.outcome_kind == OutcomeKind::binary;
  const double ybar = d.outcome.mean();
  const double base =
      binary ? std::log(std::max(ybar, 1e-10) / std::max(1.0 - ybar, 1e-10))
             : ybar;

  std::vector<std::vector<Eigen::Index>> sorted(static_cast<std::size_t>(d.p()));
  for (int j = 0; j < d.p(); ++j) {
    auto& ord = sorted[static_cast<std::size_t>(j)];
    ord.resize(static_cast<std::size_t>(d.n()));
    std::iota(ord.begin(), ord.end(), Eigen::Index{0});
    std::sort(ord.begin(), ord.end(), [&](Eigen::Index a, Eigen::Index b) {
      return d.features(a, j) < d.features(b, j);
    });
  }

  Eigen::VectorXd score = Eigen::VectorXd::Constant(d.n(), base);
  std::vector<detail::Stump> stumps;
  stumps.reserve(static_cast<std::size_t>(rounds));
  for (int m = 0; m < rounds; ++m) {
    Eigen::VectorXd grad(d.n());
    if (binary)
      grad = d.outcome - score.unaryExpr([](double e) { return expit(e); });
    else
      grad = d.outcome - score;
    detail::Stump s = detail::fit_stump(d.features, grad, sorted);
    s.left *= shrinkage;
    s.right *= shrinkage;
    if (s.feature < 0) {
      score.array() += s.left;
    } else {
      for (Eigen::Index i = 0; i < d.n(); ++i)
        score(i) += d.features(i, s.feature) <= s.threshold ? s.left : s.right;
    }
    stumps.push_back(s);
  }
  return std::make_shared<detail::StumpModel>(base, std::move(stumps), binary, d.p());
}

// ---------------------------------------------------------------------------
// Stacked ensemble

enum class StackLoss { log_likelihood, squared_error };

struct StackSpec {
  std::vector<LearnerPtr> base_learners;
  int inner_folds = 5;
  StackLoss loss = StackLoss::log_likelihood;
};

namespace detail {

// Euclidean projection onto the probability simplex.
inline Eigen::VectorXd project_to_simplex(Eigen::VectorXd v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    css += u[j];
    const double t = (css - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  return v.array().unaryExpr([theta](double x) { return std::max(x - theta, 0.0); });
}

class StackModel final : public Model {
 public:
  StackModel(std::vector<ModelPtr> models, Eigen::VectorXd weights, bool clip01,
             double inner_cv_loss, std::vector<double> vertex_losses,
             std::vector<std::string> warnings)
      : models_(std::move(models)), weights_(std::move(weights)), clip01_(clip01),
        inner_cv_loss_(inner_cv_loss), vertex_losses_(std::move(vertex_losses)),
        warnings_(std::move(warnings)) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    for (std::size_t l = 0; l < models_.size(); ++l)
      if (models_[l] && weights_(static_cast<Eigen::Index>(l)) != 0.0)
        out += weights_(static_cast<Eigen::Index>(l)) * models_[l]->predict(x);
    if (clip01_) return out.array().min(1.0).max(0.0);
    return out;
  }

  const Eigen::VectorXd& weights() const { return weights_; }
  double inner_cv_loss() const { return inner_cv_loss_; }
  const std::vector<double>& vertex_losses() const { return vertex_losses_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::vector<ModelPtr> models_;
  Eigen::VectorXd weights_;
  bool clip01_;
  double inner_cv_loss_;
  std::vector<double> vertex_losses_;
  std::vector<std::string> warnings_;
};

}  // namespace detail

// Convex stack: inner-CV predictions per base learner, simplex weights by
// projected gradient (fixed budget of 200 iterations with backtracking, then
// compared against every vertex), base learners refit on all data. A base
// learner that throws anywhere gets weight zero and a warning; the stack
// proceeds while at least one learner survives.
inline ModelPtr fit_stack(const StackSpec& spec, const Dataset& d, std::uint64_t seed) {
  d.validate();
  if (spec.base_learners.empty()) throw ConfigError("stack needs at least one base learner");
  if (spec.inner_folds < 2) throw ConfigError("stack inner folds must be >= 2");
  if (d.n() < 5 * spec.inner_folds)
    throw ConfigError("stack requires n >= 5 * inner_folds");
  if (spec.loss == StackLoss::log_likelihood && d.outcome_kind != OutcomeKind::binary)
    throw ConfigError("log-likelihood stack loss requires a binary outcome");

  const auto L = spec.base_learners.size();
  const FoldPlan plan =
      make_fold_plan(static_cast<std::size_t>(d.n()), spec.inner_folds, false,
                     derive_seed(seed, 0x696E6E6572ULL));

  Eigen::MatrixXd z(d.n(), static_cast<Eigen::Index>(L));
  std::vector<bool> alive(L, true);
  std::vector<std::string> warnings;
  for (std::size_t l = 0; l < L; ++l) {
    try {
      for (int k = 1; k <= spec.inner_folds; ++k) {
        std::vector<int> train, eval;
        for (std::size_t i = 0; i < plan.n(); ++i)
          (plan.fold_assignment[i] == k ? eval : train).push_back(static_cast<int>(i));
        const ModelPtr m = spec.base_learners[l]->fit(
            subset_rows(d, train), derive_seed(seed, 100 * (l + 1) + static_cast<std::size_t>(k)));
        Eigen::MatrixXd xe(static_cast<Eigen::Index>(eval.size()), d.p());
        for (std::size_t i = 0; i < eval.size(); ++i) xe.row(static_cast<Eigen::Index>(i)) = d.features.row(eval[i]);
        const Eigen::VectorXd pred = m->predict(xe);
        for (std::size_t i = 0; i < eval.size(); ++i)
          z(eval[i], static_cast<Eigen::Index>(l)) = pred(static_cast<Eigen::Index>(i));
      }
    } catch (const std::exception& e) {
      alive[l] = false;
      warnings.push_back("base learner '" + spec.base_learners[l]->name() +
                         "' failed and was dropped: " + e.what());
    }
  }

  std::vector<std::size_t> survivors;
  for (std::size_t l = 0; l < L; ++l)
    if (alive[l]) survivors.push_back(l);
  if (survivors.empty())
    throw DegeneracyError("all stack base learners failed");

  const Eigen::VectorXd& y = d.outcome;
  auto loss_of = [&](const Eigen::VectorXd& w) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      double q = 0.0;
      for (std::size_t sidx = 0; sidx < survivors.size(); ++sidx)
        q += w(static_cast<Eigen::Index>(sidx)) * z(i, static_cast<Eigen::Index>(survivors[sidx]));
      if (spec.loss == StackLoss::log_likelihood) {
        q = std::min(std::max(q, 1e-6), 1.0 - 1e-6);
        total -= y(i) * std::log(q) + (1.0 - y(i)) * std::log(1.0 - q);
      } else {
        total += (y(i) - q) * (y(i) - q);
      }
    }
    return total / static_cast<double>(d.n());
  };
  auto grad_of = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      double q = 0.0;
      for (std::size_t sidx = 0; sidx < survivors.size(); ++sidx)
        q += w(static_cast<Eigen::Index>(sidx)) * z(i, static_cast<Eigen::Index>(survivors[sidx]));
      double dq;
      if (spec.loss == StackLoss::log_likelihood) {
        q = std::min(std::max(q, 1e-6), 1.0 - 1e-6);
        dq = -(y(i) / q - (1.0 - y(i)) / (1.0 - q));
      } else {
        dq = -2.0 * (y(i) - q);
      }
      for (std::size_t sidx = 0; sidx < survivors.size(); ++sidx)
        g(static_cast<Eigen::Index>(sidx)) += dq * z(i, static_cast<Eigen::Index>(survivors[sidx]));
    }
    return Eigen::VectorXd(g / static_cast<double>(d.n()));
  };

  const auto ns = static_cast<Eigen::Index>(survivors.size());
  Eigen::VectorXd w = Eigen::VectorXd::Constant(ns, 1.0 / static_cast<double>(ns));
  double current = loss_of(w);
  const double improve_tol = 1e-10 * (std::abs(current) + 1.0);
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::VectorXd g = grad_of(w);
    double step = 1.0;
    bool improved = false;
    for (int h = 0; h < 20; ++h) {
      const Eigen::VectorXd cand = detail::project_to_simplex(w - step * g);
      const double cand_loss = loss_of(cand);
      if (cand_loss < current - improve_tol) {
        w = cand;
        current = cand_loss;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }

  // The simplex optimum can be no worse than any vertex; guarantee it.
  std::vector<double> vertex_losses(ns);
  for (Eigen::Index sidx = 0; sidx < ns; ++sidx) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(ns);
    e(sidx) = 1.0;
    vertex_losses[static_cast<std::size_t>(sidx)] = loss_of(e);
    if (vertex_losses[static_cast<std::size_t>(sidx)] < current) {
      current = vertex_losses[static_cast<std::size_t>(sidx)];
      w = e;
    }
  }

  std::vector<ModelPtr> models(L);
  Eigen::VectorXd full_weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(L));
  for (std::size_t sidx = 0; sidx < survivors.size(); ++sidx) {
    const std::size_t l = survivors[sidx];
    models[l] = spec.base_learners[l]->fit(d, derive_seed(seed, 9000 + l));
    full_weights(static_cast<Eigen::Index>(l)) = w(static_cast<Eigen::Index>(sidx));
  }
  return std::make_shared<detail::StackModel>(
      std::move(models), std::move(full_weights),
      d.outcome_kind == OutcomeKind::binary, current, std::move(vertex_losses),
      std::move(warnings));
}

namespace detail {

// Fitted on the complement columns; accepts full-width rows and drops the
// excluded columns before delegating, so by construction its predictions
// cannot depend on them.
class ReducedModel final : public Model {
 public:
  ReducedModel(ModelPtr inner, FeatureSet excluded)
      : inner_(std::move(inner)), excluded_(std::move(excluded)) {}
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    return inner_->predict(drop_columns(x, excluded_));
  }
  bool converged() const override { return inner_->converged(); }

 private:
  ModelPtr inner_;
  FeatureSet excluded_;
};

}  // namespace detail

inline ModelPtr fit_reduced(const Learner& learner, const Dataset& d,
                            const FeatureSet& s, std::uint64_t seed) {
  return std::make_shared<detail::ReducedModel>(
      learner.fit(complement_columns(d, s), seed), s);
}

// ---------------------------------------------------------------------------
// Learner wrappers

namespace detail {

template <typename Fit>
class FnLearner final : public Learner {
 public:
  FnLearner(std::string name, Fit fit) : name_(std::move(name)), fit_(std::move(fit)) {}
  ModelPtr fit(const Dataset& d, std::uint64_t seed) const override { return fit_(d, seed); }
  std::string name() const override { return name_; }

 private:
  std::string name_;
  Fit fit_;
};

template <typename Fit>
LearnerPtr make_learner(std::string name, Fit fit) {
  return std::make_shared<FnLearner<Fit>>(std::move(name), std::move(fit));
}

}  // namespace detail

inline LearnerPtr make_intercept_learner() {
  return detail::make_learner("mean", [](const Dataset& d, std::uint64_t) {
    return fit_intercept_only(d);
  });
}

inline LearnerPtr make_logistic_learner(int max_iter = 100, double tol = 1e-8) {
  return detail::make_learner("logistic", [=](const Dataset& d, std::uint64_t) {
    return fit_logistic(d, max_iter, tol);
  });
}

inline LearnerPtr make_linear_learner() {
  return detail::make_learner("linear", [](const Dataset& d, std::uint64_t) {
    return fit_linear(d);
  });
}

inline LearnerPtr make_boosted_stumps_learner(int rounds = 200, double shrinkage = 0.1) {
  return detail::make_learner("stumps", [=](const Dataset& d, std::uint64_t) {
    return fit_boosted_stumps(d, rounds, shrinkage);
  });
}

inline LearnerPtr make_stack_learner(StackSpec spec) {
  std::string name = "stack(";
  for (std::size_t l = 0; l < spec.base_learners.size(); ++l) {
    if (l) name += ",";
    name += spec.base_learners[l]->name();
  }
  name += ")";
  return detail::make_learner(
      name, [spec = std::move(spec)](const Dataset& d, std::uint64_t seed) {
        return fit_stack(spec, d, seed);
      });
}

// Sample mean + the matching generalized linear model, stacked.
inline LearnerPtr default_learner(OutcomeKind kind) {
  StackSpec spec;
  spec.base_learners.push_back(make_intercept_learner());
  if (kind == OutcomeKind::binary) {
    spec.base_learners.push_back(make_logistic_learner());
    spec.loss = StackLoss::log_likelihood;
  } else {
    spec.base_learners.push_back(make_linear_learner());
    spec.loss = StackLoss::squared_error;
  }
  return make_stack_learner(std::move(spec));
}

}  // namespace vimkit
