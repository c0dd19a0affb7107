#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <vector>

#include "vimkit/learners.hpp"
#include "vimkit/measures.hpp"
#include "vimkit/rng.hpp"
#include "vimkit/simulation.hpp"

using namespace vimkit;
using Catch::Approx;

namespace {

Dataset tiny(std::initializer_list<double> xs, std::initializer_list<double> ys) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::VectorXd y(static_cast<Eigen::Index>(ys.size()));
  Eigen::Index i = 0;
  for (double v : xs) x(i++, 0) = v;
  i = 0;
  for (double v : ys) y(i++) = v;
  return make_dataset(x, y);
}

// A learner that always throws, for exercising the stack's failure path.
class FailingLearner final : public Learner {
 public:
  ModelPtr fit(const Dataset&, std::uint64_t) const override {
    throw std::runtime_error("deliberate failure");
  }
  std::string name() const override { return "failing"; }
};

double slope_of(const Model& m, double x0 = 0.0, double x1 = 1.0) {
  Eigen::MatrixXd grid(2, 1);
  grid << x0, x1;
  const Eigen::VectorXd p = m.predict(grid);
  return (p(1) - p(0)) / (x1 - x0);
}

}  // namespace

TEST_CASE("intercept-only predicts the outcome mean") {
  REQUIRE(fit_intercept_only(tiny({1, 2, 3}, {0, 1, 1}))
              ->predict(Eigen::MatrixXd::Constant(1, 1, 9.0))(0) == Approx(2.0 / 3.0));
  REQUIRE(fit_intercept_only(tiny({1, 2}, {1, 1}))
              ->predict(Eigen::MatrixXd::Constant(1, 1, -4.0))(0) == Approx(1.0));
  REQUIRE(fit_intercept_only(tiny({1, 2}, {0.2, 0.8}))
              ->predict(Eigen::MatrixXd::Constant(1, 1, 0.0))(0) == Approx(0.5));
}

TEST_CASE("logistic regression finds the symmetric zero solution") {
  const Dataset d = tiny({1, 1, 2, 2}, {0, 1, 0, 1});
  const ModelPtr m = fit_logistic(d);
  Eigen::MatrixXd grid(2, 1);
  grid << 1.0, 2.0;
  const Eigen::VectorXd p = m->predict(grid);
  REQUIRE(p(0) == Approx(0.5).margin(1e-6));
  REQUIRE(p(1) == Approx(0.5).margin(1e-6));
}

TEST_CASE("logistic regression on constant features predicts the prevalence") {
  const Dataset d = tiny({3, 3, 3, 3, 3}, {1, 0, 1, 1, 0});
  const Eigen::VectorXd p =
      fit_logistic(d)->predict(Eigen::MatrixXd::Constant(1, 1, 3.0));
  REQUIRE(p(0) == Approx(0.6).margin(1e-6));
}

TEST_CASE("logistic regression recovers the scenario-2 posterior") {
  const SimScenario sc = scenario(2);
  const Dataset d = generate(sc, 100000, 314);
  const ModelPtr m = fit_logistic(d);
  const Eigen::VectorXd fitted = m->predict(d.features);
  double mae = 0.0;
  for (Eigen::Index i = 0; i < d.n(); ++i)
    mae += std::abs(fitted(i) - oracle_mu(sc, d.features(i, 0), d.features(i, 1)));
  mae /= static_cast<double>(d.n());
  REQUIRE(mae <= 0.01);
  REQUIRE(m->converged());
}

TEST_CASE("least squares recovers exact linear structure") {
  Eigen::MatrixXd x(6, 1);
  x << -2, -1, 0, 1, 2, 3;
  const Dataset d{x, 2.0 * x.col(0), OutcomeKind::continuous};
  REQUIRE(slope_of(*fit_linear(d)) == Approx(2.0).margin(1e-6));

  const Dataset flat{x, Eigen::VectorXd::Constant(6, 1.7), OutcomeKind::continuous};
  const ModelPtr m = fit_linear(flat);
  REQUIRE(slope_of(*m) == Approx(0.0).margin(1e-6));
  REQUIRE(m->predict(Eigen::MatrixXd::Zero(1, 1))(0) == Approx(1.7).margin(1e-6));
}

TEST_CASE("least squares residuals are orthogonal to the design") {
  CounterRng rng(21);
  Eigen::MatrixXd x(50, 3);
  Eigen::VectorXd y(50);
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.next_normal();
    y(i) = 1.0 + x(i, 0) - 2.0 * x(i, 1) + 0.5 * rng.next_normal();
  }
  const Dataset d{x, y, OutcomeKind::continuous};
  const Eigen::VectorXd r = y - fit_linear(d)->predict(x);
  REQUIRE((x.transpose() * r).cwiseAbs().maxCoeff() <= 1e-6 * 50);
  REQUIRE(std::abs(r.sum()) <= 1e-6 * 50);  // intercept column too
}

TEST_CASE("boosting with zero rounds collapses to the intercept model") {
  CounterRng rng(22);
  Eigen::MatrixXd x(20, 2);
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) {
    x(i, 0) = rng.next_normal();
    x(i, 1) = rng.next_normal();
    y(i) = rng.next_double() < 0.4 ? 1.0 : 0.0;
  }
  const Dataset d = make_dataset(x, y);
  const Eigen::VectorXd a = fit_boosted_stumps(d, 0, 0.1)->predict(x);
  const Eigen::VectorXd b = fit_intercept_only(d)->predict(x);
  REQUIRE(a == b);  // bitwise: rounds = 0 is the intercept fit
}

TEST_CASE("boosted stumps learn a noiseless threshold") {
  CounterRng rng(23);
  Eigen::MatrixXd x(500, 2);
  Eigen::VectorXd y(500);
  for (int i = 0; i < 500; ++i) {
    x(i, 0) = rng.next_normal();
    x(i, 1) = rng.next_normal();
    y(i) = x(i, 0) > 0.0 ? 1.0 : 0.0;
  }
  const Dataset d = make_dataset(x, y);
  const Eigen::VectorXd p = fit_boosted_stumps(d, 100, 0.1)->predict(x);
  double correct = 0.0;
  for (int i = 0; i < 500; ++i)
    correct += ((p(i) > 0.5 ? 1.0 : 0.0) == y(i)) ? 1.0 : 0.0;
  REQUIRE(correct / 500.0 >= 0.98);
}

TEST_CASE("boosted stump predictions are monotone on monotone data") {
  Eigen::MatrixXd x(40, 1);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = static_cast<double>(i) / 4.0;
    y(i) = std::tanh(x(i, 0) - 5.0);  // increasing
  }
  const Dataset d{x, y, OutcomeKind::continuous};
  const ModelPtr m = fit_boosted_stumps(d, 150, 0.1);
  Eigen::MatrixXd grid(101, 1);
  for (int i = 0; i <= 100; ++i) grid(i, 0) = static_cast<double>(i) / 10.0;
  const Eigen::VectorXd p = m->predict(grid);
  for (int i = 1; i <= 100; ++i) REQUIRE(p(i) >= p(i - 1) - 1e-12);
}

TEST_CASE("binary-outcome predictions stay inside the unit interval") {
  CounterRng rng(24);
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::MatrixXd x(60, 2);
    Eigen::VectorXd y(60);
    for (int i = 0; i < 60; ++i) {
      x(i, 0) = rng.next_normal() * 3.0;
      x(i, 1) = rng.next_normal();
      y(i) = rng.next_double() < expit(2.0 * x(i, 0)) ? 1.0 : 0.0;
    }
    y(0) = 0.0;
    y(59) = 1.0;
    const Dataset d = make_dataset(x, y);
    Eigen::MatrixXd far(4, 2);
    far << 50, 0, -50, 0, 0, 50, 0, -50;
    for (const LearnerPtr& l :
         {make_intercept_learner(), make_logistic_learner(), make_linear_learner(),
          make_boosted_stumps_learner(50, 0.2), default_learner(OutcomeKind::binary)}) {
      const Eigen::VectorXd p = l->fit(d, 7)->predict(far);
      REQUIRE((p.array() >= 0.0).all());
      REQUIRE((p.array() <= 1.0).all());
    }
  }
}

TEST_CASE("stack with one base learner gives it full weight") {
  const SimScenario sc = scenario(2);
  const Dataset d = generate(sc, 200, 4);
  StackSpec spec;
  spec.base_learners = {make_logistic_learner()};
  const ModelPtr m = fit_stack(spec, d, 11);
  const auto* stack = dynamic_cast<const detail::StackModel*>(m.get());
  REQUIRE(stack != nullptr);
  REQUIRE(stack->weights()(0) == Approx(1.0));
  const Eigen::VectorXd direct = fit_logistic(d)->predict(d.features);
  REQUIRE((m->predict(d.features) - direct).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("stack of two identical learners matches the single learner") {
  const Dataset d = generate(scenario(2), 300, 5);
  StackSpec spec;
  spec.base_learners = {make_logistic_learner(), make_logistic_learner()};
  const ModelPtr m = fit_stack(spec, d, 3);
  const Eigen::VectorXd direct = fit_logistic(d)->predict(d.features);
  REQUIRE((m->predict(d.features) - direct).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("stack weights form a simplex point and beat every vertex") {
  const Dataset d = generate(scenario(2), 2000, 6);
  StackSpec spec;
  spec.base_learners = {make_intercept_learner(), make_logistic_learner()};
  const ModelPtr m = fit_stack(spec, d, 9);
  const auto* stack = dynamic_cast<const detail::StackModel*>(m.get());
  REQUIRE(stack != nullptr);
  REQUIRE((stack->weights().array() >= 0.0).all());
  REQUIRE(stack->weights().sum() == Approx(1.0).margin(1e-10));
  // simplex optimum can be no worse than the intercept-only vertex
  REQUIRE(stack->inner_cv_loss() <= stack->vertex_losses()[0] + 1e-12);
  REQUIRE(stack->inner_cv_loss() <= stack->vertex_losses()[1] + 1e-12);
}

TEST_CASE("failing base learners get weight zero with a warning") {
  const Dataset d = generate(scenario(2), 150, 8);
  StackSpec spec;
  spec.base_learners = {std::make_shared<FailingLearner>(), make_logistic_learner()};
  const ModelPtr m = fit_stack(spec, d, 2);
  const auto* stack = dynamic_cast<const detail::StackModel*>(m.get());
  REQUIRE(stack != nullptr);
  REQUIRE(stack->weights()(0) == 0.0);
  REQUIRE(stack->weights()(1) == Approx(1.0));
  REQUIRE(stack->warnings().size() == 1);

  StackSpec all_fail;
  all_fail.base_learners = {std::make_shared<FailingLearner>()};
  REQUIRE_THROWS_AS(fit_stack(all_fail, d, 2), DegeneracyError);
}

TEST_CASE("reduced fits ignore the dropped columns exactly") {
  CounterRng rng(25);
  const Dataset d = generate(scenario(1), 400, 10);
  const FeatureSet s = FeatureSet::of({2});
  for (const LearnerPtr& l : {make_logistic_learner(), make_boosted_stumps_learner(30, 0.2),
                              default_learner(OutcomeKind::binary)}) {
    const ModelPtr m = fit_reduced(*l, d, s, 33);
    Eigen::MatrixXd perturbed = d.features;
    for (Eigen::Index i = 0; i < perturbed.rows(); ++i)
      perturbed(i, 1) = rng.next_normal() * 100.0;
    REQUIRE(m->predict(d.features) == m->predict(perturbed));  // bitwise
  }
}

TEST_CASE("reduced logistic equals a direct fit on the kept column") {
  const Dataset d = generate(scenario(2), 800, 12);
  const ModelPtr reduced = fit_reduced(*make_logistic_learner(), d, FeatureSet::of({2}), 0);
  const Dataset kept = complement_columns(d, FeatureSet::of({2}));
  const Eigen::VectorXd direct = fit_logistic(kept)->predict(kept.features);
  REQUIRE((reduced->predict(d.features) - direct).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("dropping an irrelevant column leaves little slope behind") {
  // scenario 2: X2 is independent of Y, so the reduced model on X2 alone
  // should approach the intercept-only fit
  const Dataset d = generate(scenario(2), 20000, 13);
  const ModelPtr reduced = fit_reduced(*make_logistic_learner(), d, FeatureSet::of({1}), 0);
  Eigen::MatrixXd grid(2, 2);
  grid << 0.0, -1.0, 0.0, 1.0;
  const Eigen::VectorXd p = reduced->predict(grid);
  REQUIRE(std::abs(p(1) - p(0)) / 2.0 <= 0.02);  // slope on the mu scale
  REQUIRE(p(0) == Approx(0.6).margin(0.03));
}

TEST_CASE("learner preconditions are enforced") {
  const Dataset cont = tiny({1, 2, 3}, {0.5, 1.5, 2.5});
  REQUIRE_THROWS_AS(fit_logistic(cont), ConfigError);
  REQUIRE_THROWS_AS(fit_boosted_stumps(tiny({1, 2}, {0, 1}), 10, 0.1), ConfigError);
  StackSpec spec;
  REQUIRE_THROWS_AS(fit_stack(spec, cont, 0), ConfigError);
  StackSpec small;
  small.base_learners = {make_linear_learner()};
  small.loss = StackLoss::squared_error;
  REQUIRE_THROWS_AS(fit_stack(small, cont, 0), ConfigError);  // n < 5K
}
