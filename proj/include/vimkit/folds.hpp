#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vimkit/dataset.hpp"
#include "vimkit/errors.hpp"
#include "vimkit/rng.hpp"

namespace vimkit {

enum class FoldAssignMode {
  // Random permutation, then round-robin: fold sizes within a half differ by
  // at most one. Default.
  balanced,
  // I.i.d. uniform assignment with replacement, resampled until every fold in
  // every half is non-empty.
  iid_with_replacement,
};

struct FoldPlanOptions {
  int folds = 5;
  bool sample_split = false;
  std::uint64_t seed = 0;
  FoldAssignMode mode = FoldAssignMode::balanced;
  // Fraction of observations assigned to the second half (the one used for
  // the reduced-model estimate) when sample splitting is on.
  double split_fraction = 0.5;
  // Optional binary outcome vector; when present, halves and folds preserve
  // outcome prevalence (each class distributed round-robin).
  std::optional<Eigen::VectorXd> stratify_outcome;
};

// The dataset subdivision used for cross-fitting and sample splitting:
// each observation carries a half label (1 or 2; all 1 without splitting)
// and a fold label in 1..K assigned within its half. The assignment is a
// deterministic function of (n, options).
struct FoldPlan {
  std::vector<int> split_assignment;
  std::vector<int> fold_assignment;
  int folds = 0;
  std::uint64_t seed = 0;

  std::size_t n() const { return split_assignment.size(); }

  std::vector<int> half_indices(int half) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < n(); ++i)
      if (split_assignment[i] == half) out.push_back(static_cast<int>(i));
    return out;
  }

  std::vector<int> fold_indices(int half, int fold) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < n(); ++i)
      if (split_assignment[i] == half && fold_assignment[i] == fold)
        out.push_back(static_cast<int>(i));
    return out;
  }
};

namespace detail {

inline std::size_t minimum_n_for_plan(int folds, bool split, double fraction) {
  const std::size_t need = 2 * static_cast<std::size_t>(folds);
  if (!split) return need;
  for (std::size_t m = 2 * need;; ++m) {
    const auto ns = static_cast<std::size_t>(std::llround(static_cast<double>(m) * fraction));
    if (ns >= need && m - ns >= need) return m;
  }
}

inline void assign_folds_iid(const std::vector<int>& members, int folds,
                             std::vector<int>& fold_of, CounterRng& rng) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    std::vector<int> count(static_cast<std::size_t>(folds), 0);
    for (const int i : members) {
      const int f = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(folds)));
      fold_of[static_cast<std::size_t>(i)] = f + 1;
      ++count[static_cast<std::size_t>(f)];
    }
    bool ok = true;
    for (const int c : count) ok = ok && c > 0;
    if (ok) return;
  }
  throw ConfigError("could not draw a with-replacement fold assignment with all folds non-empty");
}

}  // namespace detail

inline FoldPlan make_fold_plan(std::size_t n, const FoldPlanOptions& opt) {
  if (opt.folds < 2) throw ConfigError("fold count K must be >= 2");
  if (!(opt.split_fraction > 0.0 && opt.split_fraction < 1.0))
    throw ConfigError("split fraction must lie in (0, 1)");

  const std::size_t min_n =
      detail::minimum_n_for_plan(opt.folds, opt.sample_split, opt.split_fraction);
  if (n < min_n)
    throw SizingError("n = " + std::to_string(n) + " too small for K = " +
                          std::to_string(opt.folds) +
                          (opt.sample_split ? " with sample splitting" : "") +
                          "; need n >= " + std::to_string(min_n),
                      min_n);

  CounterRng rng(opt.seed);
  FoldPlan plan;
  plan.folds = opt.folds;
  plan.seed = opt.seed;
  plan.split_assignment.assign(n, 1);
  plan.fold_assignment.assign(n, 0);

  // Observation order: a single shuffled permutation, or per-class shuffled
  // permutations concatenated (class 0 first) when stratifying.
  std::vector<std::vector<int>> strata;
  if (opt.stratify_outcome) {
    const Eigen::VectorXd& y = *opt.stratify_outcome;
    if (static_cast<std::size_t>(y.size()) != n)
      throw ConfigError("stratification outcome length does not match n");
    if (!is_zero_one(y))
      throw ConfigError("stratified folds require a binary outcome");
    strata.resize(2);
    for (std::size_t i = 0; i < n; ++i)
      strata[y(static_cast<Eigen::Index>(i)) == 1.0 ? 1 : 0].push_back(static_cast<int>(i));
    if (strata[0].empty() || strata[1].empty())
      throw DegeneracyError("stratified folds require both outcome classes present");
    rng.shuffle(strata[0]);
    rng.shuffle(strata[1]);
  } else {
    strata.resize(1);
    strata[0].resize(n);
    for (std::size_t i = 0; i < n; ++i) strata[0][i] = static_cast<int>(i);
    rng.shuffle(strata[0]);
  }

  if (opt.sample_split) {
    if (strata.size() == 1) {
      // First n - n_s entries of the permutation form half 1.
      const auto ns = static_cast<std::size_t>(
          std::llround(static_cast<double>(n) * opt.split_fraction));
      for (std::size_t pos = 0; pos < n; ++pos)
        plan.split_assignment[static_cast<std::size_t>(strata[0][pos])] =
            pos < n - ns ? 1 : 2;
    } else {
      if (opt.split_fraction != 0.5)
        throw ConfigError("stratified folds support only the equal split");
      // Alternate halves within each class; classes start on opposite halves
      // so the half sizes differ by at most one.
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t pos = 0; pos < strata[c].size(); ++pos)
          plan.split_assignment[static_cast<std::size_t>(strata[c][pos])] =
              1 + static_cast<int>((pos + c) % 2);
    }
  }

  for (int half = 1; half <= (opt.sample_split ? 2 : 1); ++half) {
    // Half members in permutation order (class 0 block first when stratified;
    // the round-robin counter continues across the blocks).
    std::vector<int> members;
    for (const auto& stratum : strata)
      for (const int i : stratum)
        if (plan.split_assignment[static_cast<std::size_t>(i)] == half)
          members.push_back(i);

    if (opt.mode == FoldAssignMode::balanced) {
      for (std::size_t pos = 0; pos < members.size(); ++pos)
        plan.fold_assignment[static_cast<std::size_t>(members[pos])] =
            1 + static_cast<int>(pos % static_cast<std::size_t>(opt.folds));
    } else {
      detail::assign_folds_iid(members, opt.folds, plan.fold_assignment, rng);
    }
  }
  return plan;
}

inline FoldPlan make_fold_plan(std::size_t n, int folds, bool sample_split,
                               std::uint64_t seed) {
  FoldPlanOptions opt;
  opt.folds = folds;
  opt.sample_split = sample_split;
  opt.seed = seed;
  return make_fold_plan(n, opt);
}

}  // namespace vimkit
