#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "vimkit/errors.hpp"

namespace vimkit {

enum class OutcomeKind { continuous, binary };

inline bool is_zero_one(const Eigen::VectorXd& v) {
  return (v.array() == 0.0 || v.array() == 1.0).all();
}

// A fully observed sample: feature matrix (n x p) and outcome vector.
// Missingness and treatments are modeled by the coarsened-data types instead.
struct Dataset {
  Eigen::MatrixXd features;
  Eigen::VectorXd outcome;
  OutcomeKind outcome_kind = OutcomeKind::continuous;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index p() const { return features.cols(); }

  void validate() const {
    if (features.rows() < 1 || features.cols() < 1)
      throw DataError("dataset requires n >= 1 and p >= 1");
    if (outcome.size() != features.rows())
      throw DataError("outcome length does not match feature rows");
    if (!features.allFinite() || !outcome.allFinite())
      throw DataError("dataset contains non-finite values");
    if (outcome_kind == OutcomeKind::binary && !is_zero_one(outcome))
      throw DataError("binary outcome must take values in {0, 1}");
  }
};

inline Dataset make_dataset(Eigen::MatrixXd features, Eigen::VectorXd outcome) {
  Dataset d{std::move(features), std::move(outcome),
            OutcomeKind::continuous};
  if (is_zero_one(d.outcome)) d.outcome_kind = OutcomeKind::binary;
  d.validate();
  return d;
}

// A group of feature columns under study. Column numbers are 1-based, matching
// the usual statistical convention for covariate indices; kept sorted and
// duplicate-free.
class FeatureSet {
 public:
  static FeatureSet of(std::vector<int> columns) {
    if (columns.empty()) throw ConfigError("feature set must be non-empty");
    std::sort(columns.begin(), columns.end());
    columns.erase(std::unique(columns.begin(), columns.end()), columns.end());
    if (columns.front() < 1)
      throw ConfigError("feature set columns are 1-based; got index < 1");
    return FeatureSet(std::move(columns));
  }

  const std::vector<int>& columns() const { return columns_; }
  std::size_t size() const { return columns_.size(); }
  bool contains(int column) const {
    return std::binary_search(columns_.begin(), columns_.end(), column);
  }

  void validate_for(Eigen::Index p) const {
    if (columns_.back() > p)
      throw ConfigError("feature set references column " +
                        std::to_string(columns_.back()) +
                        " but dataset has only " + std::to_string(p) +
                        " columns");
  }

  std::string to_string() const {
    std::string out = "{";
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i) out += ",";
      out += std::to_string(columns_[i]);
    }
    return out + "}";
  }

 private:
  explicit FeatureSet(std::vector<int> columns) : columns_(std::move(columns)) {}
  std::vector<int> columns_;
};

// Columns of x not indexed by s, original order preserved.
inline Eigen::MatrixXd drop_columns(const Eigen::MatrixXd& x, const FeatureSet& s) {
  s.validate_for(x.cols());
  const Eigen::Index kept = x.cols() - static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd out(x.rows(), kept);
  Eigen::Index j = 0;
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    if (!s.contains(static_cast<int>(c) + 1)) out.col(j++) = x.col(c);
  return out;
}

inline Dataset complement_columns(const Dataset& d, const FeatureSet& s) {
  s.validate_for(d.p());
  if (static_cast<Eigen::Index>(s.size()) == d.p())
    throw ConfigError("reduced dataset empty: feature set covers all columns");
  return Dataset{drop_columns(d.features, s), d.outcome, d.outcome_kind};
}

inline Dataset subset_rows(const Dataset& d, const std::vector<int>& rows) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), d.p());
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = d.features.row(rows[i]);
    y(static_cast<Eigen::Index>(i)) = d.outcome(rows[i]);
  }
  return Dataset{std::move(x), std::move(y), d.outcome_kind};
}

}  // namespace vimkit
