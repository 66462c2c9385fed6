#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "brainage/dataset.hpp"
#include "brainage/models.hpp"
#include "brainage/tree.hpp"

namespace brainage::explain {

// Batch prediction: one output per row.
using PredictFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

struct Explanation {
  Eigen::VectorXd phi;
  double base = 0.0;        // expected output over the background
  double prediction = 0.0;  // f(x)
};

// Classical Shapley sum over all 2^p coalitions of the game `value`, given
// as a vector indexed by coalition bitmask (bit i = player i present).
Eigen::VectorXd shapley_from_values(int p, const std::vector<double>& value);

// Brute-force oracle with features outside the coalition imputed from each
// background row in turn. Refuses p > 12 (kTooLarge).
Eigen::VectorXd exact_shap_enumeration(const PredictFn& f, const Eigen::MatrixXd& background,
                                       const Eigen::RowVectorXd& x);

// Kernel SHAP with marginal imputation over the background. For p <= 14
// every coalition is enumerated and the result is exact; otherwise
// coalitions are chosen as in the reference estimator: whole coalition sizes
// (paired with their complements) are enumerated while the budget allows,
// the rest is sampled in complementary pairs. The design depends only on
// (p, n_coalitions, seed), so it is shared by all explained samples and the
// constrained least-squares system is factored once.
class KernelShap {
 public:
  KernelShap(PredictFn f, Eigen::MatrixXd background, int n_coalitions, std::uint64_t seed);

  Explanation explain(const Eigen::RowVectorXd& x) const;
  double base() const { return base_; }
  bool exact() const { return exact_; }
  bool damped() const { return damped_; }
  int n_coalitions() const { return static_cast<int>(masks_.size()); }

 private:
  Eigen::VectorXd coalition_values(const Eigen::RowVectorXd& x) const;

  PredictFn f_;
  Eigen::MatrixXd background_;
  int p_ = 0;
  bool exact_ = false;
  bool damped_ = false;
  double base_ = 0.0;
  std::vector<std::vector<int>> masks_;  // member features per coalition
  Eigen::VectorXd weights_;
  Eigen::MatrixXd design_;  // z_j - z_last, for j < p - 1
  Eigen::LDLT<Eigen::MatrixXd> normal_;
};

// Exact interventional Shapley values of a linear model w.x + b with the
// background mean as reference. Equal to what kernel SHAP converges to.
Explanation linear_shap(const Eigen::VectorXd& coef, double intercept, const Eigen::RowVectorXd& background_mean,
                        const Eigen::RowVectorXd& x);

// Path-dependent tree SHAP: exact Shapley values of the game whose value is
// the cover-weighted expected output given the features in the coalition.
// Sums over trees and applies the ensemble's base and weight.
Explanation tree_shap(const models::TreeEnsemble& ensemble, const Eigen::RowVectorXd& x, int n_features);

enum class GroupingKind { kBand, kMeasure, kRegion };
std::string_view to_string(GroupingKind kind);
GroupingKind parse_grouping(std::string_view text);
const std::vector<GroupingKind>& all_groupings();

struct Grouping {
  GroupingKind kind = GroupingKind::kBand;
  std::vector<std::string> groups;
  std::vector<int> assignment;  // group index per column

  // Band: 5 groups; measure: catalogue order; region: the region of each
  // channel (channels that are region names map to themselves, others via
  // `regions`).
  static Grouping build(GroupingKind kind, const std::vector<FeatureDescriptor>& columns,
                        const RegionMap& regions);
};

struct ShapMatrix {
  std::string model;
  std::string method;  // "tree", "kernel", "kernel-exact" or "linear"
  std::vector<std::string> sample_ids;
  std::vector<std::string> columns;
  Eigen::MatrixXd phi;  // samples x columns
  Eigen::VectorXd predictions;
  double base_value = 0.0;
  int n_coalitions = 0;
  std::uint64_t seed = 0;

  // Largest |base + sum(phi) - prediction| over samples.
  double max_additivity_error() const;
  // <dir>/<model>.csv (φ, header = feature columns) + <dir>/<model>.json.
  void write(const std::filesystem::path& dir) const;
  static ShapMatrix read(const std::filesystem::path& dir, const std::string& model);
};

struct ExplainOptions {
  int background_size = 100;
  int max_samples = 0;    // 0 = every held-out row
  int n_coalitions = 0;   // 0 = 2p + 2 (ignored when p <= 14)
  std::uint64_t seed = 0;
  int workers = 1;
};

// Explains `rows` of `fm` with the method matching the model family. The
// background is drawn from `background_rows`. Tree families are explained in
// raw learner units (label-index space); others in years.
ShapMatrix explain_model(const models::TrainedModel& model, const std::string& name, const FeatureMatrix& fm,
                         const std::vector<std::size_t>& rows, const std::vector<std::size_t>& background_rows,
                         const ExplainOptions& options);

struct GroupImportance {
  GroupingKind kind = GroupingKind::kBand;
  std::vector<std::string> groups;
  std::vector<double> scores;
  std::vector<double> ranks;  // 1 = most important, ties share the average rank

  double rank_of(const std::string& group) const;  // throws kMapping
  nlohmann::json to_json() const;
  static GroupImportance from_json(const nlohmann::json& j);
};

// Mean |φ| per column over samples, summed within each group.
GroupImportance group_importance(const ShapMatrix& shap, const Grouping& grouping);

// Average ranks, descending: the largest value gets rank 1.
std::vector<double> descending_ranks(const std::vector<double>& values);

struct Trend {
  double r = 0.0;
  bool degenerate = false;  // zero variance in the feature or in φ
};

// Pearson correlation between each column's feature values and its φ.
std::vector<Trend> signed_feature_trend(const ShapMatrix& shap, const Eigen::MatrixXd& values);

}  // namespace brainage::explain
