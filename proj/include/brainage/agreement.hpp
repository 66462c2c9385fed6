#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "brainage/dataset.hpp"
#include "brainage/explain.hpp"

namespace brainage::agreement {

struct Correlation {
  double rho = 0.0;
  bool degenerate = false;  // all ranks tied on one side; rho reported as 0
};

// Pearson correlation of average-tie ranks. Needs equal lengths >= 2.
Correlation spearman(const std::vector<double>& a, const std::vector<double>& b);

// Ascending average ranks (1-based), ties share the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& values);

struct AgreementMatrix {
  explain::GroupingKind kind = explain::GroupingKind::kBand;
  std::vector<std::string> models;
  Eigen::MatrixXd rho;
  std::vector<std::vector<bool>> degenerate;

  bool symmetric_unit_diagonal(double tol = 0.0) const;
  // Square CSV: header "model,<m1>,...", one row per model.
  void write_csv(const std::filesystem::path& path) const;
  static AgreementMatrix read_csv(const std::filesystem::path& path, explain::GroupingKind kind);
  nlohmann::json to_json() const;
};

// Pairwise Spearman over group scores. Every importance must have the same
// kind and the same groups in the same order (kSchema otherwise).
AgreementMatrix agreement_matrix(const std::vector<std::string>& models,
                                 const std::vector<explain::GroupImportance>& importances);

// A set of columns picked by attribute filters. An absent filter matches
// everything; region names refer to the region map (a channel named after a
// region belongs to it).
struct Selector {
  std::optional<State> state;
  std::vector<std::string> bands;
  std::vector<std::string> measures;
  std::vector<std::string> components;
  std::vector<std::string> regions;

  nlohmann::json to_json() const;
  static Selector from_json(const nlohmann::json& j);
};

enum class Criterion { kRankTopK, kTrendSign, kRankAbove };

// One finding from prior work turned into a checkable predicate.
//  rank_top_k: columns are partitioned by the attributes the selector
//    filters on (e.g. band x region); the best rank among the selected cells
//    must be <= k.
//  trend_sign: the signed SHAP trends of the selected columns, weighted by
//    their mean |phi|, must have the stated sign.
//  rank_above: best rank of `selector` strictly better than best rank of
//    `other`, in the same partition (both selectors must filter on the same
//    attributes).
struct Hypothesis {
  std::string id;
  std::string band;  // Table row heading: delta ... whole spectrum
  std::string description;
  std::string mapping;  // how the prose was turned into the predicate
  Selector selector;
  Criterion criterion = Criterion::kTrendSign;
  int k = 1;
  int sign = 1;
  Selector other;
  bool planted = false;  // the synthetic generator plants this effect
};

std::vector<Hypothesis> hypotheses_from_json(const nlohmann::json& j);
nlohmann::json hypotheses_to_json(const std::vector<Hypothesis>& hypotheses);
std::vector<Hypothesis> read_hypotheses(const std::filesystem::path& path);
// data/hypotheses.json shipped with the library.
std::filesystem::path default_hypotheses_path();

// Per-column evidence of one model: mean |phi| and the signed trend.
struct ModelEvidence {
  std::string model;
  std::vector<double> importance;
  std::vector<explain::Trend> trends;

  // `values` are the raw feature values of the explained samples.
  static ModelEvidence from_shap(const explain::ShapMatrix& shap, const Eigen::MatrixXd& values);
};

enum class Outcome { kReplicated, kNotReplicated, kInapplicable };
std::string_view to_string(Outcome outcome);

struct ReplicationMatrix {
  std::vector<std::string> hypotheses;
  std::vector<std::string> models;
  std::vector<std::vector<Outcome>> cells;  // hypotheses x models

  int replicated_count(const std::string& hypothesis) const;
  void write_csv(const std::filesystem::path& path) const;
  nlohmann::json to_json() const;
};

ReplicationMatrix evaluate_hypotheses(const std::vector<Hypothesis>& hypotheses,
                                      const std::vector<ModelEvidence>& evidence,
                                      const std::vector<FeatureDescriptor>& columns, const RegionMap& regions);

}  // namespace brainage::agreement
