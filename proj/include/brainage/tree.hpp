#pragma once

#include <Eigen/Dense>

#include <vector>

#include <json.hpp>

namespace brainage::models {

// A row of a column-major design matrix.
using RowRef = Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output
  double cover = 0.0;  // training weight reaching the node
};

struct Tree {
  std::vector<TreeNode> nodes;  // root at 0

  double predict(const RowRef& x) const;
  int depth() const;
  int n_leaves() const;
};

// prediction = base + weight * sum of tree outputs
struct TreeEnsemble {
  std::vector<Tree> trees;
  double base = 0.0;
  double weight = 1.0;

  double predict_row(const RowRef& x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
  // Features used by at least one split.
  std::vector<int> used_features() const;

  nlohmann::json to_json() const;
  static TreeEnsemble from_json(const nlohmann::json& j);
};

}  // namespace brainage::models
