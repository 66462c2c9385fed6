#include "brainage/tree.hpp"

#include <algorithm>
#include <set>

#include "brainage/error.hpp"
#include "brainage/learners.hpp"

namespace brainage::models {

double Tree::predict(const RowRef& x) const {
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = x(n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.feature < 0) continue;
    d[static_cast<std::size_t>(n.left)] = d[i] + 1;
    d[static_cast<std::size_t>(n.right)] = d[i] + 1;
    best = std::max(best, d[i] + 1);
  }
  return best;
}

int Tree::n_leaves() const {
  return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

double TreeEnsemble::predict_row(const RowRef& x) const {
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(x);
  return base + weight * s;
}

Eigen::VectorXd TreeEnsemble::predict(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict_row(x.row(i));
  return out;
}

std::vector<int> TreeEnsemble::used_features() const {
  std::set<int> s;
  for (const auto& t : trees) {
    for (const auto& n : t.nodes) {
      if (n.feature >= 0) s.insert(n.feature);
    }
  }
  return {s.begin(), s.end()};
}

nlohmann::json TreeEnsemble::to_json() const {
  nlohmann::json j;
  j["base"] = base;
  j["weight"] = weight;
  auto& arr = j["trees"] = nlohmann::json::array();
  for (const auto& t : trees) {
    nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                   left = nlohmann::json::array(), right = nlohmann::json::array(),
                   value = nlohmann::json::array(), cover = nlohmann::json::array();
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
      cover.push_back(n.cover);
    }
    arr.push_back({{"feature", feature},
                   {"threshold", threshold},
                   {"left", left},
                   {"right", right},
                   {"value", value},
                   {"cover", cover}});
  }
  return j;
}

TreeEnsemble TreeEnsemble::from_json(const nlohmann::json& j) {
  TreeEnsemble e;
  e.base = j.at("base").get<double>();
  e.weight = j.at("weight").get<double>();
  for (const auto& jt : j.at("trees")) {
    Tree t;
    const auto& f = jt.at("feature");
    t.nodes.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      auto& n = t.nodes[i];
      n.feature = f[i].get<int>();
      n.threshold = jt.at("threshold")[i].get<double>();
      n.left = jt.at("left")[i].get<int>();
      n.right = jt.at("right")[i].get<int>();
      n.value = jt.at("value")[i].get<double>();
      n.cover = jt.at("cover")[i].get<double>();
    }
    e.trees.push_back(std::move(t));
  }
  return e;
}

Eigen::VectorXd TreeModel::predict(const Eigen::MatrixXd& x) const { return ensemble_.predict(x); }

nlohmann::json TreeModel::to_json() const { return ensemble_.to_json(); }

void TreeModel::from_json(const nlohmann::json& j) { ensemble_ = TreeEnsemble::from_json(j); }

}  // namespace brainage::models
