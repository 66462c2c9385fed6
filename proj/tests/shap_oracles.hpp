#pragma once

// Brute-force Shapley references used by the explain tests and the
// acceptance checks. Values are computed by averaging marginal
// contributions over every player ordering, not by the subset formula the
// library uses.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "brainage/tree.hpp"

namespace oracle {

// value(mask) for every mask is cached, then every permutation is walked.
inline Eigen::VectorXd permutation_shapley(int p, const std::function<double(std::uint32_t)>& value) {
  std::vector<double> v(std::size_t{1} << p);
  for (std::uint32_t m = 0; m < v.size(); ++m) v[m] = value(m);
  std::vector<int> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(p);
  double count = 0.0;
  do {
    std::uint32_t mask = 0;
    for (int i : order) {
      const std::uint32_t next = mask | (1u << i);
      phi(i) += v[next] - v[mask];
      mask = next;
    }
    count += 1.0;
  } while (std::next_permutation(order.begin(), order.end()));
  return phi / count;
}

// Mean prediction with absent features taken from each background row.
inline double marginal_value(const std::function<double(const Eigen::RowVectorXd&)>& f,
                             const Eigen::MatrixXd& background, const Eigen::RowVectorXd& x, std::uint32_t mask) {
  double s = 0.0;
  for (Eigen::Index b = 0; b < background.rows(); ++b) {
    Eigen::RowVectorXd z = background.row(b);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      if (mask & (1u << j)) z(j) = x(j);
    }
    s += f(z);
  }
  return s / static_cast<double>(background.rows());
}

// Cover-weighted expectation of one tree given the features in `mask`.
inline double tree_value(const brainage::models::Tree& t, int node, const Eigen::RowVectorXd& x, std::uint32_t mask) {
  const auto& n = t.nodes[static_cast<std::size_t>(node)];
  if (n.feature < 0) return n.value;
  if (mask & (1u << n.feature)) return tree_value(t, x(n.feature) <= n.threshold ? n.left : n.right, x, mask);
  const double cl = t.nodes[static_cast<std::size_t>(n.left)].cover;
  const double cr = t.nodes[static_cast<std::size_t>(n.right)].cover;
  return (cl * tree_value(t, n.left, x, mask) + cr * tree_value(t, n.right, x, mask)) / (cl + cr);
}

inline double ensemble_value(const brainage::models::TreeEnsemble& e, const Eigen::RowVectorXd& x,
                             std::uint32_t mask) {
  double s = 0.0;
  for (const auto& t : e.trees) s += tree_value(t, 0, x, mask);
  return e.base + e.weight * s;
}

}  // namespace oracle
