#include <cmath>

#include "brainage/error.hpp"
#include "brainage/explain.hpp"

namespace brainage::explain {

Eigen::VectorXd shapley_from_values(int p, const std::vector<double>& value) {
  require(p >= 1 && p <= 20, ErrorCode::kTooLarge, "shapley enumeration supports 1..20 players");
  const std::size_t n_masks = std::size_t{1} << p;
  require(value.size() == n_masks, ErrorCode::kLength, "need one value per coalition");
  // w[s] = s! (p - s - 1)! / p!
  std::vector<double> w(static_cast<std::size_t>(p));
  for (int s = 0; s < p; ++s) {
    w[static_cast<std::size_t>(s)] =
        std::exp(std::lgamma(s + 1.0) + std::lgamma(p - s + 0.0) - std::lgamma(p + 1.0));
  }
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(p);
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    const int s = __builtin_popcountll(mask);
    for (int i = 0; i < p; ++i) {
      const std::size_t bit = std::size_t{1} << i;
      if (mask & bit) continue;
      phi(i) += w[static_cast<std::size_t>(s)] * (value[mask | bit] - value[mask]);
    }
  }
  return phi;
}

Eigen::VectorXd exact_shap_enumeration(const PredictFn& f, const Eigen::MatrixXd& background,
                                       const Eigen::RowVectorXd& x) {
  const auto p = static_cast<int>(x.size());
  require(p >= 1 && p <= 12, ErrorCode::kTooLarge, "exact enumeration is limited to 12 features");
  require(background.rows() >= 1 && background.cols() == p, ErrorCode::kSchema,
          "background must be non-empty and match the sample width");
  const std::size_t n_masks = std::size_t{1} << p;
  const Eigen::Index b = background.rows();
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(n_masks) * b, p);
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    auto block = rows.middleRows(static_cast<Eigen::Index>(mask) * b, b);
    block = background;
    for (int j = 0; j < p; ++j) {
      if (mask & (std::size_t{1} << j)) block.col(j).setConstant(x(j));
    }
  }
  const Eigen::VectorXd out = f(rows);
  std::vector<double> value(n_masks);
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    value[mask] = out.segment(static_cast<Eigen::Index>(mask) * b, b).mean();
  }
  return shapley_from_values(p, value);
}

Explanation linear_shap(const Eigen::VectorXd& coef, double intercept, const Eigen::RowVectorXd& background_mean,
                        const Eigen::RowVectorXd& x) {
  require(coef.size() == x.size() && background_mean.size() == x.size(), ErrorCode::kSchema,
          "linear explanation width mismatch");
  Explanation e;
  e.phi = coef.array() * (x - background_mean).transpose().array();
  e.base = intercept + background_mean.dot(coef.transpose());
  e.prediction = intercept + x.dot(coef.transpose());
  return e;
}

}  // namespace brainage::explain
