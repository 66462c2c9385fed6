#include <cmath>

#include "brainage/error.hpp"
#include "brainage/learners.hpp"

namespace brainage::models {

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace

void ElasticNet::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t) {
  require(x.rows() >= 2 && x.rows() == y.size(), ErrorCode::kParameter, "elastic net needs matching rows, n >= 2");
  require(alpha_ >= 0.0 && l1_ratio_ >= 0.0 && l1_ratio_ <= 1.0, ErrorCode::kParameter,
          "elastic net penalty out of range");
  const auto n = static_cast<double>(x.rows());
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd norms = xc.colwise().squaredNorm().transpose() / n;
  const double l1 = alpha_ * l1_ratio_;
  const double l2 = alpha_ * (1.0 - l1_ratio_);

  coef_ = Eigen::VectorXd::Zero(x.cols());
  Eigen::VectorXd r = y.array() - y_mean;
  auto objective_now = [&] {
    return 0.5 * r.squaredNorm() / n + l1 * coef_.lpNorm<1>() + 0.5 * l2 * coef_.squaredNorm();
  };
  history_.assign(1, objective_now());
  converged_ = false;
  for (int sweep = 0; sweep < max_sweeps_; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (norms(j) <= 0.0) continue;
      const double old = coef_(j);
      const double rho = xc.col(j).dot(r) / n + norms(j) * old;
      const double updated = soft_threshold(rho, l1) / (norms(j) + l2);
      if (updated != old) {
        r.noalias() -= (updated - old) * xc.col(j);
        coef_(j) = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    const double obj = objective_now();
    // Each coordinate step is an exact minimisation, so a sweep cannot
    // increase the objective beyond rounding.
    require(obj <= history_.back() + 1e-10 * std::max(1.0, std::abs(history_.back())), ErrorCode::kInvalidData,
            "coordinate descent objective increased");
    history_.push_back(obj);
    if (max_change < tol_) {
      converged_ = true;
      break;
    }
  }
  intercept_ = y_mean - x_mean.dot(coef_);
}

Eigen::VectorXd ElasticNet::predict(const Eigen::MatrixXd& x) const {
  require(x.cols() == coef_.size(), ErrorCode::kSchema, "elastic net: column count mismatch");
  return (x * coef_).array() + intercept_;
}

double ElasticNet::objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) const {
  const auto n = static_cast<double>(x.rows());
  const double l1 = alpha_ * l1_ratio_;
  const double l2 = alpha_ * (1.0 - l1_ratio_);
  return 0.5 * (y - predict(x)).squaredNorm() / n + l1 * coef_.lpNorm<1>() + 0.5 * l2 * coef_.squaredNorm();
}

nlohmann::json ElasticNet::to_json() const {
  return {{"coef", std::vector<double>(coef_.data(), coef_.data() + coef_.size())}, {"intercept", intercept_}};
}

void ElasticNet::from_json(const nlohmann::json& j) {
  const auto c = j.at("coef").get<std::vector<double>>();
  coef_ = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  intercept_ = j.at("intercept").get<double>();
}

}  // namespace brainage::models
