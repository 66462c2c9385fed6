#include "brainage/error.hpp"
#include "brainage/learners.hpp"
#include "json_matrix.hpp"

namespace brainage::models {

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma) {
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd d = -2.0 * a * b.transpose();
  d.colwise() += na;
  d.rowwise() += nb.transpose();
  return (-gamma * d.array().max(0.0)).exp().matrix();
}

void KernelRidge::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t) {
  require(x.rows() >= 2 && x.rows() == y.size(), ErrorCode::kParameter, "kernel ridge needs matching rows, n >= 2");
  require(alpha_ > 0.0 && gamma_scale_ > 0.0, ErrorCode::kParameter, "kernel ridge parameters must be positive");
  gamma_ = gamma_scale_ / static_cast<double>(x.cols());
  support_ = x;
  intercept_ = y.mean();
  const Eigen::VectorXd yc = y.array() - intercept_;
  Eigen::MatrixXd a = rbf_kernel(x, x, gamma_);
  a.diagonal().array() += alpha_;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  require(llt.info() == Eigen::Success, ErrorCode::kInvalidData, "kernel ridge system is not positive definite");
  dual_ = llt.solve(yc);
  // A few rounds of iterative refinement tighten the residual when the
  // system is poorly conditioned.
  for (int it = 0; it < 3; ++it) {
    const Eigen::VectorXd r = yc - a * dual_;
    if (r.lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, yc.lpNorm<Eigen::Infinity>())) break;
    dual_ += llt.solve(r);
  }
  residual_ = (a * dual_ - yc).lpNorm<Eigen::Infinity>();
}

Eigen::VectorXd KernelRidge::predict(const Eigen::MatrixXd& x) const {
  require(x.cols() == support_.cols(), ErrorCode::kSchema, "kernel ridge: column count mismatch");
  return (rbf_kernel(x, support_, gamma_) * dual_).array() + intercept_;
}

nlohmann::json KernelRidge::to_json() const {
  return {{"gamma", gamma_}, {"intercept", intercept_}, {"support", matrix_to_json(support_)},
          {"dual", vector_to_json(dual_)}};
}

void KernelRidge::from_json(const nlohmann::json& j) {
  gamma_ = j.at("gamma").get<double>();
  intercept_ = j.at("intercept").get<double>();
  support_ = matrix_from_json(j.at("support"));
  dual_ = vector_from_json(j.at("dual"));
}

}  // namespace brainage::models
