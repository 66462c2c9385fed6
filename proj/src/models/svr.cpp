#include <cmath>
#include <limits>
#include <vector>

#include "brainage/error.hpp"
#include "brainage/learners.hpp"
#include "json_matrix.hpp"

namespace brainage::models {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void SVR::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t) {
  require(x.rows() >= 2 && x.rows() == y.size(), ErrorCode::kParameter, "svr needs matching rows, n >= 2");
  require(c_ > 0.0 && epsilon_ >= 0.0 && gamma_scale_ > 0.0, ErrorCode::kParameter, "svr parameters out of range");
  const auto n = static_cast<std::size_t>(x.rows());
  const std::size_t l = 2 * n;
  gamma_ = gamma_scale_ / static_cast<double>(x.cols());
  const Eigen::MatrixXd k = rbf_kernel(x, x, gamma_);

  // Dual over 2n variables: the first n carry sign +1 (alpha+), the rest -1
  // (alpha-). Q(t,s) = sign_t sign_s K(t mod n, s mod n).
  std::vector<double> sign(l), alpha(l, 0.0), grad(l);
  for (std::size_t t = 0; t < n; ++t) {
    sign[t] = 1.0;
    sign[t + n] = -1.0;
    grad[t] = epsilon_ - y(static_cast<Eigen::Index>(t));
    grad[t + n] = epsilon_ + y(static_cast<Eigen::Index>(t));
  }
  auto q = [&](std::size_t a, std::size_t b) {
    return sign[a] * sign[b] * k(static_cast<Eigen::Index>(a % n), static_cast<Eigen::Index>(b % n));
  };
  auto qd = [&](std::size_t a) { return k(static_cast<Eigen::Index>(a % n), static_cast<Eigen::Index>(a % n)); };
  auto upper = [&](std::size_t t) { return alpha[t] >= c_; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  converged_ = false;
  for (long iter = 0; iter < max_iter_; ++iter) {
    // Second-order working-set selection.
    double gmax = -kInf, gmax2 = -kInf;
    long i = -1, j = -1;
    for (std::size_t t = 0; t < l; ++t) {
      if (sign[t] > 0) {
        if (!upper(t) && -grad[t] >= gmax) {
          gmax = -grad[t];
          i = static_cast<long>(t);
        }
      } else if (!lower(t) && grad[t] >= gmax) {
        gmax = grad[t];
        i = static_cast<long>(t);
      }
    }
    double obj_min = kInf;
    for (std::size_t t = 0; t < l && i >= 0; ++t) {
      const auto iu = static_cast<std::size_t>(i);
      if (sign[t] > 0) {
        if (lower(t)) continue;
        const double diff = gmax + grad[t];
        gmax2 = std::max(gmax2, grad[t]);
        if (diff > 0) {
          double quad = qd(iu) + qd(t) - 2.0 * sign[iu] * q(iu, t);
          if (quad <= 0) quad = kTau;
          const double obj = -diff * diff / quad;
          if (obj <= obj_min) {
            obj_min = obj;
            j = static_cast<long>(t);
          }
        }
      } else {
        if (upper(t)) continue;
        const double diff = gmax - grad[t];
        gmax2 = std::max(gmax2, -grad[t]);
        if (diff > 0) {
          double quad = qd(iu) + qd(t) + 2.0 * sign[iu] * q(iu, t);
          if (quad <= 0) quad = kTau;
          const double obj = -diff * diff / quad;
          if (obj <= obj_min) {
            obj_min = obj;
            j = static_cast<long>(t);
          }
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < tol_) {
      converged_ = true;
      break;
    }

    const auto a = static_cast<std::size_t>(i);
    const auto b = static_cast<std::size_t>(j);
    const double old_a = alpha[a], old_b = alpha[b];
    const double qab = q(a, b);
    if (sign[a] != sign[b]) {
      double quad = qd(a) + qd(b) + 2.0 * qab;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[a] - grad[b]) / quad;
      const double diff = alpha[a] - alpha[b];
      alpha[a] += delta;
      alpha[b] += delta;
      if (diff > 0) {
        if (alpha[b] < 0) {
          alpha[b] = 0;
          alpha[a] = diff;
        }
      } else if (alpha[a] < 0) {
        alpha[a] = 0;
        alpha[b] = -diff;
      }
      if (diff > 0) {
        if (alpha[a] > c_) {
          alpha[a] = c_;
          alpha[b] = c_ - diff;
        }
      } else if (alpha[b] > c_) {
        alpha[b] = c_;
        alpha[a] = c_ + diff;
      }
    } else {
      double quad = qd(a) + qd(b) - 2.0 * qab;
      if (quad <= 0) quad = kTau;
      const double delta = (grad[a] - grad[b]) / quad;
      const double sum = alpha[a] + alpha[b];
      alpha[a] -= delta;
      alpha[b] += delta;
      if (sum > c_) {
        if (alpha[a] > c_) {
          alpha[a] = c_;
          alpha[b] = sum - c_;
        }
      } else if (alpha[b] < 0) {
        alpha[b] = 0;
        alpha[a] = sum;
      }
      if (sum > c_) {
        if (alpha[b] > c_) {
          alpha[b] = c_;
          alpha[a] = sum - c_;
        }
      } else if (alpha[a] < 0) {
        alpha[a] = 0;
        alpha[b] = sum;
      }
    }
    const double da = alpha[a] - old_a, db = alpha[b] - old_b;
    for (std::size_t t = 0; t < l; ++t) grad[t] += q(a, t) * da + q(b, t) * db;
  }

  // Offset: average over free variables, else the middle of the feasible interval.
  double ub = kInf, lb = -kInf, sum_free = 0.0;
  int n_free = 0;
  for (std::size_t t = 0; t < l; ++t) {
    const double yg = sign[t] * grad[t];
    if (upper(t)) {
      if (sign[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (sign[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
  bias_ = -rho;

  alpha_plus_.resize(static_cast<Eigen::Index>(n));
  alpha_minus_.resize(static_cast<Eigen::Index>(n));
  std::vector<Eigen::Index> support;
  for (std::size_t t = 0; t < n; ++t) {
    alpha_plus_(static_cast<Eigen::Index>(t)) = alpha[t];
    alpha_minus_(static_cast<Eigen::Index>(t)) = alpha[t + n];
    if (alpha[t] - alpha[t + n] != 0.0) support.push_back(static_cast<Eigen::Index>(t));
  }
  support_.resize(static_cast<Eigen::Index>(support.size()), x.cols());
  coef_.resize(static_cast<Eigen::Index>(support.size()));
  for (std::size_t s = 0; s < support.size(); ++s) {
    support_.row(static_cast<Eigen::Index>(s)) = x.row(support[s]);
    coef_(static_cast<Eigen::Index>(s)) = alpha_plus_(support[s]) - alpha_minus_(support[s]);
  }
}

Eigen::VectorXd SVR::predict(const Eigen::MatrixXd& x) const {
  if (coef_.size() == 0) return Eigen::VectorXd::Constant(x.rows(), bias_);
  require(x.cols() == support_.cols(), ErrorCode::kSchema, "svr: column count mismatch");
  return (rbf_kernel(x, support_, gamma_) * coef_).array() + bias_;
}

nlohmann::json SVR::to_json() const {
  return {{"gamma", gamma_}, {"bias", bias_}, {"support", matrix_to_json(support_)}, {"coef", vector_to_json(coef_)}};
}

void SVR::from_json(const nlohmann::json& j) {
  gamma_ = j.at("gamma").get<double>();
  bias_ = j.at("bias").get<double>();
  support_ = matrix_from_json(j.at("support"));
  coef_ = vector_from_json(j.at("coef"));
}

}  // namespace brainage::models
