#include <algorithm>
#include <cmath>
#include <numeric>

#include "brainage/error.hpp"
#include "brainage/learners.hpp"
#include "brainage/rng.hpp"
#include "json_matrix.hpp"

namespace brainage::models {

void KNN::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t) {
  require(x.rows() >= 1 && x.rows() == y.size(), ErrorCode::kParameter, "knn needs matching rows");
  require(k_ >= 1, ErrorCode::kParameter, "knn needs k >= 1");
  x_ = x;
  y_ = y;
}

namespace {

// Squared distances, queries x training rows.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& q, const Eigen::MatrixXd& train) {
  Eigen::MatrixXd d = -2.0 * q * train.transpose();
  d.rowwise() += train.rowwise().squaredNorm().transpose();
  d.colwise() += q.rowwise().squaredNorm();
  return d;
}

// Mean target of the k nearest among `members` (indices into the training
// rows, possibly repeated). Nearest first; equal distances resolve to the
// lower position in `members`.
double nearest_mean(const Eigen::MatrixXd& d, Eigen::Index row, const std::vector<std::size_t>& members,
                    const Eigen::VectorXd& y, std::size_t k, std::vector<std::size_t>& idx) {
  idx.resize(members.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, members.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double da = d(row, static_cast<Eigen::Index>(members[a]));
                      const double db = d(row, static_cast<Eigen::Index>(members[b]));
                      return da < db || (da == db && a < b);
                    });
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += y(static_cast<Eigen::Index>(members[idx[j]]));
  return s / static_cast<double>(k);
}

}  // namespace

Eigen::VectorXd KNN::predict(const Eigen::MatrixXd& x) const {
  require(x.cols() == x_.cols(), ErrorCode::kSchema, "knn: column count mismatch");
  const Eigen::MatrixXd d = squared_distances(x, x_);
  std::vector<std::size_t> all(static_cast<std::size_t>(x_.rows()));
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> idx;
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = nearest_mean(d, i, all, y_, static_cast<std::size_t>(k_), idx);
  return out;
}

nlohmann::json KNN::to_json() const { return {{"k", k_}, {"x", matrix_to_json(x_)}, {"y", vector_to_json(y_)}}; }

void KNN::from_json(const nlohmann::json& j) {
  k_ = j.at("k").get<int>();
  x_ = matrix_from_json(j.at("x"));
  y_ = vector_from_json(j.at("y"));
}

void BaggedKNN::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) {
  require(x.rows() >= 1 && x.rows() == y.size(), ErrorCode::kParameter, "bagged knn needs matching rows");
  require(k_ >= 1 && n_estimators_ >= 1 && max_samples_ > 0.0 && max_samples_ <= 1.0, ErrorCode::kParameter,
          "bagged knn parameters out of range");
  const auto n = static_cast<std::size_t>(x.rows());
  const auto draws = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(max_samples_ * static_cast<double>(n))));
  x_ = x;
  y_ = y;
  bags_.clear();
  for (int b = 0; b < n_estimators_; ++b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    std::vector<std::size_t> rows(draws);
    for (auto& r : rows) r = rng.uniform_index(n);
    bags_.push_back(std::move(rows));
  }
}

Eigen::VectorXd BaggedKNN::predict(const Eigen::MatrixXd& x) const {
  require(x.cols() == x_.cols(), ErrorCode::kSchema, "bagged knn: column count mismatch");
  const Eigen::MatrixXd d = squared_distances(x, x_);
  std::vector<std::size_t> idx;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (const auto& bag : bags_) out(i) += nearest_mean(d, i, bag, y_, static_cast<std::size_t>(k_), idx);
  }
  return out / static_cast<double>(bags_.size());
}

nlohmann::json BaggedKNN::to_json() const {
  return {{"k", k_}, {"x", matrix_to_json(x_)}, {"y", vector_to_json(y_)}, {"bags", bags_}};
}

void BaggedKNN::from_json(const nlohmann::json& j) {
  k_ = j.at("k").get<int>();
  x_ = matrix_from_json(j.at("x"));
  y_ = vector_from_json(j.at("y"));
  bags_ = j.at("bags").get<std::vector<std::vector<std::size_t>>>();
  n_estimators_ = static_cast<int>(bags_.size());
  for (const auto& bag : bags_) {
    for (auto r : bag) require(r < static_cast<std::size_t>(x_.rows()), ErrorCode::kSchema, "bag index out of range");
  }
}

}  // namespace brainage::models
