#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "brainage/error.hpp"
#include "brainage/learners.hpp"
#include "brainage/rng.hpp"
#include "json_matrix.hpp"

namespace brainage::models {

namespace {

using Weights = MLP::Weights;

struct Grads {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;
};

Eigen::MatrixXd glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

Eigen::VectorXd glorot_bias(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Eigen::VectorXd v(fan_out);
  for (Eigen::Index i = 0; i < fan_out; ++i) v(i) = rng.uniform(-bound, bound);
  return v;
}

Weights init(Eigen::Index p, int h1, int h2, Rng& rng, bool zero_output) {
  Weights w;
  w.w1 = glorot(p, h1, rng);
  w.b1 = glorot_bias(p, h1, rng);
  w.w2 = glorot(h1, h2, rng);
  w.b2 = glorot_bias(h1, h2, rng);
  if (zero_output) {
    w.w3 = Eigen::MatrixXd::Zero(h2, 1);
    w.b3 = Eigen::VectorXd::Zero(1);
  } else {
    w.w3 = glorot(h2, 1, rng);
    w.b3 = glorot_bias(h2, 1, rng);
  }
  return w;
}

Eigen::VectorXd forward(const Weights& w, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a1 = ((x * w.w1).rowwise() + w.b1.transpose()).cwiseMax(0.0);
  Eigen::MatrixXd a2 = ((a1 * w.w2).rowwise() + w.b2.transpose()).cwiseMax(0.0);
  return (a2 * w.w3).col(0).array() + w.b3(0);
}

double penalty(const Weights& w) { return w.w1.squaredNorm() + w.w2.squaredNorm() + w.w3.squaredNorm(); }

// 0.5 mean squared error + 0.5 l2 |W|^2 / m, and its gradient.
double loss_and_grad(const Weights& w, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2, Grads* g) {
  const auto m = static_cast<double>(x.rows());
  const Eigen::MatrixXd z1 = (x * w.w1).rowwise() + w.b1.transpose();
  const Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
  const Eigen::MatrixXd z2 = (a1 * w.w2).rowwise() + w.b2.transpose();
  const Eigen::MatrixXd a2 = z2.cwiseMax(0.0);
  const Eigen::VectorXd out = (a2 * w.w3).col(0).array() + w.b3(0);
  const Eigen::VectorXd err = out - y;
  const double loss = 0.5 * err.squaredNorm() / m + 0.5 * l2 * penalty(w) / m;
  if (g == nullptr) return loss;

  const Eigen::VectorXd d_out = err / m;
  g->w3 = a2.transpose() * d_out + (l2 / m) * w.w3;
  g->b3 = Eigen::VectorXd::Constant(1, d_out.sum());
  Eigen::MatrixXd d2 = d_out * w.w3.transpose();
  d2.array() *= (z2.array() > 0.0).cast<double>();
  g->w2 = a1.transpose() * d2 + (l2 / m) * w.w2;
  g->b2 = d2.colwise().sum().transpose();
  Eigen::MatrixXd d1 = d2 * w.w2.transpose();
  d1.array() *= (z1.array() > 0.0).cast<double>();
  g->w1 = x.transpose() * d1 + (l2 / m) * w.w1;
  g->b1 = d1.colwise().sum().transpose();
  return loss;
}

// Flat views over the six parameter blocks, in a fixed order.
template <typename W>
std::array<double*, 6> blocks(W& w, std::array<Eigen::Index, 6>& sizes) {
  sizes = {w.w1.size(), w.b1.size(), w.w2.size(), w.b2.size(), w.w3.size(), w.b3.size()};
  return {w.w1.data(), w.b1.data(), w.w2.data(), w.b2.data(), w.w3.data(), w.b3.data()};
}

struct Adam {
  Weights m, v;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;

  explicit Adam(const Weights& shape) {
    m = shape;
    m.w1.setZero();
    m.b1.setZero();
    m.w2.setZero();
    m.b2.setZero();
    m.w3.setZero();
    m.b3.setZero();
    v = m;
  }

  void step(Weights& w, Grads& g, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    const double step_size = lr * std::sqrt(c2) / c1;
    std::array<Eigen::Index, 6> sz{};
    auto pw = blocks(w, sz);
    auto pm = blocks(m, sz);
    auto pv = blocks(v, sz);
    auto pg = blocks(g, sz);
    for (std::size_t b = 0; b < 6; ++b) {
      for (Eigen::Index i = 0; i < sz[b]; ++i) {
        const double gi = pg[b][i];
        pm[b][i] = beta1 * pm[b][i] + (1.0 - beta1) * gi;
        pv[b][i] = beta2 * pv[b][i] + (1.0 - beta2) * gi * gi;
        pw[b][i] -= step_size * pm[b][i] / (std::sqrt(pv[b][i]) + eps);
      }
    }
  }
};

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows, std::size_t from,
                          std::size_t to) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(to - from), x.cols());
  for (std::size_t i = from; i < to; ++i) out.row(static_cast<Eigen::Index>(i - from)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& y, const std::vector<std::size_t>& rows, std::size_t from, std::size_t to) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(to - from));
  for (std::size_t i = from; i < to; ++i) out(static_cast<Eigen::Index>(i - from)) = y(static_cast<Eigen::Index>(rows[i]));
  return out;
}

}  // namespace

void MLP::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) {
  require(x.rows() >= 2 && x.rows() == y.size(), ErrorCode::kParameter, "mlp needs matching rows, n >= 2");
  require(lr_ > 0.0 && l2_ >= 0.0 && h1_ >= 1 && h2_ >= 1 && batch_ >= 1, ErrorCode::kParameter,
          "mlp parameters out of range");
  const auto n = static_cast<std::size_t>(x.rows());
  y_mean_ = y.mean();
  const double sd = std::sqrt((y.array() - y_mean_).square().mean());
  y_scale_ = sd > 0.0 ? sd : 1.0;
  const Eigen::VectorXd ys = (y.array() - y_mean_) / y_scale_;

  Rng rng(seed);
  w_ = init(x.cols(), h1_, h2_, rng, true);

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> train = all, valid;
  if (n >= 10 && validation_fraction_ > 0.0) {
    const auto n_valid = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(validation_fraction_ * n)));
    auto pick = rng.sample_without_replacement(n, n_valid);
    std::vector<char> is_valid(n, 0);
    for (auto v : pick) is_valid[v] = 1;
    train.clear();
    for (std::size_t i = 0; i < n; ++i) (is_valid[i] ? valid : train).push_back(i);
  }
  const Eigen::MatrixXd xv = valid.empty() ? x : take_rows(x, valid, 0, valid.size());
  const Eigen::VectorXd yv = valid.empty() ? ys : take(ys, valid, 0, valid.size());

  Adam adam(w_);
  Weights best = w_;
  double best_loss = std::numeric_limits<double>::infinity();
  int wait = 0;
  converged_ = false;
  Grads g;
  for (epochs_run_ = 0; epochs_run_ < max_epochs_;) {
    rng.shuffle(train);
    for (std::size_t from = 0; from < train.size(); from += static_cast<std::size_t>(batch_)) {
      const std::size_t to = std::min(train.size(), from + static_cast<std::size_t>(batch_));
      loss_and_grad(w_, take_rows(x, train, from, to), take(ys, train, from, to), l2_, &g);
      adam.step(w_, g, lr_);
    }
    ++epochs_run_;
    const double vl = 0.5 * (forward(w_, xv) - yv).squaredNorm() / static_cast<double>(yv.size());
    if (vl < best_loss - 1e-6) {
      best_loss = vl;
      best = w_;
      wait = 0;
    } else if (++wait >= patience_) {
      converged_ = true;
      break;
    }
  }
  w_ = best;
}

Eigen::VectorXd MLP::predict(const Eigen::MatrixXd& x) const {
  require(x.cols() == w_.w1.rows(), ErrorCode::kSchema, "mlp: column count mismatch");
  return forward(w_, x).array() * y_scale_ + y_mean_;
}

double MLP::gradient_check(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed,
                           int n_params) const {
  const Eigen::Index m = std::min<Eigen::Index>(5, x.rows());
  const Eigen::MatrixXd xb = x.topRows(m);
  // Same target scaling as fit().
  const double mean = y.mean();
  const double sd = std::sqrt((y.array() - mean).square().mean());
  const Eigen::VectorXd yb = (y.head(m).array() - mean) / (sd > 0.0 ? sd : 1.0);
  Rng rng(seed);
  Weights w = init(x.cols(), h1_, h2_, rng, false);
  Grads g;
  loss_and_grad(w, xb, yb, l2_, &g);

  std::array<Eigen::Index, 6> sz{};
  auto pw = blocks(w, sz);
  auto pg = blocks(g, sz);
  const Eigen::Index total = std::accumulate(sz.begin(), sz.end(), Eigen::Index{0});
  double worst = 0.0;
  for (int s = 0; s < n_params; ++s) {
    Eigen::Index flat = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(total)));
    std::size_t b = 0;
    while (flat >= sz[b]) flat -= sz[b++];
    double& theta = pw[b][flat];
    const double saved = theta;
    // The loss is piecewise quadratic in any single weight, so the central
    // difference is exact between ReLU kinks and a wide step only cuts
    // round-off.
    const double h = 1e-4 * std::max(1.0, std::abs(saved));
    theta = saved + h;
    const double up = loss_and_grad(w, xb, yb, l2_, nullptr);
    theta = saved - h;
    const double down = loss_and_grad(w, xb, yb, l2_, nullptr);
    theta = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = pg[b][flat];
    const double scale = std::abs(numeric) + std::abs(analytic);
    if (scale < 1e-10) continue;
    worst = std::max(worst, std::abs(numeric - analytic) / scale);
  }
  return worst;
}

nlohmann::json MLP::to_json() const {
  return {{"w1", matrix_to_json(w_.w1)}, {"b1", vector_to_json(w_.b1)}, {"w2", matrix_to_json(w_.w2)},
          {"b2", vector_to_json(w_.b2)}, {"w3", matrix_to_json(w_.w3)}, {"b3", vector_to_json(w_.b3)},
          {"y_mean", y_mean_},           {"y_scale", y_scale_},         {"epochs", epochs_run_}};
}

void MLP::from_json(const nlohmann::json& j) {
  w_.w1 = matrix_from_json(j.at("w1"));
  w_.b1 = vector_from_json(j.at("b1"));
  w_.w2 = matrix_from_json(j.at("w2"));
  w_.b2 = vector_from_json(j.at("b2"));
  w_.w3 = matrix_from_json(j.at("w3"));
  w_.b3 = vector_from_json(j.at("b3"));
  y_mean_ = j.at("y_mean").get<double>();
  y_scale_ = j.at("y_scale").get<double>();
  epochs_run_ = j.at("epochs").get<int>();
}

}  // namespace brainage::models
