#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>

#include "brainage/error.hpp"
#include "brainage/explain.hpp"
#include "brainage/rng.hpp"

namespace brainage::explain {

namespace {

double log_binom(int n, int k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

// Shapley kernel weight of one coalition of size s.
double kernel_weight(int p, int s) {
  return std::exp(std::log(p - 1.0) - log_binom(p, s) - std::log(static_cast<double>(s)) -
                  std::log(static_cast<double>(p - s)));
}

struct Design {
  std::vector<std::vector<int>> masks;
  std::vector<double> weights;
};

Design enumerate_all(int p) {
  Design d;
  const std::size_t n_masks = std::size_t{1} << p;
  for (std::size_t mask = 1; mask + 1 < n_masks; ++mask) {
    std::vector<int> members;
    for (int j = 0; j < p; ++j) {
      if (mask & (std::size_t{1} << j)) members.push_back(j);
    }
    d.weights.push_back(kernel_weight(p, static_cast<int>(members.size())));
    d.masks.push_back(std::move(members));
  }
  return d;
}

std::vector<int> complement(const std::vector<int>& members, int p) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(p) - members.size());
  std::size_t k = 0;
  for (int j = 0; j < p; ++j) {
    if (k < members.size() && members[k] == j) {
      ++k;
    } else {
      out.push_back(j);
    }
  }
  return out;
}

// Adds every subset of size s of [0, p), in lexicographic order.
void add_all_of_size(int p, int s, double w, Design& d) {
  std::vector<int> idx(static_cast<std::size_t>(s));
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    d.masks.push_back(idx);
    d.weights.push_back(w);
    int i = s - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == p - s + i) --i;
    if (i < 0) break;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < s; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

Design sample_design(int p, int budget, std::uint64_t seed) {
  Design d;
  const int max_size = p / 2;  // sizes 1..ceil((p - 1) / 2)
  const int n_paired = (p - 1) / 2;
  // Kernel mass per size (pairs counted together).
  std::vector<double> mass(static_cast<std::size_t>(max_size));
  for (int s = 1; s <= max_size; ++s) {
    double m = (p - 1.0) / (static_cast<double>(s) * (p - s));
    if (s <= n_paired) m *= 2.0;
    mass[static_cast<std::size_t>(s - 1)] = m;
  }
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  for (auto& m : mass) m /= total;

  // Enumerate whole sizes while the budget covers their share.
  double left = static_cast<double>(budget);
  std::vector<double> remaining = mass;
  int n_full = 0;
  for (int s = 1; s <= max_size; ++s) {
    const double count = std::exp(log_binom(p, s)) * (s <= n_paired ? 2.0 : 1.0);
    if (left * remaining[static_cast<std::size_t>(s - 1)] / count < 1.0 - 1e-8) break;
    const double w = mass[static_cast<std::size_t>(s - 1)] / std::exp(log_binom(p, s)) / (s <= n_paired ? 2.0 : 1.0);
    const std::size_t start = d.masks.size();
    add_all_of_size(p, s, w, d);
    if (s <= n_paired) {
      const std::size_t end = d.masks.size();
      for (std::size_t i = start; i < end; ++i) {
        d.masks.push_back(complement(d.masks[i], p));
        d.weights.push_back(w);
      }
    }
    ++n_full;
    left -= count;
    const double r = remaining[static_cast<std::size_t>(s - 1)];
    for (std::size_t k = static_cast<std::size_t>(s); k < remaining.size(); ++k) remaining[k] /= (1.0 - r);
  }
  if (n_full == max_size || left < 2.0) {
    return d;
  }

  // Sample the rest in complementary pairs, sizes drawn by kernel mass.
  std::vector<double> draw(mass.begin() + n_full, mass.end());
  for (std::size_t k = 0; k < draw.size(); ++k) {
    if (static_cast<int>(k) + n_full + 1 <= n_paired) draw[k] /= 2.0;
  }
  const double draw_total = std::accumulate(draw.begin(), draw.end(), 0.0);
  std::vector<double> cdf(draw.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < draw.size(); ++k) cdf[k] = (acc += draw[k] / draw_total);

  Rng rng(seed);
  std::map<std::vector<int>, std::size_t> seen;
  const std::size_t first_sampled = d.masks.size();
  auto add = [&](std::vector<int> members) {
    const auto it = seen.find(members);
    if (it != seen.end()) {
      d.weights[it->second] += 1.0;
      return;
    }
    seen.emplace(members, d.masks.size());
    d.masks.push_back(std::move(members));
    d.weights.push_back(1.0);
  };
  int drawn = 0;
  const int target = static_cast<int>(left);
  while (drawn < target) {
    const double u = rng.uniform();
    const auto k = static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const int s = static_cast<int>(std::min(k, cdf.size() - 1)) + n_full + 1;
    auto pick = rng.sample_without_replacement(static_cast<std::size_t>(p), static_cast<std::size_t>(s));
    std::vector<int> members(pick.begin(), pick.end());
    std::sort(members.begin(), members.end());
    ++drawn;
    if (s <= n_paired) {
      auto comp = complement(members, p);
      add(std::move(members));
      add(std::move(comp));
      ++drawn;
    } else {
      add(std::move(members));
    }
  }
  // Sampled coalitions share the kernel mass of the sizes not enumerated.
  const double sampled_mass = std::accumulate(mass.begin() + n_full, mass.end(), 0.0);
  double sampled_weight = 0.0;
  for (std::size_t i = first_sampled; i < d.weights.size(); ++i) sampled_weight += d.weights[i];
  for (std::size_t i = first_sampled; i < d.weights.size(); ++i) d.weights[i] *= sampled_mass / sampled_weight;
  return d;
}

}  // namespace

KernelShap::KernelShap(PredictFn f, Eigen::MatrixXd background, int n_coalitions, std::uint64_t seed)
    : f_(std::move(f)), background_(std::move(background)) {
  p_ = static_cast<int>(background_.cols());
  require(background_.rows() >= 1 && p_ >= 1, ErrorCode::kParameter, "kernel shap needs a non-empty background");
  base_ = f_(background_).mean();
  if (p_ == 1) {
    exact_ = true;
    return;
  }
  Design d;
  if (p_ <= 14) {
    exact_ = true;
    d = enumerate_all(p_);
  } else {
    const int minimum = 2 * p_ + 2;
    const int budget = n_coalitions == 0 ? minimum : n_coalitions;
    require(budget >= minimum, ErrorCode::kParameter,
            "kernel shap needs at least 2p + 2 coalitions (" + std::to_string(minimum) + ")");
    d = sample_design(p_, budget, seed);
  }
  masks_ = std::move(d.masks);
  weights_ = Eigen::Map<const Eigen::VectorXd>(d.weights.data(), static_cast<Eigen::Index>(d.weights.size()));
  weights_ /= weights_.sum();

  // Efficiency is imposed by eliminating the last feature:
  // y - z_last * delta = sum_{j < last} (z_j - z_last) phi_j.
  const auto c = static_cast<Eigen::Index>(masks_.size());
  const int last = p_ - 1;
  design_ = Eigen::MatrixXd::Zero(c, last);
  for (Eigen::Index i = 0; i < c; ++i) {
    const auto& m = masks_[static_cast<std::size_t>(i)];
    const bool has_last = !m.empty() && m.back() == last;
    if (has_last) design_.row(i).setConstant(-1.0);
    for (int j : m) {
      if (j != last) design_(i, j) += 1.0;
    }
  }
  Eigen::MatrixXd normal = (design_.array().colwise() * weights_.array()).matrix().transpose() * design_;
  normal_.compute(normal);
  const Eigen::VectorXd diag = normal_.vectorD().cwiseAbs();
  const bool singular = normal_.info() != Eigen::Success || diag.minCoeff() <= 1e-12 * std::max(diag.maxCoeff(), 1e-300);
  if (singular) {
    damped_ = true;
    std::clog << "warning: kernel shap regression is singular; applying ridge damping 1e-8\n";
    normal.diagonal().array() += 1e-8;
    normal_.compute(normal);
  }
}

Eigen::VectorXd KernelShap::coalition_values(const Eigen::RowVectorXd& x) const {
  const Eigen::Index b = background_.rows();
  const auto c = masks_.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(c));
  // Keep the imputed batch near 4M entries.
  const std::size_t chunk = std::max<std::size_t>(1, (std::size_t{1} << 22) / static_cast<std::size_t>(b * p_));
  Eigen::MatrixXd rows;
  for (std::size_t from = 0; from < c; from += chunk) {
    const std::size_t to = std::min(c, from + chunk);
    rows.resize(static_cast<Eigen::Index>(to - from) * b, p_);
    for (std::size_t i = from; i < to; ++i) {
      auto block = rows.middleRows(static_cast<Eigen::Index>(i - from) * b, b);
      block = background_;
      for (int j : masks_[i]) block.col(j).setConstant(x(j));
    }
    const Eigen::VectorXd pred = f_(rows);
    for (std::size_t i = from; i < to; ++i) {
      out(static_cast<Eigen::Index>(i)) = pred.segment(static_cast<Eigen::Index>(i - from) * b, b).mean();
    }
  }
  return out;
}

Explanation KernelShap::explain(const Eigen::RowVectorXd& x) const {
  require(x.size() == p_, ErrorCode::kSchema, "sample width does not match the background");
  Explanation e;
  e.base = base_;
  e.prediction = f_(x)(0);
  const double delta = e.prediction - base_;
  e.phi.resize(p_);
  if (p_ == 1) {
    e.phi(0) = delta;
    return e;
  }
  Eigen::VectorXd y = coalition_values(x).array() - base_;
  const int last = p_ - 1;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const auto& m = masks_[static_cast<std::size_t>(i)];
    if (!m.empty() && m.back() == last) y(i) -= delta;
  }
  const Eigen::VectorXd rhs = design_.transpose() * (weights_.array() * y.array()).matrix();
  const Eigen::VectorXd head = normal_.solve(rhs);
  e.phi.head(last) = head;
  e.phi(last) = delta - head.sum();
  return e;
}

}  // namespace brainage::explain
