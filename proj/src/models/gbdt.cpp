#include <algorithm>
#include <cmath>
#include <numeric>

#include "brainage/error.hpp"
#include "brainage/learners.hpp"
#include "presort.hpp"

namespace brainage::models {

namespace {

double l1_shrink(double g, double alpha) {
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0.0;
}

struct Candidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

}  // namespace

void GBDT::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t) {
  require(x.rows() >= 2 && x.rows() == y.size(), ErrorCode::kParameter, "gbdt needs matching rows, n >= 2");
  require(n_estimators_ >= 1 && max_depth_ >= 1 && learning_rate_ > 0.0 && reg_lambda_ >= 0.0 && reg_alpha_ >= 0.0,
          ErrorCode::kParameter, "gbdt parameters out of range");
  const auto n = static_cast<std::size_t>(x.rows());
  const auto p = static_cast<int>(x.cols());
  const auto sorted = presort(x);

  ensemble_ = TreeEnsemble{};
  ensemble_.base = y.mean();
  ensemble_.weight = 1.0;
  Eigen::VectorXd pred = Eigen::VectorXd::Constant(x.rows(), ensemble_.base);

  auto score = [&](double g, double h) {
    const double t = l1_shrink(g, reg_alpha_);
    return t * t / (h + reg_lambda_);
  };

  std::vector<int> node_of(n);
  for (int round = 0; round < n_estimators_; ++round) {
    const Eigen::VectorXd grad = pred - y;  // squared loss, unit hessian
    Tree tree;
    tree.nodes.push_back({});
    std::fill(node_of.begin(), node_of.end(), 0);
    std::vector<int> frontier{0};

    for (int depth = 0; depth <= max_depth_ && !frontier.empty(); ++depth) {
      // Sums per frontier node.
      std::vector<int> slot(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < frontier.size(); ++s) slot[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
      std::vector<double> g_sum(frontier.size(), 0.0), h_sum(frontier.size(), 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        const int s = node_of[r] >= 0 ? slot[static_cast<std::size_t>(node_of[r])] : -1;
        if (s < 0) continue;
        g_sum[static_cast<std::size_t>(s)] += grad(static_cast<Eigen::Index>(r));
        h_sum[static_cast<std::size_t>(s)] += 1.0;
      }
      for (std::size_t s = 0; s < frontier.size(); ++s) {
        auto& node = tree.nodes[static_cast<std::size_t>(frontier[s])];
        node.cover = h_sum[s];
        node.value = -learning_rate_ * l1_shrink(g_sum[s], reg_alpha_) / (h_sum[s] + reg_lambda_);
      }
      if (depth == max_depth_) break;

      std::vector<Candidate> best(frontier.size());
      std::vector<double> gl(frontier.size()), hl(frontier.size()), last(frontier.size());
      std::vector<char> seen(frontier.size());
      for (int f = 0; f < p; ++f) {
        std::fill(gl.begin(), gl.end(), 0.0);
        std::fill(hl.begin(), hl.end(), 0.0);
        std::fill(seen.begin(), seen.end(), 0);
        for (std::size_t r : sorted[static_cast<std::size_t>(f)]) {
          const int sn = node_of[r] >= 0 ? slot[static_cast<std::size_t>(node_of[r])] : -1;
          if (sn < 0) continue;
          const auto s = static_cast<std::size_t>(sn);
          const double v = x(static_cast<Eigen::Index>(r), f);
          if (seen[s] && v > last[s]) {
            const double hr = h_sum[s] - hl[s];
            if (hl[s] >= min_child_weight_ && hr >= min_child_weight_) {
              const double gain =
                  0.5 * (score(gl[s], hl[s]) + score(g_sum[s] - gl[s], hr) - score(g_sum[s], h_sum[s]));
              if (gain > best[s].gain) best[s] = {gain, f, last[s]};
            }
          }
          gl[s] += grad(static_cast<Eigen::Index>(r));
          hl[s] += 1.0;
          last[s] = v;
          seen[s] = 1;
        }
      }

      std::vector<int> next;
      for (std::size_t s = 0; s < frontier.size(); ++s) {
        if (best[s].feature < 0 || best[s].gain <= 1e-12) continue;
        const int id = frontier[s];
        const int l = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes.push_back({});
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = best[s].feature;
        node.threshold = best[s].threshold;
        node.left = l;
        node.right = l + 1;
        next.push_back(l);
        next.push_back(l + 1);
      }
      for (std::size_t r = 0; r < n; ++r) {
        const int id = node_of[r];
        if (id < 0) continue;
        const auto& node = tree.nodes[static_cast<std::size_t>(id)];
        if (node.feature < 0) {
          node_of[r] = -1;  // settled in a leaf
        } else {
          node_of[r] = x(static_cast<Eigen::Index>(r), node.feature) <= node.threshold ? node.left : node.right;
        }
      }
      frontier = std::move(next);
    }
    for (Eigen::Index r = 0; r < x.rows(); ++r) pred(r) += tree.predict(x.row(r));
    ensemble_.trees.push_back(std::move(tree));
  }
  converged_ = true;
}

}  // namespace brainage::models
