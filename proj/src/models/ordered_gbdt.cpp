#include <algorithm>
#include <numeric>

#include "brainage/error.hpp"
#include "brainage/learners.hpp"
#include "brainage/rng.hpp"
#include "presort.hpp"

namespace brainage::models {

namespace {

struct Level {
  int feature;
  double threshold;
};

// Expands an oblivious tree into explicit nodes. Subtrees that received no
// training rows are pruned so every node has positive cover; rows that would
// have reached them follow the populated sibling instead.
int expand(Tree& tree, const std::vector<Level>& levels, const std::vector<std::vector<double>>& counts,
           const std::vector<double>& values, std::size_t level, std::size_t prefix) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back({});
  tree.nodes.back().cover = counts[level][prefix];
  if (level == levels.size()) {
    tree.nodes.back().value = values[prefix];
    return id;
  }
  const double cl = counts[level + 1][2 * prefix];
  const double cr = counts[level + 1][2 * prefix + 1];
  if (cl == 0.0 || cr == 0.0) {
    tree.nodes.pop_back();
    return expand(tree, levels, counts, values, level + 1, cl == 0.0 ? 2 * prefix + 1 : 2 * prefix);
  }
  const int l = expand(tree, levels, counts, values, level + 1, 2 * prefix);
  const int r = expand(tree, levels, counts, values, level + 1, 2 * prefix + 1);
  auto& node = tree.nodes[static_cast<std::size_t>(id)];
  node.feature = levels[level].feature;
  node.threshold = levels[level].threshold;
  node.left = l;
  node.right = r;
  return id;
}

}  // namespace

void OrderedGBDT::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) {
  require(x.rows() >= 2 && x.rows() == y.size(), ErrorCode::kParameter, "ordered gbdt needs matching rows, n >= 2");
  require(iterations_ >= 1 && depth_ >= 1 && depth_ <= 16 && learning_rate_ > 0.0 && l2_ >= 0.0,
          ErrorCode::kParameter, "ordered gbdt parameters out of range");
  const auto n = static_cast<std::size_t>(x.rows());
  const auto p = static_cast<int>(x.cols());
  const auto sorted = presort(x);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm);

  ensemble_ = TreeEnsemble{};
  ensemble_.base = y.mean();
  ensemble_.weight = 1.0;
  // Ordered running predictions used for gradients.
  Eigen::VectorXd ordered = Eigen::VectorXd::Constant(x.rows(), ensemble_.base);

  std::vector<std::size_t> leaf(n);
  for (int it = 0; it < iterations_; ++it) {
    const Eigen::VectorXd grad = ordered - y;
    std::fill(leaf.begin(), leaf.end(), 0);
    std::vector<Level> levels;

    for (int d = 0; d < depth_; ++d) {
      const std::size_t n_leaves = std::size_t{1} << d;
      std::vector<double> g(n_leaves, 0.0), c(n_leaves, 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        g[leaf[r]] += grad(static_cast<Eigen::Index>(r));
        c[leaf[r]] += 1.0;
      }
      auto term = [&](double gs, double cs) { return gs * gs / (cs + l2_); };
      double base_score = 0.0;
      for (std::size_t l = 0; l < n_leaves; ++l) base_score += term(g[l], c[l]);

      double best_score = base_score + 1e-12 * std::max(1.0, base_score);
      Level best{-1, 0.0};
      std::vector<double> gl(n_leaves), cl(n_leaves);
      for (int f = 0; f < p; ++f) {
        std::fill(gl.begin(), gl.end(), 0.0);
        std::fill(cl.begin(), cl.end(), 0.0);
        double score = base_score;
        const auto& order = sorted[static_cast<std::size_t>(f)];
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t r = order[k];
          const std::size_t l = leaf[r];
          score -= term(gl[l], cl[l]) + term(g[l] - gl[l], c[l] - cl[l]);
          gl[l] += grad(static_cast<Eigen::Index>(r));
          cl[l] += 1.0;
          score += term(gl[l], cl[l]) + term(g[l] - gl[l], c[l] - cl[l]);
          const double v = x(static_cast<Eigen::Index>(r), f);
          const bool boundary = k + 1 < n && x(static_cast<Eigen::Index>(order[k + 1]), f) > v;
          if (boundary && score > best_score) {
            best_score = score;
            best = {f, v};
          }
        }
      }
      if (best.feature < 0) break;
      levels.push_back(best);
      for (std::size_t r = 0; r < n; ++r) {
        leaf[r] = 2 * leaf[r] + (x(static_cast<Eigen::Index>(r), best.feature) > best.threshold ? 1 : 0);
      }
    }

    const std::size_t n_leaves = std::size_t{1} << levels.size();
    // Ordered update: example i sees only the leaf statistics of examples
    // before it in the permutation.
    std::vector<double> g_run(n_leaves, 0.0), c_run(n_leaves, 0.0);
    for (std::size_t r : perm) {
      const std::size_t l = leaf[r];
      ordered(static_cast<Eigen::Index>(r)) += -learning_rate_ * g_run[l] / (c_run[l] + l2_);
      g_run[l] += grad(static_cast<Eigen::Index>(r));
      c_run[l] += 1.0;
    }
    std::vector<double> values(n_leaves);
    for (std::size_t l = 0; l < n_leaves; ++l) values[l] = -learning_rate_ * g_run[l] / (c_run[l] + l2_);

    std::vector<std::vector<double>> counts(levels.size() + 1);
    counts[levels.size()] = c_run;
    for (std::size_t lv = levels.size(); lv-- > 0;) {
      counts[lv].assign(std::size_t{1} << lv, 0.0);
      for (std::size_t k = 0; k < counts[lv].size(); ++k) counts[lv][k] = counts[lv + 1][2 * k] + counts[lv + 1][2 * k + 1];
    }
    Tree tree;
    expand(tree, levels, counts, values, 0, 0);
    ensemble_.trees.push_back(std::move(tree));
  }
  converged_ = true;
}

}  // namespace brainage::models
