#include <algorithm>
#include <cmath>
#include <numeric>

#include "brainage/error.hpp"
#include "brainage/learners.hpp"
#include "brainage/rng.hpp"

namespace brainage::models {

namespace {

struct Builder {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd& y;
  int max_depth;
  int min_leaf;
  std::size_t m_try;
  Rng& rng;
  Tree tree;

  int build(std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    double sum = 0.0, sq = 0.0;
    for (std::size_t r : rows) {
      const double v = y(static_cast<Eigen::Index>(r));
      sum += v;
      sq += v * v;
    }
    const auto m = static_cast<double>(rows.size());
    tree.nodes[static_cast<std::size_t>(id)].cover = m;
    tree.nodes[static_cast<std::size_t>(id)].value = sum / m;

    const bool depth_ok = max_depth <= 0 || depth < max_depth;
    const bool pure = sq - sum * sum / m <= 1e-12 * std::max(1.0, sq);
    if (!depth_ok || pure || rows.size() < 2 * static_cast<std::size_t>(min_leaf)) return id;

    // Features in random order; evaluate at least m_try of them and keep
    // going until one yields a valid split.
    std::vector<int> features(static_cast<std::size_t>(x.cols()));
    std::iota(features.begin(), features.end(), 0);
    double best = sum * sum / m + 1e-12 * std::max(1.0, sq);
    int best_f = -1;
    double best_t = 0.0;
    std::vector<std::size_t> order(rows);
    for (std::size_t k = 0; k < features.size(); ++k) {
      if (k >= m_try && best_f >= 0) break;
      const std::size_t j = k + rng.uniform_index(features.size() - k);
      std::swap(features[k], features[j]);
      const int f = features[k];
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x(static_cast<Eigen::Index>(a), f) < x(static_cast<Eigen::Index>(b), f);
      });
      double left = 0.0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        left += y(static_cast<Eigen::Index>(order[i]));
        const double v = x(static_cast<Eigen::Index>(order[i]), f);
        if (!(x(static_cast<Eigen::Index>(order[i + 1]), f) > v)) continue;
        const auto nl = static_cast<double>(i + 1);
        const double nr = m - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double score = left * left / nl + (sum - left) * (sum - left) / nr;
        if (score > best) {
          best = score;
          best_f = f;
          best_t = v;
        }
      }
    }
    if (best_f < 0) return id;

    std::vector<std::size_t> lrows, rrows;
    for (std::size_t r : rows) (x(static_cast<Eigen::Index>(r), best_f) <= best_t ? lrows : rrows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(lrows, depth + 1);
    const int r = build(rrows, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_f;
    node.threshold = best_t;
    node.left = l;
    node.right = r;
    return id;
  }
};

}  // namespace

void RandomForest::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) {
  require(x.rows() >= 2 && x.rows() == y.size(), ErrorCode::kParameter, "random forest needs matching rows, n >= 2");
  require(n_estimators_ >= 1 && min_samples_leaf_ >= 1, ErrorCode::kParameter, "random forest parameters out of range");
  const auto n = static_cast<std::size_t>(x.rows());
  const auto m_try = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(x.cols()))));
  ensemble_ = TreeEnsemble{};
  ensemble_.base = 0.0;
  ensemble_.weight = 1.0 / n_estimators_;
  for (int t = 0; t < n_estimators_; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> rows;
    if (bootstrap_) {
      rows = rng.bootstrap(n);
      std::sort(rows.begin(), rows.end());
    } else {
      rows.resize(n);
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    Builder b{x, y, max_depth_, min_samples_leaf_, m_try, rng, {}};
    b.build(rows, 0);
    ensemble_.trees.push_back(std::move(b.tree));
  }
  converged_ = true;
}

}  // namespace brainage::models
