#include <vector>

#include "brainage/error.hpp"
#include "brainage/explain.hpp"

namespace brainage::explain {

namespace {

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double weight = 0.0;
};

using Path = std::vector<PathElement>;
using models::Tree;

void extend(Path& path, int depth, double zero, double one, int feature) {
  path.resize(static_cast<std::size_t>(depth) + 1);
  path[static_cast<std::size_t>(depth)] = {feature, zero, one, depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    auto& cur = path[static_cast<std::size_t>(i)];
    path[static_cast<std::size_t>(i) + 1].weight += one * cur.weight * (i + 1) / (depth + 1.0);
    cur.weight = zero * cur.weight * (depth - i) / (depth + 1.0);
  }
}

void unwind(Path& path, int depth, int index) {
  const double one = path[static_cast<std::size_t>(index)].one_fraction;
  const double zero = path[static_cast<std::size_t>(index)].zero_fraction;
  double next = path[static_cast<std::size_t>(depth)].weight;
  for (int i = depth - 1; i >= 0; --i) {
    auto& cur = path[static_cast<std::size_t>(i)];
    if (one != 0.0) {
      const double tmp = cur.weight;
      cur.weight = next * (depth + 1.0) / ((i + 1.0) * one);
      next = tmp - cur.weight * zero * (depth - i) / (depth + 1.0);
    } else {
      cur.weight = cur.weight * (depth + 1.0) / (zero * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    auto& cur = path[static_cast<std::size_t>(i)];
    const auto& nxt = path[static_cast<std::size_t>(i) + 1];
    cur.feature = nxt.feature;
    cur.zero_fraction = nxt.zero_fraction;
    cur.one_fraction = nxt.one_fraction;
  }
  path.resize(static_cast<std::size_t>(depth));
}

// Total weight of the path with element `index` removed.
double unwound_sum(const Path& path, int depth, int index) {
  const double one = path[static_cast<std::size_t>(index)].one_fraction;
  const double zero = path[static_cast<std::size_t>(index)].zero_fraction;
  double next = path[static_cast<std::size_t>(depth)].weight;
  double total = 0.0;
  for (int i = depth - 1; i >= 0; --i) {
    if (one != 0.0) {
      const double tmp = next * (depth + 1.0) / ((i + 1.0) * one);
      total += tmp;
      next = path[static_cast<std::size_t>(i)].weight - tmp * zero * (depth - i) / (depth + 1.0);
    } else {
      total += path[static_cast<std::size_t>(i)].weight / zero * (depth + 1.0) / (depth - i);
    }
  }
  return total;
}

struct Walker {
  const Tree& tree;
  const Eigen::RowVectorXd& x;
  Eigen::VectorXd& phi;

  void recurse(int node, Path path, int depth, double zero, double one, int feature) {
    extend(path, depth, zero, one, feature);
    const auto& n = tree.nodes[static_cast<std::size_t>(node)];
    if (n.feature < 0) {
      for (int i = 1; i <= depth; ++i) {
        const auto& e = path[static_cast<std::size_t>(i)];
        phi(e.feature) += unwound_sum(path, depth, i) * (e.one_fraction - e.zero_fraction) * n.value;
      }
      return;
    }
    const int hot = x(n.feature) <= n.threshold ? n.left : n.right;
    const int cold = hot == n.left ? n.right : n.left;
    double in_zero = 1.0, in_one = 1.0;
    for (int k = 1; k <= depth; ++k) {
      if (path[static_cast<std::size_t>(k)].feature == n.feature) {
        in_zero = path[static_cast<std::size_t>(k)].zero_fraction;
        in_one = path[static_cast<std::size_t>(k)].one_fraction;
        unwind(path, depth, k);
        --depth;
        break;
      }
    }
    const double cover = n.cover;
    require(cover > 0.0, ErrorCode::kInvalidData, "tree node without cover");
    recurse(hot, path, depth + 1, in_zero * tree.nodes[static_cast<std::size_t>(hot)].cover / cover, in_one,
            n.feature);
    recurse(cold, path, depth + 1, in_zero * tree.nodes[static_cast<std::size_t>(cold)].cover / cover, 0.0,
            n.feature);
  }
};

double expected_value(const Tree& tree, int node) {
  const auto& n = tree.nodes[static_cast<std::size_t>(node)];
  if (n.feature < 0) return n.value;
  const double l = tree.nodes[static_cast<std::size_t>(n.left)].cover;
  const double r = tree.nodes[static_cast<std::size_t>(n.right)].cover;
  return (l * expected_value(tree, n.left) + r * expected_value(tree, n.right)) / (l + r);
}

}  // namespace

Explanation tree_shap(const models::TreeEnsemble& ensemble, const Eigen::RowVectorXd& x, int n_features) {
  require(x.size() == n_features, ErrorCode::kSchema, "sample width does not match the model");
  Explanation e;
  e.phi = Eigen::VectorXd::Zero(n_features);
  double expected = 0.0;
  for (const auto& tree : ensemble.trees) {
    require(!tree.nodes.empty(), ErrorCode::kInvalidData, "empty tree");
    expected += expected_value(tree, 0);
    if (tree.nodes.front().feature < 0) continue;
    Walker w{tree, x, e.phi};
    w.recurse(0, Path{}, 0, 1.0, 1.0, -1);
  }
  e.phi *= ensemble.weight;
  e.base = ensemble.base + ensemble.weight * expected;
  e.prediction = ensemble.predict_row(x);
  return e;
}

}  // namespace brainage::explain
