#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "brainage/error.hpp"
#include "brainage/explain.hpp"
#include "brainage/learners.hpp"
#include "brainage/rng.hpp"
#include "shap_oracles.hpp"

using namespace brainage;
using namespace brainage::explain;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = rng.normal();
  }
  return x;
}

// Smooth nonlinear test function with interactions.
double wiggle(const Eigen::RowVectorXd& z) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) s += std::sin(1.3 * z(j) + 0.2 * j) * (1.0 + 0.1 * j);
  if (z.size() >= 3) s += z(0) * z(1) - 0.5 * z(1) * z(2) * z(2);
  return s;
}

PredictFn batch(std::function<double(const Eigen::RowVectorXd&)> f) {
  return [f](const Eigen::MatrixXd& x) {
    Eigen::VectorXd out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = f(x.row(i));
    return out;
  };
}

Eigen::VectorXd targets(const Eigen::MatrixXd& x) {
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y(i) = wiggle(x.row(i));
  return y;
}

RegionMap twelve_regions() {
  RegionMap m;
  for (const char* name : {"LPF", "RPF", "LF", "RF", "LC", "RC", "LP", "RP", "LO", "RO", "LT", "RT"}) {
    m.regions.push_back({name, {std::string(name) + "_a", std::string(name) + "_b"}});
  }
  return m;
}

std::vector<std::string> region_names() { return twelve_regions().names(); }

}  // namespace

TEST_CASE("enumeration oracle basics") {
  const Eigen::MatrixXd bg = gaussian(7, 1, 1);
  const Eigen::RowVectorXd x = Eigen::RowVectorXd::Constant(1, 0.7);
  auto f = batch([](const Eigen::RowVectorXd& z) { return std::exp(z(0)); });
  const Eigen::VectorXd phi = exact_shap_enumeration(f, bg, x);
  CHECK(std::abs(phi(0) - (std::exp(0.7) - f(bg).mean())) <= 1e-12);

  // Symmetric model with identical inputs.
  auto sym = batch([](const Eigen::RowVectorXd& z) { return z(0) + z(1) + z(0) * z(1); });
  const Eigen::MatrixXd bg2 = Eigen::MatrixXd::Zero(3, 2);
  const Eigen::VectorXd s = exact_shap_enumeration(sym, bg2, Eigen::RowVector2d(1.5, 1.5));
  CHECK(std::abs(s(0) - s(1)) <= 1e-12);

  const Eigen::MatrixXd bg5 = gaussian(4, 5, 2);
  const Eigen::RowVectorXd x5 = gaussian(1, 5, 3);
  auto g = batch(wiggle);
  const Eigen::VectorXd e = exact_shap_enumeration(g, bg5, x5);
  CHECK(std::abs(e.sum() - (wiggle(x5) - g(bg5).mean())) <= 1e-12);

  CHECK_THROWS_AS(exact_shap_enumeration(g, gaussian(2, 13, 4), gaussian(1, 13, 5)), Error);
}

TEST_CASE("exhaustive kernel shap matches the permutation oracle") {
  int cases = 0;
  for (int p = 2; p <= 8; ++p) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const Eigen::MatrixXd bg = gaussian(6, p, 100 + seed);
      const Eigen::RowVectorXd x = gaussian(1, p, 200 + seed);
      KernelShap k(batch(wiggle), bg, 0, seed);
      REQUIRE(k.exact());
      const auto e = k.explain(x);
      const Eigen::VectorXd want =
          oracle::permutation_shapley(p, [&](std::uint32_t m) { return oracle::marginal_value(wiggle, bg, x, m); });
      CHECK((e.phi - want).cwiseAbs().maxCoeff() <= 1e-6);
      CHECK(std::abs(e.base + e.phi.sum() - e.prediction) <= 1e-9);
      ++cases;
    }
  }
  CHECK(cases >= 20);
}

TEST_CASE("exhaustive kernel shap on a tree ensemble matches enumeration") {
  const Eigen::MatrixXd x = gaussian(80, 8, 7);
  models::GBDT gbdt(15, 0.3, 3, 1.0, 0.0);
  gbdt.fit(x, targets(x), 0);
  auto f = [&](const Eigen::MatrixXd& m) { return gbdt.predict(m); };
  const Eigen::MatrixXd bg = x.topRows(10);
  KernelShap k(f, bg, 0, 1);
  for (int i = 0; i < 3; ++i) {
    const Eigen::RowVectorXd s = x.row(20 + i);
    CHECK((k.explain(s).phi - exact_shap_enumeration(f, bg, s)).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("kernel shap on a linear model recovers w (x - mean)") {
  const int p = 6;
  Eigen::VectorXd w(p);
  w << 1.5, -2.0, 0.0, 0.3, 4.0, -0.7;
  auto f = [&](const Eigen::MatrixXd& m) -> Eigen::VectorXd { return (m * w).array() + 3.0; };
  const Eigen::MatrixXd bg = gaussian(20, p, 11);
  const Eigen::RowVectorXd x = gaussian(1, p, 12);
  const auto e = KernelShap(f, bg, 0, 0).explain(x);
  const Eigen::RowVectorXd mean = bg.colwise().mean();
  for (int j = 0; j < p; ++j) CHECK(std::abs(e.phi(j) - w(j) * (x(j) - mean(j))) <= 1e-6);
  CHECK(std::abs(e.phi(2)) <= 1e-12);

  const auto l = linear_shap(w, 3.0, mean, x);
  CHECK((l.phi - e.phi).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(std::abs(l.base + l.phi.sum() - l.prediction) <= 1e-12);

  // Sampled design: a linear game is fitted exactly by any full-rank design.
  const int q = 30;
  Eigen::VectorXd wq = Eigen::VectorXd::LinSpaced(q, -1.0, 2.0);
  auto fq = [&](const Eigen::MatrixXd& m) -> Eigen::VectorXd { return m * wq; };
  const Eigen::MatrixXd bgq = gaussian(5, q, 13);
  const Eigen::RowVectorXd xq = gaussian(1, q, 14);
  // The minimum budget can leave a feature out of every sampled coalition;
  // only efficiency is guaranteed then.
  const auto minimal = KernelShap(fq, bgq, 0, 3).explain(xq);
  CHECK(std::abs(minimal.base + minimal.phi.sum() - minimal.prediction) <= 1e-9);
  KernelShap kq(fq, bgq, 400, 3);
  CHECK_FALSE(kq.exact());
  REQUIRE_FALSE(kq.damped());
  const auto eq = kq.explain(xq);
  const Eigen::RowVectorXd mq = bgq.colwise().mean();
  for (int j = 0; j < q; ++j) CHECK(std::abs(eq.phi(j) - wq(j) * (xq(j) - mq(j))) <= 1e-6);
}

TEST_CASE("constant model has zero attributions") {
  auto f = [](const Eigen::MatrixXd& m) -> Eigen::VectorXd { return Eigen::VectorXd::Constant(m.rows(), 4.2); };
  const auto e = KernelShap(f, gaussian(5, 4, 21), 0, 0).explain(gaussian(1, 4, 22));
  CHECK(e.phi.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(e.base == doctest::Approx(4.2));
}

TEST_CASE("sampled kernel shap: efficiency, dummy and variance") {
  const int p = 20;
  // Feature 7 is ignored by the model.
  auto g = [](const Eigen::RowVectorXd& z) {
    Eigen::RowVectorXd u = z;
    u(7) = 0.0;
    return wiggle(u);
  };
  auto f = batch(g);
  const Eigen::MatrixXd bg = gaussian(8, p, 31);
  const Eigen::RowVectorXd x = gaussian(1, p, 32);
  CHECK_THROWS_AS(KernelShap(f, bg, 2 * p, 0), Error);

  auto spread = [&](int n_coalitions) {
    std::vector<Eigen::VectorXd> runs;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      KernelShap k(f, bg, n_coalitions, seed);
      const auto e = k.explain(x);
      CHECK(std::abs(e.base + e.phi.sum() - e.prediction) <= 1e-9);
      CHECK(std::abs(e.phi(7)) <= 0.05);
      runs.push_back(e.phi);
    }
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    for (const auto& r : runs) mean += r;
    mean /= 20.0;
    double var = 0.0;
    for (const auto& r : runs) var += (r - mean).squaredNorm();
    return std::sqrt(var / (20.0 * p));
  };
  const double s1 = spread(200);
  const double s2 = spread(400);
  const double s3 = spread(800);
  CHECK(s2 < s1);
  CHECK(s3 < s2);
}

TEST_CASE("tree shap matches the cover-weighted enumeration oracle") {
  int cases = 0;
  for (int p = 3; p <= 8; ++p) {
    const Eigen::MatrixXd x = gaussian(60, p, 40 + static_cast<std::uint64_t>(p));
    const Eigen::VectorXd y = targets(x);
    models::GBDT gbdt(6, 0.3, 3, 1.0, 0.0);
    models::RandomForest rf(4, 4, 2, true);
    models::OrderedGBDT ob(5, 0.3, 3, 1.0);
    gbdt.fit(x, y, 1);
    rf.fit(x, y, 2);
    ob.fit(x, y, 3);
    for (const models::TreeModel* m : std::vector<const models::TreeModel*>{&gbdt, &rf, &ob}) {
      for (int i = 0; i < 2; ++i) {
        const Eigen::RowVectorXd s = gaussian(1, p, 500 + static_cast<std::uint64_t>(cases));
        const auto e = tree_shap(m->ensemble(), s, p);
        const Eigen::VectorXd want = oracle::permutation_shapley(
            p, [&](std::uint32_t mask) { return oracle::ensemble_value(m->ensemble(), s, mask); });
        CHECK((e.phi - want).cwiseAbs().maxCoeff() <= 1e-6);
        CHECK(std::abs(e.base - oracle::ensemble_value(m->ensemble(), s, 0)) <= 1e-9);
        CHECK(std::abs(e.base + e.phi.sum() - e.prediction) <= 1e-9);
        ++cases;
      }
    }
  }
  CHECK(cases >= 20);
}

TEST_CASE("tree shap on a stump and ensemble additivity") {
  models::TreeEnsemble stump;
  models::Tree t;
  t.nodes = {{2, 0.5, 1, 2, 0.0, 10.0}, {-1, 0, -1, -1, 1.0, 4.0}, {-1, 0, -1, -1, 3.0, 6.0}};
  stump.trees.push_back(t);
  const Eigen::RowVectorXd x = (Eigen::RowVectorXd(4) << 0.0, 9.0, 0.2, -1.0).finished();
  const auto e = tree_shap(stump, x, 4);
  CHECK(e.base == doctest::Approx(2.2));
  CHECK(e.phi(2) == doctest::Approx(1.0 - 2.2));
  CHECK(e.phi(0) == 0.0);
  CHECK(e.phi(1) == 0.0);
  CHECK(e.phi(3) == 0.0);

  const Eigen::MatrixXd xs = gaussian(50, 6, 61);
  models::GBDT gbdt(10, 0.2, 3, 1.0, 0.0);
  gbdt.fit(xs, targets(xs), 0);
  const auto& ens = gbdt.ensemble();
  const Eigen::RowVectorXd s = xs.row(3);
  const auto whole = tree_shap(ens, s, 6);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(6);
  for (const auto& tree : ens.trees) {
    models::TreeEnsemble one;
    one.trees.push_back(tree);
    one.base = 0.0;
    one.weight = ens.weight;
    sum += tree_shap(one, s, 6).phi;
  }
  CHECK((whole.phi - sum).cwiseAbs().maxCoeff() <= 1e-9);

  // Dummy: features never split on get exactly zero.
  const auto used = ens.used_features();
  const std::set<int> used_set(used.begin(), used.end());
  for (int j = 0; j < 6; ++j) {
    if (!used_set.count(j)) CHECK(whole.phi(j) == 0.0);
  }
}

TEST_CASE("groupings cover every column once") {
  const auto cols = block_descriptors(State::kEyesClosed, region_names());
  const auto regions = twelve_regions();
  const auto band = Grouping::build(GroupingKind::kBand, cols, regions);
  const auto measure = Grouping::build(GroupingKind::kMeasure, cols, regions);
  const auto region = Grouping::build(GroupingKind::kRegion, cols, regions);
  CHECK(band.groups.size() == 5);
  CHECK(measure.groups.size() == 19);
  CHECK(region.groups.size() == 12);
  for (const auto* g : {&band, &measure, &region}) {
    REQUIRE(g->assignment.size() == cols.size());
    std::vector<int> count(g->groups.size(), 0);
    for (int a : g->assignment) ++count[static_cast<std::size_t>(a)];
    for (int c : count) CHECK(c > 0);
  }

  // 128-style channel names resolve through the region map.
  const auto raw = block_descriptors(State::kEyesOpen, {"LF_a", "RT_b"});
  const auto rg = Grouping::build(GroupingKind::kRegion, raw, regions);
  CHECK(rg.groups[static_cast<std::size_t>(rg.assignment.front())] == "LF");
  CHECK(rg.groups[static_cast<std::size_t>(rg.assignment.back())] == "RT");
  CHECK_THROWS_AS(Grouping::build(GroupingKind::kRegion, block_descriptors(State::kEyesOpen, {"Cz"}), regions), Error);
  CHECK(parse_grouping("measure") == GroupingKind::kMeasure);
}

TEST_CASE("group importance arithmetic and ranks") {
  ShapMatrix s;
  s.phi.resize(2, 3);
  s.phi << 0.4, -0.1, 1.0,   //
      -0.2, 0.3, -1.0;
  Grouping g;
  g.kind = GroupingKind::kMeasure;
  g.groups = {"a", "b"};
  g.assignment = {0, 0, 1};
  const auto gi = group_importance(s, g);
  CHECK(gi.scores[0] == doctest::Approx(0.5));
  CHECK(gi.scores[1] == doctest::Approx(1.0));
  CHECK(gi.ranks == std::vector<double>{2.0, 1.0});
  CHECK(gi.rank_of("b") == 1.0);

  // Sum per sample then mean over samples gives the same scalar.
  double alt = 0.0;
  for (int i = 0; i < 2; ++i) alt += std::abs(s.phi(i, 0)) + std::abs(s.phi(i, 1));
  CHECK(gi.scores[0] == doctest::Approx(alt / 2.0));

  ShapMatrix zero;
  zero.phi = Eigen::MatrixXd::Zero(3, 5);
  Grouping five;
  five.groups = {"a", "b", "c", "d", "e"};
  five.assignment = {0, 1, 2, 3, 4};
  CHECK(group_importance(zero, five).ranks == std::vector<double>(5, 3.0));
  CHECK(descending_ranks({3.0, 1.0, 3.0, 0.5}) == std::vector<double>{1.5, 3.0, 1.5, 4.0});

  ShapMatrix empty;
  empty.phi.resize(0, 3);
  CHECK_THROWS_AS(group_importance(empty, g), Error);
  CHECK(GroupImportance::from_json(gi.to_json()).to_json() == gi.to_json());
}

TEST_CASE("group importance is invariant to column order") {
  const auto cols = block_descriptors(State::kEyesClosed, region_names());
  const auto regions = twelve_regions();
  ShapMatrix s;
  s.phi = gaussian(6, static_cast<Eigen::Index>(cols.size()), 71);
  std::vector<std::size_t> perm(cols.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(72);
  rng.shuffle(perm);
  ShapMatrix t;
  t.phi.resize(s.phi.rows(), s.phi.cols());
  std::vector<FeatureDescriptor> shuffled;
  for (std::size_t j = 0; j < perm.size(); ++j) {
    t.phi.col(static_cast<Eigen::Index>(j)) = s.phi.col(static_cast<Eigen::Index>(perm[j]));
    shuffled.push_back(cols[perm[j]]);
  }
  for (GroupingKind k : all_groupings()) {
    const auto a = group_importance(s, Grouping::build(k, cols, regions));
    const auto b = group_importance(t, Grouping::build(k, shuffled, regions));
    for (std::size_t i = 0; i < a.scores.size(); ++i) CHECK(a.scores[i] == doctest::Approx(b.scores[i]).epsilon(1e-12));
    CHECK(a.ranks == b.ranks);
  }
}

TEST_CASE("signed feature trend") {
  const Eigen::MatrixXd x = gaussian(30, 3, 81);
  Eigen::VectorXd w(3);
  w << 2.0, -0.5, 0.0;
  ShapMatrix s;
  const Eigen::RowVectorXd mean = x.colwise().mean();
  s.phi.resize(30, 3);
  for (int i = 0; i < 30; ++i) s.phi.row(i) = linear_shap(w, 0.0, mean, x.row(i)).phi.transpose();
  Eigen::MatrixXd values = x;
  values.col(2).setConstant(1.0);
  const auto t = signed_feature_trend(s, values);
  CHECK(t[0].r == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(t[1].r == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(t[2].degenerate);
  CHECK(t[2].r == 0.0);

  ShapMatrix small;
  small.phi = Eigen::MatrixXd::Zero(2, 3);
  CHECK_THROWS_AS(signed_feature_trend(small, Eigen::MatrixXd::Zero(2, 3)), Error);
}

TEST_CASE("shap matrix csv and sidecar round trip") {
  ShapMatrix s;
  s.model = "GBDT";
  s.method = "tree";
  s.sample_ids = {"a", "b"};
  s.columns = {"EC_LF_alpha_mean", "EC_LF_theta_std"};
  s.phi = gaussian(2, 2, 91);
  s.predictions = Eigen::Vector2d(1.0 / 3.0, 2.5);
  s.base_value = 0.1;
  s.seed = 5;
  const auto dir = std::filesystem::temp_directory_path() / "brainage_test_shap";
  s.write(dir);
  const auto back = ShapMatrix::read(dir, "GBDT");
  CHECK(back.phi == s.phi);
  CHECK(back.predictions == s.predictions);
  CHECK(back.columns == s.columns);
  CHECK(back.sample_ids == s.sample_ids);
  CHECK(back.base_value == s.base_value);
  std::filesystem::remove_all(dir);
}

TEST_CASE("explain_model picks the method per family and stays additive") {
  const auto regions = twelve_regions();
  const auto cols = block_descriptors(State::kEyesClosed, {"LF"});  // 125 columns
  Rng rng(101);
  FeatureMatrix fm;
  fm.descriptors = cols;
  fm.rows = gaussian(60, static_cast<Eigen::Index>(cols.size()), 102);
  // Age follows the theta-band columns only.
  std::vector<std::size_t> theta;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j].band == features::Band::kTheta) theta.push_back(j);
  }
  for (Eigen::Index i = 0; i < 60; ++i) {
    double a = 11.0;
    for (std::size_t k = 0; k < 4; ++k) a += 1.5 * fm.rows(i, static_cast<Eigen::Index>(theta[k]));
    fm.subject_ids.push_back("s" + std::to_string(i));
    fm.ages.push_back(a + 0.1 * rng.normal());
  }
  std::vector<std::size_t> train(45), test(15);
  std::iota(train.begin(), train.end(), std::size_t{0});
  std::iota(test.begin(), test.end(), std::size_t{45});
  ExplainOptions opt;
  opt.background_size = 10;
  opt.max_samples = 5;
  opt.seed = 3;
  const auto band = Grouping::build(GroupingKind::kBand, cols, regions);

  struct Case {
    models::Family family;
    models::Hyper hyper;
    std::string method;
  };
  for (const auto& c : std::vector<Case>{{models::Family::kLasso, {{"alpha", 0.05}}, "linear"},
                                         {models::Family::kGBDT, {{"n_estimators", 30}}, "tree"},
                                         {models::Family::kKNN, {}, "kernel"}}) {
    CAPTURE(models::family_name(c.family));
    const auto m = models::fit_rows(c.family, c.hyper, fm, train, 1);
    const auto s = explain_model(m, std::string(models::family_name(c.family)), fm, test, train, opt);
    CHECK(s.method == c.method);
    CHECK(s.phi.rows() == 5);
    CHECK(s.max_additivity_error() <= 1e-6);
    // Tree output is in label-index units; others in years.
    Eigen::MatrixXd rows(5, fm.rows.cols());
    for (int i = 0; i < 5; ++i) rows.row(i) = fm.rows.row(static_cast<Eigen::Index>(test[static_cast<std::size_t>(i)]));
    CHECK((s.predictions - m.predict_raw(rows)).cwiseAbs().maxCoeff() <= 1e-9);
    if (c.family != models::Family::kKNN) CHECK(group_importance(s, band).rank_of("theta") == 1.0);
    // Same inputs, same matrix.
    const auto again = explain_model(m, "x", fm, test, train, opt);
    CHECK(again.phi == s.phi);
  }
}
