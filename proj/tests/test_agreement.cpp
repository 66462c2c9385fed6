#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "brainage/agreement.hpp"
#include "brainage/csv.hpp"
#include "brainage/error.hpp"
#include "brainage/rng.hpp"
#include "oracles.hpp"

using namespace brainage;
using namespace brainage::agreement;
using explain::GroupImportance;
using explain::GroupingKind;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed, bool ties) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = ties ? static_cast<double>(rng.uniform_index(4)) : rng.normal();
  return v;
}

GroupImportance importance(std::vector<double> scores) {
  GroupImportance gi;
  gi.kind = GroupingKind::kBand;
  gi.groups = {"delta", "theta", "alpha", "beta", "omega"};
  gi.ranks = explain::descending_ranks(scores);
  gi.scores = std::move(scores);
  return gi;
}

RegionMap region_map() {
  RegionMap m;
  for (const char* side : {"L", "R"}) {
    for (const char* r : {"Prefrontal", "Frontal", "Central", "Parietal", "Occipital", "Temporal"}) {
      m.regions.push_back({std::string(side) + r, {}});
    }
  }
  return m;
}

}  // namespace

TEST_CASE("spearman basics") {
  const std::vector<double> a{1, 2, 3, 4, 5};
  std::vector<double> rev(a.rbegin(), a.rend());
  CHECK(spearman(a, a).rho == 1.0);
  CHECK(spearman(a, rev).rho == -1.0);
  const std::vector<double> x{1, 2, 2, 4}, y{1, 3, 2, 4};
  const double want = oracle::pearson(oracle::average_ranks(x), oracle::average_ranks(y));
  CHECK(std::abs(spearman(x, y).rho - want) <= 1e-12);

  const auto flat = spearman({3, 3, 3}, {1, 2, 3});
  CHECK(flat.degenerate);
  CHECK(flat.rho == 0.0);
  CHECK_THROWS_AS(spearman({1.0}, {1.0}), Error);
  CHECK_THROWS_AS(spearman({1.0, 2.0}, {1.0, 2.0, 3.0}), Error);
  CHECK(average_ranks({10, 20, 10, 5}) == std::vector<double>{2.5, 4, 2.5, 1});
}

TEST_CASE("spearman matches the rank-then-pearson oracle") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const bool ties = seed % 2 == 0;
    const auto a = random_values(3 + seed % 17, seed, ties);
    const auto b = random_values(3 + seed % 17, seed + 1000, ties);
    const auto c = spearman(a, b);
    const auto ra = oracle::average_ranks(a), rb = oracle::average_ranks(b);
    if (c.degenerate) {
      CHECK(c.rho == 0.0);
      continue;
    }
    CHECK(std::abs(c.rho - oracle::pearson(ra, rb)) <= 1e-12);
    CHECK(std::abs(c.rho) <= 1.0);
  }
}

TEST_CASE("spearman is invariant to increasing transforms") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto a = random_values(12, seed, seed % 3 == 0);
    const auto b = random_values(12, seed + 77, false);
    std::vector<double> ta(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) ta[i] = std::exp(2.0 * a[i]) + 5.0;
    CHECK(spearman(ta, b).rho == doctest::Approx(spearman(a, b).rho).epsilon(1e-14));
  }
}

TEST_CASE("agreement matrix structure") {
  const std::vector<std::string> names{"A", "B", "C", "D"};
  const std::vector<GroupImportance> imps{importance({5, 4, 3, 2, 1}), importance({5, 4, 3, 2, 1}),
                                          importance({-5, -4, -3, -2, -1}), importance({1, 3, 2, 5, 4})};
  const auto m = agreement_matrix(names, imps);
  CHECK(m.symmetric_unit_diagonal());
  CHECK(m.rho(0, 1) == 1.0);
  CHECK(m.rho(0, 2) == -1.0);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(m.rho(i, i) == 1.0);

  // Reordering models permutes rows and columns together.
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<std::string> pn;
  std::vector<GroupImportance> pi;
  for (auto k : perm) {
    pn.push_back(names[k]);
    pi.push_back(imps[k]);
  }
  const auto pm = agreement_matrix(pn, pi);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(pm.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
            m.rho(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[j])));
    }
  }

  auto bad = importance({1, 2, 3, 4, 5});
  bad.groups.back() = "gamma";
  CHECK_THROWS_AS(agreement_matrix({"A", "B"}, {imps[0], bad}), Error);

  const auto flat = agreement_matrix({"A", "B"}, {importance({0, 0, 0, 0, 0}), imps[0]});
  CHECK(flat.degenerate[0][1]);
  CHECK(flat.rho(0, 1) == 0.0);

  const auto path = std::filesystem::temp_directory_path() / "brainage_agreement.csv";
  m.write_csv(path);
  const auto back = AgreementMatrix::read_csv(path, GroupingKind::kBand);
  CHECK(back.models == m.models);
  CHECK(back.rho == m.rho);
  std::filesystem::remove(path);
  CHECK(m.to_json().at("grouping") == "band");
}

TEST_CASE("default hypotheses file loads") {
  const auto hs = read_hypotheses(default_hypotheses_path());
  REQUIRE(hs.size() == 16);
  int planted = 0;
  for (const auto& h : hs) planted += h.planted ? 1 : 0;
  CHECK(planted == 3);
  CHECK(hypotheses_from_json(hypotheses_to_json(hs)).size() == 16);
  CHECK(hypotheses_to_json(hypotheses_from_json(hypotheses_to_json(hs))) == hypotheses_to_json(hs));

  CHECK_THROWS_AS(hypotheses_from_json(nlohmann::json::parse(
                      R"({"hypotheses":[{"id":"X","description":"d","criterion":"trend_sign","sign":"?","selector":{}}]})")),
                  Error);
  CHECK_THROWS_AS(hypotheses_from_json(nlohmann::json::parse(
                      R"({"hypotheses":[{"id":"X","description":"d","criterion":"rank_above","selector":{"bands":["alpha"]},"other":{"regions":["LFrontal"]}}]})")),
                  Error);
  CHECK_THROWS_AS(hypotheses_from_json(nlohmann::json::parse(
                      R"({"hypotheses":[{"id":"X","description":"d","criterion":"rank_top_k","k":1,"selector":{"bands":["gamma"]}}]})")),
                  Error);
}

TEST_CASE("hypothesis evaluation") {
  const std::vector<std::string> regions{"LFrontal", "RFrontal", "LOccipital", "ROccipital"};
  const auto columns = block_descriptors(State::kEyesClosed, regions);
  const auto n = columns.size();
  ModelEvidence e;
  e.model = "M";
  e.importance.assign(n, 0.01);
  e.trends.assign(n, explain::Trend{0.3, false});
  for (std::size_t j = 0; j < n; ++j) {
    const auto& c = columns[j];
    if (c.measure == "pow_freq_bands" && c.band == features::Band::kTheta) {
      e.trends[j] = {-0.9, false};
      e.importance[j] = 1.0;
    }
    if (c.measure == "pow_freq_bands" && c.band == features::Band::kAlpha && c.channel == "LOccipital") {
      e.importance[j] = 0.5;
    }
  }

  auto trend = [](std::vector<std::string> bands, int sign) {
    Hypothesis h;
    h.id = "t";
    h.criterion = Criterion::kTrendSign;
    h.sign = sign;
    h.selector.bands = std::move(bands);
    h.selector.measures = {"pow_freq_bands"};
    return h;
  };
  Hypothesis top;
  top.id = "top";
  top.criterion = Criterion::kRankTopK;
  top.k = 1;
  top.selector.bands = {"theta"};
  Hypothesis second = top;
  second.id = "second";
  second.selector.bands = {"alpha"};
  Hypothesis above;
  above.id = "above";
  above.criterion = Criterion::kRankAbove;
  above.selector.bands = {"alpha"};
  above.selector.regions = {"LOccipital", "ROccipital"};
  above.other.bands = {"alpha"};
  above.other.regions = {"LFrontal", "RFrontal"};
  Hypothesis absent = top;
  absent.id = "absent";
  absent.selector.regions = {"LTemporal"};
  Hypothesis missing = trend({"theta"}, 1);
  missing.id = "missing";
  missing.selector.measures = {"peak_frequency"};

  auto h1 = trend({"theta"}, -1);
  h1.id = "theta-";
  auto h2 = trend({"theta"}, 1);
  h2.id = "theta+";
  auto h3 = trend({"alpha"}, 1);
  h3.id = "alpha+";
  const std::vector<Hypothesis> hs{h1, h2, h3, top, second, above, absent, missing};
  const auto r = evaluate_hypotheses(hs, {e}, columns, region_map());
  REQUIRE(r.cells.size() == hs.size());
  CHECK(r.cells[0][0] == Outcome::kReplicated);
  CHECK(r.cells[1][0] == Outcome::kNotReplicated);
  CHECK(r.cells[2][0] == Outcome::kReplicated);
  CHECK(r.cells[3][0] == Outcome::kReplicated);
  CHECK(r.cells[4][0] == Outcome::kNotReplicated);
  CHECK(r.cells[5][0] == Outcome::kReplicated);
  CHECK(r.cells[6][0] == Outcome::kInapplicable);
  CHECK(r.cells[7][0] == Outcome::kInapplicable);
  CHECK(r.replicated_count("theta-") == 1);

  // Deterministic given inputs.
  CHECK(evaluate_hypotheses(hs, {e}, columns, region_map()).to_json() == r.to_json());

  // A five-region custom map has no temporal region: inapplicable.
  RegionMap five;
  for (const char* name : {"Front", "Back", "Left", "Right", "Middle"}) five.regions.push_back({name, {}});
  Hypothesis temporal = top;
  temporal.selector.regions = {"LTemporal", "RTemporal"};
  const auto cols5 = block_descriptors(State::kEyesClosed, {"Front", "Back", "Left", "Right", "Middle"});
  ModelEvidence e5{"M", std::vector<double>(cols5.size(), 1.0), std::vector<explain::Trend>(cols5.size())};
  CHECK(evaluate_hypotheses({temporal}, {e5}, cols5, five).cells[0][0] == Outcome::kInapplicable);

  // Default file: planted entries, a region-free variant and a raw-channel montage.
  const auto defaults = read_hypotheses(default_hypotheses_path());
  const auto full = evaluate_hypotheses(defaults, {e}, columns, region_map());
  CHECK(full.cells.size() == 16);
  for (const auto& row : full.cells) CHECK(row.size() == 1);

  const auto path = std::filesystem::temp_directory_path() / "brainage_replication.csv";
  r.write_csv(path);
  const auto t = csv::read(path);
  CHECK(t.header == std::vector<std::string>{"hypothesis", "M"});
  CHECK(t.rows[6][1] == "inapplicable");
  std::filesystem::remove(path);
}

TEST_CASE("model evidence from a shap matrix") {
  explain::ShapMatrix s;
  s.model = "M";
  s.phi.resize(4, 2);
  s.phi << 1, 0,  //
      2, 0,       //
      3, 0,       //
      -2, 0;
  Eigen::MatrixXd v(4, 2);
  v << 1, 1,  //
      2, 2,   //
      3, 3,   //
      -2, 4;
  const auto e = ModelEvidence::from_shap(s, v);
  CHECK(e.importance[0] == doctest::Approx(2.0));
  CHECK(e.importance[1] == 0.0);
  CHECK(e.trends[0].r == doctest::Approx(1.0));
  CHECK(e.trends[1].degenerate);
}
