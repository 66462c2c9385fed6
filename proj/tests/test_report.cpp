#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>

#include "brainage/agreement.hpp"
#include "brainage/bundle.hpp"
#include "brainage/dataset.hpp"
#include "brainage/error.hpp"
#include "brainage/explain.hpp"
#include "brainage/report.hpp"
#include "brainage/rng.hpp"

using namespace brainage;
using namespace brainage::report;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = text.find(needle); at != std::string::npos; at = text.find(needle, at + 1)) ++n;
  return n;
}

std::vector<std::string> text_labels(const std::string& svg) {
  std::vector<std::string> out;
  const std::regex re(R"(<text[^>]*>([^<]*)</text>)");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it) {
    out.push_back((*it)[1]);
  }
  return out;
}

fs::path write_importance(const fs::path& path, explain::GroupingKind kind, std::vector<std::string> groups,
                          std::vector<double> scores) {
  explain::GroupImportance gi;
  gi.kind = kind;
  gi.groups = std::move(groups);
  gi.ranks = explain::descending_ranks(scores);
  gi.scores = std::move(scores);
  std::ofstream(path) << gi.to_json().dump(1);
  return path;
}

}  // namespace

TEST_CASE("half-to-even labels") {
  CHECK(round_half_even(0.125, 2) == "0.12");
  CHECK(round_half_even(0.135, 2) == "0.14");
  CHECK(round_half_even(0.005, 2) == "0.00");
  CHECK(round_half_even(0.015, 2) == "0.02");
  CHECK(round_half_even(0.0051, 2) == "0.01");
  CHECK(round_half_even(1.0, 2) == "1.00");
  CHECK(round_half_even(-1.0, 2) == "-1.00");
  CHECK(round_half_even(-0.125, 2) == "-0.12");
  CHECK(round_half_even(-0.004, 2) == "0.00");
  CHECK(round_half_even(0.995, 2) == "1.00");
  CHECK(round_half_even(9.995, 2) == "10.00");
  CHECK(round_half_even(2.5, 0) == "2");
  CHECK(round_half_even(3.5, 0) == "4");
  CHECK(round_half_even(123.456, 0) == "123");
  CHECK(round_half_even(1e-9, 2) == "0.00");
  CHECK(round_half_even(0.0, 3) == "0.000");
  CHECK(round_half_even(1.5e20, 1) == "150000000000000000000.0");
  CHECK_THROWS_AS(round_half_even(std::nan(""), 2), Error);

  // Integer oracle: k / 10^6 rounded to 2 places is k / 10^4 rounded half-even.
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const long k = static_cast<long>(rng.uniform_index(4'000'000)) - 2'000'000;
    const long ak = std::labs(k);
    long q = ak / 10'000;
    const long r = ak % 10'000;
    if (r > 5'000 || (r == 5'000 && q % 2 == 1)) ++q;
    char want[32];
    std::snprintf(want, sizeof want, "%s%ld.%02ld", (k < 0 && q != 0) ? "-" : "", q / 100, q % 100);
    CHECK(round_half_even(static_cast<double>(k) / 1e6, 2) == want);
  }
}

TEST_CASE("palettes") {
  CHECK(palette_color("viridis", 0.0) == "#440154");
  CHECK(palette_color("viridis", 1.0) == "#fde725");
  CHECK(palette_color("viridis", 7.0) == "#fde725");
  CHECK(palette_color("greys", 0.5) == "#808080");
  CHECK_THROWS_AS(palette_color("jet", 0.5), Error);
  CHECK(parse_kind("topo_map") == Kind::kTopoMap);
  CHECK_THROWS_AS(parse_kind("pie"), Error);
}

TEST_CASE("identity heatmap") {
  TempDir dir("brainage_test_heatmap");
  agreement::AgreementMatrix m;
  m.models = {"GBDT", "KNN", "SVR"};
  m.rho = Eigen::Matrix3d::Identity();
  m.rho(0, 1) = m.rho(1, 0) = 0.125;
  m.rho(0, 2) = m.rho(2, 0) = -0.5;
  m.degenerate.assign(3, std::vector<bool>(3, false));
  m.write_csv(dir.path / "band.csv");
  RenderSpec spec;
  spec.input = dir.path / "band.csv";
  const auto svg = render(spec);
  const auto labels = text_labels(svg);
  CHECK(std::count(labels.begin(), labels.end(), "1.00") >= 3);
  CHECK(std::count(labels.begin(), labels.end(), "0.12") == 2);
  CHECK(std::count(labels.begin(), labels.end(), "-0.50") == 2);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg == render(spec));

  render_to_file(spec, dir.path / "out" / "band.svg");
  std::ifstream in(dir.path / "out" / "band.svg");
  CHECK(std::string(std::istreambuf_iterator<char>(in), {}) == svg);

  spec.scale = ColorScale{1.0, 1.0, "viridis"};
  CHECK_THROWS_AS(render(spec), Error);
  spec.scale = ColorScale{-1.0, 1.0, "jet"};
  CHECK_THROWS_AS(render(spec), Error);
}

TEST_CASE("ranked bars are sorted and one per group") {
  TempDir dir("brainage_test_bars");
  const auto path = write_importance(dir.path / "band.json", explain::GroupingKind::kBand,
                                     {"delta", "theta", "alpha", "beta", "omega"}, {0.3, 1.25, 0.9, 0.05, 0.6});
  RenderSpec spec;
  spec.kind = Kind::kRankedBars;
  spec.input = path;
  const auto svg = render(spec);
  CHECK(count(svg, "height=\"18.00\"") == 5);
  const auto labels = text_labels(svg);
  std::vector<std::string> names;
  for (const auto& l : labels) {
    if (l == "delta" || l == "theta" || l == "alpha" || l == "beta" || l == "omega") names.push_back(l);
  }
  CHECK(names == std::vector<std::string>{"theta", "alpha", "omega", "delta", "beta"});
  CHECK(std::find(labels.begin(), labels.end(), "1.25") != labels.end());
  CHECK(std::find(labels.begin(), labels.end(), "0.05") != labels.end());

  // A heatmap CSV is not a group importance: render error, no file.
  agreement::AgreementMatrix m;
  m.models = {"A"};
  m.rho = Eigen::MatrixXd::Identity(1, 1);
  m.degenerate = {{false}};
  m.write_csv(dir.path / "m.csv");
  spec.input = dir.path / "m.csv";
  try {
    render_to_file(spec, dir.path / "bad.svg");
    FAIL("expected a render error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kRender);
  }
  CHECK_FALSE(fs::exists(dir.path / "bad.svg"));
  CHECK_FALSE(fs::exists(dir.path / "bad.svg.tmp"));
}

TEST_CASE("topographic map") {
  TempDir dir("brainage_test_topo");
  const auto montage = make_cap_montage(64);
  const auto regions = make_sector_regions(montage);
  io::write_montage(dir.path / "montage.json", montage);
  io::write_regions(dir.path / "regions.json", regions);
  std::vector<double> scores;
  for (std::size_t i = 0; i < 12; ++i) scores.push_back(0.1 * static_cast<double>(i + 1));
  RenderSpec spec;
  spec.kind = Kind::kTopoMap;
  spec.input = write_importance(dir.path / "region.json", explain::GroupingKind::kRegion, regions.names(), scores);
  spec.montage = dir.path / "montage.json";
  spec.regions = dir.path / "regions.json";
  const auto svg = render(spec);
  CHECK(count(svg, "r=\"22.00\"") == 12);
  const auto labels = text_labels(svg);
  CHECK(std::find(labels.begin(), labels.end(), "1.00") != labels.end());
  CHECK(std::find(labels.begin(), labels.end(), "0.08") != labels.end());  // 0.1 / 1.2 = 0.0833
  CHECK(std::find(labels.begin(), labels.end(), "LOccipital") != labels.end());

  auto names = regions.names();
  names.back() = "Elsewhere";
  spec.input = write_importance(dir.path / "bad.json", explain::GroupingKind::kRegion, names, scores);
  CHECK_THROWS_AS(render(spec), Error);
  spec.input = write_importance(dir.path / "band.json", explain::GroupingKind::kBand, {"delta"}, {1.0});
  CHECK_THROWS_AS(render(spec), Error);
  spec.montage.clear();
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("shap scatter") {
  TempDir dir("brainage_test_scatter");
  const auto cols = block_descriptors(State::kEyesClosed, {"LFrontal", "ROccipital"});
  FeatureMatrix fm;
  fm.descriptors = cols;
  fm.rows = Eigen::MatrixXd::Random(6, static_cast<Eigen::Index>(cols.size()));
  for (int i = 0; i < 6; ++i) {
    fm.subject_ids.push_back("s" + std::to_string(i));
    fm.ages.push_back(8.0 + i);
  }
  write_feature_csv(dir.path / "features.csv", fm);
  explain::ShapMatrix s;
  s.model = "GBDT";
  s.method = "tree";
  s.sample_ids = {"s1", "s3", "s5", "s0"};
  s.columns = fm.column_names();
  s.phi = Eigen::MatrixXd::Random(4, static_cast<Eigen::Index>(cols.size()));
  s.predictions = Eigen::VectorXd::Zero(4);
  s.write(dir.path / "shap");

  RenderSpec spec;
  spec.kind = Kind::kShapScatter;
  spec.input = dir.path / "shap" / "GBDT.csv";
  spec.features = dir.path / "features.csv";
  spec.feature = "alpha_pow_freq_bands";
  const auto svg = render(spec);
  CHECK(count(svg, "r=\"2.50\"") == 8);  // 4 samples x 2 channels
  const auto labels = text_labels(svg);
  CHECK(std::find(labels.begin(), labels.end(), "EC LFrontal") != labels.end());
  CHECK(std::find(labels.begin(), labels.end(), "EC ROccipital") != labels.end());
  CHECK(svg == render(spec));

  spec.feature = "gamma_pow_freq_bands";
  CHECK_THROWS_AS(render(spec), Error);
  spec.feature = "alpha_pow_freq_bands";
  spec.max_rows = 1;
  CHECK(count(render(spec), "r=\"2.50\"") == 4);
}
