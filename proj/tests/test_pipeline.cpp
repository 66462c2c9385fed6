#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "brainage/bundle.hpp"
#include "brainage/csv.hpp"
#include "brainage/error.hpp"
#include "brainage/hash.hpp"
#include "brainage/pipeline.hpp"
#include "brainage/synth.hpp"

using namespace brainage;
using namespace brainage::pipeline;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

synth::SynthConfig corpus_config(int n) {
  synth::SynthConfig c;
  c.n_subjects = n;
  c.n_channels = 64;
  c.ec_seconds = 16.0;
  c.eo_seconds = 8.0;
  c.seed = 5;
  return c;
}

json base_config(const fs::path& corpus, const fs::path& out) {
  return {{"corpus", corpus.string()},
          {"montage", (corpus / "montage.json").string()},
          {"regions", (corpus / "regions.json").string()},
          {"variant", "12-All"},
          {"seed", 3},
          {"output", out.string()},
          {"models", {{"families", {"Lasso", "GBDT", "KNN"}}, {"budget", 5}, {"folds", 3}}},
          {"explain", {{"background_size", 5}, {"max_samples", 3}}}};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Relative path -> contents for every file below `dir`.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = read_file(e.path());
  }
  return out;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kParameter;
}

}  // namespace

TEST_CASE("summary table has one row per family and flags the best") {
  TempDir dir("brainage_test_summary");
  write_summary(dir.path / "s.csv", {{"GBDT", "12-EC", 1.7, 0.04}, {"KNN", "12-EC", 1.93, 0.07}});
  auto t = csv::read(dir.path / "s.csv");
  CHECK(t.header == std::vector<std::string>{"family", "12-EC", "12-EC_mean", "12-EC_std", "best_variant", "best_family"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][0] == "GBDT");
  CHECK(t.rows[0][1] == "1.70 ± 0.04");
  CHECK(csv::parse_double(t.rows[0][2]) == 1.7);
  CHECK(t.rows[0][5] == "1");
  CHECK(t.rows[1][5] == "0");

  // Two variants: columns follow the canonical variant order, best variant per row.
  write_summary(dir.path / "s2.csv", {{"MLP", "128-All", 2.35, 0.06},
                                      {"MLP", "12-All", 2.04, 0.08},
                                      {"SVR", "12-All", 1.74, 0.06},
                                      {"SVR", "128-All", 1.73, 0.05}});
  t = csv::read(dir.path / "s2.csv");
  CHECK(t.header[1] == "12-All");
  CHECK(t.header[4] == "128-All");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][7] == "12-All");
  CHECK(t.rows[1][7] == "128-All");
  CHECK(t.rows[0][8] == "0");
  CHECK(t.rows[1][8] == "1");

  CHECK(code_of([&] { write_summary(dir.path / "e.csv", {}); }) == ErrorCode::kEmptyDataset);
  CHECK(code_of([&] {
          write_summary(dir.path / "d.csv", {{"A", "12-EC", 1, 0}, {"A", "12-EC", 2, 0}});
        }) == ErrorCode::kSchema);
}

TEST_CASE("config is validated before any compute") {
  TempDir dir("brainage_test_config");
  synth::generate_dataset(corpus_config(2), dir.path / "corpus", 1);
  const auto out = dir.path / "out";
  const auto ok = base_config(dir.path / "corpus", out);
  CHECK_NOTHROW(ExperimentConfig::from_json(ok).validate());

  auto j = ok;
  j["regions"] = (dir.path / "missing.json").string();
  CHECK(code_of([&] { run_pipeline(ExperimentConfig::from_json(j)); }) == ErrorCode::kConfig);
  CHECK_FALSE(fs::exists(out));

  j = ok;
  j.erase("seed");
  CHECK(code_of([&] { ExperimentConfig::from_json(j); }) == ErrorCode::kConfig);
  j = ok;
  j["seed"] = -1;
  CHECK(code_of([&] { ExperimentConfig::from_json(j); }) == ErrorCode::kConfig);
  j = ok;
  j["colour"] = "red";
  CHECK(code_of([&] { ExperimentConfig::from_json(j); }) == ErrorCode::kConfig);
  j = ok;
  j["models"]["families"] = {"XGBoost"};
  CHECK(code_of([&] { ExperimentConfig::from_json(j); }) == ErrorCode::kConfig);
  j = ok;
  j["models"]["families"] = {"KNN", "KNN"};
  CHECK(code_of([&] { ExperimentConfig::from_json(j).validate(); }) == ErrorCode::kConfig);
  j = ok;
  j["models"]["budget"] = 0;
  CHECK(code_of([&] { ExperimentConfig::from_json(j).validate(); }) == ErrorCode::kConfig);
  j = ok;
  j["preprocess"] = {{"hi_hz", 200.0}};
  CHECK(code_of([&] { ExperimentConfig::from_json(j); }) == ErrorCode::kConfig);
  j = ok;
  j["report"] = {{"scatter_feature", "gamma_pow_freq_bands"}};
  CHECK(code_of([&] { ExperimentConfig::from_json(j).validate(); }) == ErrorCode::kConfig);
  j = ok;
  j["variant"] = "64-EC";
  CHECK(code_of([&] { ExperimentConfig::from_json(j); }) == ErrorCode::kConfig);
  j = ok;
  j["corpus"] = (dir.path / "out").string();
  CHECK(code_of([&] { ExperimentConfig::from_json(j).validate(); }) == ErrorCode::kConfig);

  // Relative paths resolve against the config location.
  j = ok;
  j["corpus"] = "corpus";
  j["montage"] = "corpus/montage.json";
  CHECK(ExperimentConfig::from_json(j, dir.path).corpus == dir.path / "corpus");

  ::setenv("BRAINAGE_OUTPUT_ROOT", (dir.path / "elsewhere").c_str(), 1);
  CHECK(ExperimentConfig::from_json(ok).output == dir.path / "elsewhere");
  ::unsetenv("BRAINAGE_OUTPUT_ROOT");
  CHECK(ExperimentConfig::from_json(ok).output == out);

  const auto round = ExperimentConfig::from_json(ExperimentConfig::from_json(ok).to_json());
  CHECK(round.to_json() == ExperimentConfig::from_json(ok).to_json());
}

TEST_CASE("preprocessing does not depend on the rest of the corpus") {
  TempDir dir("brainage_test_preprocess");
  auto c = corpus_config(3);
  synth::generate_dataset(c, dir.path / "all", 1);
  fs::create_directories(dir.path / "one");
  fs::copy(dir.path / "all" / "sub-0002_EC", dir.path / "one" / "sub-0002_EC");
  const auto montage = io::read_montage(dir.path / "all" / "montage.json");

  PreprocessOptions o;
  const auto all = preprocess_corpus(dir.path / "all", dir.path / "pa", montage, o, 9, 2);
  preprocess_corpus(dir.path / "one", dir.path / "po", montage, o, 9, 1);
  CHECK(all.entries.size() == 6);
  CHECK(all.n_excluded() == 0);
  CHECK(read_file(dir.path / "pa" / "sub-0002_EC" / "data.f32le") ==
        read_file(dir.path / "po" / "sub-0002_EC" / "data.f32le"));

  const auto rec = io::read_bundle(dir.path / "pa" / "sub-0002_EC");
  CHECK(rec.sampling_rate_hz == 250.0);
  CHECK(rec.n_samples() == 4000);
  CHECK(rec.n_channels() == 64);
  CHECK(fs::exists(dir.path / "pa" / "preprocess.json"));

  // Everything rejected and nothing tolerated: every recording is excluded
  // and no bundle is written.
  o.ransac_params.min_correlation = 0.999;
  o.max_rejected = 0;
  const auto none = preprocess_corpus(dir.path / "one", dir.path / "px", montage, o, 9, 1);
  CHECK(none.n_excluded() == 1);
  CHECK(io::list_bundles(dir.path / "px").empty());

  o = PreprocessOptions{};
  o.ransac = false;
  std::vector<std::string> bad;
  const auto raw = io::read_bundle(dir.path / "all" / "sub-0001_EO");
  const auto r = preprocess_recording(raw, montage, o, 1, &bad);
  CHECK(bad.empty());
  CHECK(r.n_samples() == raw.n_samples() / 2);
}

TEST_CASE("end-to-end run, caching and byte-identical reruns") {
  TempDir dir("brainage_test_run");
  synth::generate_dataset(corpus_config(50), dir.path / "corpus", 1);
  auto cfg_a = ExperimentConfig::from_json(base_config(dir.path / "corpus", dir.path / "a"));
  auto cfg_b = ExperimentConfig::from_json(base_config(dir.path / "corpus", dir.path / "b"));

  const auto m = run_pipeline(cfg_a, {false, 1});
  REQUIRE(m.at("stages").size() == stage_names().size());
  for (std::size_t i = 0; i < stage_names().size(); ++i) {
    CHECK(m["stages"][i]["name"] == stage_names()[i]);
    CHECK(m["stages"][i]["skipped"] == false);
    CHECK(m["stages"][i].contains("duration_s"));
    CHECK_FALSE(m["stages"][i]["outputs"].empty());
  }
  CHECK(m["seed"] == 3);

  for (const char* kind : {"band", "measure", "region"}) {
    const auto a = agreement::AgreementMatrix::read_csv(dir.path / "a" / "agreement" / (std::string(kind) + ".csv"),
                                                        explain::parse_grouping(kind));
    CHECK(a.models == std::vector<std::string>{"Lasso", "GBDT", "KNN"});
    CHECK(a.symmetric_unit_diagonal(0.0));
  }
  const auto fm = read_feature_csv(dir.path / "a" / "features" / "features.csv");
  CHECK(fm.n_subjects() == 50);
  CHECK(fm.n_features() == 2 * 12 * 125);
  const auto summary = csv::read(dir.path / "a" / "summary.csv");
  CHECK(summary.rows.size() == 3);

  // The explained model is the best fold's model: its error on the held-out
  // rows is the recorded fold MAE.
  const auto model = models::TrainedModel::load(dir.path / "a" / "models" / "GBDT.json");
  std::ifstream cv_in(dir.path / "a" / "models" / "GBDT.cv.json");
  const auto cv_json = json::parse(cv_in);
  const auto folds = folds_from_cv_json(cv_json, fm);
  std::vector<std::size_t> held;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (folds[i] == model.cv_fold) held.push_back(i);
  }
  const auto sub = fm.select_rows(held);
  const auto cv = models::CVResult::from_json(cv_json.at("cv"));
  CHECK(models::mean_absolute_error(Eigen::Map<const Eigen::VectorXd>(sub.ages.data(), static_cast<Eigen::Index>(sub.ages.size())),
                                    model.predict(sub)) ==
        doctest::Approx(cv.fold_mae[static_cast<std::size_t>(model.cv_fold)]).epsilon(1e-12));
  const auto shap = explain::ShapMatrix::read(dir.path / "a" / "shap", "GBDT");
  CHECK(shap.sample_ids.size() == 3);
  CHECK(shap.max_additivity_error() <= 1e-6);
  for (const auto& id : shap.sample_ids) {
    const auto it = std::find(fm.subject_ids.begin(), fm.subject_ids.end(), id);
    CHECK(folds[static_cast<std::size_t>(it - fm.subject_ids.begin())] == model.cv_fold);
  }

  // Unchanged inputs: every stage is served from the cache.
  const auto again = run_pipeline(cfg_a, {false, 1});
  for (const auto& s : again["stages"]) CHECK(s["skipped"] == true);

  // Independent run elsewhere, two workers: identical artifacts.
  run_pipeline(cfg_b, {false, 2});
  for (const char* sub_dir : {"features", "models", "shap", "agreement", "importance", "report"}) {
    CAPTURE(sub_dir);
    CHECK(tree(dir.path / "a" / sub_dir) == tree(dir.path / "b" / sub_dir));
  }
  CHECK(read_file(dir.path / "a" / "summary.csv") == read_file(dir.path / "b" / "summary.csv"));
  CHECK(tree(dir.path / "a" / "report").size() == 3 + 3 * 5);

  // A damaged output is detected and its stage reruns.
  { std::ofstream(dir.path / "a" / "report" / "agreement_band.svg") << "x"; }
  const auto repaired = run_pipeline(cfg_a, {false, 1});
  CHECK(repaired["stages"][4]["skipped"] == true);
  CHECK(repaired["stages"][5]["skipped"] == false);
  CHECK(tree(dir.path / "a" / "report") == tree(dir.path / "b" / "report"));

  // --force reruns everything and still reproduces the artifacts.
  const auto forced = run_pipeline(cfg_b, {true, 1});
  for (const auto& s : forced["stages"]) CHECK(s["skipped"] == false);
  CHECK(tree(dir.path / "a" / "agreement") == tree(dir.path / "b" / "agreement"));

  const auto rows = collect_summary({dir.path / "a"});
  CHECK(rows.size() == 3);
  CHECK(rows.front().variant == "12-All");
}

TEST_CASE("a failing stage is named and earlier artifacts are kept") {
  TempDir dir("brainage_test_fail");
  synth::generate_dataset(corpus_config(2), dir.path / "corpus", 1);
  // Truncated sample file: the corpus still lists, reading it fails.
  fs::resize_file(dir.path / "corpus" / "sub-0002_EO" / "data.f32le", 100);
  const auto cfg = ExperimentConfig::from_json(base_config(dir.path / "corpus", dir.path / "out"));
  try {
    run_pipeline(cfg);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "preprocess");
  }
  std::ifstream in(dir.path / "out" / "manifest.json");
  const auto m = json::parse(in);
  CHECK(m["failed"]["stage"] == "preprocess");
  CHECK(m["stages"].empty());
}
