#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>

#include "brainage/bundle.hpp"
#include "brainage/error.hpp"
#include "brainage/hash.hpp"
#include "brainage/parallel.hpp"
#include "brainage/pipeline.hpp"
#include "brainage/report.hpp"
#include "brainage/rng.hpp"

namespace brainage::pipeline {

namespace {

using nlohmann::json;

// Stage seeds; fixed so that adding a stage does not shift the others.
constexpr std::uint64_t kPreprocessStream = 1;
constexpr std::uint64_t kTrainStream = 3;
constexpr std::uint64_t kExplainStream = 4;

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kSchema, path.string() + ": " + e.what());
  }
}

std::string hash_path(const fs::path& p) {
  if (fs::is_directory(p)) {
    Hasher h;
    h.update_tree(p);
    return h.hex();
  }
  return hash_file(p);
}

// Relative path -> hash for every regular file below each output.
json output_hashes(const fs::path& root, const std::vector<std::string>& outputs) {
  json out = json::object();
  for (const auto& rel : outputs) {
    const auto p = root / rel;
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) out[fs::relative(f, root).generic_string()] = hash_file(f);
    } else if (fs::exists(p)) {
      out[rel] = hash_file(p);
    }
  }
  return out;
}

bool outputs_intact(const fs::path& root, const json& recorded) {
  if (!recorded.is_object() || recorded.empty()) return false;
  for (const auto& [rel, hash] : recorded.items()) {
    const auto p = root / rel;
    if (!fs::is_regular_file(p) || hash_file(p) != hash.get<std::string>()) return false;
  }
  return true;
}

fs::path resolve(const json& j, const char* key, const fs::path& base) {
  require(j.contains(key) && j.at(key).is_string(), ErrorCode::kConfig, std::string("config needs a string '") + key + "'");
  fs::path p = j.at(key).get<std::string>();
  require(!p.empty(), ErrorCode::kConfig, std::string("config '") + key + "' is empty");
  return p.is_absolute() ? p : base / p;
}

void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  require(j.is_object(), ErrorCode::kConfig, where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    require(allowed.count(k) > 0, ErrorCode::kConfig, where + ": unknown key " + k);
  }
}

template <typename T>
T number(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  require(v.is_number(), ErrorCode::kConfig, where + "." + key + " must be a number");
  if constexpr (std::is_integral_v<T>) {
    require(v.is_number_integer(), ErrorCode::kConfig, where + "." + key + " must be an integer");
  }
  return v.get<T>();
}

}  // namespace

StageError::StageError(std::string stage, const std::string& message)
    : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base) {
  only_keys(j, {"corpus", "montage", "regions", "variant", "preprocess", "models", "explain", "hypotheses", "report",
                "seed", "output"},
            "config");
  ExperimentConfig c;
  c.corpus = resolve(j, "corpus", base);
  c.montage = resolve(j, "montage", base);
  c.regions = resolve(j, "regions", base);

  require(j.contains("variant") && j.at("variant").is_string(), ErrorCode::kConfig, "config needs a 'variant'");
  try {
    c.variant = Variant::parse(j.at("variant").get<std::string>());
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, e.what());
  }

  require(j.contains("seed"), ErrorCode::kConfig, "config needs a 'seed'");
  require(j.at("seed").is_number_unsigned() || (j.at("seed").is_number_integer() && j.at("seed").get<std::int64_t>() >= 0),
          ErrorCode::kConfig, "seed must be a non-negative integer");
  c.seed = j.at("seed").get<std::uint64_t>();

  if (const char* env = std::getenv("BRAINAGE_OUTPUT_ROOT"); env && *env) {
    c.output = env;
  } else {
    c.output = resolve(j, "output", base);
  }

  if (j.contains("preprocess")) c.preprocess = PreprocessOptions::from_json(j.at("preprocess"));

  c.families = models::all_families();
  if (j.contains("models")) {
    const auto& m = j.at("models");
    only_keys(m, {"families", "budget", "folds"}, "models");
    if (m.contains("families")) {
      const auto& f = m.at("families");
      if (f.is_string() && f.get<std::string>() == "all") {
        c.families = models::all_families();
      } else {
        require(f.is_array() && !f.empty(), ErrorCode::kConfig, "models.families must be \"all\" or a list");
        c.families.clear();
        for (const auto& name : f) {
          require(name.is_string(), ErrorCode::kConfig, "models.families entries must be strings");
          try {
            c.families.push_back(models::parse_family(name.get<std::string>()));
          } catch (const Error& e) {
            fail(ErrorCode::kConfig, e.what());
          }
        }
      }
    }
    c.budget = number(m, "budget", c.budget, "models");
    c.folds = number(m, "folds", c.folds, "models");
  }

  c.explain.background_size = 20;
  if (j.contains("explain")) {
    const auto& e = j.at("explain");
    only_keys(e, {"background_size", "max_samples", "n_coalitions"}, "explain");
    c.explain.background_size = number(e, "background_size", c.explain.background_size, "explain");
    c.explain.max_samples = number(e, "max_samples", c.explain.max_samples, "explain");
    c.explain.n_coalitions = number(e, "n_coalitions", c.explain.n_coalitions, "explain");
  }

  c.hypotheses = j.contains("hypotheses") ? resolve(j, "hypotheses", base) : agreement::default_hypotheses_path();
  if (j.contains("report")) {
    const auto& r = j.at("report");
    only_keys(r, {"scatter_feature"}, "report");
    if (r.contains("scatter_feature")) {
      require(r.at("scatter_feature").is_string(), ErrorCode::kConfig, "report.scatter_feature must be a string");
      c.scatter_feature = r.at("scatter_feature").get<std::string>();
    }
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kConfig, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

json ExperimentConfig::to_json() const {
  json fams = json::array();
  for (auto f : families) fams.push_back(std::string(models::family_name(f)));
  return {{"corpus", corpus.string()},
          {"montage", montage.string()},
          {"regions", regions.string()},
          {"variant", variant.name()},
          {"preprocess", preprocess.to_json()},
          {"models", {{"families", fams}, {"budget", budget}, {"folds", folds}}},
          {"explain",
           {{"background_size", explain.background_size},
            {"max_samples", explain.max_samples},
            {"n_coalitions", explain.n_coalitions}}},
          {"hypotheses", hypotheses.string()},
          {"report", {{"scatter_feature", scatter_feature}}},
          {"seed", seed},
          {"output", output.string()}};
}

void ExperimentConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) { require(ok, ErrorCode::kConfig, msg); };
  // Reader errors become config errors naming the offending file.
  auto guarded = [](const std::string& what, const auto& fn) {
    try {
      fn();
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, what + ": " + e.what());
    }
  };
  check(fs::is_directory(corpus), "corpus directory not found: " + corpus.string());
  guarded("corpus " + corpus.string(),
          [&] { require(!io::list_bundles(corpus).empty(), ErrorCode::kEmptyDataset, "no recording bundles"); });
  check(fs::is_regular_file(montage), "montage file not found: " + montage.string());
  check(fs::is_regular_file(regions), "region file not found: " + regions.string());
  check(fs::is_regular_file(hypotheses), "hypotheses file not found: " + hypotheses.string());
  Montage m;
  guarded("montage " + montage.string(), [&] {
    m = io::read_montage(montage);
    m.validate();
  });
  guarded("regions " + regions.string(), [&] {
    const auto map = io::read_regions(regions);
    map.validate(&m);
    require(map.regions.size() >= 2, ErrorCode::kMapping, "need at least two regions");
  });
  guarded("hypotheses " + hypotheses.string(), [&] { agreement::read_hypotheses(hypotheses); });
  preprocess.validate();
  check(!families.empty(), "no model families selected");
  std::set<models::Family> unique(families.begin(), families.end());
  check(unique.size() == families.size(), "model families are listed twice");
  check(budget >= 1, "models.budget must be at least 1");
  check(folds >= 2, "models.folds must be at least 2");
  check(explain.background_size >= 1, "explain.background_size must be at least 1");
  check(explain.max_samples >= 0, "explain.max_samples must be non-negative");
  check(explain.n_coalitions >= 0, "explain.n_coalitions must be non-negative");
  guarded("report.scatter_feature", [&] { FeatureDescriptor::parse("EC_X_" + scatter_feature); });
  check(!output.empty(), "output root is empty");
}

json run_pipeline(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const fs::path root = config.output;
  fs::create_directories(root);
  const auto manifest_path = root / "manifest.json";

  json previous = json::object();
  if (fs::exists(manifest_path)) {
    try {
      previous = read_json(manifest_path);
    } catch (const Error&) {
      previous = json::object();  // unreadable manifest: nothing is cached
    }
  }
  auto previous_stage = [&](const std::string& name) -> json {
    if (!previous.contains("stages")) return json();
    for (const auto& s : previous.at("stages")) {
      if (s.value("name", "") == name) return s;
    }
    return json();
  };

  json manifest = {{"config", config.to_json()}, {"seed", config.seed}, {"stages", json::array()}};
  const auto montage = io::read_montage(config.montage);
  const auto regions = io::read_regions(config.regions);
  const int workers = std::max(options.workers, 1);

  std::vector<std::string> family_names;
  for (auto f : config.families) family_names.emplace_back(models::family_name(f));

  // Runs one stage unless its key and outputs match the previous manifest.
  auto stage = [&](const std::string& name, json params, const std::vector<fs::path>& inputs,
                   const std::vector<std::string>& outputs, const std::function<void()>& body) {
    json in = json::object();
    for (const auto& p : inputs) in[p.string()] = hash_path(p);
    Hasher key;
    key.update(name);
    key.update(params.dump());
    key.update(in.dump());
    json entry = {{"name", name}, {"key", key.hex()}, {"params", params}, {"inputs", in}};

    const auto prev = previous_stage(name);
    const bool cached = !options.force && prev.is_object() && prev.value("key", "") == key.hex() &&
                        prev.contains("outputs") && outputs_intact(root, prev.at("outputs"));
    const auto start = std::chrono::steady_clock::now();
    if (cached) {
      entry["outputs"] = prev.at("outputs");
      entry["skipped"] = true;
    } else {
      try {
        body();
      } catch (const std::exception& e) {
        manifest["failed"] = {{"stage", name}, {"error", e.what()}};
        write_json(manifest_path, manifest);
        throw StageError(name, e.what());
      }
      entry["outputs"] = output_hashes(root, outputs);
      entry["skipped"] = false;
    }
    entry["duration_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest["stages"].push_back(entry);
    write_json(manifest_path, manifest);
  };

  const auto pre_dir = root / "preprocess";
  const auto features_csv = root / "features" / "features.csv";
  const auto models_dir = root / "models";
  const auto shap_dir = root / "shap";
  const auto agreement_dir = root / "agreement";
  const auto importance_dir = root / "importance";
  const auto report_dir = root / "report";

  const auto pre_seed = derive_seed(config.seed, kPreprocessStream);
  stage("preprocess", {{"options", config.preprocess.to_json()}, {"seed", pre_seed}}, {config.corpus, config.montage},
        {"preprocess"}, [&] { preprocess_corpus(config.corpus, pre_dir, montage, config.preprocess, pre_seed, workers); });

  stage("extract", {{"variant", config.variant.name()}}, {pre_dir, config.regions}, {"features"}, [&] {
    const auto fm = extract_features(pre_dir, config.variant, regions, {}, workers);
    fs::create_directories(features_csv.parent_path());
    write_feature_csv(features_csv, fm);
  });

  const auto train_seed = derive_seed(config.seed, kTrainStream);
  stage("train",
        {{"families", family_names}, {"budget", config.budget}, {"folds", config.folds}, {"seed", train_seed}},
        {features_csv}, {"models", "summary.csv"}, [&] {
          const auto fm = read_feature_csv(features_csv);
          fs::remove_all(models_dir);
          fs::create_directories(models_dir);
          std::vector<SummaryRow> rows;
          for (std::size_t i = 0; i < config.families.size(); ++i) {
            const auto f = config.families[i];
            const auto t = train_family(f, fm, config.budget, config.folds,
                                        derive_seed(train_seed, static_cast<std::uint64_t>(f)), workers);
            t.model.save(models_dir / (family_names[i] + ".json"));
            write_json(models_dir / (family_names[i] + ".cv.json"), t.cv_json());
            rows.push_back({family_names[i], config.variant.name(), t.search.cv.mean, t.search.cv.std});
          }
          write_summary(root / "summary.csv", rows);
        });

  const auto explain_seed = derive_seed(config.seed, kExplainStream);
  json explain_params = {{"background_size", config.explain.background_size},
                         {"max_samples", config.explain.max_samples},
                         {"n_coalitions", config.explain.n_coalitions},
                         {"seed", explain_seed}};
  stage("explain", explain_params, {features_csv, models_dir}, {"shap"}, [&] {
    const auto fm = read_feature_csv(features_csv);
    fs::remove_all(shap_dir);
    for (std::size_t i = 0; i < config.families.size(); ++i) {
      const auto model = models::TrainedModel::load(models_dir / (family_names[i] + ".json"));
      const auto folds = folds_from_cv_json(read_json(models_dir / (family_names[i] + ".cv.json")), fm);
      auto opts = config.explain;
      opts.seed = derive_seed(explain_seed, static_cast<std::uint64_t>(config.families[i]));
      opts.workers = workers;
      explain_held_out(model, family_names[i], fm, folds, opts).write(shap_dir);
    }
  });

  stage("agree", {{"families", family_names}}, {features_csv, shap_dir, config.regions, config.hypotheses},
        {"agreement", "importance"}, [&] {
          const auto fm = read_feature_csv(features_csv);
          std::vector<explain::ShapMatrix> shaps;
          for (const auto& n : family_names) shaps.push_back(explain::ShapMatrix::read(shap_dir, n));
          fs::remove_all(agreement_dir);
          fs::remove_all(importance_dir);
          write_agreement(agree(shaps, fm, regions, agreement::read_hypotheses(config.hypotheses)), agreement_dir,
                          importance_dir);
        });

  stage("report", {{"scatter_feature", config.scatter_feature}},
        {agreement_dir, importance_dir, shap_dir, features_csv, config.montage, config.regions}, {"report"}, [&] {
          std::vector<std::pair<report::RenderSpec, fs::path>> jobs;
          for (const auto kind : explain::all_groupings()) {
            const std::string k(explain::to_string(kind));
            report::RenderSpec s;
            s.kind = report::Kind::kHeatmap;
            s.input = agreement_dir / (k + ".csv");
            s.title = "SHAP agreement, " + k + " grouping";
            jobs.emplace_back(s, report_dir / ("agreement_" + k + ".svg"));
          }
          for (const auto& n : family_names) {
            for (const auto kind : explain::all_groupings()) {
              const std::string k(explain::to_string(kind));
              report::RenderSpec s;
              s.kind = report::Kind::kRankedBars;
              s.input = importance_dir / (n + "_" + k + ".json");
              s.title = n + ", " + k + " importance";
              jobs.emplace_back(s, report_dir / (n + "_" + k + ".svg"));
            }
            report::RenderSpec topo;
            topo.kind = report::Kind::kTopoMap;
            topo.input = importance_dir / (n + "_region.json");
            topo.montage = config.montage;
            topo.regions = config.regions;
            topo.title = n + ", regional importance";
            jobs.emplace_back(topo, report_dir / (n + "_topo.svg"));
            report::RenderSpec scatter;
            scatter.kind = report::Kind::kShapScatter;
            scatter.input = shap_dir / (n + ".csv");
            scatter.features = features_csv;
            scatter.feature = config.scatter_feature;
            scatter.title = n + ", " + config.scatter_feature;
            jobs.emplace_back(scatter, report_dir / (n + "_scatter.svg"));
          }
          fs::remove_all(report_dir);
          fs::create_directories(report_dir);
          parallel_for(jobs.size(), static_cast<std::size_t>(workers),
                       [&](std::size_t i) { report::render_to_file(jobs[i].first, jobs[i].second); });
        });

  return manifest;
}

}  // namespace brainage::pipeline
