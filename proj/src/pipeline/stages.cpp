#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "brainage/bundle.hpp"
#include "brainage/csv.hpp"
#include "brainage/error.hpp"
#include "brainage/hash.hpp"
#include "brainage/parallel.hpp"
#include "brainage/pipeline.hpp"
#include "brainage/rng.hpp"

namespace brainage::pipeline {

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::uint64_t name_stream(const std::string& name) {
  Hasher h;
  h.update(name);
  return h.value();
}

std::size_t workers_of(int workers) { return static_cast<std::size_t>(std::max(workers, 1)); }

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

void PreprocessOptions::validate() const {
  auto check = [](bool ok, const std::string& msg) { require(ok, ErrorCode::kConfig, "preprocess: " + msg); };
  check(target_rate_hz > 0.0, "target_rate_hz must be positive");
  check(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < target_rate_hz / 2.0, "need 0 < lo_hz < hi_hz < rate / 2");
  check(ransac_params.sample_fraction > 0.0 && ransac_params.sample_fraction < 1.0,
        "sample_fraction must be in (0, 1)");
  check(ransac_params.repetitions >= 1, "repetitions must be at least 1");
  check(ransac_params.min_correlation > -1.0 && ransac_params.min_correlation < 1.0,
        "min_correlation must be in (-1, 1)");
  check(ransac_params.epoch_s > 0.0, "epoch_s must be positive");
  check(ransac_params.max_bad_fraction >= 0.0 && ransac_params.max_bad_fraction < 1.0,
        "max_bad_fraction must be in [0, 1)");
  check(ransac_params.n_neighbors >= 1, "n_neighbors must be at least 1");
  check(max_rejected >= 0, "max_rejected must be non-negative");
  check(global_drop_threshold > 0.0 && global_drop_threshold < 1.0, "global_drop_threshold must be in (0, 1)");
}

nlohmann::json PreprocessOptions::to_json() const {
  return {{"target_rate_hz", target_rate_hz},
          {"lo_hz", lo_hz},
          {"hi_hz", hi_hz},
          {"ransac", ransac},
          {"sample_fraction", ransac_params.sample_fraction},
          {"repetitions", ransac_params.repetitions},
          {"min_correlation", ransac_params.min_correlation},
          {"epoch_s", ransac_params.epoch_s},
          {"max_bad_fraction", ransac_params.max_bad_fraction},
          {"n_neighbors", ransac_params.n_neighbors},
          {"max_rejected", max_rejected},
          {"global_drop", global_drop},
          {"global_drop_threshold", global_drop_threshold}};
}

PreprocessOptions PreprocessOptions::from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::kConfig, "preprocess must be an object");
  PreprocessOptions o;
  const auto known = o.to_json();
  for (const auto& [k, v] : j.items()) {
    require(known.contains(k), ErrorCode::kConfig, "preprocess: unknown key " + k);
  }
  try {
    o.target_rate_hz = get_or(j, "target_rate_hz", o.target_rate_hz);
    o.lo_hz = get_or(j, "lo_hz", o.lo_hz);
    o.hi_hz = get_or(j, "hi_hz", o.hi_hz);
    o.ransac = get_or(j, "ransac", o.ransac);
    auto& r = o.ransac_params;
    r.sample_fraction = get_or(j, "sample_fraction", r.sample_fraction);
    r.repetitions = get_or(j, "repetitions", r.repetitions);
    r.min_correlation = get_or(j, "min_correlation", r.min_correlation);
    r.epoch_s = get_or(j, "epoch_s", r.epoch_s);
    r.max_bad_fraction = get_or(j, "max_bad_fraction", r.max_bad_fraction);
    r.n_neighbors = get_or(j, "n_neighbors", r.n_neighbors);
    o.max_rejected = get_or(j, "max_rejected", o.max_rejected);
    o.global_drop = get_or(j, "global_drop", o.global_drop);
    o.global_drop_threshold = get_or(j, "global_drop_threshold", o.global_drop_threshold);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("preprocess: ") + e.what());
  }
  o.validate();
  return o;
}

std::size_t PreprocessSummary::n_excluded() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.excluded; }));
}

nlohmann::json PreprocessSummary::to_json() const {
  nlohmann::json rec = nlohmann::json::array();
  for (const auto& e : entries) {
    rec.push_back({{"bundle", e.bundle},
                   {"subject_id", e.subject_id},
                   {"state", std::string(to_string(e.state))},
                   {"rejected", e.rejected},
                   {"excluded", e.excluded}});
  }
  return {{"recordings", rec}, {"dropped", dropped}, {"n_excluded", n_excluded()}};
}

Recording preprocess_recording(const Recording& rec, const Montage& montage, const PreprocessOptions& options,
                               std::uint64_t seed, std::vector<std::string>* rejected) {
  Recording r = signal::resample(rec, options.target_rate_hz);
  r = signal::bandpass_zero_phase(r, options.lo_hz, options.hi_hz);
  std::vector<std::string> bad;
  if (options.ransac) {
    auto params = options.ransac_params;
    params.seed = seed;
    bad = signal::ransac_reject(r, montage, params);
    // Nothing left to interpolate from when every channel is bad; the
    // recording is excluded by the caller in that case.
    if (!bad.empty() && bad.size() < r.n_channels() && !signal::exclude_recording(bad.size(), options.max_rejected)) {
      r = signal::interpolate_channels(r, montage, bad, options.ransac_params.n_neighbors);
    }
  }
  if (rejected) *rejected = std::move(bad);
  return r;
}

PreprocessSummary preprocess_corpus(const fs::path& in, const fs::path& out, const Montage& montage,
                                    const PreprocessOptions& options, std::uint64_t seed, int workers) {
  options.validate();
  const auto bundles = io::list_bundles(in);
  require(!bundles.empty(), ErrorCode::kEmptyDataset, "no recording bundles below " + in.string());
  fs::create_directories(out);
  // Bundles of an earlier run would leak into extraction.
  for (const auto& old : io::list_bundles(out)) fs::remove_all(old);

  PreprocessSummary summary;
  summary.entries.resize(bundles.size());
  const bool two_pass = options.global_drop && options.ransac;

  auto process = [&](std::size_t i, const std::vector<std::string>& drop, bool write) {
    const auto rec = io::read_bundle(bundles[i]);
    auto& e = summary.entries[i];
    e.bundle = bundles[i].filename().string();
    e.subject_id = rec.subject_id;
    e.state = rec.state;
    Recording r = preprocess_recording(rec, montage, options, derive_seed(seed, name_stream(e.bundle)), &e.rejected);
    e.excluded = signal::exclude_recording(e.rejected.size(), options.max_rejected) ||
                 e.rejected.size() >= r.n_channels();
    if (!write || e.excluded) return;
    if (!drop.empty()) {
      std::vector<Eigen::Index> keep;
      std::vector<std::string> names;
      for (std::size_t c = 0; c < r.n_channels(); ++c) {
        if (std::find(drop.begin(), drop.end(), r.channel_names[c]) == drop.end()) {
          keep.push_back(static_cast<Eigen::Index>(c));
          names.push_back(r.channel_names[c]);
        }
      }
      SignalMatrix kept(static_cast<Eigen::Index>(keep.size()), r.data.cols());
      for (std::size_t c = 0; c < keep.size(); ++c) kept.row(static_cast<Eigen::Index>(c)) = r.data.row(keep[c]);
      r.data = std::move(kept);
      r.channel_names = std::move(names);
    }
    io::write_bundle(out / e.bundle, r);
  };

  parallel_for(bundles.size(), workers_of(workers), [&](std::size_t i) { process(i, {}, !two_pass); });
  if (two_pass) {
    std::map<std::string, std::size_t> counts;
    for (const auto& e : summary.entries) {
      for (const auto& c : e.rejected) ++counts[c];
    }
    summary.dropped = signal::global_drop(counts, summary.entries.size(), options.global_drop_threshold);
    parallel_for(bundles.size(), workers_of(workers), [&](std::size_t i) { process(i, summary.dropped, true); });
  }
  write_json(out / "preprocess.json", summary.to_json());
  return summary;
}

FeatureMatrix extract_features(const fs::path& preprocessed, const Variant& variant, const RegionMap& regions,
                               const features::Params& params, int workers) {
  const auto bundles = io::list_bundles(preprocessed);
  require(!bundles.empty(), ErrorCode::kEmptyDataset, "no recording bundles below " + preprocessed.string());
  const bool regional = variant.channels == 12;

  // Channels removed by a global drop leave their regions.
  RegionMap map = regions;
  const auto report = preprocessed / "preprocess.json";
  if (regional && fs::exists(report)) {
    std::ifstream in(report);
    const auto dropped = nlohmann::json::parse(in).value("dropped", std::vector<std::string>{});
    for (auto& region : map.regions) {
      std::erase_if(region.members, [&](const std::string& m) {
        return std::find(dropped.begin(), dropped.end(), m) != dropped.end();
      });
      require(!region.members.empty(), ErrorCode::kMapping, "region " + region.name + " lost every channel");
    }
  }

  const auto states = variant.states();
  std::vector<std::optional<features::RecordingFeatures>> blocks(bundles.size());
  std::vector<std::vector<std::string>> channel_names(bundles.size());
  parallel_for(bundles.size(), workers_of(workers), [&](std::size_t i) {
    const auto rec = io::read_bundle(bundles[i]);
    if (std::find(states.begin(), states.end(), rec.state) == states.end()) return;
    channel_names[i] = rec.channel_names;
    blocks[i] = features::extract_recording(regional ? signal::combine_regions(rec, map) : rec, params);
  });

  std::vector<features::RecordingFeatures> kept;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (!blocks[i]) continue;
    if (order.empty()) order = regional ? map.names() : channel_names[i];
    require(regional || channel_names[i] == order, ErrorCode::kSchema,
            bundles[i].filename().string() + " has a different channel list");
    kept.push_back(std::move(*blocks[i]));
  }
  require(!kept.empty(), ErrorCode::kEmptyDataset, "no recordings for variant " + variant.name());
  return assemble(kept, variant, order);
}

nlohmann::json TrainedFamily::cv_json() const {
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < search.points.size(); ++i) {
    points.push_back({{"hyper", search.points[i]}, {"mean", search.results[i].mean}, {"std", search.results[i].std}});
  }
  return {{"family", std::string(models::family_name(model.family))},
          {"folds", folds},
          {"best_hyper", search.best},
          {"cv", search.cv.to_json()},
          {"subjects", subject_ids},
          {"search", points}};
}

TrainedFamily train_family(models::Family family, const FeatureMatrix& fm, int budget, int folds,
                           std::uint64_t seed, int workers) {
  TrainedFamily t;
  t.folds = folds;
  t.subject_ids = fm.subject_ids;
  t.search = models::random_search(family, fm, budget, folds, seed, workers);
  const int best = t.search.cv.best_fold();
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < fm.n_subjects(); ++i) {
    if (t.search.cv.folds[i] != best) train.push_back(i);
  }
  // Same rows and seed as the search's fit for that fold: the held-out error
  // of this model is the recorded fold MAE.
  t.model = models::fit_rows(family, t.search.best, fm, train, derive_seed(seed, static_cast<std::uint64_t>(best)));
  t.model.cv_fold = best;
  return t;
}

std::vector<int> folds_from_cv_json(const nlohmann::json& cv, const FeatureMatrix& fm) {
  try {
    const auto subjects = cv.at("subjects").get<std::vector<std::string>>();
    require(subjects == fm.subject_ids, ErrorCode::kSchema, "cv file was written for different subjects");
    return models::CVResult::from_json(cv.at("cv")).folds;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("malformed cv file: ") + e.what());
  }
}

explain::ShapMatrix explain_held_out(const models::TrainedModel& model, const std::string& name,
                                     const FeatureMatrix& fm, const std::vector<int>& folds,
                                     const explain::ExplainOptions& options) {
  require(folds.size() == fm.n_subjects(), ErrorCode::kLength, "one fold per subject");
  std::vector<std::size_t> test, train;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    (model.cv_fold < 0 || folds[i] == model.cv_fold ? test : train).push_back(i);
  }
  if (model.cv_fold < 0) train = test;
  return explain::explain_model(model, name, fm, test, train, options);
}

AgreementOutputs agree(const std::vector<explain::ShapMatrix>& shaps, const FeatureMatrix& fm,
                       const RegionMap& regions, const std::vector<agreement::Hypothesis>& hypotheses) {
  require(!shaps.empty(), ErrorCode::kEmptyDataset, "no SHAP matrices to compare");
  const auto columns = fm.column_names();
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < fm.n_subjects(); ++i) row_of[fm.subject_ids[i]] = i;

  AgreementOutputs out;
  std::vector<std::string> names;
  std::vector<agreement::ModelEvidence> evidence;
  for (const auto& s : shaps) {
    require(s.columns == columns, ErrorCode::kSchema, "SHAP columns of " + s.model + " do not match the features");
    names.push_back(s.model);
    Eigen::MatrixXd values(static_cast<Eigen::Index>(s.sample_ids.size()), fm.rows.cols());
    for (std::size_t i = 0; i < s.sample_ids.size(); ++i) {
      const auto it = row_of.find(s.sample_ids[i]);
      require(it != row_of.end(), ErrorCode::kMapping, "explained subject " + s.sample_ids[i] + " has no features");
      values.row(static_cast<Eigen::Index>(i)) = fm.rows.row(static_cast<Eigen::Index>(it->second));
    }
    evidence.push_back(agreement::ModelEvidence::from_shap(s, values));
  }
  out.importance.resize(shaps.size());
  for (const auto kind : explain::all_groupings()) {
    const auto grouping = explain::Grouping::build(kind, fm.descriptors, regions);
    std::vector<explain::GroupImportance> per_model;
    for (std::size_t m = 0; m < shaps.size(); ++m) {
      per_model.push_back(explain::group_importance(shaps[m], grouping));
      out.importance[m].push_back(per_model.back());
    }
    out.matrices.push_back(agreement::agreement_matrix(names, per_model));
  }
  out.replication = agreement::evaluate_hypotheses(hypotheses, evidence, fm.descriptors, regions);
  return out;
}

void write_agreement(const AgreementOutputs& a, const fs::path& out, const fs::path& importance_dir) {
  fs::create_directories(out);
  fs::create_directories(importance_dir);
  nlohmann::json combined = nlohmann::json::object();
  for (const auto& m : a.matrices) {
    const std::string kind(explain::to_string(m.kind));
    m.write_csv(out / (kind + ".csv"));
    combined[kind] = m.to_json();
  }
  write_json(out / "agreement.json", combined);
  a.replication.write_csv(out / "replication.csv");
  write_json(out / "replication.json", a.replication.to_json());
  for (std::size_t m = 0; m < a.importance.size(); ++m) {
    for (const auto& gi : a.importance[m]) {
      write_json(importance_dir / (a.matrices.front().models[m] + "_" + std::string(explain::to_string(gi.kind)) + ".json"),
                 gi.to_json());
    }
  }
}

void write_summary(const fs::path& path, const std::vector<SummaryRow>& rows) {
  require(!rows.empty(), ErrorCode::kEmptyDataset, "no cross-validation results to summarise");
  std::vector<std::string> families, variants;
  for (const auto& r : rows) {
    if (std::find(families.begin(), families.end(), r.family) == families.end()) families.push_back(r.family);
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
  }
  // Canonical column order where the names are known.
  static const std::vector<std::string> column_order{"12-All", "12-EC", "12-EO", "128-All", "128-EC", "128-EO"};
  std::stable_sort(variants.begin(), variants.end(), [](const std::string& a, const std::string& b) {
    auto pos = [](const std::string& v) { return std::find(column_order.begin(), column_order.end(), v) - column_order.begin(); };
    return pos(a) < pos(b);
  });

  std::map<std::pair<std::string, std::string>, const SummaryRow*> cell;
  for (const auto& r : rows) {
    require(cell.emplace(std::pair{r.family, r.variant}, &r).second, ErrorCode::kSchema,
            "duplicate result for " + r.family + " on " + r.variant);
  }
  const SummaryRow* overall = &rows.front();
  for (const auto& r : rows) {
    if (r.mean < overall->mean) overall = &r;
  }

  csv::Table t;
  t.header = {"family"};
  for (const auto& v : variants) {
    t.header.push_back(v);
    t.header.push_back(v + "_mean");
    t.header.push_back(v + "_std");
  }
  t.header.push_back("best_variant");
  t.header.push_back("best_family");
  for (const auto& f : families) {
    std::vector<std::string> row{f};
    const SummaryRow* best = nullptr;
    for (const auto& v : variants) {
      const auto it = cell.find({f, v});
      if (it == cell.end()) {
        row.insert(row.end(), {"", "", ""});
        continue;
      }
      const auto& r = *it->second;
      char text[64];
      std::snprintf(text, sizeof text, "%.2f ± %.2f", r.mean, r.std);
      row.push_back(text);
      row.push_back(csv::format_double(r.mean));
      row.push_back(csv::format_double(r.std));
      if (!best || r.mean < best->mean) best = &r;
    }
    row.push_back(best->variant);
    row.push_back(f == overall->family ? "1" : "0");
    t.rows.push_back(std::move(row));
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  csv::write(path, t);
}

std::vector<SummaryRow> collect_summary(const std::vector<fs::path>& experiments) {
  std::vector<SummaryRow> rows;
  for (const auto& dir : experiments) {
    const auto manifest_path = dir / "manifest.json";
    require(fs::exists(manifest_path), ErrorCode::kIo, "no manifest.json in " + dir.string());
    std::ifstream in(manifest_path);
    const auto manifest = nlohmann::json::parse(in);
    const auto variant = manifest.at("config").at("variant").get<std::string>();
    std::vector<fs::path> files;
    if (fs::exists(dir / "models")) {
      for (const auto& e : fs::directory_iterator(dir / "models")) {
        const auto name = e.path().filename().string();
        if (name.size() > 8 && name.ends_with(".cv.json")) files.push_back(e.path());
      }
    }
    require(!files.empty(), ErrorCode::kEmptyDataset, "no cross-validation results in " + dir.string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream cin(f);
      const auto j = nlohmann::json::parse(cin);
      const auto cv = models::CVResult::from_json(j.at("cv"));
      rows.push_back({j.at("family").get<std::string>(), variant, cv.mean, cv.std});
    }
  }
  return rows;
}

}  // namespace brainage::pipeline
