#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "brainage/agreement.hpp"
#include "brainage/dataset.hpp"
#include "brainage/explain.hpp"
#include "brainage/models.hpp"
#include "brainage/signal.hpp"

namespace brainage::pipeline {

namespace fs = std::filesystem;

struct PreprocessOptions {
  double target_rate_hz = signal::kTargetRateHz;
  double lo_hz = signal::kPreprocessLowHz;
  double hi_hz = signal::kPreprocessHighHz;
  bool ransac = true;
  signal::RansacParams ransac_params;  // seed is ignored, derived per recording
  int max_rejected = signal::kDefaultMaxRejected;
  bool global_drop = false;
  double global_drop_threshold = 0.125;

  void validate() const;  // throws kConfig
  nlohmann::json to_json() const;
  static PreprocessOptions from_json(const nlohmann::json& j);  // missing keys keep defaults
};

struct PreprocessEntry {
  std::string bundle;  // directory name in the corpus
  std::string subject_id;
  State state = State::kEyesClosed;
  std::vector<std::string> rejected;
  bool excluded = false;
};

struct PreprocessSummary {
  std::vector<PreprocessEntry> entries;
  std::vector<std::string> dropped;  // global drop, empty unless enabled

  std::size_t n_excluded() const;
  nlohmann::json to_json() const;
};

// Resample, band-pass, RANSAC, interpolation of the rejected channels.
// `rejected` receives the RANSAC result; the caller decides on exclusion.
Recording preprocess_recording(const Recording& rec, const Montage& montage, const PreprocessOptions& options,
                               std::uint64_t seed, std::vector<std::string>* rejected = nullptr);

// Every bundle below `in` is processed and written to `out/<bundle name>`;
// excluded recordings are not written. The per-recording seed is derived
// from `seed` and the bundle name, so it does not depend on the corpus
// composition. Writes `out/preprocess.json`.
PreprocessSummary preprocess_corpus(const fs::path& in, const fs::path& out, const Montage& montage,
                                    const PreprocessOptions& options, std::uint64_t seed, int workers = 1);

// Streams the preprocessed bundles through region averaging (12-channel
// variants) and extraction without holding the corpus in memory.
FeatureMatrix extract_features(const fs::path& preprocessed, const Variant& variant, const RegionMap& regions,
                               const features::Params& params = {}, int workers = 1);

// Random search, then a refit on the training rows of the best fold so that
// the held-out fold stays unseen for explanation.
struct TrainedFamily {
  models::TrainedModel model;
  models::SearchResult search;
  int folds = 3;
  std::vector<std::string> subject_ids;  // row order the folds refer to

  nlohmann::json cv_json() const;  // {family, folds, best_hyper, cv, search}
};

TrainedFamily train_family(models::Family family, const FeatureMatrix& fm, int budget, int folds,
                           std::uint64_t seed, int workers = 1);

// Fold assignment of `fm` recorded in a cv JSON written by train.
std::vector<int> folds_from_cv_json(const nlohmann::json& cv, const FeatureMatrix& fm);

// Held-out rows of the model's fold; background drawn from the other rows.
explain::ShapMatrix explain_held_out(const models::TrainedModel& model, const std::string& name,
                                     const FeatureMatrix& fm, const std::vector<int>& folds,
                                     const explain::ExplainOptions& options);

struct AgreementOutputs {
  std::vector<agreement::AgreementMatrix> matrices;  // band, measure, region
  std::vector<std::vector<explain::GroupImportance>> importance;  // model x grouping
  agreement::ReplicationMatrix replication;
};

// SHAP matrices (one per model, same columns) to importances, agreement
// matrices and the hypothesis outcomes.
AgreementOutputs agree(const std::vector<explain::ShapMatrix>& shaps, const FeatureMatrix& fm,
                       const RegionMap& regions, const std::vector<agreement::Hypothesis>& hypotheses);

// Writes <out>/<kind>.csv, <out>/agreement.json, <out>/replication.csv and
// <out>/replication.json, plus <importance_dir>/<model>_<kind>.json.
void write_agreement(const AgreementOutputs& a, const fs::path& out, const fs::path& importance_dir);

// MAE table: one row per family, a "mean ± std" cell and numeric
// mean/std columns per variant, the variant with the lowest mean MAE for the
// family, and a flag on the family with the lowest mean MAE overall.
struct SummaryRow {
  std::string family;
  std::string variant;
  double mean = 0.0;
  double std = 0.0;
};
void write_summary(const fs::path& path, const std::vector<SummaryRow>& rows);
// Collects models/<family>.cv.json of one or more experiment directories.
std::vector<SummaryRow> collect_summary(const std::vector<fs::path>& experiments);

struct ExperimentConfig {
  fs::path corpus;
  fs::path montage;
  fs::path regions;
  Variant variant;
  PreprocessOptions preprocess;
  std::vector<models::Family> families;
  int budget = 10;
  int folds = 3;
  explain::ExplainOptions explain;  // seed and workers are set by the runner
  fs::path hypotheses;
  std::string scatter_feature = "alpha_pow_freq_bands";
  std::uint64_t seed = 0;
  fs::path output;

  // Relative paths resolve against `base`. BRAINAGE_OUTPUT_ROOT, when set,
  // replaces the output root. Throws kConfig.
  static ExperimentConfig from_json(const nlohmann::json& j, const fs::path& base = {});
  static ExperimentConfig load(const fs::path& path);
  nlohmann::json to_json() const;
  // Every referenced file exists and parses; run before any compute.
  void validate() const;
};

struct RunOptions {
  bool force = false;
  int workers = 1;
};

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"preprocess", "extract", "train", "explain", "agree", "report"};
  return names;
}

// Stage failures are rethrown as StageError carrying the stage name;
// artifacts of completed stages are kept.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message);
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Runs the stages in order and writes <output>/manifest.json. A stage is
// skipped when its recorded key (hash of its inputs and parameters) is
// unchanged and its outputs still hash to the recorded values.
nlohmann::json run_pipeline(const ExperimentConfig& config, const RunOptions& options = {});

}  // namespace brainage::pipeline
