#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>

#include <unistd.h>

#include "brainage/agreement.hpp"
#include "brainage/bundle.hpp"
#include "brainage/error.hpp"
#include "brainage/parallel.hpp"
#include "brainage/pipeline.hpp"
#include "brainage/report.hpp"
#include "brainage/synth.hpp"

using namespace brainage;
namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, path.string() + ": " + e.what());
  }
}

fs::path default_regions() { return fs::path(BRAINAGE_DATA_DIR) / "regions_12.json"; }

// Models with both <name>.csv and <name>.json in the directory; known
// families first in registry order, then other names sorted.
std::vector<std::string> shap_models(const fs::path& dir) {
  std::set<std::string> found;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".csv" && fs::exists(fs::path(e.path()).replace_extension(".json"))) {
      found.insert(e.path().stem().string());
    }
  }
  std::vector<std::string> out;
  for (auto f : models::all_families()) {
    const std::string name(models::family_name(f));
    if (found.erase(name)) out.push_back(name);
  }
  out.insert(out.end(), found.begin(), found.end());
  require(!out.empty(), ErrorCode::kEmptyDataset, "no SHAP matrices in " + dir.string());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Brain-age prediction from resting-state EEG features, with SHAP agreement analysis"};
  app.require_subcommand(1);
  int workers = 1;
  app.add_option("--workers", workers, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted age effects");
  synth::SynthConfig sc;
  fs::path synth_out, synth_config;
  std::uint64_t synth_seed = 0;
  auto* synth_n = synth->add_option("--n", sc.n_subjects, "Number of subjects");
  auto* synth_lo = synth->add_option("--age-min", sc.age_min, "Youngest age in years");
  auto* synth_hi = synth->add_option("--age-max", sc.age_max, "Oldest age in years (exclusive)");
  auto* synth_ch = synth->add_option("--channels", sc.n_channels, "Electrodes on the synthetic cap");
  synth->add_option("--seed", synth_seed, "Master seed")->required();
  synth->add_option("--config", synth_config, "JSON generator settings; flags override it")->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Output directory")->required();

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Resample, filter, reject and interpolate channels");
  fs::path pre_in, pre_out, pre_montage, pre_regions;
  std::uint64_t pre_seed = 0;
  bool no_ransac = false, global_drop = false;
  pipeline::PreprocessOptions pre_opts;
  pre->add_option("--in", pre_in, "Corpus directory of recording bundles")->required()->check(CLI::ExistingDirectory);
  pre->add_option("--out", pre_out, "Output directory")->required();
  pre->add_option("--montage", pre_montage, "Montage JSON")->required()->check(CLI::ExistingFile);
  pre->add_option("--regions", pre_regions, "Region JSON, checked against the montage")->check(CLI::ExistingFile);
  pre->add_option("--seed", pre_seed, "Seed for RANSAC")->required();
  pre->add_flag("--no-ransac", no_ransac, "Skip channel rejection");
  pre->add_option("--max-rejected", pre_opts.max_rejected, "Exclude recordings with more rejected channels");
  pre->add_flag("--global-drop", global_drop, "Drop channels rejected in more than 12.5% of recordings");

  // extract
  auto* ext = app.add_subcommand("extract", "Compute the feature matrix of one dataset variant");
  fs::path ext_in, ext_out, ext_regions = default_regions();
  std::string ext_variant = "12-All";
  ext->add_option("--in", ext_in, "Preprocessed bundles")->required()->check(CLI::ExistingDirectory);
  ext->add_option("--variant", ext_variant, "12-All, 12-EC, 12-EO, 128-All, 128-EC or 128-EO");
  ext->add_option("--regions", ext_regions, "Region JSON")->check(CLI::ExistingFile);
  ext->add_option("--out", ext_out, "Feature CSV")->required();

  // train
  auto* train = app.add_subcommand("train", "Hyperparameter search and cross-validation per model family");
  fs::path train_features, train_out;
  std::string train_family = "all";
  int budget = 50, folds = 3;
  std::uint64_t train_seed = 0;
  train->add_option("--features", train_features, "Feature CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--family", train_family, "Family name or 'all'");
  train->add_option("--budget", budget, "Search points per family")->check(CLI::PositiveNumber);
  train->add_option("--folds", folds, "Cross-validation folds")->check(CLI::Range(2, 100));
  train->add_option("--seed", train_seed, "Seed")->required();
  train->add_option("--out", train_out, "Model directory")->required();

  // explain
  auto* expl = app.add_subcommand("explain", "SHAP values of a trained model");
  fs::path expl_model, expl_features, expl_out;
  bool fold_test = false;
  explain::ExplainOptions expl_opts;
  expl_opts.background_size = 20;
  expl->add_option("--model", expl_model, "Model JSON written by train")->required()->check(CLI::ExistingFile);
  expl->add_option("--features", expl_features, "Feature CSV")->required()->check(CLI::ExistingFile);
  expl->add_flag("--fold-test", fold_test, "Explain the held-out fold only (needs <model>.cv.json)");
  expl->add_option("--background", expl_opts.background_size, "Background rows")->check(CLI::PositiveNumber);
  expl->add_option("--max-samples", expl_opts.max_samples, "Explain at most this many rows (0 = all)");
  expl->add_option("--coalitions", expl_opts.n_coalitions, "Kernel SHAP coalitions (0 = 2p + 2)");
  expl->add_option("--seed", expl_opts.seed, "Seed");
  expl->add_option("--out", expl_out, "Output directory")->required();

  // agree
  auto* agr = app.add_subcommand("agree", "Group importances, agreement matrices and hypothesis outcomes");
  fs::path agr_shap, agr_features, agr_out, agr_importance, agr_hyp = agreement::default_hypotheses_path(),
                                                           agr_regions = default_regions();
  agr->add_option("--shap-dir", agr_shap, "Directory of SHAP matrices")->required()->check(CLI::ExistingDirectory);
  agr->add_option("--features", agr_features, "Feature CSV")->required()->check(CLI::ExistingFile);
  agr->add_option("--hypotheses", agr_hyp, "Hypothesis JSON")->check(CLI::ExistingFile);
  agr->add_option("--regions", agr_regions, "Region JSON")->check(CLI::ExistingFile);
  agr->add_option("--out", agr_out, "Output directory")->required();
  agr->add_option("--importance-out", agr_importance, "Group importance directory (default <out>/importance)");

  // report
  auto* rep = app.add_subcommand("report", "Render one figure as SVG");
  report::RenderSpec spec;
  std::string kind = "heatmap", palette;
  double scale_min = 0.0, scale_max = 0.0;
  fs::path rep_out;
  rep->add_option("--kind", kind, "heatmap, ranked_bars, topo_map or shap_scatter");
  rep->add_option("--in", spec.input, "Input artifact")->required();
  rep->add_option("--out", rep_out, "SVG file")->required();
  rep->add_option("--montage", spec.montage, "Montage JSON (topo_map)");
  rep->add_option("--regions", spec.regions, "Region JSON (topo_map)");
  rep->add_option("--features", spec.features, "Feature CSV (shap_scatter)");
  rep->add_option("--feature", spec.feature, "Column suffix such as alpha_pow_freq_bands (shap_scatter)");
  rep->add_option("--max-rows", spec.max_rows, "Rows drawn by shap_scatter");
  auto* pal = rep->add_option("--palette", palette, "viridis, coolwarm or greys");
  auto* smin = rep->add_option("--min", scale_min, "Colour scale minimum");
  auto* smax = rep->add_option("--max", scale_max, "Colour scale maximum");
  rep->add_option("--width", spec.width, "Width in px (0 = automatic)");
  rep->add_option("--height", spec.height, "Height in px (0 = automatic)");
  rep->add_option("--title", spec.title, "Figure title");

  // run
  auto* run = app.add_subcommand("run", "Run every stage from an experiment config");
  fs::path run_config;
  bool force = false;
  run->add_option("--config", run_config, "Experiment JSON")->required();
  run->add_flag("--force", force, "Rerun stages whose inputs did not change");

  // summarize
  auto* sum = app.add_subcommand("summarize", "Table of CV MAE per family and variant");
  std::vector<fs::path> sum_dirs;
  fs::path sum_out;
  sum->add_option("dirs", sum_dirs, "Experiment directories")->required()->check(CLI::ExistingDirectory);
  sum->add_option("--out", sum_out, "CSV file (default: standard output)");

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*synth) {
      if (!synth_config.empty()) {
        const auto saved = sc;
        sc = synth::SynthConfig::from_json(read_json(synth_config));
        if (synth_n->count()) sc.n_subjects = saved.n_subjects;
        if (synth_lo->count()) sc.age_min = saved.age_min;
        if (synth_hi->count()) sc.age_max = saved.age_max;
        if (synth_ch->count()) sc.n_channels = saved.n_channels;
      }
      sc.seed = synth_seed;
      const auto m = synth::generate_dataset(sc, synth_out, workers);
      std::cout << "wrote " << m.subjects.size() << " subjects to " << synth_out.string() << '\n';
    } else if (*pre) {
      const auto montage = io::read_montage(pre_montage);
      montage.validate();
      if (!pre_regions.empty()) io::read_regions(pre_regions).validate(&montage);
      pre_opts.ransac = !no_ransac;
      pre_opts.global_drop = global_drop;
      const auto s = pipeline::preprocess_corpus(pre_in, pre_out, montage, pre_opts, pre_seed, workers);
      std::cout << s.entries.size() << " recordings, " << s.n_excluded() << " excluded\n";
    } else if (*ext) {
      const auto fm =
          pipeline::extract_features(ext_in, Variant::parse(ext_variant), io::read_regions(ext_regions), {}, workers);
      if (ext_out.has_parent_path()) fs::create_directories(ext_out.parent_path());
      write_feature_csv(ext_out, fm);
      std::cout << fm.n_subjects() << " subjects x " << fm.n_features() << " features\n";
    } else if (*train) {
      const auto fm = read_feature_csv(train_features);
      std::vector<models::Family> families;
      if (train_family == "all") {
        families = models::all_families();
      } else {
        families.push_back(models::parse_family(train_family));
      }
      fs::create_directories(train_out);
      std::vector<pipeline::SummaryRow> rows;
      for (auto f : families) {
        const std::string name(models::family_name(f));
        const auto t = pipeline::train_family(f, fm, budget, folds, derive_seed(train_seed, static_cast<std::uint64_t>(f)),
                                              workers);
        t.model.save(train_out / (name + ".json"));
        std::ofstream(train_out / (name + ".cv.json")) << t.cv_json().dump(2) << '\n';
        rows.push_back({name, "", t.search.cv.mean, t.search.cv.std});
        std::printf("%-12s MAE %.3f +/- %.3f\n", name.c_str(), t.search.cv.mean, t.search.cv.std);
      }
      // The variant is not recorded in the feature file; the column reads "cv".
      for (auto& r : rows) r.variant = "cv";
      pipeline::write_summary(train_out / "summary.csv", rows);
    } else if (*expl) {
      const auto fm = read_feature_csv(expl_features);
      auto model = models::TrainedModel::load(expl_model);
      std::vector<int> fold_of(fm.n_subjects(), 0);
      if (fold_test) {
        auto cv_path = expl_model;
        cv_path.replace_extension(".cv.json");
        require(fs::exists(cv_path), ErrorCode::kIo, "--fold-test needs " + cv_path.string());
        fold_of = pipeline::folds_from_cv_json(read_json(cv_path), fm);
      } else {
        model.cv_fold = -1;
      }
      expl_opts.workers = workers;
      const auto shap = pipeline::explain_held_out(model, expl_model.stem().string(), fm, fold_of, expl_opts);
      shap.write(expl_out);
      std::printf("%s: %zu samples, method %s, additivity error %.2e\n", shap.model.c_str(), shap.sample_ids.size(),
                  shap.method.c_str(), shap.max_additivity_error());
    } else if (*agr) {
      const auto fm = read_feature_csv(agr_features);
      std::vector<explain::ShapMatrix> shaps;
      for (const auto& name : shap_models(agr_shap)) shaps.push_back(explain::ShapMatrix::read(agr_shap, name));
      const auto out = pipeline::agree(shaps, fm, io::read_regions(agr_regions), agreement::read_hypotheses(agr_hyp));
      pipeline::write_agreement(out, agr_out, agr_importance.empty() ? agr_out / "importance" : agr_importance);
      for (std::size_t h = 0; h < out.replication.hypotheses.size(); ++h) {
        const auto& id = out.replication.hypotheses[h];
        std::printf("%s replicated by %d of %zu models\n", id.c_str(), out.replication.replicated_count(id),
                    out.replication.models.size());
      }
    } else if (*rep) {
      spec.kind = report::parse_kind(kind);
      if (pal->count() || smin->count() || smax->count()) {
        report::ColorScale s;
        if (spec.kind == report::Kind::kHeatmap) s = {-1.0, 1.0, "coolwarm"};
        if (pal->count()) s.palette = palette;
        if (smin->count()) s.min = scale_min;
        if (smax->count()) s.max = scale_max;
        spec.scale = s;
      }
      report::render_to_file(spec, rep_out);
    } else if (*run) {
      const auto config = pipeline::ExperimentConfig::load(run_config);
      pipeline::RunOptions opts;
      opts.force = force;
      opts.workers = workers == 0 ? static_cast<int>(default_workers()) : workers;
      const auto manifest = pipeline::run_pipeline(config, opts);
      for (const auto& s : manifest.at("stages")) {
        std::printf("%-10s %s %.1f s\n", s.at("name").get<std::string>().c_str(),
                    s.at("skipped").get<bool>() ? "cached " : "ran    ", s.at("duration_s").get<double>());
      }
      std::cout << "manifest: " << (config.output / "manifest.json").string() << '\n';
    } else if (*sum) {
      const auto rows = pipeline::collect_summary(sum_dirs);
      if (sum_out.empty()) {
        const auto tmp = fs::temp_directory_path() / ("brainage_summary_" + std::to_string(::getpid()) + ".csv");
        pipeline::write_summary(tmp, rows);
        std::ifstream in(tmp);
        std::cout << in.rdbuf();
        fs::remove(tmp);
      } else {
        pipeline::write_summary(sum_out, rows);
      }
    }
  } catch (const pipeline::StageError& e) {
    std::cerr << "brainage " << command << ": stage " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "brainage " << command << ": " << to_string(e.code()) << ": " << e.what() << '\n';
    return e.code() == ErrorCode::kConfig ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "brainage " << command << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
