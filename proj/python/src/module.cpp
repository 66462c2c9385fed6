#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "brainage/agreement.hpp"
#include "brainage/bundle.hpp"
#include "brainage/dataset.hpp"
#include "brainage/error.hpp"
#include "brainage/explain.hpp"
#include "brainage/features.hpp"
#include "brainage/models.hpp"
#include "brainage/pipeline.hpp"
#include "brainage/report.hpp"
#include "brainage/synth.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace brainage;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

py::dict feature_dict(const FeatureMatrix& fm) {
  py::dict d;
  d["subject_ids"] = fm.subject_ids;
  d["ages"] = fm.ages;
  d["columns"] = fm.column_names();
  d["rows"] = fm.rows;
  return d;
}

}  // namespace

PYBIND11_MODULE(_brainage, m) {
  m.doc() = "Brain-age feature extraction, models, SHAP agreement and reporting";

  static py::exception<Error> error(m, "BrainageError", PyExc_ValueError);
  static py::exception<pipeline::StageError> stage_error(m, "StageError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    } catch (const pipeline::StageError& e) {
      py::set_error(stage_error, e.what());
    }
  });

  // Single-channel measures.
  m.def("higuchi_fd", [](const std::vector<double>& x, int kmax) { return features::higuchi_fd(x, kmax); },
        py::arg("x"), py::arg("kmax") = 10);
  m.def("hurst_exponent", [](const std::vector<double>& x) { return features::hurst_exponent(x); }, py::arg("x"));
  m.def("spectral_entropy",
        [](const std::vector<double>& x, double rate) { return features::spectral_entropy(x, rate); }, py::arg("x"),
        py::arg("rate_hz"));
  m.def(
      "band_powers",
      [](const std::vector<double>& x, double rate) {
        const auto p = features::band_powers(x, rate);
        py::dict d;
        for (std::size_t b = 0; b < p.size(); ++b) {
          d[py::str(std::string(features::band_spec(static_cast<features::Band>(b)).name))] = p[b];
        }
        return d;
      },
      py::arg("x"), py::arg("rate_hz"), "Welch power per band (delta, theta, alpha, beta, omega).");
  m.def(
      "psd_regression",
      [](const std::vector<double>& x, double rate, double lo, double hi) {
        const auto r = features::psd_regression(x, rate, lo, hi);
        return py::make_tuple(r.v[0], r.v[1], r.v[2], r.v[3]);
      },
      py::arg("x"), py::arg("rate_hz"), py::arg("lo_hz") = 0.5, py::arg("hi_hz") = 30.0,
      "(intercept, slope, mse, r2) of the log-log PSD fit.");

  m.def(
      "spearman",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto c = agreement::spearman(a, b);
        return py::make_tuple(c.rho, c.degenerate);
      },
      py::arg("a"), py::arg("b"), "(rho, degenerate) with average ranks for ties.");

  m.def(
      "exact_shapley",
      [](const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& f, const Eigen::MatrixXd& background,
         const Eigen::RowVectorXd& x) { return explain::exact_shap_enumeration(f, background, x); },
      py::arg("predict"), py::arg("background"), py::arg("x"),
      "Interventional Shapley values of predict(rows) -> values by full enumeration.");

  // Corpus and pipeline operations.
  m.def(
      "synth",
      [](const fs::path& out, int n_subjects, int channels, double age_min, double age_max, std::uint64_t seed,
         double ec_seconds, double eo_seconds, int workers) {
        synth::SynthConfig c;
        c.n_subjects = n_subjects;
        c.n_channels = channels;
        c.age_min = age_min;
        c.age_max = age_max;
        c.seed = seed;
        c.ec_seconds = ec_seconds;
        c.eo_seconds = eo_seconds;
        c.validate();
        nlohmann::json j;
        {
          py::gil_scoped_release release;
          j = synth::generate_dataset(c, out, workers).to_json();
        }
        return to_py(j);
      },
      py::arg("out"), py::arg("n_subjects") = 50, py::arg("channels") = 128, py::arg("age_min") = 5.0,
      py::arg("age_max") = 22.0, py::arg("seed") = 0, py::arg("ec_seconds") = 40.0, py::arg("eo_seconds") = 20.0,
      py::arg("workers") = 1);

  m.def(
      "preprocess",
      [](const fs::path& in, const fs::path& out, const fs::path& montage, std::uint64_t seed, bool ransac,
         int max_rejected, int workers) {
        pipeline::PreprocessOptions o;
        o.ransac = ransac;
        o.max_rejected = max_rejected;
        o.validate();
        nlohmann::json j;
        {
          py::gil_scoped_release release;
          j = pipeline::preprocess_corpus(in, out, io::read_montage(montage), o, seed, workers).to_json();
        }
        return to_py(j);
      },
      py::arg("input"), py::arg("out"), py::arg("montage"), py::arg("seed") = 0, py::arg("ransac") = true,
      py::arg("max_rejected") = 30, py::arg("workers") = 1);

  m.def(
      "extract",
      [](const fs::path& in, const std::string& variant, const fs::path& regions, const std::optional<fs::path>& out,
         int workers) {
        FeatureMatrix fm;
        {
          py::gil_scoped_release release;
          fm = pipeline::extract_features(in, Variant::parse(variant), io::read_regions(regions), {}, workers);
          if (out) write_feature_csv(*out, fm);
        }
        return feature_dict(fm);
      },
      py::arg("input"), py::arg("variant"), py::arg("regions"), py::arg("out") = py::none(), py::arg("workers") = 1,
      "Feature matrix as {subject_ids, ages, columns, rows}; also written as CSV when `out` is set.");
  m.def(
      "read_features", [](const fs::path& p) { return feature_dict(read_feature_csv(p)); }, py::arg("path"));

  m.def(
      "train",
      [](const fs::path& features, const std::string& family, int budget, int folds, std::uint64_t seed,
         const std::optional<fs::path>& out, int workers) {
        nlohmann::json cv;
        {
          py::gil_scoped_release release;
          const auto fm = read_feature_csv(features);
          const auto f = models::parse_family(family);
          const auto t = pipeline::train_family(f, fm, budget, folds, seed, workers);
          cv = t.cv_json();
          if (out) {
            fs::create_directories(*out);
            t.model.save(*out / (family + ".json"));
            std::ofstream(*out / (family + ".cv.json")) << cv.dump(2) << "\n";
          }
        }
        return to_py(cv);
      },
      py::arg("features"), py::arg("family"), py::arg("budget") = 10, py::arg("folds") = 3, py::arg("seed") = 0,
      py::arg("out") = py::none(), py::arg("workers") = 1,
      "Random search with cross-validation; returns the cv record, saves the model when `out` is set.");

  m.def(
      "predict",
      [](const fs::path& model, const fs::path& features) {
        return models::TrainedModel::load(model).predict(read_feature_csv(features));
      },
      py::arg("model"), py::arg("features"), "Predicted ages in years.");

  m.def(
      "render",
      [](const std::string& kind, const fs::path& input, const fs::path& out, const fs::path& montage,
         const fs::path& regions, const fs::path& features, const std::string& feature, const std::string& title) {
        report::RenderSpec s;
        s.kind = report::parse_kind(kind);
        s.input = input;
        s.montage = montage;
        s.regions = regions;
        s.features = features;
        s.feature = feature;
        s.title = title;
        report::render_to_file(s, out);
      },
      py::arg("kind"), py::arg("input"), py::arg("out"), py::arg("montage") = fs::path{},
      py::arg("regions") = fs::path{}, py::arg("features") = fs::path{}, py::arg("feature") = "",
      py::arg("title") = "");

  m.def(
      "run",
      [](const fs::path& config, bool force, int workers) {
        const auto c = pipeline::ExperimentConfig::load(config);
        c.validate();
        nlohmann::json manifest;
        {
          py::gil_scoped_release release;
          manifest = pipeline::run_pipeline(c, {force, workers});
        }
        return to_py(manifest);
      },
      py::arg("config"), py::arg("force") = false, py::arg("workers") = 1, "Runs every stage; returns the manifest.");

  m.def(
      "summarize",
      [](const std::vector<fs::path>& dirs, const fs::path& out) {
        pipeline::write_summary(out, pipeline::collect_summary(dirs));
      },
      py::arg("experiments"), py::arg("out"));

  m.attr("families") = [] {
    std::vector<std::string> names;
    for (auto f : models::all_families()) names.emplace_back(models::family_name(f));
    return names;
  }();
}
