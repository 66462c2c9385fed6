#include <algorithm>

#include "brainage/error.hpp"
#include "brainage/explain.hpp"
#include "brainage/learners.hpp"
#include "brainage/parallel.hpp"
#include "brainage/rng.hpp"

namespace brainage::explain {

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

}  // namespace

ShapMatrix explain_model(const models::TrainedModel& model, const std::string& name, const FeatureMatrix& fm,
                         const std::vector<std::size_t>& rows, const std::vector<std::size_t>& background_rows,
                         const ExplainOptions& options) {
  require(model.regressor != nullptr, ErrorCode::kInvalidData, "model has no learner");
  require(fm.column_names() == model.columns, ErrorCode::kSchema, "feature columns do not match the model");
  require(!rows.empty(), ErrorCode::kEmptyDataset, "no rows to explain");
  require(!background_rows.empty() && options.background_size >= 1, ErrorCode::kParameter,
          "explanation needs a non-empty background");

  std::vector<std::size_t> explained = rows;
  if (options.max_samples > 0 && explained.size() > static_cast<std::size_t>(options.max_samples)) {
    explained.resize(static_cast<std::size_t>(options.max_samples));
  }
  std::vector<std::size_t> bg = background_rows;
  if (bg.size() > static_cast<std::size_t>(options.background_size)) {
    Rng rng(derive_seed(options.seed, 0xb6));
    const auto pick = rng.sample_without_replacement(bg.size(), static_cast<std::size_t>(options.background_size));
    std::vector<std::size_t> chosen;
    for (auto i : pick) chosen.push_back(bg[i]);
    std::sort(chosen.begin(), chosen.end());
    bg = std::move(chosen);
  }

  ShapMatrix out;
  out.model = name;
  out.seed = options.seed;
  out.columns = model.columns;
  for (auto r : explained) out.sample_ids.push_back(fm.subject_ids[r]);
  const auto n = static_cast<Eigen::Index>(explained.size());
  const auto p = static_cast<int>(fm.n_features());
  out.phi.resize(n, p);
  out.predictions.resize(n);
  const auto workers = static_cast<std::size_t>(std::max(options.workers, 1));

  Eigen::MatrixXd samples = gather(fm.rows, explained);
  Eigen::MatrixXd background = gather(fm.rows, bg);
  std::vector<double> bases(static_cast<std::size_t>(n));

  if (models::is_tree_family(model.family)) {
    const auto* tree = dynamic_cast<const models::TreeModel*>(model.regressor.get());
    require(tree != nullptr, ErrorCode::kType, "tree family without a tree ensemble");
    out.method = "tree";
    parallel_for(explained.size(), workers, [&](std::size_t i) {
      const auto e = tree_shap(tree->ensemble(), samples.row(static_cast<Eigen::Index>(i)), p);
      out.phi.row(static_cast<Eigen::Index>(i)) = e.phi.transpose();
      out.predictions(static_cast<Eigen::Index>(i)) = e.prediction;
      bases[i] = e.base;
    });
    out.base_value = bases.front();
    return out;
  }

  // Non-tree learners see standardised inputs; imputation commutes with the
  // per-column affine map, so explaining in that space is equivalent.
  if (model.standardizer) {
    samples = model.standardizer->apply(samples);
    background = model.standardizer->apply(background);
  }

  if (const auto* lin = dynamic_cast<const models::ElasticNet*>(model.regressor.get())) {
    out.method = "linear";
    const Eigen::RowVectorXd mean = background.colwise().mean();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto e = linear_shap(lin->coef(), lin->intercept(), mean, samples.row(i));
      out.phi.row(i) = e.phi.transpose();
      out.predictions(i) = e.prediction;
      out.base_value = e.base;
    }
    return out;
  }

  const models::Regressor& reg = *model.regressor;
  KernelShap kernel([&reg](const Eigen::MatrixXd& x) { return reg.predict(x); }, background, options.n_coalitions,
                    derive_seed(options.seed, 0xc0));
  out.method = kernel.exact() ? "kernel-exact" : "kernel";
  out.n_coalitions = kernel.n_coalitions();
  out.base_value = kernel.base();
  parallel_for(explained.size(), workers, [&](std::size_t i) {
    const auto e = kernel.explain(samples.row(static_cast<Eigen::Index>(i)));
    out.phi.row(static_cast<Eigen::Index>(i)) = e.phi.transpose();
    out.predictions(static_cast<Eigen::Index>(i)) = e.prediction;
  });
  return out;
}

}  // namespace brainage::explain
