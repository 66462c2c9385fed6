#include <algorithm>
#include <cmath>
#include <fstream>

#include "brainage/error.hpp"
#include "brainage/learners.hpp"
#include "brainage/models.hpp"
#include "json_matrix.hpp"

namespace brainage::models {

namespace {

using Kind = ParamSpec::Kind;

struct FamilyInfo {
  Family family;
  std::string_view name;
  bool tree;
  std::vector<ParamSpec> params;
};

const std::vector<FamilyInfo>& registry() {
  static const std::vector<FamilyInfo> info{
      {Family::kElasticNet, "ElasticNet", false,
       {{"alpha", Kind::kLogUniform, 1e-3, 10.0, 1.0}, {"l1_ratio", Kind::kUniform, 0.05, 0.95, 0.5}}},
      {Family::kLasso, "Lasso", false, {{"alpha", Kind::kLogUniform, 1e-3, 10.0, 1.0}}},
      {Family::kKernelRidge, "KernelRidge", false,
       {{"alpha", Kind::kLogUniform, 1e-3, 10.0, 1.0}, {"gamma_scale", Kind::kLogUniform, 0.01, 10.0, 1.0}}},
      {Family::kGBDT, "GBDT", true,
       {{"n_estimators", Kind::kInteger, 50, 300, 100},
        {"learning_rate", Kind::kLogUniform, 0.01, 0.3, 0.1},
        {"max_depth", Kind::kInteger, 2, 6, 3},
        {"reg_lambda", Kind::kLogUniform, 1e-3, 10.0, 1.0},
        {"reg_alpha", Kind::kLogUniform, 1e-3, 10.0, 1e-3}}},
      {Family::kOrderedGBDT, "OrderedGBDT", true,
       {{"iterations", Kind::kInteger, 50, 300, 150},
        {"learning_rate", Kind::kLogUniform, 0.01, 0.3, 0.1},
        {"depth", Kind::kInteger, 2, 6, 4},
        {"l2_leaf_reg", Kind::kLogUniform, 0.1, 10.0, 3.0}}},
      {Family::kRandomForest, "RandomForest", true,
       {{"n_estimators", Kind::kInteger, 50, 300, 100},
        {"max_depth", Kind::kInteger, 0, 20, 0},
        {"min_samples_leaf", Kind::kInteger, 1, 5, 1},
        {"bootstrap", Kind::kInteger, 1, 1, 1}}},
      {Family::kBaggedKNN, "BaggedKNN", false,
       {{"n_neighbors", Kind::kInteger, 1, 20, 5},
        {"n_estimators", Kind::kInteger, 5, 30, 10},
        {"max_samples", Kind::kUniform, 0.5, 1.0, 1.0}}},
      {Family::kKNN, "KNN", false, {{"n_neighbors", Kind::kInteger, 1, 20, 5}}},
      {Family::kSVR, "SVR", false,
       {{"C", Kind::kLogUniform, 0.1, 100.0, 1.0},
        {"epsilon", Kind::kLogUniform, 0.01, 1.0, 0.1},
        {"gamma_scale", Kind::kLogUniform, 0.01, 10.0, 1.0}}},
      {Family::kMLP, "MLP", false,
       {{"learning_rate", Kind::kLogUniform, 1e-4, 1e-2, 1e-3}, {"alpha", Kind::kLogUniform, 1e-5, 1e-1, 1e-4}}},
  };
  return info;
}

const FamilyInfo& info(Family f) { return registry()[static_cast<std::size_t>(f)]; }

int as_int(const Hyper& h, const std::string& name) { return static_cast<int>(std::lround(h.at(name))); }

}  // namespace

std::string_view family_name(Family family) { return info(family).name; }

Family parse_family(std::string_view name) {
  for (const auto& i : registry()) {
    if (i.name == name) return i.family;
  }
  fail(ErrorCode::kParameter, "unknown model family: " + std::string(name));
}

const std::vector<Family>& all_families() {
  static const std::vector<Family> families = [] {
    std::vector<Family> out;
    for (const auto& i : registry()) out.push_back(i.family);
    return out;
  }();
  return families;
}

bool is_tree_family(Family family) { return info(family).tree; }

const std::vector<ParamSpec>& schema(Family family) { return info(family).params; }

Hyper default_hyper(Family family) {
  Hyper h;
  for (const auto& p : schema(family)) h[p.name] = p.default_value;
  return h;
}

Hyper sample_hyper(Family family, Rng& rng) {
  Hyper h;
  for (const auto& p : schema(family)) {
    switch (p.kind) {
      case Kind::kLogUniform:
        h[p.name] = std::exp(rng.uniform(std::log(p.lo), std::log(p.hi)));
        break;
      case Kind::kUniform:
        h[p.name] = p.lo == p.hi ? p.lo : rng.uniform(p.lo, p.hi);
        break;
      case Kind::kInteger: {
        const auto span = static_cast<std::size_t>(p.hi - p.lo) + 1;
        h[p.name] = p.lo + static_cast<double>(rng.uniform_index(span));
        break;
      }
    }
  }
  return h;
}

Hyper resolve_hyper(Family family, const Hyper& hyper) {
  Hyper out = default_hyper(family);
  for (const auto& [k, v] : hyper) {
    require(out.count(k) > 0, ErrorCode::kParameter,
            "unknown hyperparameter " + k + " for " + std::string(family_name(family)));
    require(std::isfinite(v), ErrorCode::kParameter, "hyperparameter " + k + " is not finite");
    out[k] = v;
  }
  return out;
}

std::unique_ptr<Regressor> make_regressor(Family family, const Hyper& hyper) {
  const Hyper h = resolve_hyper(family, hyper);
  switch (family) {
    case Family::kElasticNet:
      return std::make_unique<ElasticNet>(h.at("alpha"), h.at("l1_ratio"));
    case Family::kLasso:
      return std::make_unique<ElasticNet>(h.at("alpha"), 1.0);
    case Family::kKernelRidge:
      return std::make_unique<KernelRidge>(h.at("alpha"), h.at("gamma_scale"));
    case Family::kGBDT:
      return std::make_unique<GBDT>(as_int(h, "n_estimators"), h.at("learning_rate"), as_int(h, "max_depth"),
                                    h.at("reg_lambda"), h.at("reg_alpha"));
    case Family::kOrderedGBDT:
      return std::make_unique<OrderedGBDT>(as_int(h, "iterations"), h.at("learning_rate"), as_int(h, "depth"),
                                           h.at("l2_leaf_reg"));
    case Family::kRandomForest:
      return std::make_unique<RandomForest>(as_int(h, "n_estimators"), as_int(h, "max_depth"),
                                            as_int(h, "min_samples_leaf"), as_int(h, "bootstrap") != 0);
    case Family::kBaggedKNN:
      return std::make_unique<BaggedKNN>(as_int(h, "n_neighbors"), as_int(h, "n_estimators"), h.at("max_samples"));
    case Family::kKNN:
      return std::make_unique<KNN>(as_int(h, "n_neighbors"));
    case Family::kSVR:
      return std::make_unique<SVR>(h.at("C"), h.at("epsilon"), h.at("gamma_scale"));
    case Family::kMLP:
      return std::make_unique<MLP>(h.at("learning_rate"), h.at("alpha"));
  }
  fail(ErrorCode::kParameter, "unhandled model family");
}

LabelEncoder LabelEncoder::fit(const Eigen::VectorXd& ages) {
  require(ages.size() > 0, ErrorCode::kEmptyDataset, "label encoder needs at least one age");
  std::map<double, std::pair<double, int>> classes;
  for (Eigen::Index i = 0; i < ages.size(); ++i) {
    auto& c = classes[std::floor(ages(i))];
    c.first += ages(i);
    c.second += 1;
  }
  LabelEncoder e;
  for (const auto& [floor_age, acc] : classes) {
    e.class_floor.push_back(floor_age);
    e.class_mean.push_back(acc.first / acc.second);
  }
  return e;
}

Eigen::VectorXd LabelEncoder::encode(const Eigen::VectorXd& ages) const {
  Eigen::VectorXd out(ages.size());
  for (Eigen::Index i = 0; i < ages.size(); ++i) {
    const double f = std::floor(ages(i));
    const auto it = std::lower_bound(class_floor.begin(), class_floor.end(), f);
    require(it != class_floor.end() && *it == f, ErrorCode::kMapping, "age outside the encoded classes");
    out(i) = static_cast<double>(it - class_floor.begin());
  }
  return out;
}

double LabelEncoder::decode(double index) const {
  if (class_mean.size() == 1 || index <= 0.0) return class_mean.front();
  const double last = static_cast<double>(class_mean.size() - 1);
  if (index >= last) return class_mean.back();
  const auto lo = static_cast<std::size_t>(std::floor(index));
  const double frac = index - static_cast<double>(lo);
  return class_mean[lo] + frac * (class_mean[lo + 1] - class_mean[lo]);
}

Eigen::VectorXd LabelEncoder::decode(const Eigen::VectorXd& index) const {
  Eigen::VectorXd out(index.size());
  for (Eigen::Index i = 0; i < index.size(); ++i) out(i) = decode(index(i));
  return out;
}

Eigen::VectorXd TrainedModel::predict_raw(const Eigen::MatrixXd& raw) const {
  require(regressor != nullptr, ErrorCode::kInvalidData, "model has no learner");
  require(static_cast<std::size_t>(raw.cols()) == columns.size(), ErrorCode::kSchema,
          "feature count does not match the trained model");
  if (standardizer) return regressor->predict(standardizer->apply(raw));
  return regressor->predict(raw);
}

Eigen::VectorXd TrainedModel::predict(const Eigen::MatrixXd& raw) const {
  Eigen::VectorXd out = predict_raw(raw);
  if (encoder) out = encoder->decode(out);
  return out;
}

Eigen::VectorXd TrainedModel::predict(const FeatureMatrix& fm) const {
  require(fm.column_names() == columns, ErrorCode::kSchema, "feature columns do not match the trained model");
  return predict(fm.rows);
}

nlohmann::json TrainedModel::to_json() const {
  nlohmann::json j;
  j["family"] = std::string(family_name(family));
  j["hyper"] = hyper;
  j["seed"] = seed;
  j["columns"] = columns;
  j["cv_fold"] = cv_fold;
  j["converged"] = converged();
  nlohmann::json pre;
  pre["standardized"] = standardizer.has_value();
  pre["target_encoded"] = encoder.has_value();
  if (standardizer) {
    pre["mean"] = vector_to_json(standardizer->mean);
    pre["scale"] = vector_to_json(standardizer->scale);
    std::vector<int> constant(standardizer->constant.begin(), standardizer->constant.end());
    pre["constant"] = constant;
  }
  if (encoder) {
    pre["class_floor"] = encoder->class_floor;
    pre["class_mean"] = encoder->class_mean;
  }
  j["preprocessing"] = pre;
  j["params"] = regressor->to_json();
  return j;
}

TrainedModel TrainedModel::from_json(const nlohmann::json& j) {
  TrainedModel m;
  try {
    m.family = parse_family(j.at("family").get<std::string>());
    m.hyper = j.at("hyper").get<Hyper>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.columns = j.at("columns").get<std::vector<std::string>>();
    m.cv_fold = j.value("cv_fold", -1);
    const auto& pre = j.at("preprocessing");
    if (pre.at("standardized").get<bool>()) {
      Standardizer s;
      s.mean = vector_from_json(pre.at("mean"));
      s.scale = vector_from_json(pre.at("scale"));
      for (int c : pre.at("constant").get<std::vector<int>>()) s.constant.push_back(c != 0);
      m.standardizer = std::move(s);
    }
    if (pre.at("target_encoded").get<bool>()) {
      LabelEncoder e;
      e.class_floor = pre.at("class_floor").get<std::vector<double>>();
      e.class_mean = pre.at("class_mean").get<std::vector<double>>();
      m.encoder = std::move(e);
    }
    m.regressor = make_regressor(m.family, m.hyper);
    m.regressor->from_json(j.at("params"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("malformed model artifact: ") + e.what());
  }
  return m;
}

void TrainedModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out << to_json().dump(1) << '\n';
}

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIo, "cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, "invalid json in " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

TrainedModel fit_rows(Family family, const Hyper& hyper, const FeatureMatrix& fm,
                      const std::vector<std::size_t>& rows, std::uint64_t seed) {
  require(rows.size() >= 2, ErrorCode::kEmptyDataset, "fitting needs at least two rows");
  TrainedModel m;
  m.family = family;
  m.hyper = resolve_hyper(family, hyper);
  m.seed = seed;
  m.columns = fm.column_names();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), fm.rows.cols());
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = fm.rows.row(static_cast<Eigen::Index>(rows[i]));
    y(static_cast<Eigen::Index>(i)) = fm.ages.at(rows[i]);
  }
  require(x.allFinite() && y.allFinite(), ErrorCode::kInvalidData, "training data must be finite and labelled");
  if (is_tree_family(family)) {
    m.encoder = LabelEncoder::fit(y);
    y = m.encoder->encode(y);
  } else {
    m.standardizer = Standardizer::fit(x);
    x = m.standardizer->apply(x);
  }
  m.regressor = make_regressor(family, m.hyper);
  m.regressor->fit(x, y, seed);
  return m;
}

TrainedModel fit(Family family, const Hyper& hyper, const FeatureMatrix& fm, std::uint64_t seed) {
  std::vector<std::size_t> rows(fm.n_subjects());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return fit_rows(family, hyper, fm, rows, seed);
}

}  // namespace brainage::models
