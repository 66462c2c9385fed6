#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "brainage/error.hpp"
#include "brainage/models.hpp"
#include "brainage/parallel.hpp"

namespace brainage::models {

std::vector<int> stratified_kfold(const std::vector<double>& ages, int k, std::uint64_t seed) {
  require(k >= 2, ErrorCode::kParameter, "k-fold needs k >= 2");
  require(static_cast<std::size_t>(k) <= ages.size(), ErrorCode::kParameter, "k exceeds the number of subjects");
  std::map<double, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < ages.size(); ++i) {
    require(std::isfinite(ages[i]), ErrorCode::kInvalidData, "cross-validation needs known ages");
    strata[std::floor(ages[i])].push_back(i);
  }
  Rng rng(seed);
  std::vector<int> folds(ages.size(), -1);
  int next = 0;
  for (auto& [floor_age, members] : strata) {
    rng.shuffle(members);
    for (std::size_t i : members) {
      folds[i] = next;
      next = (next + 1) % k;
    }
  }
  return folds;
}

int CVResult::best_fold() const {
  require(!fold_mae.empty(), ErrorCode::kEmptyDataset, "no folds evaluated");
  return static_cast<int>(std::min_element(fold_mae.begin(), fold_mae.end()) - fold_mae.begin());
}

nlohmann::json CVResult::to_json() const {
  return {{"fold_mae", fold_mae}, {"mean", mean}, {"std", std}, {"folds", folds}, {"seed", seed}};
}

CVResult CVResult::from_json(const nlohmann::json& j) {
  CVResult r;
  try {
    r.fold_mae = j.at("fold_mae").get<std::vector<double>>();
    r.mean = j.at("mean").get<double>();
    r.std = j.at("std").get<double>();
    r.folds = j.at("folds").get<std::vector<int>>();
    r.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("malformed cv result: ") + e.what());
  }
  return r;
}

double mean_absolute_error(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
  require(truth.size() == pred.size() && truth.size() > 0, ErrorCode::kLength, "mae needs equal, non-empty vectors");
  return (truth - pred).cwiseAbs().mean();
}

namespace {

void split(const std::vector<int>& folds, int fold, std::vector<std::size_t>& train, std::vector<std::size_t>& test) {
  train.clear();
  test.clear();
  for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == fold ? test : train).push_back(i);
}

double fold_error(Family family, const Hyper& hyper, const FeatureMatrix& fm, const std::vector<int>& folds, int fold,
                  std::uint64_t seed) {
  std::vector<std::size_t> train, test;
  split(folds, fold, train, test);
  require(!test.empty(), ErrorCode::kEmptyDataset, "empty cross-validation fold");
  const TrainedModel m = fit_rows(family, hyper, fm, train, derive_seed(seed, static_cast<std::uint64_t>(fold)));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(test.size()), fm.rows.cols());
  Eigen::VectorXd y(static_cast<Eigen::Index>(test.size()));
  for (std::size_t i = 0; i < test.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = fm.rows.row(static_cast<Eigen::Index>(test[i]));
    y(static_cast<Eigen::Index>(i)) = fm.ages[test[i]];
  }
  return mean_absolute_error(y, m.predict(x));
}

CVResult summarise(std::vector<double> fold_mae, const std::vector<int>& folds, std::uint64_t seed) {
  CVResult r;
  r.fold_mae = std::move(fold_mae);
  const double n = static_cast<double>(r.fold_mae.size());
  r.mean = std::accumulate(r.fold_mae.begin(), r.fold_mae.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : r.fold_mae) ss += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(ss / n);
  r.folds = folds;
  r.seed = seed;
  return r;
}

}  // namespace

CVResult cross_validate(Family family, const Hyper& hyper, const FeatureMatrix& fm, int k, std::uint64_t seed,
                        int workers) {
  const auto folds = stratified_kfold(fm.ages, k, seed);
  std::vector<double> mae(static_cast<std::size_t>(k));
  parallel_for(mae.size(), static_cast<std::size_t>(std::max(workers, 1)), [&](std::size_t f) {
    mae[f] = fold_error(family, hyper, fm, folds, static_cast<int>(f), seed);
  });
  return summarise(std::move(mae), folds, seed);
}

SearchResult random_search(Family family, const FeatureMatrix& fm, int budget, int k, std::uint64_t seed,
                           int workers) {
  require(budget >= 1, ErrorCode::kParameter, "search budget must be at least 1");
  const auto folds = stratified_kfold(fm.ages, k, seed);
  SearchResult out;
  // The first point is the default configuration; the rest are draws.
  Rng rng(derive_seed(seed, 0x5eac4));
  out.points.push_back(default_hyper(family));
  for (int b = 1; b < budget; ++b) out.points.push_back(sample_hyper(family, rng));

  const auto n_points = out.points.size();
  const auto uk = static_cast<std::size_t>(k);
  std::vector<double> mae(n_points * uk);
  parallel_for(mae.size(), static_cast<std::size_t>(std::max(workers, 1)), [&](std::size_t job) {
    mae[job] = fold_error(family, out.points[job / uk], fm, folds, static_cast<int>(job % uk), seed);
  });

  std::size_t best = 0;
  for (std::size_t pnt = 0; pnt < n_points; ++pnt) {
    out.results.push_back(
        summarise(std::vector<double>(mae.begin() + static_cast<std::ptrdiff_t>(pnt * uk),
                                      mae.begin() + static_cast<std::ptrdiff_t>((pnt + 1) * uk)),
                  folds, seed));
    const auto& r = out.results.back();
    const auto& b = out.results[best];
    if (r.mean < b.mean || (r.mean == b.mean && r.std < b.std)) best = pnt;
  }
  out.best = out.points[best];
  out.cv = out.results[best];
  return out;
}

}  // namespace brainage::models
