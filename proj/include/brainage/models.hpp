#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "brainage/dataset.hpp"
#include "brainage/rng.hpp"

namespace brainage::models {

enum class Family { kElasticNet, kLasso, kKernelRidge, kGBDT, kOrderedGBDT, kRandomForest, kBaggedKNN, kKNN, kSVR, kMLP };

std::string_view family_name(Family family);
Family parse_family(std::string_view name);  // throws kParameter
const std::vector<Family>& all_families();
// Tree families train on raw features and label-encoded targets.
bool is_tree_family(Family family);

// Hyperparameters are numeric; integer parameters are stored as whole numbers.
using Hyper = std::map<std::string, double>;

struct ParamSpec {
  enum class Kind { kLogUniform, kUniform, kInteger };
  std::string name;
  Kind kind = Kind::kUniform;
  double lo = 0.0;
  double hi = 0.0;
  double default_value = 0.0;
};

const std::vector<ParamSpec>& schema(Family family);
Hyper default_hyper(Family family);
Hyper sample_hyper(Family family, Rng& rng);
// Fills missing entries with defaults and rejects unknown names.
Hyper resolve_hyper(Family family, const Hyper& hyper);

// Learner on a dense design matrix. Implementations are single-threaded.
class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) = 0;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& x) const = 0;
  virtual nlohmann::json to_json() const = 0;
  virtual void from_json(const nlohmann::json& j) = 0;
  bool converged() const { return converged_; }

 protected:
  bool converged_ = true;
};

std::unique_ptr<Regressor> make_regressor(Family family, const Hyper& hyper);

// Year-class label encoding for tree targets: class k is the k-th distinct
// floor(age). Fractional predicted indices decode by linear interpolation
// between neighbouring class-mean ages.
struct LabelEncoder {
  std::vector<double> class_floor;
  std::vector<double> class_mean;

  static LabelEncoder fit(const Eigen::VectorXd& ages);
  Eigen::VectorXd encode(const Eigen::VectorXd& ages) const;
  double decode(double index) const;
  Eigen::VectorXd decode(const Eigen::VectorXd& index) const;
};

struct TrainedModel {
  Family family = Family::kElasticNet;
  Hyper hyper;
  std::uint64_t seed = 0;
  std::vector<std::string> columns;
  std::optional<Standardizer> standardizer;  // non-tree families
  std::optional<LabelEncoder> encoder;       // tree families
  std::unique_ptr<Regressor> regressor;
  int cv_fold = -1;  // held-out fold of the training split, -1 if fit on all rows

  bool converged() const { return regressor && regressor->converged(); }
  // Predictions in years from raw feature rows.
  Eigen::VectorXd predict(const Eigen::MatrixXd& raw) const;
  // Checks column descriptors before predicting.
  Eigen::VectorXd predict(const FeatureMatrix& fm) const;
  // Output of the underlying learner before label decoding (equals
  // predict() for non-tree families).
  Eigen::VectorXd predict_raw(const Eigen::MatrixXd& raw) const;

  nlohmann::json to_json() const;
  static TrainedModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static TrainedModel load(const std::filesystem::path& path);
};

TrainedModel fit(Family family, const Hyper& hyper, const FeatureMatrix& fm, std::uint64_t seed);
TrainedModel fit_rows(Family family, const Hyper& hyper, const FeatureMatrix& fm,
                      const std::vector<std::size_t>& rows, std::uint64_t seed);

// Fold index per subject. Strata are floor(age); each stratum is shuffled
// and dealt round-robin, continuing from the fold where the previous
// stratum stopped.
std::vector<int> stratified_kfold(const std::vector<double>& ages, int k, std::uint64_t seed);

struct CVResult {
  std::vector<double> fold_mae;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation across folds
  std::vector<int> folds;
  std::uint64_t seed = 0;
  int best_fold() const;  // lowest MAE, first on ties

  nlohmann::json to_json() const;
  static CVResult from_json(const nlohmann::json& j);
};

double mean_absolute_error(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred);

CVResult cross_validate(Family family, const Hyper& hyper, const FeatureMatrix& fm, int k, std::uint64_t seed,
                        int workers = 1);

struct SearchResult {
  Hyper best;
  CVResult cv;
  std::vector<Hyper> points;
  std::vector<CVResult> results;
};

// `budget` seeded draws from the schema; argmin of mean MAE, ties to lower
// std, then to the earlier draw. Folds are shared by all points.
SearchResult random_search(Family family, const FeatureMatrix& fm, int budget, int k, std::uint64_t seed,
                           int workers = 1);

}  // namespace brainage::models
