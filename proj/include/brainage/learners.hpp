#pragma once

// Concrete learners behind models::Regressor.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "brainage/models.hpp"
#include "brainage/tree.hpp"

namespace brainage::models {

// Squared-distance RBF kernel matrix between the rows of a and b.
Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma);

// Minimises (1/2n)|y - Xw - b|^2 + alpha (rho |w|_1 + (1 - rho)/2 |w|^2)
// by cyclic coordinate descent; the intercept is fitted by centring.
class ElasticNet : public Regressor {
 public:
  ElasticNet(double alpha, double l1_ratio, int max_sweeps = 5000, double tol = 1e-6)
      : alpha_(alpha), l1_ratio_(l1_ratio), max_sweeps_(max_sweeps), tol_(tol) {}
  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) override;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
  nlohmann::json to_json() const override;
  void from_json(const nlohmann::json& j) override;

  const Eigen::VectorXd& coef() const { return coef_; }
  double intercept() const { return intercept_; }
  // Objective after each full sweep (index 0 = before the first sweep).
  const std::vector<double>& objective_history() const { return history_; }
  double objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) const;

 private:
  double alpha_, l1_ratio_;
  int max_sweeps_;
  double tol_;
  Eigen::VectorXd coef_;
  double intercept_ = 0.0;
  std::vector<double> history_;
};

class KernelRidge : public Regressor {
 public:
  KernelRidge(double alpha, double gamma_scale) : alpha_(alpha), gamma_scale_(gamma_scale) {}
  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) override;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
  nlohmann::json to_json() const override;
  void from_json(const nlohmann::json& j) override;

  // max |(K + alpha I) dual - (y - mean y)| on the training data.
  double residual() const { return residual_; }
  double gamma() const { return gamma_; }

 private:
  double alpha_, gamma_scale_;
  double gamma_ = 0.0;
  double intercept_ = 0.0;
  double residual_ = 0.0;
  Eigen::MatrixXd support_;
  Eigen::VectorXd dual_;
};

// Shared storage and serialisation for the tree ensembles.
class TreeModel : public Regressor {
 public:
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
  nlohmann::json to_json() const override;
  void from_json(const nlohmann::json& j) override;
  const TreeEnsemble& ensemble() const { return ensemble_; }

 protected:
  TreeEnsemble ensemble_;
};

// Second-order boosting with exact greedy, level-wise splits and L1/L2 leaf
// regularisation on squared loss.
class GBDT : public TreeModel {
 public:
  GBDT(int n_estimators, double learning_rate, int max_depth, double reg_lambda, double reg_alpha,
       double min_child_weight = 1.0)
      : n_estimators_(n_estimators),
        learning_rate_(learning_rate),
        max_depth_(max_depth),
        reg_lambda_(reg_lambda),
        reg_alpha_(reg_alpha),
        min_child_weight_(min_child_weight) {}
  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) override;

 private:
  int n_estimators_;
  double learning_rate_;
  int max_depth_;
  double reg_lambda_, reg_alpha_, min_child_weight_;
};

// Oblivious trees with ordered boosting over one seeded permutation: the
// running prediction of example i only uses leaf statistics of examples
// that precede it in the permutation.
class OrderedGBDT : public TreeModel {
 public:
  OrderedGBDT(int iterations, double learning_rate, int depth, double l2_leaf_reg)
      : iterations_(iterations), learning_rate_(learning_rate), depth_(depth), l2_(l2_leaf_reg) {}
  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) override;

 private:
  int iterations_;
  double learning_rate_;
  int depth_;
  double l2_;
};

// Bagged CART regression trees with sqrt(p) candidate features per split.
class RandomForest : public TreeModel {
 public:
  RandomForest(int n_estimators, int max_depth, int min_samples_leaf, bool bootstrap)
      : n_estimators_(n_estimators), max_depth_(max_depth), min_samples_leaf_(min_samples_leaf), bootstrap_(bootstrap) {}
  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) override;

 private:
  int n_estimators_;
  int max_depth_;  // 0 = unlimited
  int min_samples_leaf_;
  bool bootstrap_;
};

class KNN : public Regressor {
 public:
  explicit KNN(int k) : k_(k) {}
  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) override;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
  nlohmann::json to_json() const override;
  void from_json(const nlohmann::json& j) override;

 private:
  int k_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
};

class BaggedKNN : public Regressor {
 public:
  BaggedKNN(int k, int n_estimators, double max_samples) : k_(k), n_estimators_(n_estimators), max_samples_(max_samples) {}
  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) override;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
  nlohmann::json to_json() const override;
  void from_json(const nlohmann::json& j) override;

 private:
  int k_, n_estimators_;
  double max_samples_;
  // Each member is a bootstrap of the training rows; distances to x_ are
  // computed once per query and shared by all members.
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  std::vector<std::vector<std::size_t>> bags_;
};

// Epsilon-insensitive RBF support vector regression, solved on the dual by
// SMO with second-order working-set selection.
class SVR : public Regressor {
 public:
  SVR(double c, double epsilon, double gamma_scale, double tol = 1e-3, long max_iter = 10'000'000)
      : c_(c), epsilon_(epsilon), gamma_scale_(gamma_scale), tol_(tol), max_iter_(max_iter) {}
  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) override;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
  nlohmann::json to_json() const override;
  void from_json(const nlohmann::json& j) override;

  // Training-set dual variables: alpha_plus - alpha_minus per example.
  const Eigen::VectorXd& alpha_plus() const { return alpha_plus_; }
  const Eigen::VectorXd& alpha_minus() const { return alpha_minus_; }
  double c() const { return c_; }
  double epsilon() const { return epsilon_; }

 private:
  double c_, epsilon_, gamma_scale_, tol_;
  long max_iter_;
  double gamma_ = 0.0;
  double bias_ = 0.0;
  Eigen::MatrixXd support_;
  Eigen::VectorXd coef_;
  Eigen::VectorXd alpha_plus_, alpha_minus_;
};

// Two ReLU hidden layers trained by Adam on mean squared error with L2
// penalty. Targets are z-scored internally; the output layer starts at zero
// so the initial prediction is the training mean.
class MLP : public Regressor {
 public:
  MLP(double learning_rate, double l2, int hidden1 = 128, int hidden2 = 64, int batch = 32, int max_epochs = 500,
      int patience = 20, double validation_fraction = 0.1)
      : lr_(learning_rate),
        l2_(l2),
        h1_(hidden1),
        h2_(hidden2),
        batch_(batch),
        max_epochs_(max_epochs),
        patience_(patience),
        validation_fraction_(validation_fraction) {}
  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed) override;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
  nlohmann::json to_json() const override;
  void from_json(const nlohmann::json& j) override;

  // Largest relative error between backpropagated and central-difference
  // gradients over `n_params` sampled weights, on the first 5 rows, for a
  // freshly initialised network with a random output layer.
  double gradient_check(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed,
                        int n_params = 200) const;
  int epochs_run() const { return epochs_run_; }

  struct Weights {
    Eigen::MatrixXd w1, w2, w3;
    Eigen::VectorXd b1, b2, b3;
  };

 private:
  double lr_, l2_;
  int h1_, h2_, batch_, max_epochs_, patience_;
  double validation_fraction_;
  Weights w_;
  double y_mean_ = 0.0, y_scale_ = 1.0;
  int epochs_run_ = 0;
};

}  // namespace brainage::models
