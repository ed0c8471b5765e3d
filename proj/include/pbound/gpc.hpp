#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <json.hpp>

#include "pbound/parameter_box.hpp"
#include "pbound/sampling.hpp"

namespace pbound {

// Squared-exponential ARD kernel hyperparameters. Lengthscales are in
// unit-cube coordinates.
struct KernelParams {
  double signal_variance = 1.0;
  std::vector<double> lengthscales;
  double jitter = 1e-8;

  void validate(std::size_t dims) const;
  bool operator==(const KernelParams&) const = default;
};

double kernel_eval(std::span<const double> a, std::span<const double> b, const KernelParams& k);

// Inputs mapped into the unit cube of `box`; labels +1 = collision, -1 = none.
struct TrainingSet {
  ParameterBox box;
  Eigen::MatrixXd X;  // n x d
  Eigen::VectorXd y;  // n

  std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t dims() const { return box.size(); }
  bool has_both_classes() const;

  static TrainingSet from_samples(const ParameterBox& box, std::span<const LabeledSample> samples);
  static TrainingSet from_normalized(const ParameterBox& box, Eigen::MatrixXd X, Eigen::VectorXd y);
};

struct Prediction {
  double latent_mean = 0.0;
  double latent_var = 0.0;
  double prob_collision = 0.5;
};

// E[sigmoid(f)] for f ~ N(mean, var). The residual sigmoid(f) - Phi(lambda f)
// is integrated numerically (32-node Gauss-Hermite for small variance,
// Gauss-Legendre panels over f otherwise); the Phi part is closed form.
double expected_sigmoid(double mean, double var);

double sigmoid(double z);

struct LaplaceOptions {
  double psi_tolerance = 1e-9;        // stop when |delta psi| falls below this...
  double stationarity_target = 1e-8;  // ...and max |f - K grad| below this
  bool enforce_stationarity = true;   // NoConvergenceError if the mode misses 1e-6
};

// Trained Laplace-approximate GP classifier. Immutable once built; predict
// is safe to call concurrently.
class GpcModel {
 public:
  // Model without training data: predictions are the prior.
  static GpcModel prior_only(const ParameterBox& box, const KernelParams& kernel);

  // Rebuilds cached factors from a stored posterior mode.
  static GpcModel from_mode(TrainingSet training, KernelParams kernel, Eigen::VectorXd mode,
                            double log_marginal);

  const TrainingSet& training() const { return training_; }
  const KernelParams& kernel() const { return kernel_; }
  const Eigen::VectorXd& mode() const { return mode_; }
  const Eigen::VectorXd& likelihood_gradient() const { return grad_; }
  const Eigen::VectorXd& hessian_diagonal() const { return w_; }
  double log_marginal() const { return log_marginal_; }
  std::size_t newton_iterations() const { return newton_iterations_; }

  // max |f - K grad log p(y|f)| at the stored mode.
  double stationarity_residual() const;

  Prediction predict(std::span<const double> x_normalized) const;
  Prediction predict_raw(std::span<const double> x_raw) const;
  // Rows of `queries` are unit-cube points. Result does not depend on `threads`.
  std::vector<Prediction> predict_batch(const Eigen::MatrixXd& queries, unsigned threads = 1) const;

 private:
  friend GpcModel laplace_fit(const TrainingSet&, const KernelParams&, const Eigen::VectorXd*,
                              const LaplaceOptions&);
  GpcModel(TrainingSet training, KernelParams kernel);
  void refresh_caches();  // from mode_

  TrainingSet training_;
  KernelParams kernel_;
  Eigen::MatrixXd K_;
  Eigen::VectorXd mode_;
  Eigen::VectorXd grad_;
  Eigen::VectorXd w_;
  Eigen::VectorXd w_sqrt_;
  Eigen::MatrixXd chol_lower_;  // L with L L^T = I + W^1/2 K W^1/2
  double log_marginal_ = 0.0;
  std::size_t newton_iterations_ = 0;
};

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const KernelParams& k);

// Newton search for the posterior mode of the latent function, started from
// f = K * warm_start when given (pass a previous model's likelihood_gradient()).
// Jitter is
// raised tenfold up to 1e-4 if I + W^1/2 K W^1/2 cannot be factorized; the
// model records the jitter actually used. Single-class data is accepted here.
GpcModel laplace_fit(const TrainingSet& training, const KernelParams& kernel,
                     const Eigen::VectorXd* warm_start = nullptr, const LaplaceOptions& options = {});

struct HyperparamBounds {
  double lengthscale_min = 0.03;
  double lengthscale_max = 3.0;
  double signal_variance_min = 0.01;
  double signal_variance_max = 900.0;
};

struct HyperparamOptions {
  std::size_t restarts = 8;
  std::uint64_t seed = 0;
  std::size_t max_evals = 300;  // per restart
  double tolerance = 1e-6;      // simplex spread in objective
  unsigned threads = 1;
  HyperparamBounds bounds;
};

struct HyperparamResult {
  KernelParams kernel;
  double log_marginal = 0.0;
  std::vector<double> start_log_marginals;  // NaN where a start failed
  std::vector<double> restart_log_marginals;
  std::size_t evaluations = 0;
};

// Maximizes the Laplace log marginal likelihood in log-parameter space with
// multi-start Nelder-Mead. Restart r starts from a point drawn from its own
// stream, so a run with more restarts sees a superset of starts.
HyperparamResult optimize_hyperparams(const TrainingSet& training, const HyperparamOptions& options);

struct Metrics {
  std::size_t n = 0;
  std::size_t n_misclassified = 0;
  double accuracy = 0.0;
  std::vector<double> probabilities;
  std::vector<bool> misclassified;
};

// Class decision p >= 0.5 -> collision. Throws EmptyInputError on an empty list.
Metrics evaluate(const GpcModel& model, std::span<const LabeledSample> test);

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const GpcModel& model);
GpcModel model_from_json(const nlohmann::json& j);  // throws DataError

nlohmann::json box_to_json(const ParameterBox& box);
ParameterBox box_from_json(const nlohmann::json& j);

}  // namespace pbound
