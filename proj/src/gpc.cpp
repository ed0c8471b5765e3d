#include "pbound/gpc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "pbound/errors.hpp"
#include "pbound/parallel.hpp"
#include "pbound/rng.hpp"

namespace pbound {

namespace {

constexpr double kStationarityLimit = 1e-6;
constexpr std::size_t kMaxNewtonIterations = 100;
constexpr double kMaxJitter = 1e-4;
constexpr std::size_t kPredictChunk = 512;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// log p(y|f) = sum log sigmoid(y f)
double log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& f) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) s -= softplus(-y[i] * f[i]);
  return s;
}

struct GaussHermite {
  std::array<double, 32> nodes{};
  std::array<double, 32> weights{};  // already divided by sqrt(pi)
};

// Golub-Welsch, symmetrized so that the rule is exactly odd/even.
GaussHermite make_gauss_hermite() {
  constexpr int n = 32;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    J(i, i - 1) = J(i - 1, i) = std::sqrt(static_cast<double>(i) / 2.0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussHermite gh;
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    gh.nodes[i] = es.eigenvalues()[i];
    gh.weights[i] = v0 * v0;  // sqrt(pi) * v0^2 / sqrt(pi)
  }
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (gh.nodes[j] - gh.nodes[i]);
    const double w = 0.5 * (gh.weights[i] + gh.weights[j]);
    gh.nodes[i] = -x;
    gh.nodes[j] = x;
    gh.weights[i] = gh.weights[j] = w;
  }
  return gh;
}

const GaussHermite& gauss_hermite() {
  static const GaussHermite gh = make_gauss_hermite();
  return gh;
}

// 8-point Gauss-Legendre rule on [-1, 1], again via Golub-Welsch.
struct GaussLegendre {
  std::array<double, 8> nodes{};
  std::array<double, 8> weights{};
};

GaussLegendre make_gauss_legendre() {
  constexpr int n = 8;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double k = static_cast<double>(i);
    J(i, i - 1) = J(i - 1, i) = k / std::sqrt(4.0 * k * k - 1.0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussLegendre gl;
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    gl.nodes[i] = es.eigenvalues()[i];
    gl.weights[i] = 2.0 * v0 * v0;
  }
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (gl.nodes[j] - gl.nodes[i]);
    const double w = 0.5 * (gl.weights[i] + gl.weights[j]);
    gl.nodes[i] = -x;
    gl.nodes[j] = x;
    gl.weights[i] = gl.weights[j] = w;
  }
  return gl;
}

const GaussLegendre& gauss_legendre() {
  static const GaussLegendre gl = make_gauss_legendre();
  return gl;
}

// Beyond this the residual below is smaller than 1e-17.
constexpr double kResidualSupport = 40.0;
constexpr int kResidualPanels = 20;
// Above this latent standard deviation the Hermite nodes get too sparse to
// resolve the residual, so it is integrated on a fixed panel grid instead.
constexpr double kWideVarianceSd = 1.5;

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double expected_sigmoid(double mean, double var) {
  const double s = std::sqrt(std::max(var, 0.0));
  if (s == 0.0) return sigmoid(mean);
  // Phi(lambda f) matches the logistic slope at the origin.
  const double lambda = std::sqrt(3.14159265358979323846 / 8.0);
  auto r = [lambda](double f) { return sigmoid(f) - std_normal_cdf(lambda * f); };
  double residual = 0.0;
  if (s < kWideVarianceSd) {
    const auto& gh = gauss_hermite();
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
      residual += gh.weights[i] * r(mean + std::sqrt(2.0) * s * gh.nodes[i]);
    }
  } else {
    const auto& gl = gauss_legendre();
    const double half = kResidualSupport / kResidualPanels;
    const double norm = half / (s * std::sqrt(2.0 * 3.14159265358979323846));
    for (int p = 0; p < kResidualPanels; ++p) {
      const double centre = -kResidualSupport + (2 * p + 1) * half;
      for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double f = centre + half * gl.nodes[i];
        const double z = (f - mean) / s;
        residual += norm * gl.weights[i] * r(f) * std::exp(-0.5 * z * z);
      }
    }
  }
  const double closed = std_normal_cdf(lambda * mean / std::sqrt(1.0 + lambda * lambda * s * s));
  return std::clamp(closed + residual, 0.0, 1.0);
}

void KernelParams::validate(std::size_t dims) const {
  if (!(std::isfinite(signal_variance) && signal_variance > 0.0)) {
    throw UsageError("kernel signal variance must be > 0");
  }
  if (lengthscales.size() != dims) throw UsageError("kernel lengthscale count must equal input dimension");
  for (const double l : lengthscales) {
    if (!(std::isfinite(l) && l > 0.0)) throw UsageError("kernel lengthscales must be > 0");
  }
  if (!(jitter >= 0.0)) throw UsageError("kernel jitter must be >= 0");
}

double kernel_eval(std::span<const double> a, std::span<const double> b, const KernelParams& k) {
  double z = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double t = (a[d] - b[d]) / k.lengthscales[d];
    z += t * t;
  }
  return k.signal_variance * std::exp(-0.5 * z);
}

namespace {

Eigen::MatrixXd symmetric_kernel_matrix(const Eigen::MatrixXd& X, const KernelParams& k) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd out(n, n);
  const std::size_t d = k.lengthscales.size();
  for (Eigen::Index j = 0; j < n; ++j) {
    out(j, j) = k.signal_variance;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double z = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double t = (X(i, c) - X(j, c)) / k.lengthscales[c];
        z += t * t;
      }
      out(i, j) = out(j, i) = k.signal_variance * std::exp(-0.5 * z);
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const KernelParams& k) {
  if (&A == &B) return symmetric_kernel_matrix(A, k);
  Eigen::MatrixXd out(A.rows(), B.rows());
  const std::size_t d = k.lengthscales.size();
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      double z = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double t = (A(i, c) - B(j, c)) / k.lengthscales[c];
        z += t * t;
      }
      out(i, j) = k.signal_variance * std::exp(-0.5 * z);
    }
  }
  return out;
}

bool TrainingSet::has_both_classes() const {
  return (y.array() > 0.0).any() && (y.array() < 0.0).any();
}

TrainingSet TrainingSet::from_samples(const ParameterBox& box, std::span<const LabeledSample> samples) {
  if (box.size() != 3) throw UsageError("scenario samples need a 3-D parameter box");
  Eigen::MatrixXd X(samples.size(), 3);
  Eigen::VectorXd y(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto u = box.normalize(samples[i].params.as_array());
    for (int c = 0; c < 3; ++c) X(i, c) = u[c];
    y[i] = samples[i].outcome == Outcome::Collision ? 1.0 : -1.0;
  }
  return from_normalized(box, std::move(X), std::move(y));
}

TrainingSet TrainingSet::from_normalized(const ParameterBox& box, Eigen::MatrixXd X, Eigen::VectorXd y) {
  if (static_cast<std::size_t>(X.cols()) != box.size() || X.rows() != y.size()) {
    throw DataError("training set shape does not match parameter box");
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 1.0 && y[i] != -1.0) throw DataError("training labels must be +1 or -1");
  }
  return TrainingSet{box, std::move(X), std::move(y)};
}

GpcModel::GpcModel(TrainingSet training, KernelParams kernel)
    : training_(std::move(training)), kernel_(std::move(kernel)) {}

GpcModel GpcModel::prior_only(const ParameterBox& box, const KernelParams& kernel) {
  kernel.validate(box.size());
  GpcModel m(TrainingSet{box, Eigen::MatrixXd(0, box.size()), Eigen::VectorXd(0)}, kernel);
  m.mode_ = Eigen::VectorXd(0);
  m.refresh_caches();
  return m;
}

GpcModel GpcModel::from_mode(TrainingSet training, KernelParams kernel, Eigen::VectorXd mode,
                             double log_marginal) {
  kernel.validate(training.dims());
  if (mode.size() != static_cast<Eigen::Index>(training.size())) {
    throw DataError("stored mode length does not match training set");
  }
  GpcModel m(std::move(training), std::move(kernel));
  m.mode_ = std::move(mode);
  m.refresh_caches();
  m.log_marginal_ = log_marginal;
  return m;
}

namespace {

struct NewtonState {
  Eigen::VectorXd grad, w, w_sqrt;
  Eigen::LLT<Eigen::MatrixXd> llt;
  bool ok = false;
};

// Likelihood derivatives at f written sign-symmetrically, so flipping every
// label flips the whole Newton trajectory exactly.
void likelihood_terms(const Eigen::VectorXd& y, const Eigen::VectorXd& f, Eigen::VectorXd& grad,
                      Eigen::VectorXd& w) {
  grad.resize(f.size());
  w.resize(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    grad[i] = y[i] * sigmoid(-y[i] * f[i]);
    w[i] = sigmoid(f[i]) * sigmoid(-f[i]);
  }
}

NewtonState newton_state(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, const Eigen::VectorXd& f) {
  NewtonState s;
  likelihood_terms(y, f, s.grad, s.w);
  s.w_sqrt = s.w.array().sqrt();
  Eigen::MatrixXd B = s.w_sqrt.asDiagonal() * K * s.w_sqrt.asDiagonal();
  B.diagonal().array() += 1.0;
  s.llt.compute(B);
  s.ok = s.llt.info() == Eigen::Success;
  return s;
}

}  // namespace

void GpcModel::refresh_caches() {
  const auto& X = training_.X;
  K_ = kernel_matrix(X, X, kernel_);
  K_.diagonal().array() += kernel_.jitter;
  NewtonState s = newton_state(K_, training_.y, mode_);
  if (!s.ok) throw NotPositiveDefiniteError("cannot factorize I + W^1/2 K W^1/2");
  grad_ = std::move(s.grad);
  w_ = std::move(s.w);
  w_sqrt_ = std::move(s.w_sqrt);
  chol_lower_ = s.llt.matrixL();
}

double GpcModel::stationarity_residual() const {
  if (mode_.size() == 0) return 0.0;
  return (mode_ - K_ * grad_).cwiseAbs().maxCoeff();
}

Prediction GpcModel::predict(std::span<const double> x) const {
  Eigen::MatrixXd q(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t c = 0; c < x.size(); ++c) q(0, static_cast<Eigen::Index>(c)) = x[c];
  return predict_batch(q, 1).front();
}

Prediction GpcModel::predict_raw(std::span<const double> x_raw) const {
  return predict(training_.box.normalize(x_raw));
}

std::vector<Prediction> GpcModel::predict_batch(const Eigen::MatrixXd& queries, unsigned threads) const {
  if (static_cast<std::size_t>(queries.cols()) != training_.dims()) {
    throw UsageError("query dimension does not match model");
  }
  const auto m = static_cast<std::size_t>(queries.rows());
  std::vector<Prediction> out(m);
  const std::size_t chunks = (m + kPredictChunk - 1) / kPredictChunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const auto begin = static_cast<Eigen::Index>(c * kPredictChunk);
    const auto count = static_cast<Eigen::Index>(std::min(kPredictChunk, m - c * kPredictChunk));
    const Eigen::MatrixXd Q = queries.middleRows(begin, count);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(count);
    Eigen::VectorXd var = Eigen::VectorXd::Constant(count, kernel_.signal_variance);
    if (training_.size() > 0) {
      const Eigen::MatrixXd Ks = kernel_matrix(training_.X, Q, kernel_);  // n x count
      mean = Ks.transpose() * grad_;
      Eigen::MatrixXd V = w_sqrt_.asDiagonal() * Ks;
      chol_lower_.triangularView<Eigen::Lower>().solveInPlace(V);
      var -= V.colwise().squaredNorm().transpose();
    }
    for (Eigen::Index r = 0; r < count; ++r) {
      Prediction p;
      p.latent_mean = mean[r];
      p.latent_var = std::max(var[r], 0.0);
      p.prob_collision = expected_sigmoid(p.latent_mean, p.latent_var);
      out[static_cast<std::size_t>(begin + r)] = p;
    }
  });
  return out;
}

GpcModel laplace_fit(const TrainingSet& training, const KernelParams& kernel, const Eigen::VectorXd* warm_start,
                     const LaplaceOptions& options) {
  kernel.validate(training.dims());
  const auto n = static_cast<Eigen::Index>(training.size());
  if (n == 0) throw EmptyInputError("laplace_fit needs at least one training point");
  const auto& y = training.y;
  const Eigen::MatrixXd K0 = kernel_matrix(training.X, training.X, kernel);

  KernelParams effective = kernel;
  for (;;) {
    Eigen::MatrixXd K = K0;
    K.diagonal().array() += effective.jitter;

    // Warm start from a previous mode's gradient: at the mode f = K grad.
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    if (warm_start != nullptr && warm_start->size() == n && warm_start->allFinite()) a = *warm_start;
    Eigen::VectorXd f = K * a;
    if (a.any() && log_likelihood(y, f) - 0.5 * a.dot(f) < log_likelihood(y, Eigen::VectorXd::Zero(n))) {
      a.setZero();
      f.setZero();
    }
    double psi = log_likelihood(y, f) - 0.5 * a.dot(f);

    bool factorized = true;
    bool converged = false;
    std::size_t iter = 0;
    for (; iter < kMaxNewtonIterations; ++iter) {
      const NewtonState s = newton_state(K, y, f);
      if (!s.ok) {
        factorized = false;
        break;
      }
      const Eigen::VectorXd b = s.w.cwiseProduct(f) + s.grad;
      Eigen::VectorXd rhs = s.w_sqrt.cwiseProduct(K * b);
      s.llt.solveInPlace(rhs);
      Eigen::VectorXd a_new = b - s.w_sqrt.cwiseProduct(rhs);
      Eigen::VectorXd f_new = K * a_new;
      double psi_new = log_likelihood(y, f_new) - 0.5 * a_new.dot(f_new);
      // Step halving guards against overshoot far from the mode; decreases at
      // rounding level are accepted so the iteration cannot stall at the mode.
      const double slack = 1e-12 * (1.0 + std::abs(psi));
      for (int h = 0; h < 30 && !(psi_new >= psi - slack); ++h) {
        a_new = 0.5 * (a + a_new);
        f_new = K * a_new;
        psi_new = log_likelihood(y, f_new) - 0.5 * a_new.dot(f_new);
      }
      const double change = std::abs(psi_new - psi);
      a = std::move(a_new);
      f = std::move(f_new);
      psi = psi_new;
      if (change < options.psi_tolerance) {
        Eigen::VectorXd grad, w;
        likelihood_terms(y, f, grad, w);
        if ((f - K * grad).cwiseAbs().maxCoeff() < options.stationarity_target) {
          converged = true;
          ++iter;
          break;
        }
      }
    }

    if (!factorized) {
      if (effective.jitter >= kMaxJitter) {
        throw NotPositiveDefiniteError("laplace_fit: factorization failed at jitter " +
                                       std::to_string(effective.jitter));
      }
      effective.jitter = effective.jitter > 0.0 ? std::min(effective.jitter * 10.0, kMaxJitter) : 1e-10;
      continue;
    }

    GpcModel m(training, effective);
    m.mode_ = std::move(f);
    m.K_ = std::move(K);
    NewtonState s = newton_state(m.K_, y, m.mode_);
    if (!s.ok) throw NotPositiveDefiniteError("laplace_fit: final factorization failed");
    m.grad_ = std::move(s.grad);
    m.w_ = std::move(s.w);
    m.w_sqrt_ = std::move(s.w_sqrt);
    m.chol_lower_ = s.llt.matrixL();
    m.newton_iterations_ = iter;
    if (options.enforce_stationarity && !converged && m.stationarity_residual() >= kStationarityLimit) {
      throw NoConvergenceError("laplace_fit: Newton iteration did not converge");
    }
    m.log_marginal_ = psi - m.chol_lower_.diagonal().array().log().sum();
    return m;
  }
}

namespace {

struct Objective {
  const TrainingSet& training;
  const HyperparamBounds& bounds;
  std::size_t dims;
  Eigen::VectorXd warm;
  std::size_t evaluations = 0;

  Eigen::VectorXd lower() const {
    Eigen::VectorXd v(dims + 1);
    v.head(dims).setConstant(std::log(bounds.lengthscale_min));
    v[dims] = std::log(bounds.signal_variance_min);
    return v;
  }
  Eigen::VectorXd upper() const {
    Eigen::VectorXd v(dims + 1);
    v.head(dims).setConstant(std::log(bounds.lengthscale_max));
    v[dims] = std::log(bounds.signal_variance_max);
    return v;
  }

  KernelParams decode(const Eigen::VectorXd& theta) const {
    KernelParams k;
    k.lengthscales.resize(dims);
    for (std::size_t d = 0; d < dims; ++d) k.lengthscales[d] = std::exp(theta[static_cast<Eigen::Index>(d)]);
    k.signal_variance = std::exp(theta[static_cast<Eigen::Index>(dims)]);
    return k;
  }

  // Log marginal likelihood, or NaN when the fit fails.
  double operator()(const Eigen::VectorXd& theta) {
    ++evaluations;
    try {
      // The search only ranks candidates; the final fit uses the strict defaults.
      const LaplaceOptions loose{1e-7, std::numeric_limits<double>::infinity(), false};
      const GpcModel m = laplace_fit(training, decode(theta), warm.size() ? &warm : nullptr, loose);
      warm = m.likelihood_gradient();
      return m.log_marginal();
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  }
};

double cost(double log_marginal) {
  return std::isnan(log_marginal) ? std::numeric_limits<double>::infinity() : -log_marginal;
}

struct NelderMeadResult {
  Eigen::VectorXd best;
  double best_cost = std::numeric_limits<double>::infinity();
};

NelderMeadResult nelder_mead(Objective& obj, const Eigen::VectorXd& start, std::size_t max_evals, double tol) {
  const Eigen::VectorXd lo = obj.lower();
  const Eigen::VectorXd hi = obj.upper();
  const auto dim = start.size();
  auto project = [&](Eigen::VectorXd v) { return v.cwiseMax(lo).cwiseMin(hi).eval(); };

  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> costs;
  simplex.push_back(project(start));
  for (Eigen::Index i = 0; i < dim; ++i) {
    Eigen::VectorXd v = simplex.front();
    const double step = 0.25 * (hi[i] - lo[i]);
    v[i] = v[i] + step <= hi[i] ? v[i] + step : v[i] - step;
    simplex.push_back(project(v));
  }
  const std::size_t start_evals = obj.evaluations;
  for (const auto& v : simplex) costs.push_back(cost(obj(v)));

  std::vector<std::size_t> order(simplex.size());
  auto sort_simplex = [&] {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return costs[a] < costs[b]; });
    std::vector<Eigen::VectorXd> s2;
    std::vector<double> c2;
    for (const auto i : order) {
      s2.push_back(simplex[i]);
      c2.push_back(costs[i]);
    }
    simplex.swap(s2);
    costs.swap(c2);
  };

  while (obj.evaluations - start_evals < max_evals) {
    sort_simplex();
    const std::size_t worst = simplex.size() - 1;
    if (std::isfinite(costs[worst]) && costs[worst] - costs[0] < tol) break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i < worst; ++i) centroid += simplex[i];
    centroid /= static_cast<double>(worst);

    const Eigen::VectorXd xr = project(centroid + (centroid - simplex[worst]));
    const double cr = cost(obj(xr));
    if (cr < costs[0]) {
      const Eigen::VectorXd xe = project(centroid + 2.0 * (centroid - simplex[worst]));
      const double ce = cost(obj(xe));
      if (ce < cr) {
        simplex[worst] = xe;
        costs[worst] = ce;
      } else {
        simplex[worst] = xr;
        costs[worst] = cr;
      }
      continue;
    }
    if (cr < costs[worst - 1]) {
      simplex[worst] = xr;
      costs[worst] = cr;
      continue;
    }
    const bool outside = cr < costs[worst];
    const Eigen::VectorXd xc = outside ? project(centroid + 0.5 * (xr - centroid))
                                       : project(centroid + 0.5 * (simplex[worst] - centroid));
    const double cc = cost(obj(xc));
    if (cc < std::min(cr, costs[worst])) {
      simplex[worst] = xc;
      costs[worst] = cc;
      continue;
    }
    for (std::size_t i = 1; i < simplex.size(); ++i) {
      simplex[i] = project(simplex[0] + 0.5 * (simplex[i] - simplex[0]));
      costs[i] = cost(obj(simplex[i]));
    }
  }
  sort_simplex();
  return {simplex[0], costs[0]};
}

}  // namespace

HyperparamResult optimize_hyperparams(const TrainingSet& training, const HyperparamOptions& options) {
  if (options.restarts < 1) throw UsageError("optimize_hyperparams needs restarts >= 1");
  if (training.size() == 0) throw EmptyInputError("optimize_hyperparams: empty training set");
  if (!training.has_both_classes()) {
    throw SingleClassError("training data contains a single class; hyperparameters are not identifiable");
  }
  const std::size_t dims = training.dims();

  struct RestartOutcome {
    double start_lml = std::numeric_limits<double>::quiet_NaN();
    double lml = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd theta;
    std::size_t evaluations = 0;
  };
  std::vector<RestartOutcome> outcomes(options.restarts);

  parallel_for(options.restarts, options.threads, [&](std::size_t r) {
    Objective obj{training, options.bounds, dims, {}};
    const Eigen::VectorXd lo = obj.lower();
    const Eigen::VectorXd hi = obj.upper();
    Rng rng(derive_seed(options.seed, "restart-" + std::to_string(r)));
    Eigen::VectorXd start(dims + 1);
    for (Eigen::Index i = 0; i < start.size(); ++i) start[i] = rng.uniform(lo[i], hi[i]);
    auto& out = outcomes[r];
    out.start_lml = obj(start);
    obj.warm.resize(0);
    const NelderMeadResult nm = nelder_mead(obj, start, options.max_evals, options.tolerance);
    out.evaluations = obj.evaluations;
    if (std::isfinite(nm.best_cost)) {
      out.lml = -nm.best_cost;
      out.theta = nm.best;
    }
  });

  HyperparamResult result;
  std::size_t best = options.restarts;
  for (std::size_t r = 0; r < options.restarts; ++r) {
    result.start_log_marginals.push_back(outcomes[r].start_lml);
    result.restart_log_marginals.push_back(outcomes[r].lml);
    result.evaluations += outcomes[r].evaluations;
    if (!std::isnan(outcomes[r].lml) && (best == options.restarts || outcomes[r].lml > outcomes[best].lml)) {
      best = r;
    }
  }
  if (best == options.restarts) throw NumericalError("optimize_hyperparams: every restart failed");
  const Objective decoder{training, options.bounds, dims, {}};
  result.kernel = decoder.decode(outcomes[best].theta);
  result.log_marginal = outcomes[best].lml;
  return result;
}

Metrics evaluate(const GpcModel& model, std::span<const LabeledSample> test) {
  if (test.empty()) throw EmptyInputError("evaluate: empty test set, accuracy undefined");
  Metrics m;
  m.n = test.size();
  for (const auto& s : test) {
    const double p = model.predict_raw(s.params.as_array()).prob_collision;
    const bool predicted_collision = p >= 0.5;
    const bool wrong = predicted_collision != (s.outcome == Outcome::Collision);
    m.probabilities.push_back(p);
    m.misclassified.push_back(wrong);
    if (wrong) ++m.n_misclassified;
  }
  m.accuracy = static_cast<double>(m.n - m.n_misclassified) / static_cast<double>(m.n);
  return m;
}

nlohmann::json box_to_json(const ParameterBox& box) {
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& d : box.dims()) {
    dims.push_back({{"name", d.name}, {"lower", d.lower}, {"upper", d.upper}, {"unit", d.unit}});
  }
  return dims;
}

ParameterBox box_from_json(const nlohmann::json& j) {
  std::vector<Dimension> dims;
  for (const auto& d : j) {
    dims.push_back({d.at("name").get<std::string>(), d.at("lower").get<double>(), d.at("upper").get<double>(),
                    d.value("unit", std::string{})});
  }
  return ParameterBox(std::move(dims));
}

nlohmann::json to_json(const GpcModel& model) {
  const auto& t = model.training();
  nlohmann::json X = nlohmann::json::array();
  for (Eigen::Index i = 0; i < t.X.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < t.X.cols(); ++c) row.push_back(t.X(i, c));
    X.push_back(std::move(row));
  }
  return {
      {"format_version", kModelFormatVersion},
      {"box", box_to_json(t.box)},
      {"kernel",
       {{"signal_variance", model.kernel().signal_variance},
        {"lengthscales", model.kernel().lengthscales},
        {"jitter", model.kernel().jitter}}},
      {"X", std::move(X)},
      {"y", std::vector<double>(t.y.data(), t.y.data() + t.y.size())},
      {"mode", std::vector<double>(model.mode().data(), model.mode().data() + model.mode().size())},
      {"log_marginal", model.log_marginal()},
  };
}

GpcModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw DataError("unsupported model format version");
    }
    const ParameterBox box = box_from_json(j.at("box"));
    KernelParams k;
    k.signal_variance = j.at("kernel").at("signal_variance").get<double>();
    k.lengthscales = j.at("kernel").at("lengthscales").get<std::vector<double>>();
    k.jitter = j.at("kernel").at("jitter").get<double>();
    const auto& rows = j.at("X");
    const auto y = j.at("y").get<std::vector<double>>();
    const auto mode = j.at("mode").get<std::vector<double>>();
    Eigen::MatrixXd X(rows.size(), box.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = rows[i].get<std::vector<double>>();
      if (r.size() != box.size()) throw DataError("model X row has wrong dimension");
      for (std::size_t c = 0; c < r.size(); ++c) X(i, c) = r[c];
    }
    TrainingSet t = TrainingSet::from_normalized(box, std::move(X), Eigen::Map<const Eigen::VectorXd>(y.data(), y.size()));
    return GpcModel::from_mode(std::move(t), std::move(k), Eigen::Map<const Eigen::VectorXd>(mode.data(), mode.size()),
                               j.at("log_marginal").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace pbound
