#include "pbound/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pbound/errors.hpp"
#include "pbound/parallel.hpp"
#include "pbound/rng.hpp"

namespace pbound {

std::string_view to_string(SamplingMethod m) {
  return m == SamplingMethod::MonteCarlo ? "monte_carlo" : "latin_hypercube";
}

SamplingMethod parse_sampling_method(std::string_view s) {
  if (s == "monte_carlo" || s == "mc" || s == "MC") return SamplingMethod::MonteCarlo;
  if (s == "latin_hypercube" || s == "lhc" || s == "LHC") return SamplingMethod::LatinHypercube;
  throw UsageError("unknown sampling method '" + std::string(s) + "'");
}

void DesignSpec::validate() const {
  if (n_total < 2) throw UsageError("design needs n_total >= 2");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw UsageError("train_fraction must lie in (0, 1)");
  }
}

std::size_t DesignSpec::train_size() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n_total) * train_fraction));
}

SampleSet monte_carlo(const ParameterBox& box, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw UsageError("monte_carlo needs n >= 1");
  Rng rng(seed);
  SampleSet s;
  s.provenance = {SamplingMethod::MonteCarlo, n, 0.9, seed, 0};
  s.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point p(box.size());
    for (std::size_t d = 0; d < box.size(); ++d) p[d] = rng.uniform(box[d].lower, box[d].upper);
    s.points.push_back(std::move(p));
  }
  return s;
}

std::size_t reference_grid_levels(std::size_t dims) {
  constexpr double kMaxNodes = 2e5;
  const double fit = std::floor(std::pow(kMaxNodes, 1.0 / static_cast<double>(dims)));
  return static_cast<std::size_t>(std::clamp(fit, 2.0, 17.0));
}

namespace {

// Row-major n x d matrix of unit-cube coordinates.
struct Design {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> x;

  double* row(std::size_t i) { return x.data() + i * d; }
  const double* row(std::size_t i) const { return x.data() + i * d; }
};

std::vector<double> reference_grid(std::size_t d) {
  const std::size_t levels = reference_grid_levels(d);
  std::size_t count = 1;
  for (std::size_t k = 0; k < d; ++k) count *= levels;
  std::vector<double> grid(count * d);
  for (std::size_t g = 0; g < count; ++g) {
    std::size_t rem = g;
    for (std::size_t k = 0; k < d; ++k) {
      grid[g * d + k] = static_cast<double>(rem % levels) / static_cast<double>(levels - 1);
      rem /= levels;
    }
  }
  return grid;
}

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

// Nearest design point for every reference node; supports the two-row
// update a column swap produces.
class FillTracker {
 public:
  FillTracker(const Design& design, std::vector<double> grid)
      : d_(design.d), grid_(std::move(grid)), nodes_(grid_.size() / d_),
        nearest_(nodes_), dist2_(nodes_) {
    for (std::size_t g = 0; g < nodes_; ++g) rescan(design, g, nearest_[g], dist2_[g]);
    summarize(dist2_, max2_, sum2_);
  }

  double max2() const { return max2_; }
  double sum2() const { return sum2_; }

  // Evaluates the design after rows i and j changed; result kept as pending.
  void propose(const Design& design, std::size_t i, std::size_t j) {
    cand_nearest_ = nearest_;
    cand_dist2_ = dist2_;
    const double* ri = design.row(i);
    const double* rj = design.row(j);
    for (std::size_t g = 0; g < nodes_; ++g) {
      const double* node = grid_.data() + g * d_;
      if (nearest_[g] == i || nearest_[g] == j) {
        rescan(design, g, cand_nearest_[g], cand_dist2_[g]);
        continue;
      }
      const double di = sq_dist(node, ri, d_);
      const double dj = sq_dist(node, rj, d_);
      if (di < cand_dist2_[g]) {
        cand_dist2_[g] = di;
        cand_nearest_[g] = i;
      }
      if (dj < cand_dist2_[g]) {
        cand_dist2_[g] = dj;
        cand_nearest_[g] = j;
      }
    }
    summarize(cand_dist2_, cand_max2_, cand_sum2_);
  }

  double pending_max2() const { return cand_max2_; }
  double pending_sum2() const { return cand_sum2_; }

  void commit() {
    nearest_.swap(cand_nearest_);
    dist2_.swap(cand_dist2_);
    max2_ = cand_max2_;
    sum2_ = cand_sum2_;
  }

 private:
  void rescan(const Design& design, std::size_t g, std::size_t& best, double& best2) const {
    const double* node = grid_.data() + g * d_;
    best = 0;
    best2 = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < design.n; ++r) {
      const double s = sq_dist(node, design.row(r), d_);
      if (s < best2) {
        best2 = s;
        best = r;
      }
    }
  }

  static void summarize(const std::vector<double>& d2, double& mx, double& sum) {
    mx = 0.0;
    sum = 0.0;
    for (const double v : d2) {
      mx = std::max(mx, v);
      sum += v;
    }
  }

  std::size_t d_;
  std::vector<double> grid_;
  std::size_t nodes_;
  std::vector<std::size_t> nearest_, cand_nearest_;
  std::vector<double> dist2_, cand_dist2_;
  double max2_ = 0.0, sum2_ = 0.0, cand_max2_ = 0.0, cand_sum2_ = 0.0;
};

}  // namespace

double minimax_criterion(const ParameterBox& box, std::span<const Point> points) {
  if (points.empty()) throw EmptyInputError("minimax criterion of an empty design");
  Design design{points.size(), box.size(), {}};
  design.x.reserve(design.n * design.d);
  for (const auto& p : points) {
    const auto u = box.normalize(p);
    design.x.insert(design.x.end(), u.begin(), u.end());
  }
  FillTracker tracker(design, reference_grid(design.d));
  return std::sqrt(tracker.max2());
}

SampleSet latin_hypercube(const ParameterBox& box, std::size_t n, std::uint64_t seed,
                          std::size_t minimax_iters, LhcReport* report) {
  if (n < 2) throw UsageError("latin_hypercube needs n >= 2");
  Rng rng(seed);
  Design design{n, box.size(), std::vector<double>(n * box.size())};
  std::vector<std::size_t> strata(n);
  for (std::size_t k = 0; k < design.d; ++k) {
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    rng.shuffle(strata);
    for (std::size_t i = 0; i < n; ++i) {
      design.row(i)[k] = (static_cast<double>(strata[i]) + rng.uniform()) / static_cast<double>(n);
    }
  }

  FillTracker tracker(design, reference_grid(design.d));
  LhcReport local;
  local.initial_criterion = std::sqrt(tracker.max2());
  for (std::size_t it = 0; it < minimax_iters; ++it) {
    const std::size_t k = rng.below(design.d);
    const std::size_t i = rng.below(n);
    std::size_t j = rng.below(n - 1);
    if (j >= i) ++j;
    std::swap(design.row(i)[k], design.row(j)[k]);
    tracker.propose(design, i, j);
    const bool better = tracker.pending_max2() < tracker.max2() ||
                        (tracker.pending_max2() == tracker.max2() &&
                         tracker.pending_sum2() < tracker.sum2());
    if (better) {
      tracker.commit();
      ++local.accepted_swaps;
    } else {
      std::swap(design.row(i)[k], design.row(j)[k]);
    }
  }
  local.final_criterion = std::sqrt(tracker.max2());
  if (report != nullptr) *report = local;

  SampleSet s;
  s.provenance = {SamplingMethod::LatinHypercube, n, 0.9, seed, minimax_iters};
  s.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.points.push_back(box.denormalize(std::span<const double>(design.row(i), design.d)));
  }
  return s;
}

SampleSet generate(const ParameterBox& box, const DesignSpec& spec) {
  spec.validate();
  SampleSet s = spec.method == SamplingMethod::MonteCarlo
                    ? monte_carlo(box, spec.n_total, spec.seed)
                    : latin_hypercube(box, spec.n_total, spec.seed, spec.minimax_iters);
  s.provenance = spec;
  return s;
}

namespace {

std::vector<std::size_t> split_order(std::size_t n, const DesignSpec& spec) {
  if (n != spec.n_total) throw DataError("split: set size does not match design n_total");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, "split"));
  rng.shuffle(order);
  return order;
}

template <class T>
std::pair<std::vector<T>, std::vector<T>> split_items(const std::vector<T>& items,
                                                      const DesignSpec& spec) {
  spec.validate();
  const auto order = split_order(items.size(), spec);
  const std::size_t n_train = spec.train_size();
  std::pair<std::vector<T>, std::vector<T>> out;
  for (std::size_t r = 0; r < order.size(); ++r) {
    (r < n_train ? out.first : out.second).push_back(items[order[r]]);
  }
  return out;
}

}  // namespace

std::pair<SampleSet, SampleSet> split(const SampleSet& s, const DesignSpec& spec) {
  auto [train, test] = split_items(s.points, spec);
  return {SampleSet{std::move(train), spec}, SampleSet{std::move(test), spec}};
}

std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> split(
    const std::vector<LabeledSample>& s, const DesignSpec& spec) {
  return split_items(s, spec);
}

std::vector<LabeledSample> label(const SampleSet& s, const PhysicsConfig& c, unsigned threads) {
  std::vector<LabeledSample> out(s.points.size());
  parallel_for(s.points.size(), threads, [&](std::size_t i) {
    const auto params = ScenarioParams::from_span(s.points[i]);
    out[i] = {params, simulate(params, c).outcome};
  });
  return out;
}

}  // namespace pbound
