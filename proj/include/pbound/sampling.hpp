#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pbound/parameter_box.hpp"
#include "pbound/scenario.hpp"

namespace pbound {

using Point = std::vector<double>;

enum class SamplingMethod { MonteCarlo, LatinHypercube };

std::string_view to_string(SamplingMethod m);
SamplingMethod parse_sampling_method(std::string_view s);  // throws UsageError

struct DesignSpec {
  SamplingMethod method = SamplingMethod::MonteCarlo;
  std::size_t n_total = 100;
  double train_fraction = 0.9;
  std::uint64_t seed = 0;
  std::size_t minimax_iters = 10000;  // Latin Hypercube only

  void validate() const;
  std::size_t train_size() const;
  std::size_t test_size() const { return n_total - train_size(); }
};

struct SampleSet {
  std::vector<Point> points;  // raw units
  DesignSpec provenance;
};

struct LabeledSample {
  ScenarioParams params;
  Outcome outcome = Outcome::NoCollision;

  bool operator==(const LabeledSample&) const = default;
};

SampleSet monte_carlo(const ParameterBox& box, std::size_t n, std::uint64_t seed);

struct LhcReport {
  double initial_criterion = 0.0;
  double final_criterion = 0.0;
  std::size_t accepted_swaps = 0;
};

// Jittered Latin Hypercube followed by a column-swap search that lowers the
// minimax criterion (ties broken by lower mean squared fill distance).
// Swaps stay within a column, so stratification is preserved throughout.
SampleSet latin_hypercube(const ParameterBox& box, std::size_t n, std::uint64_t seed,
                          std::size_t minimax_iters = 10000, LhcReport* report = nullptr);

// Largest distance from a reference grid point to its nearest design point,
// in unit-cube coordinates. The grid has 17 levels per dimension (fewer for
// high dimension, capped at ~2e5 nodes).
double minimax_criterion(const ParameterBox& box, std::span<const Point> points);

std::size_t reference_grid_levels(std::size_t dims);

SampleSet generate(const ParameterBox& box, const DesignSpec& spec);

// Seeded shuffle, then the first train_size() points form the training set.
std::pair<SampleSet, SampleSet> split(const SampleSet& s, const DesignSpec& spec);
std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> split(
    const std::vector<LabeledSample>& s, const DesignSpec& spec);

// Simulates every point (3-D scenario boxes only). Order is preserved.
std::vector<LabeledSample> label(const SampleSet& s, const PhysicsConfig& c, unsigned threads = 1);

}  // namespace pbound
