#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pbound/gpc.hpp"
#include "pbound/parameter_box.hpp"
#include "pbound/sampling.hpp"

namespace pbound {

// Regular evaluation grid over a parameter box; node i of dimension d sits at
// lower + i / (resolution[d] - 1) * width.
struct GridSpec {
  ParameterBox box;
  std::vector<std::size_t> resolution;

  static GridSpec uniform(const ParameterBox& box, std::size_t per_dim = 41);
  void validate() const;
  std::size_t node_count() const;
  // Unit-cube coordinates of every node, dimension 0 varying fastest.
  Eigen::MatrixXd normalized_nodes() const;
};

struct BoundaryEstimate {
  std::vector<Point> points;          // raw units
  std::vector<double> probabilities;  // model p re-evaluated at each point
  GridSpec grid;
  std::string model_id;
};

// Locates every grid edge whose end-point probabilities straddle 0.5. The
// crossing starts at the linear interpolation and is polished along the edge
// with regula falsi on the model; crossings closer than half a cell are merged.
// Throws EmptyBoundaryError when the model predicts one class everywhere.
BoundaryEstimate extract_boundary(const GpcModel& model, const GridSpec& grid,
                                  const std::string& model_id = {}, unsigned threads = 1);

std::vector<double> grid_probabilities(const GpcModel& model, const GridSpec& grid, unsigned threads = 1);

enum class DistanceSpace { Raw, Normalized };

// Symmetric Hausdorff distance. Throws EmptyInputError for an empty set.
double hausdorff_distance(std::span<const Point> a, std::span<const Point> b);
double boundary_distance(const BoundaryEstimate& a, const BoundaryEstimate& b, DistanceSpace space);

struct ConfidenceSlice {
  std::size_t fixed_dim = 0;
  double fixed_value = 0.0;
  double band = 0.0;
  std::array<std::size_t, 2> free_dims{};
  std::vector<double> axis_x;  // raw coordinates along free_dims[0]
  std::vector<double> axis_y;  // raw coordinates along free_dims[1]
  Eigen::MatrixXd probability;  // rows follow axis_y, columns axis_x
  std::vector<LabeledSample> overlay;

  double overlay_lower() const { return fixed_value - band; }
  double overlay_upper() const { return fixed_value + band; }
};

// 2-D probability map of a 3-D model at a fixed value of one dimension, plus
// the data points within +-band of that value (none when band is 0).
ConfidenceSlice confidence_slice(const GpcModel& model, const GridSpec& grid, std::size_t dim, double value,
                                 std::span<const LabeledSample> data, double band, unsigned threads = 1);

// Greedy farthest-point subset of the boundary, seeded with the point whose
// probability is closest to 0.5. Returns every point when k >= size.
std::vector<ScenarioParams> boundary_scenarios(const BoundaryEstimate& boundary, std::size_t k);

// Mean binary entropy (nats) of the predicted class probability over the grid.
double mean_predictive_entropy(const GpcModel& model, const GridSpec& grid, unsigned threads = 1);

double binary_entropy(double p);

}  // namespace pbound
