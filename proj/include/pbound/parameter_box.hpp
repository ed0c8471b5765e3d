#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pbound {

struct Dimension {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  std::string unit;

  double width() const { return upper - lower; }

  bool operator==(const Dimension&) const = default;
};

// Axis-aligned box of scenario parameters. Construction rejects empty or
// degenerate dimensions.
class ParameterBox {
 public:
  explicit ParameterBox(std::vector<Dimension> dims);

  // speed_ego [40,70] km/h, speed_target [5,20] km/h, aperture_angle [10,25] deg.
  static ParameterBox scenario_default();

  std::size_t size() const { return dims_.size(); }
  const Dimension& operator[](std::size_t i) const { return dims_[i]; }
  const std::vector<Dimension>& dims() const { return dims_; }

  // Index of the dimension with the given name; throws UsageError if absent.
  std::size_t index_of(const std::string& name) const;

  bool contains(std::span<const double> x) const;

  // Affine maps between raw units and the unit cube.
  std::vector<double> normalize(std::span<const double> x) const;
  std::vector<double> denormalize(std::span<const double> u) const;

  bool operator==(const ParameterBox&) const = default;

 private:
  std::vector<Dimension> dims_;
};

}  // namespace pbound
