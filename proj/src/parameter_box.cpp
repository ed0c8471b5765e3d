#include "pbound/parameter_box.hpp"

#include <cmath>

#include "pbound/errors.hpp"

namespace pbound {

ParameterBox::ParameterBox(std::vector<Dimension> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw UsageError("parameter box needs at least one dimension");
  for (const auto& d : dims_) {
    if (!std::isfinite(d.lower) || !std::isfinite(d.upper) || !(d.lower < d.upper)) {
      throw UsageError("parameter box dimension '" + d.name + "' needs lower < upper");
    }
  }
}

ParameterBox ParameterBox::scenario_default() {
  return ParameterBox({{"speed_ego", 40.0, 70.0, "km/h"},
                       {"speed_target", 5.0, 20.0, "km/h"},
                       {"aperture_angle", 10.0, 25.0, "deg"}});
}

std::size_t ParameterBox::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (dims_[i].name == name) return i;
  }
  throw UsageError("unknown parameter '" + name + "'");
}

bool ParameterBox::contains(std::span<const double> x) const {
  if (x.size() != dims_.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= dims_[i].lower && x[i] <= dims_[i].upper)) return false;
  }
  return true;
}

std::vector<double> ParameterBox::normalize(std::span<const double> x) const {
  std::vector<double> u(dims_.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = (x[i] - dims_[i].lower) / dims_[i].width();
  return u;
}

std::vector<double> ParameterBox::denormalize(std::span<const double> u) const {
  std::vector<double> x(dims_.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = dims_[i].lower + u[i] * dims_[i].width();
  return x;
}

}  // namespace pbound
