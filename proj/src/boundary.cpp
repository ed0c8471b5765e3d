#include "pbound/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "pbound/errors.hpp"

namespace pbound {

GridSpec GridSpec::uniform(const ParameterBox& box, std::size_t per_dim) {
  GridSpec g{box, std::vector<std::size_t>(box.size(), per_dim)};
  g.validate();
  return g;
}

void GridSpec::validate() const {
  if (resolution.size() != box.size()) throw UsageError("grid resolution count must equal box dimension");
  for (const auto r : resolution) {
    if (r < 2) throw UsageError("grid resolution must be >= 2 per dimension");
  }
}

std::size_t GridSpec::node_count() const {
  std::size_t n = 1;
  for (const auto r : resolution) n *= r;
  return n;
}

Eigen::MatrixXd GridSpec::normalized_nodes() const {
  validate();
  const std::size_t count = node_count();
  Eigen::MatrixXd nodes(count, box.size());
  for (std::size_t g = 0; g < count; ++g) {
    std::size_t rem = g;
    for (std::size_t d = 0; d < box.size(); ++d) {
      nodes(g, d) = static_cast<double>(rem % resolution[d]) / static_cast<double>(resolution[d] - 1);
      rem /= resolution[d];
    }
  }
  return nodes;
}

std::vector<double> grid_probabilities(const GpcModel& model, const GridSpec& grid, unsigned threads) {
  const auto preds = model.predict_batch(grid.normalized_nodes(), threads);
  std::vector<double> p(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) p[i] = preds[i].prob_collision;
  return p;
}

namespace {

constexpr double kPolishTolerance = 1e-3;
constexpr int kPolishRounds = 12;

// Crossing on the edge from node a to its neighbour along `dim`, in grid
// index coordinates; t is the fraction along the edge.
struct Crossing {
  std::size_t node = 0;
  std::size_t dim = 0;
  double t_lo = 0.0, p_lo = 0.0;  // bracket end on the node side
  double t_hi = 1.0, p_hi = 0.0;
  double t = 0.0, p = 0.0;
  int side = 0;  // Illinois bookkeeping: which end was kept last
};

}  // namespace

BoundaryEstimate extract_boundary(const GpcModel& model, const GridSpec& grid, const std::string& model_id,
                                  unsigned threads) {
  grid.validate();
  const std::size_t d = grid.box.size();
  const std::vector<double> p = grid_probabilities(model, grid, threads);

  std::vector<std::size_t> stride(d, 1);
  for (std::size_t k = 1; k < d; ++k) stride[k] = stride[k - 1] * grid.resolution[k - 1];
  auto index_of = [&](std::size_t node, std::size_t k) { return (node / stride[k]) % grid.resolution[k]; };

  std::vector<Crossing> crossings;
  for (std::size_t node = 0; node < p.size(); ++node) {
    for (std::size_t k = 0; k < d; ++k) {
      if (index_of(node, k) + 1 >= grid.resolution[k]) continue;
      const double pa = p[node];
      const double pb = p[node + stride[k]];
      if ((pa >= 0.5) == (pb >= 0.5)) continue;
      Crossing c;
      c.node = node;
      c.dim = k;
      c.p_lo = pa;
      c.p_hi = pb;
      c.t = (0.5 - pa) / (pb - pa);
      crossings.push_back(c);
    }
  }
  if (crossings.empty()) throw EmptyBoundaryError("model predicts a single class over the whole grid");

  auto location = [&](const Crossing& c) {
    Eigen::RowVectorXd u(d);
    for (std::size_t k = 0; k < d; ++k) {
      double idx = static_cast<double>(index_of(c.node, k));
      if (k == c.dim) idx += c.t;
      u[k] = idx / static_cast<double>(grid.resolution[k] - 1);
    }
    return u;
  };

  // Regula falsi (Illinois variant), all active crossings batched per round.
  std::vector<std::size_t> active(crossings.size());
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;
  for (int round = 0; round <= kPolishRounds && !active.empty(); ++round) {
    Eigen::MatrixXd q(active.size(), d);
    for (std::size_t r = 0; r < active.size(); ++r) q.row(r) = location(crossings[active[r]]);
    const auto preds = model.predict_batch(q, threads);
    std::vector<std::size_t> next;
    for (std::size_t r = 0; r < active.size(); ++r) {
      Crossing& c = crossings[active[r]];
      c.p = preds[r].prob_collision;
      if (std::abs(c.p - 0.5) < kPolishTolerance || round == kPolishRounds) continue;
      const bool same_as_lo = (c.p >= 0.5) == (c.p_lo >= 0.5);
      if (same_as_lo) {
        c.t_lo = c.t;
        c.p_lo = c.p;
        if (c.side == -1) c.p_hi = 0.5 + 0.5 * (c.p_hi - 0.5);
        c.side = -1;
      } else {
        c.t_hi = c.t;
        c.p_hi = c.p;
        if (c.side == 1) c.p_lo = 0.5 + 0.5 * (c.p_lo - 0.5);
        c.side = 1;
      }
      c.t = c.t_lo + (0.5 - c.p_lo) / (c.p_hi - c.p_lo) * (c.t_hi - c.t_lo);
      if (!(c.t > c.t_lo && c.t < c.t_hi)) c.t = 0.5 * (c.t_lo + c.t_hi);
      next.push_back(active[r]);
    }
    active.swap(next);
  }

  // Merge crossings within half a cell, measured in grid index units.
  std::map<std::vector<long>, std::vector<std::size_t>> buckets;
  std::vector<Eigen::RowVectorXd> kept_idx;
  BoundaryEstimate est{{}, {}, grid, model_id};
  for (const Crossing& c : crossings) {
    Eigen::RowVectorXd idx(d);
    for (std::size_t k = 0; k < d; ++k) {
      idx[k] = static_cast<double>(index_of(c.node, k)) + (k == c.dim ? c.t : 0.0);
    }
    std::vector<long> key(d);
    for (std::size_t k = 0; k < d; ++k) key[k] = static_cast<long>(std::floor(idx[k] / 0.5));
    bool duplicate = false;
    std::vector<long> probe(d);
    const std::size_t neighbours = static_cast<std::size_t>(std::pow(3.0, static_cast<double>(d)));
    for (std::size_t m = 0; m < neighbours && !duplicate; ++m) {
      std::size_t rem = m;
      for (std::size_t k = 0; k < d; ++k) {
        probe[k] = key[k] + static_cast<long>(rem % 3) - 1;
        rem /= 3;
      }
      const auto it = buckets.find(probe);
      if (it == buckets.end()) continue;
      for (const auto j : it->second) {
        if ((kept_idx[j] - idx).squaredNorm() < 0.25) {
          duplicate = true;
          break;
        }
      }
    }
    if (duplicate) continue;
    buckets[key].push_back(kept_idx.size());
    kept_idx.push_back(idx);
    std::vector<double> u(d);
    for (std::size_t k = 0; k < d; ++k) u[k] = idx[k] / static_cast<double>(grid.resolution[k] - 1);
    est.points.push_back(grid.box.denormalize(u));
    est.probabilities.push_back(c.p);
  }
  return est;
}

double hausdorff_distance(std::span<const Point> a, std::span<const Point> b) {
  if (a.empty() || b.empty()) throw EmptyInputError("hausdorff distance of an empty point set");
  auto directed = [](std::span<const Point> from, std::span<const Point> to) {
    double worst = 0.0;
    for (const auto& p : from) {
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& q : to) {
        double s = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
          const double t = p[k] - q[k];
          s += t * t;
        }
        nearest = std::min(nearest, s);
        if (nearest <= worst) break;  // cannot raise the maximum
      }
      worst = std::max(worst, nearest);
    }
    return worst;
  };
  return std::sqrt(std::max(directed(a, b), directed(b, a)));
}

double boundary_distance(const BoundaryEstimate& a, const BoundaryEstimate& b, DistanceSpace space) {
  if (!(a.grid.box == b.grid.box)) throw DataError("boundary estimates use different parameter boxes");
  if (space == DistanceSpace::Raw) return hausdorff_distance(a.points, b.points);
  auto normalized = [](const BoundaryEstimate& e) {
    std::vector<Point> out;
    out.reserve(e.points.size());
    for (const auto& p : e.points) out.push_back(e.grid.box.normalize(p));
    return out;
  };
  return hausdorff_distance(normalized(a), normalized(b));
}

ConfidenceSlice confidence_slice(const GpcModel& model, const GridSpec& grid, std::size_t dim, double value,
                                 std::span<const LabeledSample> data, double band, unsigned threads) {
  grid.validate();
  const auto& box = grid.box;
  if (box.size() != 3) throw UsageError("confidence slices need a 3-D parameter box");
  if (dim >= 3) throw UsageError("slice dimension out of range");
  if (!(value >= box[dim].lower && value <= box[dim].upper)) throw UsageError("slice value outside the box");
  if (!(band >= 0.0)) throw UsageError("slice band must be >= 0");

  ConfidenceSlice s;
  s.fixed_dim = dim;
  s.fixed_value = value;
  s.band = band;
  s.free_dims = dim == 0 ? std::array<std::size_t, 2>{1, 2}
                         : (dim == 1 ? std::array<std::size_t, 2>{0, 2} : std::array<std::size_t, 2>{0, 1});
  const std::size_t nx = grid.resolution[s.free_dims[0]];
  const std::size_t ny = grid.resolution[s.free_dims[1]];
  const double fixed_u = (value - box[dim].lower) / box[dim].width();

  Eigen::MatrixXd q(nx * ny, 3);
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const auto r = static_cast<Eigen::Index>(iy * nx + ix);
      q(r, static_cast<Eigen::Index>(dim)) = fixed_u;
      q(r, static_cast<Eigen::Index>(s.free_dims[0])) = static_cast<double>(ix) / static_cast<double>(nx - 1);
      q(r, static_cast<Eigen::Index>(s.free_dims[1])) = static_cast<double>(iy) / static_cast<double>(ny - 1);
    }
  }
  const auto preds = model.predict_batch(q, threads);
  s.probability.resize(static_cast<Eigen::Index>(ny), static_cast<Eigen::Index>(nx));
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) s.probability(iy, ix) = preds[iy * nx + ix].prob_collision;
  }
  const auto& bx = box[s.free_dims[0]];
  const auto& by = box[s.free_dims[1]];
  for (std::size_t ix = 0; ix < nx; ++ix) s.axis_x.push_back(bx.lower + bx.width() * static_cast<double>(ix) / static_cast<double>(nx - 1));
  for (std::size_t iy = 0; iy < ny; ++iy) s.axis_y.push_back(by.lower + by.width() * static_cast<double>(iy) / static_cast<double>(ny - 1));

  if (band > 0.0) {
    for (const auto& sample : data) {
      if (std::abs(sample.params.as_array()[dim] - value) <= band) s.overlay.push_back(sample);
    }
  }
  return s;
}

std::vector<ScenarioParams> boundary_scenarios(const BoundaryEstimate& boundary, std::size_t k) {
  if (boundary.points.empty()) throw EmptyInputError("boundary_scenarios: empty boundary");
  const auto& pts = boundary.points;
  std::vector<ScenarioParams> out;
  if (k == 0) return out;
  if (k >= pts.size()) {
    for (const auto& p : pts) out.push_back(ScenarioParams::from_span(p));
    return out;
  }
  std::vector<Point> unit;
  for (const auto& p : pts) unit.push_back(boundary.grid.box.normalize(p));

  std::size_t first = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double pi = i < boundary.probabilities.size() ? std::abs(boundary.probabilities[i] - 0.5) : 1.0;
    const double pf = first < boundary.probabilities.size() ? std::abs(boundary.probabilities[first] - 0.5) : 1.0;
    if (pi < pf) first = i;
  }
  std::vector<double> nearest(pts.size(), std::numeric_limits<double>::infinity());
  std::size_t pick = first;
  for (std::size_t chosen = 0; chosen < k; ++chosen) {
    out.push_back(ScenarioParams::from_span(pts[pick]));
    std::size_t next = pick;
    double far = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < unit[i].size(); ++c) {
        const double t = unit[i][c] - unit[pick][c];
        s += t * t;
      }
      nearest[i] = std::min(nearest[i], s);
      if (nearest[i] > far) {
        far = nearest[i];
        next = i;
      }
    }
    pick = next;
  }
  return out;
}

double binary_entropy(double p) {
  auto term = [](double q) { return q > 0.0 ? -q * std::log(q) : 0.0; };
  return term(p) + term(1.0 - p);
}

double mean_predictive_entropy(const GpcModel& model, const GridSpec& grid, unsigned threads) {
  const auto p = grid_probabilities(model, grid, threads);
  double s = 0.0;
  for (const double v : p) s += binary_entropy(v);
  return s / static_cast<double>(p.size());
}

}  // namespace pbound
