#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "pbound/boundary.hpp"
#include "pbound/errors.hpp"
#include "pbound/rng.hpp"
#include "pbound/sampling.hpp"

using namespace pbound;

namespace {

// Training set mirrored about speed_ego = 55 with opposite labels, so the
// latent mean is odd in that coordinate and p = 0.5 exactly on the plane.
GpcModel mirrored_model() {
  const auto box = ParameterBox::scenario_default();
  Rng rng(12);
  std::vector<LabeledSample> s;
  for (int i = 0; i < 30; ++i) {
    const double u = rng.uniform(0.52, 1.0);
    const double t = rng.uniform(5, 20), a = rng.uniform(10, 25);
    s.push_back({{40.0 + 30.0 * u, t, a}, Outcome::Collision});
    s.push_back({{40.0 + 30.0 * (1.0 - u), t, a}, Outcome::NoCollision});
  }
  return laplace_fit(TrainingSet::from_samples(box, s), {25.0, {0.15, 3.0, 3.0}});
}

std::vector<LabeledSample> oracle_labeled_lhc(std::size_t n, std::uint64_t seed) {
  const auto box = ParameterBox::scenario_default();
  return label(latin_hypercube(box, n, seed, 2000), PhysicsConfig{});
}

}  // namespace

TEST_CASE("grid spec") {
  const auto box = ParameterBox::scenario_default();
  const auto g = GridSpec::uniform(box, 5);
  CHECK(g.node_count() == 125);
  const auto nodes = g.normalized_nodes();
  CHECK(nodes.rows() == 125);
  CHECK(nodes(1, 0) == doctest::Approx(0.25));
  CHECK(nodes(1, 1) == 0.0);
  CHECK(nodes(5, 1) == doctest::Approx(0.25));
  CHECK(nodes(124, 2) == 1.0);
  GridSpec bad{box, {5, 1, 5}};
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("boundary of a model that depends on one coordinate") {
  const auto m = mirrored_model();
  const auto box = m.training().box;
  const GridSpec grid{box, {40, 12, 12}};
  const auto b = extract_boundary(m, grid, "mirror");
  CHECK(b.model_id == "mirror");
  REQUIRE_FALSE(b.points.empty());
  const double cell = 30.0 / 39.0;
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    CHECK(std::abs(b.points[i][0] - 55.0) < cell);
    CHECK(box.contains(b.points[i]));
    CHECK(std::abs(b.probabilities[i] - 0.5) <= 0.05);
  }
  // The plane is sampled at every (target, aperture) node pair.
  CHECK(b.points.size() >= 12 * 12);
}

TEST_CASE("one-class model has no boundary") {
  const auto box = ParameterBox::scenario_default();
  std::vector<LabeledSample> s;
  Rng rng(2);
  for (int i = 0; i < 20; ++i) s.push_back({{rng.uniform(40, 70), rng.uniform(5, 20), rng.uniform(10, 25)}, Outcome::Collision});
  const auto m = laplace_fit(TrainingSet::from_samples(box, s), {4.0, {0.3, 0.3, 0.3}});
  CHECK_THROWS_AS(extract_boundary(m, GridSpec::uniform(box, 9)), EmptyBoundaryError);
}

TEST_CASE("hausdorff distance") {
  using P = std::vector<Point>;
  SUBCASE("identity and single points") {
    const P a{{1, 2}, {3, 4}, {0, 0}};
    CHECK(hausdorff_distance(a, a) == 0.0);
    CHECK(hausdorff_distance(P{{0, 0}}, P{{3, 4}}) == 5.0);
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(hausdorff_distance(P{}, P{{0, 0}}), EmptyInputError);
    CHECK_THROWS_AS(hausdorff_distance(P{{0, 0}}, P{}), EmptyInputError);
  }
  SUBCASE("matches a brute-force double loop") {
    Rng rng(44);
    for (int trial = 0; trial < 500; ++trial) {
      auto draw = [&] {
        P s(1 + rng.below(6));
        for (auto& p : s) p = {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
        return s;
      };
      const P a = draw(), b = draw();
      CHECK(hausdorff_distance(a, b) == testing::brute_hausdorff(a, b));
    }
  }
  SUBCASE("metric axioms") {
    Rng rng(45);
    for (int trial = 0; trial < 300; ++trial) {
      auto draw = [&] {
        P s(1 + rng.below(20));
        for (auto& p : s) p = {rng.uniform(0, 1), rng.uniform(0, 1)};
        return s;
      };
      const P a = draw(), b = draw(), c = draw();
      const double ab = hausdorff_distance(a, b);
      CHECK(ab == hausdorff_distance(b, a));
      CHECK(ab <= hausdorff_distance(a, c) + hausdorff_distance(c, b) + 1e-12);
      CHECK(ab >= 0.0);
      // Duplicates and reordering do not change the set.
      P a2 = a;
      a2.push_back(a.front());
      std::reverse(a2.begin(), a2.end());
      CHECK(hausdorff_distance(a, a2) == 0.0);
      if (ab == 0.0) CHECK(hausdorff_distance(b, a2) == 0.0);
    }
  }
}

TEST_CASE("boundary distance spaces") {
  const auto box = ParameterBox::scenario_default();
  BoundaryEstimate a{{{40, 5, 10}}, {0.5}, GridSpec::uniform(box), "a"};
  BoundaryEstimate b{{{70, 5, 10}}, {0.5}, GridSpec::uniform(box), "b"};
  CHECK(boundary_distance(a, b, DistanceSpace::Raw) == 30.0);
  CHECK(boundary_distance(a, b, DistanceSpace::Normalized) == 1.0);
  CHECK(boundary_distance(a, a, DistanceSpace::Raw) == 0.0);
}

TEST_CASE("confidence slices") {
  const auto m = mirrored_model();
  const auto box = m.training().box;
  std::vector<LabeledSample> data;
  for (double ap = 10.0; ap <= 25.0; ap += 0.25) data.push_back({{50, 10, ap}, Outcome::NoCollision});

  SUBCASE("wide band") {
    const auto s = confidence_slice(m, GridSpec::uniform(box, 21), 2, 17.5, data, 1.5);
    CHECK(s.overlay_lower() == 16.0);
    CHECK(s.overlay_upper() == 19.0);
    CHECK(s.free_dims == std::array<std::size_t, 2>{0, 1});
    CHECK(s.axis_x.size() == 21);
    CHECK(s.probability.rows() == 21);
    CHECK(s.probability.cols() == 21);
    CHECK(s.overlay.size() == 13);
    for (const auto& o : s.overlay) {
      CHECK(o.params.aperture_angle >= 16.0);
      CHECK(o.params.aperture_angle <= 19.0);
    }
    // Collision probability grows with ego speed along every row.
    for (Eigen::Index r = 0; r < s.probability.rows(); ++r) {
      CHECK(s.probability(r, 0) < 0.5);
      CHECK(s.probability(r, 20) > 0.5);
    }
  }
  SUBCASE("narrow band") {
    const auto s = confidence_slice(m, GridSpec::uniform(box, 11), 2, 17.5, data, 0.5);
    CHECK(s.overlay_lower() == 17.0);
    CHECK(s.overlay_upper() == 18.0);
    CHECK(s.overlay.size() == 5);
  }
  SUBCASE("zero band") {
    const auto s = confidence_slice(m, GridSpec::uniform(box, 11), 2, 17.5, data, 0.0);
    CHECK(s.overlay.empty());
  }
  SUBCASE("slice agrees with direct prediction") {
    const auto s = confidence_slice(m, GridSpec::uniform(box, 7), 1, 12.5, data, 1.0);
    CHECK(s.free_dims == std::array<std::size_t, 2>{0, 2});
    const std::vector<double> q{s.axis_x[3], 12.5, s.axis_y[5]};
    CHECK(s.probability(5, 3) == doctest::Approx(m.predict_raw(q).prob_collision).epsilon(1e-12));
  }
  SUBCASE("value outside the box") {
    CHECK_THROWS_AS(confidence_slice(m, GridSpec::uniform(box, 7), 2, 30.0, data, 1.0), UsageError);
  }
}

TEST_CASE("boundary scenario selection") {
  const auto box = ParameterBox::scenario_default();
  SUBCASE("single point") {
    BoundaryEstimate b{{{50, 10, 15}}, {0.5}, GridSpec::uniform(box), ""};
    const auto s = boundary_scenarios(b, 1);
    REQUIRE(s.size() == 1);
    CHECK(s[0] == ScenarioParams{50, 10, 15});
  }
  SUBCASE("k at least the boundary size returns everything") {
    BoundaryEstimate b{{{50, 10, 15}, {60, 12, 20}, {45, 8, 11}}, {0.49, 0.5, 0.52}, GridSpec::uniform(box), ""};
    CHECK(boundary_scenarios(b, 3).size() == 3);
    CHECK(boundary_scenarios(b, 10).size() == 3);
    const auto two = boundary_scenarios(b, 2);
    REQUIRE(two.size() == 2);
    CHECK(two[0] == ScenarioParams{60, 12, 20});  // closest to one half
    CHECK(two[1] == ScenarioParams{45, 8, 11});   // farthest from it
  }
  SUBCASE("empty boundary") {
    BoundaryEstimate b{{}, {}, GridSpec::uniform(box), ""};
    CHECK_THROWS_AS(boundary_scenarios(b, 2), EmptyInputError);
  }
}

TEST_CASE("entropy") {
  CHECK(binary_entropy(0.5) == doctest::Approx(std::log(2.0)));
  CHECK(binary_entropy(0.0) == 0.0);
  CHECK(binary_entropy(1.0) == 0.0);
  const auto box = ParameterBox::scenario_default();
  const auto prior = GpcModel::prior_only(box, {1.0, {0.3, 0.3, 0.3}});
  CHECK(mean_predictive_entropy(prior, GridSpec::uniform(box, 5)) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("boundary learned from oracle-labeled data") {
  const auto box = ParameterBox::scenario_default();
  const PhysicsConfig c;
  const auto train = oracle_labeled_lhc(900, 99);
  const auto m = laplace_fit(TrainingSet::from_samples(box, train), {900.0, {0.67, 1.18, 0.98}});
  CHECK(m.stationarity_residual() < 1e-6);
  const auto b = extract_boundary(m, GridSpec::uniform(box), "lhc900");

  // Box-wide distribution of the absolute oracle margin.
  Rng rng(3);
  std::vector<double> margins;
  for (int i = 0; i < 20000; ++i) {
    margins.push_back(std::abs(oracle_margin({rng.uniform(40, 70), rng.uniform(5, 20), rng.uniform(10, 25)}, c)));
  }
  std::sort(margins.begin(), margins.end());
  const double p10 = margins[margins.size() / 10];

  std::size_t inside_band = 0;
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    CHECK(box.contains(b.points[i]));
    CHECK(std::abs(b.probabilities[i] - 0.5) <= 0.05);
    if (std::abs(oracle_margin(ScenarioParams::from_span(b.points[i]), c)) <= p10) ++inside_band;
  }
  CAPTURE(p10);
  CHECK(inside_band == b.points.size());

  // Every corner case flips outcome under small perturbations.
  const auto corners = boundary_scenarios(b, 5);
  for (const auto& cc : corners) {
    CAPTURE(to_string(cc));
    bool saw_collision = false, saw_safe = false;
    for (int i = -1; i <= 1; ++i) {
      for (int j = -1; j <= 1; ++j) {
        for (int k = -1; k <= 1; ++k) {
          const ScenarioParams q{cc.speed_ego + 0.02 * i * box[0].width(), cc.speed_target + 0.02 * j * box[1].width(),
                                 cc.aperture_angle + 0.02 * k * box[2].width()};
          (simulate(q, c).outcome == Outcome::Collision ? saw_collision : saw_safe) = true;
        }
      }
    }
    CHECK(saw_collision);
    CHECK(saw_safe);
  }
}
