// Command-line driver for the performance-boundary pipeline.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pbound/campaign.hpp"
#include "pbound/errors.hpp"
#include "pbound/io.hpp"
#include "pbound/parallel.hpp"

namespace fs = std::filesystem;
using namespace pbound;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
};

CampaignConfig resolve_config(const GlobalOptions& g) {
  CampaignConfig cfg = g.config.empty() ? CampaignConfig::defaults() : CampaignConfig::load(g.config);
  if (g.seed) cfg.master_seed = *g.seed;
  if (g.out) cfg.out_dir = *g.out;
  if (g.threads) cfg.threads = std::max(1u, *g.threads);
  return cfg;
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Performance-boundary estimation for a simulated braking controller"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "Campaign config (JSON)");
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate one scenario and print the trace");
  double speed_ego = 0.0, speed_target = 0.0, aperture = 0.0;
  sim->add_option("--speed-ego", speed_ego, "Ego speed [km/h]")->required();
  sim->add_option("--speed-target", speed_target, "Target speed [km/h]")->required();
  sim->add_option("--aperture", aperture, "Radar aperture angle [deg]")->required();

  // sample
  auto* sample = app.add_subcommand("sample", "Sample, simulate and split data sets");
  std::vector<std::string> dataset_names;
  std::string method_name;
  std::size_t n_custom = 0;
  std::string custom_name;
  sample->add_option("--dataset", dataset_names, "Named data set(s) from the config (default: all)");
  sample->add_option("--method", method_name, "Custom data set sampling method (monte_carlo|latin_hypercube)");
  sample->add_option("--n", n_custom, "Custom data set size");
  sample->add_option("--name", custom_name, "Custom data set name");

  // train
  auto* train = app.add_subcommand("train", "Fit hyperparameters and the Laplace posterior");
  std::string train_csv;
  train->add_option("data", train_csv, "Labeled CSV")->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Classify a test set with a trained model");
  std::string model_path, test_csv;
  eval->add_option("model", model_path, "Model JSON")->required();
  eval->add_option("test", test_csv, "Labeled test CSV")->required();

  // boundary
  auto* bnd = app.add_subcommand("boundary", "Extract the p = 0.5 boundary and corner-case scenarios");
  std::string bnd_model;
  bnd->add_option("model", bnd_model, "Model JSON")->required();

  // compare
  auto* cmp = app.add_subcommand("compare", "Hausdorff distance between two boundary CSVs");
  std::string cmp_a, cmp_b;
  cmp->add_option("a", cmp_a, "Boundary CSV")->required();
  cmp->add_option("b", cmp_b, "Boundary CSV")->required();

  // slice
  auto* slc = app.add_subcommand("slice", "Probability map at a fixed parameter value");
  std::string slc_model, slc_data, slc_dim = "aperture_angle";
  double slc_value = 17.5, slc_band = 1.5;
  slc->add_option("model", slc_model, "Model JSON")->required();
  slc->add_option("--data", slc_data, "Labeled CSV to overlay");
  slc->add_option("--dim", slc_dim, "Fixed dimension name")->capture_default_str();
  slc->add_option("--value", slc_value, "Fixed value")->capture_default_str();
  slc->add_option("--band", slc_band, "Overlay half-width")->capture_default_str();

  // report
  app.add_subcommand("report", "Run the full campaign and write report.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    const CampaignConfig cfg = resolve_config(g);
    if (*sim) {
      const ScenarioParams p{speed_ego, speed_target, aperture};
      if (!cfg.box.contains(p.as_array())) std::cerr << "warning: scenario outside the parameter box\n";
      const SimTrace t = simulate(p, cfg.physics);
      nlohmann::json j = {{"outcome", to_string(t.outcome)},
                          {"oracle", to_string(oracle(p, cfg.physics))},
                          {"detection_distance", detection_distance(p, cfg.physics)},
                          {"required_gap", required_gap(p, cfg.physics)},
                          {"min_gap", t.min_gap},
                          {"time_to_outcome", t.time_to_outcome}};
      j["detection_gap"] = t.detection_gap ? nlohmann::json(*t.detection_gap) : nlohmann::json(nullptr);
      print_json(j);
    } else if (*sample) {
      std::vector<DatasetConfig> todo;
      if (!method_name.empty() || n_custom != 0 || !custom_name.empty()) {
        if (method_name.empty() || n_custom == 0 || custom_name.empty()) {
          throw UsageError("custom data sets need --method, --n and --name");
        }
        todo.push_back({custom_name, parse_sampling_method(method_name), n_custom, 0.9, n_custom <= 100 ? 1.5 : 0.5});
      } else if (dataset_names.empty()) {
        todo = cfg.datasets;
      } else {
        for (const auto& n : dataset_names) todo.push_back(cfg.dataset(n));
      }
      for (const auto& ds : todo) {
        const SampleArtifacts a = sample_dataset(cfg, ds);
        std::cout << ds.name << ": " << a.all.string() << " " << a.train.string() << " " << a.test.string() << "\n";
      }
    } else if (*train) {
      const TrainArtifacts t = train_dataset(cfg, train_csv);
      print_json({{"model", t.model.string()},
                  {"log_marginal", t.fitted.log_marginal()},
                  {"stationarity_residual", t.fitted.stationarity_residual()},
                  {"signal_variance", t.fitted.kernel().signal_variance},
                  {"lengthscales", t.fitted.kernel().lengthscales}});
    } else if (*eval) {
      Metrics m;
      const fs::path out = evaluate_dataset(cfg, model_path, test_csv, &m);
      print_json({{"metrics", out.string()}, {"accuracy", m.accuracy}, {"n_misclassified", m.n_misclassified}, {"n", m.n}});
    } else if (*bnd) {
      const BoundaryArtifacts b = boundary_for_model(cfg, bnd_model);
      print_json({{"points", b.points.string()}, {"corners", b.corners.string()}, {"count", b.estimate.points.size()}});
    } else if (*cmp) {
      const auto c = compare_boundaries(load_boundary(cmp_a, cfg.box), load_boundary(cmp_b, cfg.box));
      print_json({{"raw", c.raw}, {"normalized", c.normalized}});
    } else if (*slc) {
      std::optional<fs::path> data;
      if (!slc_data.empty()) data = slc_data;
      const SliceArtifacts s = slice_for_model(cfg, slc_model, data, slc_dim, slc_value, slc_band);
      print_json({{"csv", s.csv.string()}, {"svg", s.svg.string()}});
    } else {
      print_json(run_campaign(cfg));
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
