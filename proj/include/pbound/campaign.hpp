#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pbound/boundary.hpp"
#include "pbound/gpc.hpp"
#include "pbound/sampling.hpp"
#include "pbound/scenario.hpp"

namespace pbound {

struct DatasetConfig {
  std::string name;
  SamplingMethod method = SamplingMethod::MonteCarlo;
  std::size_t n_total = 100;
  double train_fraction = 0.9;
  double slice_band = 1.5;  // overlay half-width for this dataset's slice
};

struct CampaignConfig {
  ParameterBox box = ParameterBox::scenario_default();
  PhysicsConfig physics;
  std::size_t grid_resolution = 41;
  std::vector<DatasetConfig> datasets;
  std::uint64_t master_seed = 2019;
  std::filesystem::path out_dir = "out";
  unsigned threads = 1;
  std::size_t minimax_iters = 10000;
  std::size_t restarts = 4;
  std::size_t max_evals = 200;          // per restart
  double search_tolerance = 1e-5;
  std::string slice_dim = "aperture_angle";
  double slice_value = 17.5;
  std::size_t corner_cases = 5;

  // MC100, MC1000, LHC100, LHC1000 with 90/10 splits.
  static CampaignConfig defaults();
  // Overrides defaults with the keys present in `j`; unknown keys are rejected.
  static CampaignConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static CampaignConfig load(const std::filesystem::path& path);

  GridSpec grid() const { return GridSpec::uniform(box, grid_resolution); }
  const DatasetConfig& dataset(const std::string& name) const;  // throws UsageError
  DesignSpec design(const DatasetConfig& ds) const;
  HyperparamOptions hyper_options(const std::string& dataset_name) const;
};

struct SampleArtifacts {
  std::filesystem::path all, train, test, provenance;
};

// Samples, labels by simulation, splits and writes <name>.csv, <name>_train.csv,
// <name>_test.csv and the <name>.json design sidecar.
SampleArtifacts sample_dataset(const CampaignConfig& cfg, const DatasetConfig& ds);

// Name a data file refers to: its stem with any _train/_test suffix removed.
std::string dataset_stem(const std::filesystem::path& csv);

struct TrainArtifacts {
  std::filesystem::path model;
  GpcModel fitted;
  HyperparamResult search;
};

// Trains on the rows of `csv`. If a <stem>.json design sidecar sits next to
// it, the file is treated as the full set and split first.
TrainArtifacts train_dataset(const CampaignConfig& cfg, const std::filesystem::path& csv);

GpcModel load_model(const std::filesystem::path& path);

nlohmann::json metrics_json(const Metrics& m);
std::filesystem::path evaluate_dataset(const CampaignConfig& cfg, const std::filesystem::path& model_path,
                                       const std::filesystem::path& test_csv, Metrics* metrics = nullptr);

struct BoundaryArtifacts {
  std::filesystem::path points, corners;
  BoundaryEstimate estimate;
};
BoundaryArtifacts boundary_for_model(const CampaignConfig& cfg, const std::filesystem::path& model_path);

BoundaryEstimate load_boundary(const std::filesystem::path& csv, const ParameterBox& box);

struct BoundaryComparison {
  double raw = 0.0;
  double normalized = 0.0;
};
BoundaryComparison compare_boundaries(const BoundaryEstimate& a, const BoundaryEstimate& b);

struct SliceArtifacts {
  std::filesystem::path csv, svg;
};
SliceArtifacts slice_for_model(const CampaignConfig& cfg, const std::filesystem::path& model_path,
                               const std::optional<std::filesystem::path>& data_csv,
                               const std::string& dim_name, double value, double band);

// Runs every stage for every dataset and writes report.json, whose listed
// artifacts are checked to exist.
nlohmann::json run_campaign(const CampaignConfig& cfg);

}  // namespace pbound
