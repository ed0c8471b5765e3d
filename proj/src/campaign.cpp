#include "pbound/campaign.hpp"

#include <algorithm>
#include <map>

#include "pbound/errors.hpp"
#include "pbound/io.hpp"
#include "pbound/rng.hpp"

namespace pbound {

namespace fs = std::filesystem;

CampaignConfig CampaignConfig::defaults() {
  CampaignConfig c;
  c.datasets = {{"MC100", SamplingMethod::MonteCarlo, 100, 0.9, 1.5},
                {"MC1000", SamplingMethod::MonteCarlo, 1000, 0.9, 0.5},
                {"LHC100", SamplingMethod::LatinHypercube, 100, 0.9, 1.5},
                {"LHC1000", SamplingMethod::LatinHypercube, 1000, 0.9, 0.5}};
  return c;
}

namespace {

PhysicsConfig physics_from(const nlohmann::json& j, const fs::path& base_dir) {
  if (j.is_string()) {
    fs::path p = j.get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return load_physics_config(p.string());
  }
  return parse_physics_config(j.dump(), "<physics>");
}

}  // namespace

CampaignConfig CampaignConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  CampaignConfig c = defaults();
  if (!j.is_object()) throw UsageError("campaign config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "physics") {
        c.physics = physics_from(v, base_dir);
      } else if (key == "box") {
        c.box = box_from_json(v);
      } else if (key == "grid_resolution") {
        c.grid_resolution = v.get<std::size_t>();
      } else if (key == "master_seed") {
        c.master_seed = v.get<std::uint64_t>();
      } else if (key == "out_dir") {
        c.out_dir = v.get<std::string>();
      } else if (key == "threads") {
        c.threads = v.get<unsigned>();
      } else if (key == "minimax_iters") {
        c.minimax_iters = v.get<std::size_t>();
      } else if (key == "restarts") {
        c.restarts = v.get<std::size_t>();
      } else if (key == "max_evals") {
        c.max_evals = v.get<std::size_t>();
      } else if (key == "search_tolerance") {
        c.search_tolerance = v.get<double>();
      } else if (key == "slice_dim") {
        c.slice_dim = v.get<std::string>();
      } else if (key == "slice_value") {
        c.slice_value = v.get<double>();
      } else if (key == "corner_cases") {
        c.corner_cases = v.get<std::size_t>();
      } else if (key == "datasets") {
        c.datasets.clear();
        for (const auto& d : v) {
          DatasetConfig ds;
          ds.name = d.at("name").get<std::string>();
          ds.method = parse_sampling_method(d.at("method").get<std::string>());
          ds.n_total = d.at("n_total").get<std::size_t>();
          ds.train_fraction = d.value("train_fraction", 0.9);
          ds.slice_band = d.value("slice_band", ds.n_total <= 100 ? 1.5 : 0.5);
          c.datasets.push_back(ds);
        }
      } else {
        throw UsageError("unknown campaign config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad campaign config: ") + e.what());
  }
  c.physics.validate(&c.box);
  c.grid().validate();
  return c;
}

CampaignConfig CampaignConfig::load(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

const DatasetConfig& CampaignConfig::dataset(const std::string& name) const {
  for (const auto& d : datasets) {
    if (d.name == name) return d;
  }
  throw UsageError("unknown dataset '" + name + "'");
}

DesignSpec CampaignConfig::design(const DatasetConfig& ds) const {
  DesignSpec s;
  s.method = ds.method;
  s.n_total = ds.n_total;
  s.train_fraction = ds.train_fraction;
  s.seed = derive_seed(master_seed, ds.name);
  s.minimax_iters = minimax_iters;
  s.validate();
  return s;
}

HyperparamOptions CampaignConfig::hyper_options(const std::string& dataset_name) const {
  HyperparamOptions o;
  o.restarts = restarts;
  o.max_evals = max_evals;
  o.tolerance = search_tolerance;
  o.seed = derive_seed(master_seed, dataset_name + "/hyperparameters");
  o.threads = threads;
  return o;
}

SampleArtifacts sample_dataset(const CampaignConfig& cfg, const DatasetConfig& ds) {
  const DesignSpec spec = cfg.design(ds);
  const SampleSet points = generate(cfg.box, spec);
  const auto labeled = label(points, cfg.physics, cfg.threads);
  const auto [train, test] = split(labeled, spec);

  SampleArtifacts a{cfg.out_dir / (ds.name + ".csv"), cfg.out_dir / (ds.name + "_train.csv"),
                    cfg.out_dir / (ds.name + "_test.csv"), cfg.out_dir / (ds.name + ".json")};
  write_file_atomic(a.all, labeled_csv(labeled));
  write_file_atomic(a.train, labeled_csv(train));
  write_file_atomic(a.test, labeled_csv(test));
  write_json(a.provenance, design_to_json(spec, ds.name));
  return a;
}

std::string dataset_stem(const fs::path& csv) {
  std::string stem = csv.stem().string();
  for (const std::string suffix : {"_train", "_test"}) {
    if (stem.size() > suffix.size() && stem.ends_with(suffix)) return stem.substr(0, stem.size() - suffix.size());
  }
  return stem;
}

TrainArtifacts train_dataset(const CampaignConfig& cfg, const fs::path& csv) {
  auto rows = read_labeled_csv(csv);
  fs::path sidecar = csv;
  sidecar.replace_extension(".json");
  if (fs::exists(sidecar)) {
    const DesignSpec spec = design_from_json(read_json(sidecar));
    rows = split(rows, spec).first;
  }
  if (rows.empty()) throw EmptyInputError(csv.string() + ": no training rows");
  const std::string name = dataset_stem(csv);
  const TrainingSet training = TrainingSet::from_samples(cfg.box, rows);
  HyperparamResult search = optimize_hyperparams(training, cfg.hyper_options(name));
  GpcModel fitted = laplace_fit(training, search.kernel);
  const fs::path model_path = cfg.out_dir / (name + ".model.json");
  write_json(model_path, to_json(fitted));
  return {model_path, std::move(fitted), std::move(search)};
}

GpcModel load_model(const fs::path& path) { return model_from_json(read_json(path)); }

namespace {

std::string model_name(const fs::path& model_path) {
  std::string stem = model_path.filename().string();
  for (const std::string suffix : {".model.json", ".json"}) {
    if (stem.ends_with(suffix)) return stem.substr(0, stem.size() - suffix.size());
  }
  return stem;
}

}  // namespace

nlohmann::json metrics_json(const Metrics& m) {
  return {{"n", m.n},
          {"n_misclassified", m.n_misclassified},
          {"accuracy", m.accuracy},
          {"probabilities", m.probabilities}};
}

fs::path evaluate_dataset(const CampaignConfig& cfg, const fs::path& model_path, const fs::path& test_csv,
                          Metrics* metrics) {
  const GpcModel model = load_model(model_path);
  const auto test = read_labeled_csv(test_csv);
  const Metrics m = evaluate(model, test);
  const fs::path out = cfg.out_dir / (model_name(model_path) + ".metrics.json");
  write_json(out, metrics_json(m));
  if (metrics != nullptr) *metrics = m;
  return out;
}

BoundaryArtifacts boundary_for_model(const CampaignConfig& cfg, const fs::path& model_path) {
  const GpcModel model = load_model(model_path);
  const std::string name = model_name(model_path);
  GridSpec grid = GridSpec::uniform(model.training().box, cfg.grid_resolution);
  BoundaryEstimate est = extract_boundary(model, grid, name, cfg.threads);
  const auto corners = boundary_scenarios(est, cfg.corner_cases);
  std::vector<LabeledSample> corner_rows;
  std::string corner_csv = "speed_ego,speed_target,aperture_angle,probability\n";
  for (const auto& c : corners) {
    const double p = model.predict_raw(c.as_array()).prob_collision;
    corner_csv += format_double(c.speed_ego) + ',' + format_double(c.speed_target) + ',' +
                  format_double(c.aperture_angle) + ',' + format_double(p) + '\n';
  }
  BoundaryArtifacts a{cfg.out_dir / (name + ".boundary.csv"), cfg.out_dir / (name + ".corners.csv"), std::move(est)};
  write_file_atomic(a.points, boundary_csv(a.estimate));
  write_file_atomic(a.corners, corner_csv);
  return a;
}

BoundaryEstimate load_boundary(const fs::path& csv, const ParameterBox& box) {
  auto b = parse_boundary_csv(read_file(csv), box, csv.string());
  if (b.points.empty()) throw EmptyInputError(csv.string() + ": boundary file has no points");
  return b;
}

BoundaryComparison compare_boundaries(const BoundaryEstimate& a, const BoundaryEstimate& b) {
  return {boundary_distance(a, b, DistanceSpace::Raw), boundary_distance(a, b, DistanceSpace::Normalized)};
}

SliceArtifacts slice_for_model(const CampaignConfig& cfg, const fs::path& model_path,
                               const std::optional<fs::path>& data_csv, const std::string& dim_name, double value,
                               double band) {
  const GpcModel model = load_model(model_path);
  const auto& box = model.training().box;
  std::vector<LabeledSample> data;
  if (data_csv) data = read_labeled_csv(*data_csv);
  const GridSpec grid = GridSpec::uniform(box, cfg.grid_resolution);
  const ConfidenceSlice s = confidence_slice(model, grid, box.index_of(dim_name), value, data, band, cfg.threads);
  const std::string name = model_name(model_path);
  SliceArtifacts a{cfg.out_dir / (name + ".slice.csv"), cfg.out_dir / (name + ".slice.svg")};
  write_file_atomic(a.csv, slice_csv(s));
  write_file_atomic(a.svg, slice_svg(s, box));
  return a;
}

nlohmann::json run_campaign(const CampaignConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  nlohmann::json datasets = nlohmann::json::array();
  std::vector<fs::path> artifacts;
  std::map<std::string, BoundaryEstimate> boundaries;
  const GridSpec grid = cfg.grid();

  for (const auto& ds : cfg.datasets) {
    const SampleArtifacts s = sample_dataset(cfg, ds);
    const TrainArtifacts t = train_dataset(cfg, s.train);
    Metrics m;
    const fs::path metrics_path = evaluate_dataset(cfg, t.model, s.test, &m);
    nlohmann::json entry = {
        {"name", ds.name},
        {"method", to_string(ds.method)},
        {"n_train", t.fitted.training().size()},
        {"n_test", m.n},
        {"accuracy", m.accuracy},
        {"n_misclassified", m.n_misclassified},
        {"log_marginal", t.fitted.log_marginal()},
        {"stationarity_residual", t.fitted.stationarity_residual()},
        {"kernel", {{"signal_variance", t.fitted.kernel().signal_variance},
                    {"lengthscales", t.fitted.kernel().lengthscales}}},
        {"mean_entropy", mean_predictive_entropy(t.fitted, grid, cfg.threads)},
    };
    nlohmann::json files = {s.all.filename().string(), s.train.filename().string(), s.test.filename().string(),
                            s.provenance.filename().string(), t.model.filename().string(),
                            metrics_path.filename().string()};
    artifacts.insert(artifacts.end(), {s.all, s.train, s.test, s.provenance, t.model, metrics_path});
    try {
      BoundaryArtifacts b = boundary_for_model(cfg, t.model);
      entry["boundary_points"] = b.estimate.points.size();
      files.push_back(b.points.filename().string());
      files.push_back(b.corners.filename().string());
      artifacts.insert(artifacts.end(), {b.points, b.corners});
      boundaries.emplace(ds.name, std::move(b.estimate));
    } catch (const EmptyBoundaryError&) {
      entry["boundary_points"] = 0;
    }
    const SliceArtifacts sl = slice_for_model(cfg, t.model, s.all, cfg.slice_dim, cfg.slice_value, ds.slice_band);
    files.push_back(sl.csv.filename().string());
    files.push_back(sl.svg.filename().string());
    artifacts.insert(artifacts.end(), {sl.csv, sl.svg});
    entry["files"] = std::move(files);
    datasets.push_back(std::move(entry));
  }

  nlohmann::json distances = nlohmann::json::array();
  const std::pair<const char*, const char*> pairs[] = {
      {"MC100", "LHC100"}, {"MC1000", "LHC1000"}, {"MC100", "MC1000"}, {"LHC100", "LHC1000"}};
  for (const auto& [a, b] : pairs) {
    const auto ia = boundaries.find(a);
    const auto ib = boundaries.find(b);
    if (ia == boundaries.end() || ib == boundaries.end()) continue;
    const BoundaryComparison c = compare_boundaries(ia->second, ib->second);
    distances.push_back({{"a", a}, {"b", b}, {"raw", c.raw}, {"normalized", c.normalized}});
  }

  nlohmann::json report = {{"master_seed", cfg.master_seed},
                           {"grid_resolution", cfg.grid_resolution},
                           {"datasets", std::move(datasets)},
                           {"boundary_distances", std::move(distances)}};
  for (const auto& p : artifacts) {
    if (!fs::exists(p)) throw DataError("report artifact missing: " + p.string());
  }
  write_json(cfg.out_dir / "report.json", report);
  return report;
}

}  // namespace pbound
