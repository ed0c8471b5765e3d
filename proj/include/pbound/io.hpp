#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pbound/boundary.hpp"
#include "pbound/sampling.hpp"

namespace pbound {

// Shortest decimal text that round-trips the double.
std::string format_double(double v);

// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);  // throws DataError

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

// Header: speed_ego,speed_target,aperture_angle,outcome
std::string labeled_csv(std::span<const LabeledSample> samples);
std::vector<LabeledSample> parse_labeled_csv(std::string_view text, const std::string& source);
std::vector<LabeledSample> read_labeled_csv(const std::filesystem::path& path);

nlohmann::json design_to_json(const DesignSpec& spec, std::string_view name);
DesignSpec design_from_json(const nlohmann::json& j);

// One row per point in raw units plus the re-evaluated probability.
std::string boundary_csv(const BoundaryEstimate& b);
BoundaryEstimate parse_boundary_csv(std::string_view text, const ParameterBox& box, const std::string& source);

// First row: blank cell then x-axis values; each following row: y value then p values.
std::string slice_csv(const ConfidenceSlice& s);

// Heat map of p with sample markers (filled = collision, open = no collision)
// and the 0.5 contour from marching squares.
std::string slice_svg(const ConfidenceSlice& s, const ParameterBox& box);

struct Segment {
  double x0, y0, x1, y1;  // in grid index coordinates (column, row)
};
std::vector<Segment> contour_segments(const Eigen::MatrixXd& field, double level);

}  // namespace pbound
