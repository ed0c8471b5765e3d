#include "pbound/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pbound/errors.hpp"

namespace pbound {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw DataError("cannot format number");
  return std::string(buf, end);
}

namespace {

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view field, const std::string& source, std::size_t line) {
  field = trim(field);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || end != field.data() + field.size() || !std::isfinite(v)) {
    throw ParseError(source, line, "bad number '" + std::string(field) + "'");
  }
  return v;
}

// Calls row(line_no, fields) for every non-empty line after the header.
template <class RowFn>
void for_each_csv_row(std::string_view text, const std::string& source, std::string_view expected_header,
                      RowFn&& row) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != expected_header) {
        throw ParseError(source, line_no, "expected header '" + std::string(expected_header) + "'");
      }
      header_seen = true;
      continue;
    }
    row(line_no, split_fields(line));
  }
  if (!header_seen) throw ParseError(source, 1, "missing header");
}

constexpr std::string_view kLabeledHeader = "speed_ego,speed_target,aperture_angle,outcome";

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string labeled_csv(std::span<const LabeledSample> samples) {
  std::string out(kLabeledHeader);
  out += '\n';
  for (const auto& s : samples) {
    out += format_double(s.params.speed_ego) + ',' + format_double(s.params.speed_target) + ',' +
           format_double(s.params.aperture_angle) + ',' + std::string(to_string(s.outcome)) + '\n';
  }
  return out;
}

std::vector<LabeledSample> parse_labeled_csv(std::string_view text, const std::string& source) {
  std::vector<LabeledSample> out;
  for_each_csv_row(text, source, kLabeledHeader, [&](std::size_t line, const std::vector<std::string_view>& f) {
    if (f.size() != 4) throw ParseError(source, line, "expected 4 fields, got " + std::to_string(f.size()));
    LabeledSample s;
    s.params = {parse_number(f[0], source, line), parse_number(f[1], source, line), parse_number(f[2], source, line)};
    try {
      s.outcome = parse_outcome(trim(f[3]));
    } catch (const DataError&) {
      throw ParseError(source, line, "unknown outcome '" + std::string(trim(f[3])) + "'");
    }
    out.push_back(s);
  });
  return out;
}

std::vector<LabeledSample> read_labeled_csv(const fs::path& path) {
  return parse_labeled_csv(read_file(path), path.string());
}

nlohmann::json design_to_json(const DesignSpec& spec, std::string_view name) {
  nlohmann::json j = {{"name", name},
                      {"method", to_string(spec.method)},
                      {"n_total", spec.n_total},
                      {"n_train", spec.train_size()},
                      {"n_test", spec.test_size()},
                      {"train_fraction", spec.train_fraction},
                      {"seed", spec.seed}};
  if (spec.method == SamplingMethod::LatinHypercube) j["minimax_iters"] = spec.minimax_iters;
  return j;
}

DesignSpec design_from_json(const nlohmann::json& j) {
  try {
    DesignSpec s;
    s.method = parse_sampling_method(j.at("method").get<std::string>());
    s.n_total = j.at("n_total").get<std::size_t>();
    s.train_fraction = j.at("train_fraction").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.minimax_iters = j.value("minimax_iters", std::size_t{10000});
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed design JSON: ") + e.what());
  }
}

std::string boundary_csv(const BoundaryEstimate& b) {
  std::string out;
  for (const auto& d : b.grid.box.dims()) out += d.name + ',';
  out += "probability\n";
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    for (const double v : b.points[i]) out += format_double(v) + ',';
    out += format_double(i < b.probabilities.size() ? b.probabilities[i] : 0.5) + '\n';
  }
  return out;
}

BoundaryEstimate parse_boundary_csv(std::string_view text, const ParameterBox& box, const std::string& source) {
  std::string header;
  for (const auto& d : box.dims()) header += d.name + ',';
  header += "probability";
  BoundaryEstimate b{{}, {}, GridSpec{box, std::vector<std::size_t>(box.size(), 2)}, source};
  for_each_csv_row(text, source, header, [&](std::size_t line, const std::vector<std::string_view>& f) {
    if (f.size() != box.size() + 1) throw ParseError(source, line, "wrong number of fields");
    Point p;
    for (std::size_t k = 0; k < box.size(); ++k) p.push_back(parse_number(f[k], source, line));
    b.points.push_back(std::move(p));
    b.probabilities.push_back(parse_number(f[box.size()], source, line));
  });
  return b;
}

std::string slice_csv(const ConfidenceSlice& s) {
  std::string out;
  for (const double x : s.axis_x) out += ',' + format_double(x);
  out += '\n';
  for (Eigen::Index r = 0; r < s.probability.rows(); ++r) {
    out += format_double(s.axis_y[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < s.probability.cols(); ++c) out += ',' + format_double(s.probability(r, c));
    out += '\n';
  }
  return out;
}

std::vector<Segment> contour_segments(const Eigen::MatrixXd& field, double level) {
  std::vector<Segment> segs;
  auto lerp = [&](double a, double b) { return (level - a) / (b - a); };
  for (Eigen::Index r = 0; r + 1 < field.rows(); ++r) {
    for (Eigen::Index c = 0; c + 1 < field.cols(); ++c) {
      const double v00 = field(r, c), v01 = field(r, c + 1), v11 = field(r + 1, c + 1), v10 = field(r + 1, c);
      const auto rd = static_cast<double>(r);
      const auto cd = static_cast<double>(c);
      std::vector<std::pair<double, double>> pts;  // (x = column, y = row)
      if ((v00 >= level) != (v01 >= level)) pts.emplace_back(cd + lerp(v00, v01), rd);
      if ((v01 >= level) != (v11 >= level)) pts.emplace_back(cd + 1.0, rd + lerp(v01, v11));
      if ((v10 >= level) != (v11 >= level)) pts.emplace_back(cd + lerp(v10, v11), rd + 1.0);
      if ((v00 >= level) != (v10 >= level)) pts.emplace_back(cd, rd + lerp(v00, v10));
      if (pts.size() == 2) {
        segs.push_back({pts[0].first, pts[0].second, pts[1].first, pts[1].second});
      } else if (pts.size() == 4) {
        // Saddle: the centre value decides which corners connect.
        const bool centre_high = 0.25 * (v00 + v01 + v11 + v10) >= level;
        const bool corner_high = v00 >= level;
        if (centre_high == corner_high) {
          segs.push_back({pts[0].first, pts[0].second, pts[1].first, pts[1].second});
          segs.push_back({pts[2].first, pts[2].second, pts[3].first, pts[3].second});
        } else {
          segs.push_back({pts[0].first, pts[0].second, pts[3].first, pts[3].second});
          segs.push_back({pts[1].first, pts[1].second, pts[2].first, pts[2].second});
        }
      }
    }
  }
  return segs;
}

std::string slice_svg(const ConfidenceSlice& s, const ParameterBox& box) {
  constexpr double kPlotW = 480.0, kPlotH = 400.0, kLeft = 70.0, kTop = 40.0;
  const auto nx = static_cast<double>(s.axis_x.size());
  const auto ny = static_cast<double>(s.axis_y.size());
  const double cw = kPlotW / nx, ch = kPlotH / ny;
  const auto& dx = box[s.free_dims[0]];
  const auto& dy = box[s.free_dims[1]];
  const auto& df = box[s.fixed_dim];
  auto to_px = [&](double raw_x, double raw_y) {
    const double ux = (raw_x - dx.lower) / dx.width();
    const double uy = (raw_y - dy.lower) / dy.width();
    return std::pair{kLeft + cw * 0.5 + ux * (kPlotW - cw), kTop + kPlotH - ch * 0.5 - uy * (kPlotH - ch)};
  };
  auto colour = [](double p) {
    // blue (0) -> white (0.5) -> red (1)
    const double t = std::clamp(p, 0.0, 1.0);
    int r, g, b;
    if (t < 0.5) {
      const double k = t / 0.5;
      r = static_cast<int>(std::lround(40 + k * 215));
      g = static_cast<int>(std::lround(80 + k * 175));
      b = 255;
    } else {
      const double k = (t - 0.5) / 0.5;
      r = 255;
      g = static_cast<int>(std::lround(255 - k * 215));
      b = static_cast<int>(std::lround(255 - k * 215));
    }
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return std::string(buf);
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"500\" viewBox=\"0 0 640 500\">\n";
  os << "<rect width=\"640\" height=\"500\" fill=\"white\"/>\n";
  os << "<text x=\"" << fixed(kLeft) << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">P(collision) at "
     << df.name << " = " << fixed(s.fixed_value) << " " << df.unit << ", data in [" << fixed(s.overlay_lower())
     << ", " << fixed(s.overlay_upper()) << "]</text>\n";
  os << "<g shape-rendering=\"crispEdges\">\n";
  for (Eigen::Index r = 0; r < s.probability.rows(); ++r) {
    for (Eigen::Index c = 0; c < s.probability.cols(); ++c) {
      const double x = kLeft + static_cast<double>(c) * cw;
      const double y = kTop + kPlotH - static_cast<double>(r + 1) * ch;
      os << "<rect x=\"" << fixed(x) << "\" y=\"" << fixed(y) << "\" width=\"" << fixed(cw + 0.05) << "\" height=\""
         << fixed(ch + 0.05) << "\" fill=\"" << colour(s.probability(r, c)) << "\"/>\n";
    }
  }
  os << "</g>\n";

  os << "<path fill=\"none\" stroke=\"black\" stroke-width=\"2\" d=\"";
  for (const auto& seg : contour_segments(s.probability, 0.5)) {
    auto px = [&](double col, double row) {
      return std::pair{kLeft + cw * 0.5 + col * cw, kTop + kPlotH - ch * 0.5 - row * ch};
    };
    const auto [x0, y0] = px(seg.x0, seg.y0);
    const auto [x1, y1] = px(seg.x1, seg.y1);
    os << "M" << fixed(x0) << " " << fixed(y0) << "L" << fixed(x1) << " " << fixed(y1);
  }
  os << "\"/>\n";

  for (const auto& sample : s.overlay) {
    const auto a = sample.params.as_array();
    const auto [x, y] = to_px(a[s.free_dims[0]], a[s.free_dims[1]]);
    const bool hit = sample.outcome == Outcome::Collision;
    os << "<circle cx=\"" << fixed(x) << "\" cy=\"" << fixed(y) << "\" r=\"4\" stroke=\"black\" stroke-width=\"1.2\" fill=\""
       << (hit ? "black" : "none") << "\"/>\n";
  }

  os << "<rect x=\"" << fixed(kLeft) << "\" y=\"" << fixed(kTop) << "\" width=\"" << fixed(kPlotW) << "\" height=\""
     << fixed(kPlotH) << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << fixed(kLeft + kPlotW / 2) << "\" y=\"" << fixed(kTop + kPlotH + 36)
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << dx.name << " [" << dx.unit
     << "]</text>\n";
  os << "<text x=\"20\" y=\"" << fixed(kTop + kPlotH / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
     << "font-size=\"13\" transform=\"rotate(-90 20 " << fixed(kTop + kPlotH / 2) << ")\">" << dy.name << " ["
     << dy.unit << "]</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = dx.lower + dx.width() * i / 4.0;
    const double fy = dy.lower + dy.width() * i / 4.0;
    os << "<text x=\"" << fixed(kLeft + kPlotW * i / 4.0) << "\" y=\"" << fixed(kTop + kPlotH + 16)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fixed(fx, 1) << "</text>\n";
    os << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(kTop + kPlotH - kPlotH * i / 4.0 + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fixed(fy, 1) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace pbound
