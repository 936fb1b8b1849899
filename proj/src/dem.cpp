#include "floodgsa/dem.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "floodgsa/error.hpp"
#include "floodgsa/random.hpp"

namespace floodgsa::dem {

std::string_view to_string(FeatureKind kind) { return kind == FeatureKind::polygon ? "polygon" : "polyline"; }

std::string_view to_string(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::buildings:
      return "buildings";
    case FeatureGroup::walls:
      return "walls";
    case FeatureGroup::street_features:
      return "street_features";
  }
  return "?";
}

std::string_view to_string(CrestMode mode) { return mode == CrestMode::elevation ? "elevation" : "height"; }

FeatureGroup parse_group(std::string_view text) {
  if (text == "buildings") return FeatureGroup::buildings;
  if (text == "walls") return FeatureGroup::walls;
  if (text == "street_features") return FeatureGroup::street_features;
  throw ValidationError("unknown feature group '" + std::string(text) +
                        "' (expected buildings, walls or street_features)");
}

void Feature::validate() const {
  if (kind == FeatureKind::polygon && vertices.size() < 3) throw ValidationError("polygon needs at least 3 vertices");
  if (kind == FeatureKind::polyline) {
    if (vertices.size() < 2) throw ValidationError("polyline needs at least 2 vertices");
    if (!(width > 0.0) || !std::isfinite(width)) throw ValidationError("polyline width must be positive and finite");
  }
  if (!std::isfinite(crest_value)) throw ValidationError("feature crest must be finite");
  for (const auto& v : vertices) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw ValidationError("feature vertex must be finite");
  }
}

// ---------------------------------------------------------------------------
// Feature files

std::vector<FeatureLayer> read_feature_layers(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const std::string src = path.string();
  std::array<FeatureLayer, 3> by_group{FeatureLayer{FeatureGroup::buildings, {}},
                                       FeatureLayer{FeatureGroup::walls, {}},
                                       FeatureLayer{FeatureGroup::street_features, {}}};
  std::array<bool, 3> present{};
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    const std::string line = trim(std::string_view(text).substr(start, end - start));
    start = end + 1;
    if (line.empty() || line[0] == '#') continue;
    try {
      const auto fields = split(line, ';');
      if (fields.size() != 6) throw ValidationError("expected 6 ';'-separated fields");
      Feature f;
      if (fields[0] == "polygon") {
        f.kind = FeatureKind::polygon;
      } else if (fields[0] == "polyline") {
        f.kind = FeatureKind::polyline;
      } else {
        throw ValidationError("unknown feature kind '" + fields[0] + "'");
      }
      const FeatureGroup group = parse_group(fields[1]);
      f.width = fields[2].empty() ? 0.0 : parse_double(fields[2], "width");
      if (fields[3] == "elevation") {
        f.crest_mode = CrestMode::elevation;
      } else if (fields[3] == "height") {
        f.crest_mode = CrestMode::height;
      } else {
        throw ValidationError("unknown crest mode '" + fields[3] + "'");
      }
      f.crest_value = parse_double(fields[4], "crest_value");
      for (const auto& pair : split(fields[5], ' ')) {
        if (pair.empty()) continue;
        const auto xy = split(pair, ',');
        if (xy.size() != 2) throw ValidationError("malformed vertex '" + pair + "'");
        f.vertices.push_back({parse_double(xy[0], "x"), parse_double(xy[1], "y")});
      }
      f.validate();
      const auto g = static_cast<std::size_t>(group);
      by_group[g].features.push_back(std::move(f));
      present[g] = true;
    } catch (const ValidationError& e) {
      throw ParseError(src, line_no, e.what());
    }
  }
  std::vector<FeatureLayer> out;
  for (std::size_t g = 0; g < 3; ++g) {
    if (present[g]) out.push_back(std::move(by_group[g]));
  }
  return out;
}

void write_feature_layer(const FeatureLayer& layer, const std::filesystem::path& path) {
  std::string out = "# kind;group;width;crest_mode;crest_value;x1,y1 x2,y2 ...\n";
  for (const auto& f : layer.features) {
    out += std::string(to_string(f.kind)) + ";" + std::string(to_string(layer.group)) + ";" + format_exact(f.width) +
           ";" + std::string(to_string(f.crest_mode)) + ";" + format_exact(f.crest_value) + ";";
    for (std::size_t i = 0; i < f.vertices.size(); ++i) {
      if (i) out += ' ';
      out += format_exact(f.vertices[i].x) + "," + format_exact(f.vertices[i].y);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<FeatureLayer> canonical_layers(std::span<const FeatureLayer> layers) {
  std::vector<FeatureLayer> out{FeatureLayer{FeatureGroup::buildings, {}}, FeatureLayer{FeatureGroup::walls, {}},
                                FeatureLayer{FeatureGroup::street_features, {}}};
  for (const auto& layer : layers) {
    auto& dst = out[static_cast<std::size_t>(layer.group)].features;
    dst.insert(dst.end(), layer.features.begin(), layer.features.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// CaseId

std::string CaseId::to_string() const {
  return "S" + std::to_string(scheme) + "R" + std::to_string(resolution) + "E" + std::to_string(error);
}

void CaseId::validate() const {
  if (scheme < 1 || scheme > 4) throw ValidationError("scheme level must be in [1, 4], got " + std::to_string(scheme));
  if (resolution < 1 || resolution > 5) {
    throw ValidationError("resolution level must be in [1, 5], got " + std::to_string(resolution));
  }
  if (error < 1 || error > 100) throw ValidationError("error realization must be in [1, 100], got " + std::to_string(error));
}

CaseId CaseId::parse(std::string_view text) {
  const auto fail = [&]() -> CaseId { throw ValidationError("malformed case id '" + std::string(text) + "'"); };
  std::size_t pos = 0;
  const auto number = [&](char tag) -> int {
    if (pos >= text.size() || text[pos] != tag) fail();
    ++pos;
    const std::size_t begin = pos;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    if (pos == begin || pos - begin > 3 || (text[begin] == '0')) fail();
    return std::stoi(std::string(text.substr(begin, pos - begin)));
  };
  CaseId id;
  id.scheme = number('S');
  id.resolution = number('R');
  id.error = number('E');
  if (pos != text.size()) fail();
  id.validate();
  return id;
}

// ---------------------------------------------------------------------------
// Extrusion

namespace {

bool point_in_polygon(const std::vector<Vertex>& poly, double x, double y) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y > y) != (b.y > y)) {
      const double xc = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (x < xc) inside = !inside;
    }
  }
  return inside;
}

double segment_distance_sq(const Vertex& a, const Vertex& b, double x, double y) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((x - a.x) * dx + (y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double px = a.x + t * dx - x;
  const double py = a.y + t * dy - y;
  return px * px + py * py;
}

struct CellRange {
  std::size_t r0, r1, c0, c1;  // inclusive
};

CellRange cells_covering(const GridGeometry& g, double xmin, double xmax, double ymin, double ymax) {
  const auto clamp_col = [&](double x) {
    const double c = std::floor((x - g.x_origin) / g.cell_size);
    return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(g.ncols - 1)));
  };
  const auto clamp_row = [&](double y) {
    const double r = std::floor((g.y_max() - y) / g.cell_size);
    return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(g.nrows - 1)));
  };
  return {clamp_row(ymax), clamp_row(ymin), clamp_col(xmin), clamp_col(xmax)};
}

}  // namespace

Raster extrude_features(const Raster& surface, const FeatureLayer& layer, const Raster& ground) {
  const auto& g = surface.geometry();
  if (!g.compatible(ground.geometry())) throw ValidationError("extrude_features: ground and surface geometries differ");
  Raster out = surface;
  for (const auto& f : layer.features) {
    f.validate();
    for (const auto& v : f.vertices) {
      if (v.x < g.x_origin || v.x > g.x_max() || v.y < g.y_origin || v.y > g.y_max()) {
        throw ExtentError("feature vertex (" + format_exact(v.x) + ", " + format_exact(v.y) +
                          ") lies outside the DEM extent");
      }
    }
    const auto burn = [&](std::size_t r, std::size_t c) {
      if (surface.is_nodata(g.index(r, c))) return;
      const double crest = f.crest_mode == CrestMode::elevation ? f.crest_value : ground(r, c) + f.crest_value;
      out(r, c) = std::max(out(r, c), crest);
    };
    if (f.kind == FeatureKind::polygon) {
      double xmin = f.vertices[0].x, xmax = xmin, ymin = f.vertices[0].y, ymax = ymin;
      for (const auto& v : f.vertices) {
        xmin = std::min(xmin, v.x);
        xmax = std::max(xmax, v.x);
        ymin = std::min(ymin, v.y);
        ymax = std::max(ymax, v.y);
      }
      const auto range = cells_covering(g, xmin, xmax, ymin, ymax);
      for (std::size_t r = range.r0; r <= range.r1; ++r) {
        for (std::size_t c = range.c0; c <= range.c1; ++c) {
          if (point_in_polygon(f.vertices, g.center_x(c), g.center_y(r))) burn(r, c);
        }
      }
    } else {
      // Thin features are widened to at least one cell.
      const double radius = 0.5 * std::max(f.width, g.cell_size);
      const double r2 = radius * radius;
      for (std::size_t s = 0; s + 1 < f.vertices.size(); ++s) {
        const auto& a = f.vertices[s];
        const auto& b = f.vertices[s + 1];
        const auto range = cells_covering(g, std::min(a.x, b.x) - radius, std::max(a.x, b.x) + radius,
                                          std::min(a.y, b.y) - radius, std::max(a.y, b.y) + radius);
        for (std::size_t r = range.r0; r <= range.r1; ++r) {
          for (std::size_t c = range.c0; c <= range.c1; ++c) {
            if (segment_distance_sq(a, b, g.center_x(c), g.center_y(r)) <= r2) burn(r, c);
          }
        }
      }
    }
  }
  return out;
}

Raster extrude_features(const Raster& dtm, const FeatureLayer& layer) { return extrude_features(dtm, layer, dtm); }

// ---------------------------------------------------------------------------
// Error fields and composition

Raster generate_error_field(const GridGeometry& geometry, const ErrorFieldSpec& spec) {
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) throw ValidationError("error sigma must be >= 0");
  if (!std::isfinite(spec.mean)) throw ValidationError("error mean must be finite");
  Raster field(geometry, 0.0);
  auto eng = rng::make_engine(spec.master_seed, static_cast<std::uint64_t>(spec.realization_index));
  auto values = field.values();
  for (std::size_t i = 0; i < values.size(); i += 2) {
    const auto [z0, z1] = rng::standard_normal_pair(eng);
    values[i] = spec.mean + spec.sigma * z0;
    if (i + 1 < values.size()) values[i + 1] = spec.mean + spec.sigma * z1;
  }
  return field;
}

Raster compose_dem(const Raster& dtm, std::span<const FeatureLayer> layers, const CaseId& id,
                   const ErrorFieldSpec& spec_template) {
  id.validate();
  if (layers.size() + 1 < static_cast<std::size_t>(id.scheme)) {
    throw ValidationError("case " + id.to_string() + " needs " + std::to_string(id.scheme - 1) +
                          " feature layers, got " + std::to_string(layers.size()));
  }
  Raster surface = dtm;
  for (int k = 0; k + 1 < id.scheme; ++k) surface = extrude_features(surface, layers[static_cast<std::size_t>(k)], dtm);

  ErrorFieldSpec spec = spec_template;
  spec.realization_index = id.error;
  surface = add(surface, generate_error_field(dtm.geometry(), spec));
  return resample(surface, static_cast<double>(id.resolution), ResampleMethod::block_mean);
}

std::vector<CaseId> enumerate_cases(std::span<const int> m_levels, std::span<const int> n_levels, int x_count) {
  if (m_levels.empty() || n_levels.empty()) throw ValidationError("scheme and resolution level lists must be nonempty");
  if (x_count < 1) throw ValidationError("error realization count must be >= 1");
  if (std::set<int>(m_levels.begin(), m_levels.end()).size() != m_levels.size() ||
      std::set<int>(n_levels.begin(), n_levels.end()).size() != n_levels.size()) {
    throw ValidationError("level lists must not contain duplicates");
  }
  std::vector<CaseId> out;
  out.reserve(m_levels.size() * n_levels.size() * static_cast<std::size_t>(x_count));
  for (int m : m_levels) {
    for (int n : n_levels) {
      for (int x = 1; x <= x_count; ++x) {
        CaseId id{m, n, x};
        id.validate();
        out.push_back(id);
      }
    }
  }
  return out;
}

}  // namespace floodgsa::dem
