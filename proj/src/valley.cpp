#include <cmath>
#include <string>

#include "floodgsa/dem.hpp"
#include "floodgsa/error.hpp"

namespace floodgsa::dem {

namespace {

// Every numeric field with its config key, so parsing and writing stay in step.
template <typename F>
void for_each_field(ValleyConfig& c, F&& f) {
  f("length", c.length);
  f("width", c.width);
  f("cell_size", c.cell_size);
  f("outlet_elevation", c.outlet_elevation);
  f("valley_slope", c.valley_slope);
  f("lateral_slope", c.lateral_slope);
  f("channel_center_y", c.channel_center_y);
  f("channel_width", c.channel_width);
  f("channel_depth", c.channel_depth);
  f("courtyards", c.courtyards);
  f("gated_courtyards", c.gated_courtyards);
  f("courtyard_outer", c.courtyard_outer);
  f("courtyard_inner", c.courtyard_inner);
  f("courtyard_sink", c.courtyard_sink);
  f("gate_width", c.gate_width);
  f("building_size", c.building_size);
  f("building_height", c.building_height);
  f("street_width", c.street_width);
  f("block_first_x", c.block_first_x);
  f("block_last_x", c.block_last_x);
  f("block_bank_offset", c.block_bank_offset);
  f("block_rows", c.block_rows);
  f("wall_height", c.wall_height);
  f("wall_width", c.wall_width);
  f("curb_height", c.curb_height);
  f("curb_width", c.curb_width);
}

bool is_integral(double v) { return std::abs(v - std::round(v)) < 1e-9; }

Feature rectangle(double x0, double y0, double x1, double y1, double height) {
  Feature f;
  f.kind = FeatureKind::polygon;
  f.vertices = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  f.crest_mode = CrestMode::height;
  f.crest_value = height;
  return f;
}

Feature line(double x0, double y0, double x1, double y1, double width, double height) {
  Feature f;
  f.kind = FeatureKind::polyline;
  f.vertices = {{x0, y0}, {x1, y1}};
  f.width = width;
  f.crest_mode = CrestMode::height;
  f.crest_value = height;
  return f;
}

// x positions of the plain buildings in one row.
std::vector<double> building_columns(const ValleyConfig& c) {
  std::vector<double> xs;
  for (double x = c.block_first_x; x + c.building_size <= c.block_last_x + 1e-9; x += c.building_size + c.street_width) {
    xs.push_back(x);
  }
  return xs;
}

double courtyard_x(const ValleyConfig& c, int i) {
  if (c.courtyards == 1) return c.block_first_x;
  const double span = c.block_last_x - c.block_first_x - c.courtyard_outer;
  return c.block_first_x + span * i / (c.courtyards - 1);
}

// Gates spread evenly over the row, e.g. courtyards 1 and 3 of 0..4.
bool gated(const ValleyConfig& c, int i) {
  for (int k = 0; k < c.gated_courtyards; ++k) {
    if ((2 * k + 1) * c.courtyards / (2 * c.gated_courtyards) == i) return true;
  }
  return false;
}

// Distance from the bank to the far edge of the last building row.
double blocks_depth(const ValleyConfig& c) {
  return c.block_bank_offset + c.courtyard_outer +
         (c.block_rows - 1) * (c.street_width + c.building_size);
}

}  // namespace

ValleyConfig ValleyConfig::from_config(const KeyValueConfig& cfg) {
  ValleyConfig c;
  std::vector<std::string> known;
  for_each_field(c, [&](const char* key, auto& field) {
    known.emplace_back(key);
    if (!cfg.has(key)) return;
    if constexpr (std::is_same_v<std::decay_t<decltype(field)>, int>) {
      field = static_cast<int>(cfg.get_int(key));
    } else {
      field = cfg.get_double(key);
    }
  });
  cfg.require_known(known);
  c.validate();
  return c;
}

KeyValueConfig ValleyConfig::to_config() const {
  KeyValueConfig cfg;
  ValleyConfig copy = *this;
  for_each_field(copy, [&](const char* key, auto& field) {
    if constexpr (std::is_same_v<std::decay_t<decltype(field)>, int>) {
      cfg.set(key, std::to_string(field));
    } else {
      cfg.set(key, format_exact(field));
    }
  });
  return cfg;
}

void ValleyConfig::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string("valley ") + name + " must be positive");
  };
  positive(length, "length");
  positive(width, "width");
  positive(cell_size, "cell_size");
  positive(channel_width, "channel_width");
  positive(channel_depth, "channel_depth");
  positive(courtyard_outer, "courtyard_outer");
  positive(courtyard_inner, "courtyard_inner");
  positive(building_size, "building_size");
  positive(building_height, "building_height");
  positive(street_width, "street_width");
  positive(wall_width, "wall_width");
  positive(curb_width, "curb_width");
  if (!is_integral(length / cell_size) || !is_integral(width / cell_size)) {
    throw ValidationError("valley extent must be a whole number of cells");
  }
  if (valley_slope < 0.0 || lateral_slope < 0.0 || courtyard_sink < 0.0 || wall_height < 0.0 || curb_height < 0.0) {
    throw ValidationError("valley slopes, sink and feature heights must be >= 0");
  }
  if (courtyard_inner >= courtyard_outer) throw ValidationError("courtyard_inner must be smaller than courtyard_outer");
  if (courtyards < 1 || block_rows < 1 || gated_courtyards < 0 || gated_courtyards > courtyards) {
    throw ValidationError("courtyards and block_rows must be >= 1, gated_courtyards within [0, courtyards]");
  }
  if (!(gate_width > 0.0) || gate_width >= courtyard_inner) {
    throw ValidationError("gate_width must be positive and narrower than courtyard_inner");
  }
  const double half = channel_width / 2.0;
  if (channel_center_y - half <= 0.0 || channel_center_y + half >= width) {
    throw ValidationError("channel must lie inside the valley");
  }
  const double plain = std::min(channel_center_y - half, width - channel_center_y - half);
  if (blocks_depth(*this) >= plain) throw ValidationError("building rows do not fit on the floodplain");
  if (block_first_x < 0.0 || block_last_x > length || block_last_x - block_first_x < courtyard_outer * courtyards) {
    throw ValidationError("building blocks do not fit between block_first_x and block_last_x");
  }
}

double channel_bed_elevation(const ValleyConfig& config, double x) {
  return config.bank_elevation(x) - config.channel_depth;
}

Valley synth_valley(const ValleyConfig& c) {
  c.validate();
  GridGeometry g;
  g.ncols = static_cast<std::size_t>(std::llround(c.length / c.cell_size));
  g.nrows = static_cast<std::size_t>(std::llround(c.width / c.cell_size));
  g.cell_size = c.cell_size;
  Valley v;
  v.dtm = Raster(g, 0.0);
  const double half = c.channel_width / 2.0;

  // Per side: +1 north of the channel, -1 south. y at a distance d from the bank.
  const auto y_at = [&](int side, double d) { return c.channel_center_y + side * (half + d); };
  const auto span = [&](int side, double d0, double d1) {
    const double a = y_at(side, d0), b = y_at(side, d1);
    return std::pair{std::min(a, b), std::max(a, b)};
  };

  for (std::size_t r = 0; r < g.nrows; ++r) {
    const double y = g.center_y(r);
    const double d = std::abs(y - c.channel_center_y) - half;
    for (std::size_t col = 0; col < g.ncols; ++col) {
      const double bank = c.bank_elevation(g.center_x(col));
      v.dtm(r, col) = d < 0.0 ? bank - c.channel_depth : bank + c.lateral_slope * d;
    }
  }

  FeatureLayer buildings{FeatureGroup::buildings, {}};
  FeatureLayer walls{FeatureGroup::walls, {}};
  FeatureLayer curbs{FeatureGroup::street_features, {}};
  PointSet sheltered, open;
  const double t = (c.courtyard_outer - c.courtyard_inner) / 2.0;
  const auto columns = building_columns(c);
  const double row_last_x = columns.empty() ? c.block_first_x : columns.back() + c.building_size;

  for (int side : {1, -1}) {
    // Courtyard row.
    const double d0 = c.block_bank_offset, d1 = d0 + c.courtyard_outer;
    const auto [ya, yb] = span(side, d0, d1);
    for (int i = 0; i < c.courtyards; ++i) {
      const double x0 = courtyard_x(c, i), x1 = x0 + c.courtyard_outer;
      const double xm = (x0 + x1) / 2.0;
      const auto [fa, fb] = span(side, d0, d0 + t);  // bar facing the channel
      const auto [ba, bb] = span(side, d1 - t, d1);
      if (gated(c, i)) {
        const double g0 = xm - c.gate_width / 2.0, g1 = xm + c.gate_width / 2.0;
        buildings.features.push_back(rectangle(x0, fa, g0, fb, c.building_height));
        buildings.features.push_back(rectangle(g1, fa, x1, fb, c.building_height));
        const double wy = y_at(side, d0 + c.wall_width / 2.0);
        walls.features.push_back(line(g0, wy, g1, wy, c.wall_width, c.wall_height));
      } else {
        buildings.features.push_back(rectangle(x0, fa, x1, fb, c.building_height));
      }
      buildings.features.push_back(rectangle(x0, ba, x1, bb, c.building_height));
      buildings.features.push_back(rectangle(x0, ya + t, x0 + t, yb - t, c.building_height));
      buildings.features.push_back(rectangle(x1 - t, ya + t, x1, yb - t, c.building_height));
      const double xi0 = x0 + t, xi1 = x1 - t, yi0 = ya + t, yi1 = yb - t;
      for (std::size_t r = 0; r < g.nrows; ++r) {
        const double y = g.center_y(r);
        if (y <= yi0 || y >= yi1) continue;
        for (std::size_t col = 0; col < g.ncols; ++col) {
          const double x = g.center_x(col);
          if (x > xi0 && x < xi1) v.dtm(r, col) -= c.courtyard_sink;
        }
      }
      sheltered.push_back({xm, (ya + yb) / 2.0, ""});
      if (i + 1 < c.courtyards) {
        open.push_back({(x1 + courtyard_x(c, i + 1)) / 2.0, (ya + yb) / 2.0, ""});
      }
    }
    const double curb_d = d0 - c.curb_width / 2.0;
    curbs.features.push_back(line(c.block_first_x, y_at(side, curb_d), c.block_last_x, y_at(side, curb_d),
                                  c.curb_width, c.curb_height));

    // Plain building rows.
    for (int row = 1; row < c.block_rows; ++row) {
      const double r0 = d1 + c.street_width + (row - 1) * (c.street_width + c.building_size);
      const double r1 = r0 + c.building_size;
      const auto [ra, rb] = span(side, r0, r1);
      for (double x : columns) buildings.features.push_back(rectangle(x, ra, x + c.building_size, rb, c.building_height));
      for (double cd : {r0 - c.curb_width / 2.0, r1 + c.curb_width / 2.0}) {
        curbs.features.push_back(line(c.block_first_x, y_at(side, cd), row_last_x, y_at(side, cd), c.curb_width,
                                      c.curb_height));
      }
      if (row == 1) {
        const double sd = c.block_rows > 2 ? r1 + c.street_width / 2.0 : d1 + c.street_width / 2.0;
        open.push_back({(c.block_first_x + row_last_x) / 2.0, y_at(side, sd), ""});
      }
    }
  }
  for (std::size_t i = 0; i < sheltered.size(); ++i) {
    sheltered[i].label = "SH" + std::to_string(i + 1);
    v.points.push_back(sheltered[i]);
  }
  for (std::size_t i = 0; i < open.size(); ++i) {
    open[i].label = "OP" + std::to_string(i + 1);
    v.points.push_back(open[i]);
  }
  v.layers = {std::move(buildings), std::move(walls), std::move(curbs)};
  return v;
}

}  // namespace floodgsa::dem
