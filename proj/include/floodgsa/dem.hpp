#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "floodgsa/kv_config.hpp"
#include "floodgsa/raster.hpp"

namespace floodgsa::dem {

enum class FeatureKind { polygon, polyline };
enum class FeatureGroup { buildings, walls, street_features };
enum class CrestMode { elevation, height };

std::string_view to_string(FeatureKind kind);
std::string_view to_string(FeatureGroup group);
std::string_view to_string(CrestMode mode);
FeatureGroup parse_group(std::string_view text);

struct Vertex {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Vertex&) const = default;
};

/// A polygon footprint or a polyline buffered to `width`. The crest is either
/// an absolute elevation or a height above the local ground.
struct Feature {
  FeatureKind kind = FeatureKind::polygon;
  std::vector<Vertex> vertices;
  double width = 0.0;
  CrestMode crest_mode = CrestMode::height;
  double crest_value = 0.0;

  void validate() const;
  bool operator==(const Feature&) const = default;
};

struct FeatureLayer {
  FeatureGroup group = FeatureGroup::buildings;
  std::vector<Feature> features;

  bool operator==(const FeatureLayer&) const = default;
};

/// Line-oriented feature file: `kind;group;width;crest_mode;crest_value;x1,y1 x2,y2 ...`.
/// Returns one layer per group present, in canonical group order.
std::vector<FeatureLayer> read_feature_layers(const std::filesystem::path& path);
void write_feature_layer(const FeatureLayer& layer, const std::filesystem::path& path);

/// Merges layers by group into exactly three layers ordered buildings, walls, street_features.
std::vector<FeatureLayer> canonical_layers(std::span<const FeatureLayer> layers);

/// One point of the factorial design, named `SmRnEx`.
struct CaseId {
  int scheme = 1;      // m in [1, 4]
  int resolution = 1;  // n in [1, 5], metres
  int error = 1;       // x in [1, 100]

  std::string to_string() const;
  static CaseId parse(std::string_view text);
  void validate() const;

  auto operator<=>(const CaseId&) const = default;
};

struct ErrorFieldSpec {
  int realization_index = 1;
  double sigma = 0.2;
  double mean = 0.0;
  std::uint64_t master_seed = 0;
};

/// Raises every cell whose centre lies inside a polygon, or within
/// max(width, cell_size) / 2 of a polyline, to max(current, crest). Height
/// crests are measured from `ground`.
Raster extrude_features(const Raster& surface, const FeatureLayer& layer, const Raster& ground);
Raster extrude_features(const Raster& dtm, const FeatureLayer& layer);

/// I.i.d. Gaussian field; a pure function of (master_seed, realization_index).
Raster generate_error_field(const GridGeometry& geometry, const ErrorFieldSpec& spec);

/// Extrude layers 1..m-1 onto the DTM, add error realization x at base
/// resolution, then block-mean resample to n metres.
Raster compose_dem(const Raster& dtm, std::span<const FeatureLayer> layers, const CaseId& id,
                   const ErrorFieldSpec& spec_template);

/// Full factorial in lexicographic order: scheme outer, resolution middle, error inner.
std::vector<CaseId> enumerate_cases(std::span<const int> m_levels, std::span<const int> n_levels, int x_count);

// ---------------------------------------------------------------------------
// Synthetic valley

/// Parameters of the synthetic test valley. Flow runs west to east along a
/// straight rectangular channel; the floodplains rise gently away from the
/// banks. Each floodplain carries one row of courtyard blocks next to the bank
/// and further rows of square buildings, with curbs along every row. Some
/// courtyards have a gate on the channel side that only a wall closes.
struct ValleyConfig {
  double length = 600.0;  // x extent, m
  double width = 300.0;   // y extent, m
  double cell_size = 1.0;
  double outlet_elevation = 10.0;  // bank elevation at the east edge
  double valley_slope = 0.001;     // downstream slope of bed and banks
  double lateral_slope = 0.001;    // floodplain rise away from the banks
  double channel_center_y = 150.0;
  double channel_width = 40.0;
  double channel_depth = 1.2;
  // Courtyard blocks: square rings of building, first row next to the bank.
  int courtyards = 5;        // per floodplain
  int gated_courtyards = 2;  // of those, the ones with a walled gate
  double courtyard_outer = 50.0;
  double courtyard_inner = 30.0;
  double courtyard_sink = 0.8;  // courtyard ground lowered below the floodplain
  double gate_width = 10.0;
  // Square buildings in the rows behind the courtyards.
  double building_size = 20.0;
  double building_height = 6.0;
  double street_width = 10.0;
  double block_first_x = 60.0;
  double block_last_x = 400.0;
  double block_bank_offset = 10.0;  // gap between bank and courtyard row
  int block_rows = 3;               // rows per floodplain including the courtyard row
  double wall_height = 1.2;
  double wall_width = 0.3;
  double curb_height = 0.25;
  double curb_width = 1.5;

  static ValleyConfig from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;
  void validate() const;

  double bank_elevation(double x) const { return outlet_elevation + valley_slope * (length - x); }
};

struct Valley {
  Raster dtm;
  std::vector<FeatureLayer> layers;  // buildings, walls, street_features
  PointSet points;                   // labels `SH*` are courtyard centres, `OP*` open street
};

Valley synth_valley(const ValleyConfig& config);

/// Bed elevation of the channel centreline at x.
double channel_bed_elevation(const ValleyConfig& config, double x);

}  // namespace floodgsa::dem
