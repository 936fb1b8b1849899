#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "floodgsa/dem.hpp"
#include "floodgsa/error.hpp"
#include "floodgsa/raster.hpp"
#include "test_util.hpp"

namespace floodgsa::dem {
namespace {

GridGeometry geom(std::size_t nc, std::size_t nr, double cell = 1.0) {
  GridGeometry g;
  g.ncols = nc;
  g.nrows = nr;
  g.cell_size = cell;
  return g;
}

Feature polygon(std::vector<Vertex> v, CrestMode mode, double crest) {
  Feature f;
  f.kind = FeatureKind::polygon;
  f.vertices = std::move(v);
  f.crest_mode = mode;
  f.crest_value = crest;
  return f;
}

Feature polyline(std::vector<Vertex> v, double width, CrestMode mode, double crest) {
  Feature f;
  f.kind = FeatureKind::polyline;
  f.vertices = std::move(v);
  f.width = width;
  f.crest_mode = mode;
  f.crest_value = crest;
  return f;
}

TEST(CaseId, FormatsAndParses) {
  const CaseId id{2, 3, 17};
  EXPECT_EQ(id.to_string(), "S2R3E17");
  EXPECT_EQ(CaseId::parse("S2R3E17"), id);
  for (int m = 1; m <= 4; ++m) {
    for (int n = 1; n <= 5; ++n) {
      for (int x : {1, 9, 10, 99, 100}) {
        const CaseId c{m, n, x};
        EXPECT_EQ(CaseId::parse(c.to_string()), c);
      }
    }
  }
  for (const char* bad : {"S0R1E1", "S5R1E1", "S1R6E1", "S1R1E101", "S01R1E1", "S1R1E", "s1r1e1", "S1R1E1x", ""}) {
    EXPECT_THROW(CaseId::parse(bad), ValidationError) << bad;
  }
}

TEST(EnumerateCases, FullDesignOrderAndCount) {
  const std::vector<int> m{1, 2, 3, 4}, n{1, 2, 3, 4, 5};
  const auto all = enumerate_cases(m, n, 100);
  ASSERT_EQ(all.size(), 2000u);
  EXPECT_EQ(all.front().to_string(), "S1R1E1");
  EXPECT_EQ(all.back().to_string(), "S4R5E100");
  EXPECT_TRUE(std::is_sorted(all.begin(), all.end()));
  EXPECT_EQ(std::set<CaseId>(all.begin(), all.end()).size(), all.size());
}

TEST(EnumerateCases, SmallDesigns) {
  const std::vector<int> one{1}, two{1, 2};
  EXPECT_EQ(enumerate_cases(one, one, 1), (std::vector<CaseId>{{1, 1, 1}}));
  EXPECT_EQ(enumerate_cases(two, one, 2), (std::vector<CaseId>{{1, 1, 1}, {1, 1, 2}, {2, 1, 1}, {2, 1, 2}}));
  const std::vector<int> empty;
  EXPECT_THROW(enumerate_cases(empty, one, 1), ValidationError);
  EXPECT_THROW(enumerate_cases(one, one, 0), ValidationError);
}

TEST(Extrude, EmptyLayerIsIdentity) {
  const Raster dtm(geom(5, 4), 3.0);
  EXPECT_EQ(extrude_features(dtm, FeatureLayer{}), dtm);
}

TEST(Extrude, SquarePolygonRaisesCoveredCells) {
  const Raster dtm(geom(10, 10), 5.0);
  FeatureLayer layer{FeatureGroup::buildings, {polygon({{2, 2}, {6, 2}, {6, 6}, {2, 6}}, CrestMode::elevation, 10.0)}};
  const Raster out = extrude_features(dtm, layer);
  for (std::size_t r = 0; r < 10; ++r) {
    for (std::size_t c = 0; c < 10; ++c) {
      const double y = 9.5 - r, x = c + 0.5;
      const bool inside = x > 2 && x < 6 && y > 2 && y < 6;
      EXPECT_EQ(out(r, c), inside ? 10.0 : 5.0);
    }
  }
}

TEST(Extrude, MaxRuleNeverLowersGround) {
  const Raster dtm(geom(4, 4), 12.0);
  FeatureLayer layer{FeatureGroup::buildings, {polygon({{0, 0}, {4, 0}, {4, 4}, {0, 4}}, CrestMode::elevation, 10.0)}};
  EXPECT_EQ(extrude_features(dtm, layer), dtm);
}

// Capsule oracle: a cell is burned iff its centre lies within max(w, cell)/2
// of the polyline, written here from the vector projection directly.
TEST(Extrude, ThinWallMatchesCapsuleOracle) {
  Raster dtm(geom(40, 30), 1.0);
  for (std::size_t i = 0; i < dtm.size(); ++i) dtm[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
  const std::vector<Vertex> line{{3.2, 4.1}, {21.7, 25.3}, {36.4, 9.9}};
  FeatureLayer layer{FeatureGroup::walls, {polyline(line, 0.4, CrestMode::height, 2.0)}};
  const Raster out = extrude_features(dtm, layer);
  const double rad = 0.5;  // widened to one cell
  std::size_t burned = 0;
  for (std::size_t r = 0; r < 30; ++r) {
    for (std::size_t c = 0; c < 40; ++c) {
      const double px = c + 0.5, py = 29.5 - r;
      bool in = false;
      for (std::size_t s = 0; s + 1 < line.size(); ++s) {
        const double ax = line[s].x, ay = line[s].y, bx = line[s + 1].x, by = line[s + 1].y;
        const double t = std::clamp(((px - ax) * (bx - ax) + (py - ay) * (by - ay)) /
                                        ((bx - ax) * (bx - ax) + (by - ay) * (by - ay)),
                                    0.0, 1.0);
        const double dx = ax + t * (bx - ax) - px, dy = ay + t * (by - ay) - py;
        in = in || std::hypot(dx, dy) <= rad;
      }
      burned += in;
      EXPECT_DOUBLE_EQ(out(r, c), dtm(r, c) + (in ? 2.0 : 0.0)) << r << "," << c;
    }
  }
  // Every cell crossed by the centreline is burned: at least one cell per unit length.
  EXPECT_GT(burned, 45u);
}

TEST(Extrude, HeightCrestFollowsGroundNotSurface) {
  const Raster dtm(geom(4, 1), std::vector<double>{1, 2, 3, 4});
  Raster surface = dtm;
  surface[1] = 9.0;
  FeatureLayer layer{FeatureGroup::walls, {polyline({{0, 0.5}, {4, 0.5}}, 1.0, CrestMode::height, 1.5)}};
  const Raster out = extrude_features(surface, layer, dtm);
  EXPECT_EQ(std::vector<double>(out.values().begin(), out.values().end()), (std::vector<double>{2.5, 9.0, 4.5, 5.5}));
}

TEST(Extrude, Errors) {
  const Raster dtm(geom(4, 4), 0.0);
  FeatureLayer outside{FeatureGroup::buildings, {polygon({{1, 1}, {5, 1}, {1, 3}}, CrestMode::height, 1)}};
  EXPECT_THROW(extrude_features(dtm, outside), ExtentError);
  FeatureLayer zero{FeatureGroup::walls, {polyline({{1, 1}, {2, 2}}, 0.0, CrestMode::height, 1)}};
  EXPECT_THROW(extrude_features(dtm, zero), ValidationError);
  FeatureLayer two{FeatureGroup::buildings, {polygon({{1, 1}, {2, 2}}, CrestMode::height, 1)}};
  EXPECT_THROW(extrude_features(dtm, two), ValidationError);
}

TEST(FeatureFile, RoundTripsAllGroups) {
  testing::TempDir dir;
  FeatureLayer b{FeatureGroup::buildings, {polygon({{1, 1}, {2.5, 1}, {2, 3.25}}, CrestMode::elevation, 12.5)}};
  FeatureLayer w{FeatureGroup::walls, {polyline({{0, 0}, {1, 1}, {2, 0}}, 0.3, CrestMode::height, 1.2)}};
  write_feature_layer(b, dir / "b.txt");
  write_feature_layer(w, dir / "w.txt");
  EXPECT_EQ(read_feature_layers(dir / "b.txt"), std::vector<FeatureLayer>{b});
  EXPECT_EQ(read_feature_layers(dir / "w.txt"), std::vector<FeatureLayer>{w});
  const std::vector<FeatureLayer> mixed{w, b};
  const auto canon = canonical_layers(mixed);
  ASSERT_EQ(canon.size(), 3u);
  EXPECT_EQ(canon[0], b);
  EXPECT_EQ(canon[1], w);
  EXPECT_TRUE(canon[2].features.empty());
}

TEST(FeatureFile, MalformedRecordNamesLine) {
  testing::TempDir dir;
  write_file_atomic(dir / "f.txt", "# c\npolygon;buildings;0;height;3;0,0 1,0 1,1\npolygon;roofs;0;height;3;0,0 1,0 1,1\n");
  try {
    read_feature_layers(dir / "f.txt");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(ErrorField, ZeroSigmaIsZero) {
  ErrorFieldSpec s;
  s.sigma = 0.0;
  const Raster f = generate_error_field(geom(10, 10), s);
  for (double v : f.values()) EXPECT_EQ(v, 0.0);
  s.sigma = -1.0;
  EXPECT_THROW(generate_error_field(geom(2, 2), s), ValidationError);
}

TEST(ErrorField, DeterministicAndDistinctPerRealization) {
  ErrorFieldSpec s;
  s.master_seed = 99;
  s.realization_index = 4;
  const Raster a = generate_error_field(geom(30, 20), s);
  EXPECT_EQ(generate_error_field(geom(30, 20), s), a);
  s.realization_index = 5;
  EXPECT_NE(generate_error_field(geom(30, 20), s), a);
  s.realization_index = 4;
  s.master_seed = 100;
  EXPECT_NE(generate_error_field(geom(30, 20), s), a);
}

TEST(ErrorField, MomentsOfA500By500Field) {
  ErrorFieldSpec s;
  s.master_seed = 20240611;
  s.realization_index = 1;
  s.sigma = 0.2;
  const Raster f = generate_error_field(geom(500, 500), s);
  double sum = 0.0;
  for (double v : f.values()) sum += v;
  const double mean = sum / f.size();
  double ss = 0.0;
  for (double v : f.values()) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (f.size() - 1));
  EXPECT_NEAR(mean, 0.0, 0.003);
  EXPECT_NEAR(sd, 0.2, 0.005);
}

class Composition : public ::testing::Test {
 protected:
  void SetUp() override {
    ValleyConfig c;
    c.length = 120;
    c.width = 100;
    c.channel_center_y = 50;
    c.channel_width = 10;
    c.courtyards = 2;
    c.gated_courtyards = 1;
    c.courtyard_outer = 16;
    c.courtyard_inner = 8;
    c.gate_width = 3;
    c.building_size = 6;
    c.street_width = 4;
    c.block_first_x = 10;
    c.block_last_x = 100;
    c.block_bank_offset = 3;
    c.block_rows = 2;
    valley = synth_valley(c);
    spec.master_seed = 7;
    spec.sigma = 0.2;
  }
  Valley valley;
  ErrorFieldSpec spec;
};

TEST_F(Composition, InertFactorsReturnTheDtm) {
  ErrorFieldSpec zero = spec;
  zero.sigma = 0.0;
  EXPECT_EQ(compose_dem(valley.dtm, valley.layers, CaseId{1, 1, 3}, zero), valley.dtm);
}

TEST_F(Composition, RecomposesFromTheIndividualOperations) {
  ErrorFieldSpec e7 = spec;
  e7.realization_index = 7;
  const Raster expect =
      resample(add(extrude_features(valley.dtm, valley.layers[0]), generate_error_field(valley.dtm.geometry(), e7)), 5.0);
  EXPECT_EQ(compose_dem(valley.dtm, valley.layers, CaseId{2, 5, 7}, spec), expect);
}

TEST_F(Composition, SchemeDifferencesAreCumulativeAndErrorFree) {
  const Raster s3a = compose_dem(valley.dtm, valley.layers, CaseId{3, 1, 2}, spec);
  const Raster s4a = compose_dem(valley.dtm, valley.layers, CaseId{4, 1, 2}, spec);
  const Raster s3b = compose_dem(valley.dtm, valley.layers, CaseId{3, 1, 9}, spec);
  const Raster s4b = compose_dem(valley.dtm, valley.layers, CaseId{4, 1, 9}, spec);
  const Raster street = extrude_features(Raster(valley.dtm.geometry(), -1e9), valley.layers[2], valley.dtm);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < s3a.size(); ++i) {
    const double d = s4a[i] - s3a[i];
    EXPECT_GE(d, -1e-12);
    if (d > 1e-12) {
      ++changed;
      EXPECT_GT(street[i], -1e9);  // only where a street feature was burned
    }
    EXPECT_NEAR(d, s4b[i] - s3b[i], 1e-9);
  }
  EXPECT_GT(changed, 0u);
}

TEST_F(Composition, MonotoneInScheme) {
  for (int n : {1, 2, 5}) {
    Raster prev = compose_dem(valley.dtm, valley.layers, CaseId{1, n, 4}, spec);
    EXPECT_EQ(prev.cell_size(), n);
    for (int m = 2; m <= 4; ++m) {
      const Raster cur = compose_dem(valley.dtm, valley.layers, CaseId{m, n, 4}, spec);
      for (std::size_t i = 0; i < cur.size(); ++i) EXPECT_GE(cur[i], prev[i] - 1e-12);
      prev = cur;
    }
  }
}

TEST(SynthValley, ChannelSlopesDownstreamAndBuildingsOnlyFromS2) {
  const ValleyConfig c;
  const Valley v = synth_valley(c);
  EXPECT_EQ(v.dtm.cols(), 600u);
  EXPECT_EQ(v.dtm.rows(), 300u);
  const auto row = locate(v.dtm.geometry(), 10, c.channel_center_y).row;
  for (std::size_t col = 1; col < v.dtm.cols(); ++col) EXPECT_LT(v.dtm(row, col), v.dtm(row, col - 1));
  EXPECT_NEAR(v.dtm(row, 599), channel_bed_elevation(c, 599.5), 1e-12);

  const Raster s2 = extrude_features(v.dtm, v.layers[0]);
  std::size_t raised = 0;
  for (std::size_t i = 0; i < s2.size(); ++i) raised += s2[i] > v.dtm[i];
  EXPECT_GT(raised, 10000u);
  EXPECT_FALSE(v.layers[1].features.empty());
  EXPECT_FALSE(v.layers[2].features.empty());
}

TEST(SynthValley, ShelteredPointsSitInClosedCourtyards) {
  const ValleyConfig c;
  const Valley v = synth_valley(c);
  const Raster s2 = extrude_features(v.dtm, v.layers[0]);
  const Raster s3 = extrude_features(s2, v.layers[1], v.dtm);
  std::size_t sheltered = 0, open = 0;
  for (const auto& p : v.points) {
    const auto idx = locate(s2.geometry(), p.x, p.y);
    EXPECT_EQ(s3(idx.row, idx.col), v.dtm(idx.row, idx.col)) << p.label << " lies under a feature";
    if (p.label.rfind("SH", 0) == 0) {
      ++sheltered;
      // Walking north or south from the courtyard centre meets a building or wall crest.
      for (int dir : {-1, 1}) {
        bool blocked = false;
        for (int k = 1; k < 30 && !blocked; ++k) {
          const auto r = static_cast<std::size_t>(static_cast<int>(idx.row) + dir * k);
          blocked = s3(r, idx.col) > v.dtm(r, idx.col) + 1.0;
        }
        EXPECT_TRUE(blocked) << p.label;
      }
    } else {
      ++open;
    }
  }
  EXPECT_EQ(sheltered, 10u);
  EXPECT_EQ(open, 10u);
}

// Bankfull Manning discharge of the rectangular channel stays below the test
// peak flow, so the flood spills onto the floodplain, and above the base flow.
TEST(SynthValley, BankfullConveyanceBracketsTheTestHydrograph) {
  const ValleyConfig c;
  const double area = c.channel_width * c.channel_depth;
  const double radius = area / (c.channel_width + 2.0 * c.channel_depth);
  const double q_bankfull = area * std::pow(radius, 2.0 / 3.0) * std::sqrt(c.valley_slope) / 0.015;
  EXPECT_LT(q_bankfull, 247.0);
  EXPECT_GT(q_bankfull, 100.0);
}

TEST(SynthValley, ConfigRoundTripAndValidation) {
  ValleyConfig c;
  c.courtyards = 4;
  c.wall_height = 1.5;
  const auto back = ValleyConfig::from_config(c.to_config());
  EXPECT_EQ(back.to_config().entries(), c.to_config().entries());
  ValleyConfig bad;
  bad.channel_center_y = 10;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = ValleyConfig{};
  bad.courtyard_inner = 60;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = ValleyConfig{};
  bad.length = 600.5;
  EXPECT_THROW(bad.validate(), ValidationError);
  EXPECT_THROW(ValleyConfig::from_config(KeyValueConfig::parse("lenght = 5\n")), ParseError);
}

}  // namespace
}  // namespace floodgsa::dem
