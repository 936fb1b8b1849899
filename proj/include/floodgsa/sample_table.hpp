#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "floodgsa/dem.hpp"
#include "floodgsa/raster.hpp"

namespace floodgsa {

/// Output matrix Y[case, point]. Rows are cases, columns points of interest.
/// A point never reached by water carries its ground elevation.
struct SampleTable {
  std::vector<dem::CaseId> cases;
  PointSet points;
  std::vector<double> y;            // row-major, cases.size() x points.size()
  std::vector<dem::CaseId> excluded;  // failed cases left out of the table

  double at(std::size_t row, std::size_t col) const { return y[row * points.size() + col]; }
  std::size_t point_index(std::string_view label) const;  // LookupError if absent
  std::vector<double> column(std::string_view label) const;

  void validate() const;
};

/// CSV `case,point,y`, rows in table order. Point coordinates are not stored.
void write_sample_table(const SampleTable& table, const std::filesystem::path& path);
SampleTable read_sample_table(const std::filesystem::path& path);

}  // namespace floodgsa
