#pragma once

// First-order Sobol analysis over the (S, R, E) factorial design, plus a
// pick-freeze estimator for continuous inputs and the convergence and
// distribution diagnostics used to size the error sample.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "floodgsa/dem.hpp"
#include "floodgsa/raster.hpp"
#include "floodgsa/sample_table.hpp"

namespace floodgsa::gsa {

enum class Factor { S, R, E };

inline constexpr Factor kFactors[] = {Factor::S, Factor::R, Factor::E};

std::string_view to_string(Factor factor);
int level_of(const dem::CaseId& id, Factor factor);

inline constexpr int kDefaultResamples = 1000;
// Indices outside [-kRangeTolerance, 1 + kRangeTolerance] fail the analysis.
inline constexpr double kRangeTolerance = 0.05;

struct FactorIndex {
  std::string factor;
  std::optional<double> s;  // absent when the factor has a single level
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct SobolIndices {
  std::string point;
  std::vector<FactorIndex> factors;
  std::size_t n_samples = 0;
  bool balanced = true;  // false: some level combinations are missing or repeated

  const FactorIndex& at(std::string_view factor) const;
  /// Sum of the indices that are present.
  double sum() const;
};

/// Plug-in first-order indices: level counts weight the conditional means and
/// variances use the population convention. Returns nullopt for a factor with
/// one level. Throws DegenerateOutput when Y has zero variance.
std::vector<std::optional<double>> factorial_indices(std::span<const dem::CaseId> cases, std::span<const double> y);

/// Factorial indices at one point with percentile bootstrap intervals that
/// resample whole error realizations.
SobolIndices sobol_first_order_factorial(const SampleTable& table, std::string_view point, std::uint64_t seed,
                                         int resamples = kDefaultResamples);

struct InputSpec {
  std::string name;
  double lower = 0.0;  // uniform on [lower, upper]
  double upper = 1.0;
};

using Model = std::function<double(std::span<const double>)>;

/// Two-matrix estimator, (p + 2) * n model evaluations; bootstrap over rows.
SobolIndices sobol_pick_freeze(const Model& model, std::span<const InputSpec> inputs, std::size_t n,
                               std::uint64_t seed, int resamples = kDefaultResamples);

/// Throws ValidationError if a present index leaves the tolerance band.
void check_range(const SobolIndices& indices);

// ---------------------------------------------------------------------------
// Diagnostics

struct ConvergenceRow {
  std::size_t n = 0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double std = 0.0;  // sample standard deviation
  bool stable = false;
};

// A row is stable when the CI half-width moved by less than this fraction of
// the slice standard deviation over each of the last three increments.
inline constexpr double kStabilityTolerance = 0.05;
inline constexpr std::size_t kConvergenceStep = 5;

struct ConvergenceReport {
  std::string point;
  int scheme = 1;
  int resolution = 1;
  std::vector<ConvergenceRow> rows;
  std::optional<std::size_t> stable_at;  // first N flagged stable
};

ConvergenceReport convergence_curve(const SampleTable& table, std::string_view point, int scheme, int resolution,
                                    std::uint64_t seed, int resamples = kDefaultResamples);

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

/// Linear interpolation between order statistics (the common "type 7").
double quantile(std::span<const double> sorted, double p);
Summary summarize(std::span<const double> values);

struct FixedLevel {
  Factor factor = Factor::S;
  int level = 1;

  /// `S=<m>` or `R=<n>`.
  static FixedLevel parse(std::string_view text);
};

struct LevelDistribution {
  Factor factor = Factor::R;  // the factor that varies
  int level = 1;
  std::vector<double> values;  // sorted
  Summary summary;
};

/// One distribution per level of the free discrete factor, pooled over E.
std::vector<LevelDistribution> fixed_factor_distributions(const SampleTable& table, std::string_view point,
                                                          FixedLevel fix);

// ---------------------------------------------------------------------------
// Maps

struct MapCase {
  Raster wse_max;  // nodata where never wet
  Raster dem;
};

using MapLoader = std::function<MapCase(const dem::CaseId&)>;

struct SobolMaps {
  Raster s_s;
  Raster s_r;
  Raster s_e;
};

/// Per-cell factorial indices on the grid of the coarsest resolution among
/// `cases`. Y = ground where a case stays dry; cells dry in every case or
/// with zero variance are nodata. Cases are loaded one at a time.
SobolMaps sobol_map(std::span<const dem::CaseId> cases, const MapLoader& load);

// ---------------------------------------------------------------------------
// Files

/// CSV `point,factor,s,ci_low,ci_high,n`; absent indices are written as NA.
void write_indices_csv(std::span<const SobolIndices> indices, const std::filesystem::path& path);
void write_convergence_csv(const ConvergenceReport& report, const std::filesystem::path& path);
/// Summary per level: `factor,level,count,mean,std,min,q1,median,q3,max`.
void write_distributions_csv(std::span<const LevelDistribution> dists, const std::filesystem::path& path);
/// Sorted values per level: `factor,level,y`.
void write_distribution_values_csv(std::span<const LevelDistribution> dists, const std::filesystem::path& path);

}  // namespace floodgsa::gsa
