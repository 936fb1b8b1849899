#pragma once

// Factorial flood campaign: planning, a resumable parallel runner backed by an
// append-only manifest, and collection of the point samples.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include "floodgsa/dem.hpp"
#include "floodgsa/gsa.hpp"
#include "floodgsa/kv_config.hpp"
#include "floodgsa/raster.hpp"
#include "floodgsa/sample_table.hpp"
#include "floodgsa/swe.hpp"

namespace floodgsa::campaign {

namespace fs = std::filesystem;

struct CampaignConfig {
  fs::path dtm;
  std::vector<fs::path> layers;
  fs::path points;
  fs::path output_dir;
  std::uint64_t master_seed = 0;
  std::vector<int> m_levels{1, 2, 3, 4};
  std::vector<int> n_levels{2, 3, 5};
  int x_count = 20;
  double sigma = 0.2;
  double error_mean = 0.0;
  int max_workers = 30;

  swe::SolverConfig solver;
  swe::Edge inflow_edge = swe::Edge::west;
  double inflow_from = 0.0;  // span along the inflow edge, world coordinates
  double inflow_to = 0.0;
  swe::Hydrograph hydrograph;
  std::optional<swe::Edge> outflow_edge = swe::Edge::east;
  double sea_level = 0.0;
  // Hot start: base flow ramped in from dry over spin_up_ramp, run for
  // spin_up_time on the bare ground. 0 starts every case dry.
  double spin_up_time = 0.0;
  double spin_up_ramp = 0.0;

  // Poisons one cell of this case's topography; used to exercise failure handling.
  std::optional<dem::CaseId> inject_fault;

  /// Relative paths resolve against `base_dir`.
  static CampaignConfig from_config(const KeyValueConfig& cfg, const fs::path& base_dir);
  static CampaignConfig load(const fs::path& path);
  /// Paths are written absolute.
  KeyValueConfig to_config() const;

  /// Throws ValidationError; `check_paths` also requires the inputs to exist.
  void validate(bool check_paths = true) const;

  std::vector<dem::CaseId> cases() const;
  dem::ErrorFieldSpec error_spec() const;
  swe::BoundarySpec boundary(const GridGeometry& geometry) const;
  swe::Hydrograph spin_up_hydrograph() const;
};

enum class CaseStatus { pending, running, done, failed };

std::string to_string(CaseStatus status);
CaseStatus parse_status(const std::string& text);

struct CaseRecord {
  dem::CaseId id;
  CaseStatus status = CaseStatus::pending;
  double wall_clock = 0.0;  // seconds
  std::string reason;       // failed only
  std::vector<std::string> paths;  // relative to the store root

  /// `case;status;wall_clock;reason;paths`, paths comma separated.
  std::string to_line() const;
  static CaseRecord parse_line(const std::string& line, const std::string& source, std::size_t line_no);
};

struct StatusCounts {
  std::size_t pending = 0;
  std::size_t running = 0;
  std::size_t done = 0;
  std::size_t failed = 0;
  std::size_t total() const { return pending + running + done + failed; }
};

/// On-disk campaign store. The manifest is a log of status transitions;
/// replaying it keeps the last record per case. Thread-safe.
class ResultStore {
 public:
  /// Opens an existing store; IoError if there is no manifest.
  static ResultStore open(const fs::path& root);
  static bool exists(const fs::path& root);

  ResultStore(ResultStore&& other) noexcept;

  const fs::path& root() const noexcept { return root_; }
  fs::path manifest_path() const { return root_ / "manifest.log"; }
  fs::path run_log_path() const { return root_ / "runs.log"; }
  fs::path config_path() const { return root_ / "campaign.cfg"; }
  fs::path case_dir(const dem::CaseId& id) const { return root_ / id.to_string(); }
  fs::path hot_start_path(int resolution) const;

  /// Records in case order.
  std::vector<CaseRecord> records() const;
  std::optional<CaseRecord> find(const dem::CaseId& id) const;
  StatusCounts counts() const;
  std::vector<dem::CaseId> done_cases() const;
  std::vector<dem::CaseId> failed_cases() const;

  /// Appends one transition and flushes it to disk.
  void record(const CaseRecord& rec);
  /// Rewrites the manifest with one line per case (write then rename).
  void compact();

  /// Appends `start`/`end` lines with a monotonic timestamp.
  void log_run(const std::string& event, const dem::CaseId& id);
  void log_invocation(std::size_t workers);

 private:
  explicit ResultStore(fs::path root);
  void replay();

  fs::path root_;
  mutable std::mutex mutex_;
  std::map<dem::CaseId, CaseRecord> records_;
};

/// Creates or extends the store at config.output_dir with a pending record
/// for every case not already present; done and failed records are kept.
ResultStore plan_campaign(const CampaignConfig& config);

struct ExecuteOptions {
  std::size_t workers = 0;  // 0: config.max_workers
  std::stop_token stop;     // checked before each case is claimed
  std::function<void(const CaseRecord&)> on_finished;
};

struct ExecuteReport {
  std::size_t executed = 0;
  std::size_t done = 0;
  std::size_t failed = 0;
};

/// Runs every pending case, and every case left running by an interrupted
/// invocation, with at most `workers` simulations at once.
ExecuteReport execute(ResultStore& store, const CampaignConfig& config, const ExecuteOptions& options = {});

struct CaseOutcome {
  bool ok = false;
  std::string reason;
  double wall_clock = 0.0;
  std::vector<std::string> files;  // names inside the case directory
};

/// Composes the case DEM, runs it and writes wse_max.asc, dem.asc,
/// samples.csv and mass_ledger.csv into `dir`. Never throws for solver failures.
CaseOutcome run_case(const CampaignConfig& config, const Raster& dtm, const std::vector<dem::FeatureLayer>& layers,
                     const PointSet& points, const dem::CaseId& id, const swe::FlowState* hot_start,
                     const Raster* hot_start_topo, const fs::path& dir);

/// Bare-ground spin-up state for one resolution.
swe::FlowState spin_up(const CampaignConfig& config, const Raster& dtm, int resolution);

/// Y[case, point] over done cases, read back from the stored rasters; Y is
/// the ground elevation where a point never got wet. Failed cases are listed
/// in `excluded`. EmptyStoreError without done cases.
SampleTable collect_samples(const ResultStore& store, const PointSet& points);

/// Loader for gsa::sobol_map over the store's rasters.
gsa::MapLoader map_loader(const ResultStore& store);

struct RunLogAudit {
  std::size_t invocations = 0;
  std::size_t starts = 0;
  std::size_t completions = 0;         // `end` lines
  std::size_t interrupted = 0;         // starts never closed by an end
  std::size_t repeated_completions = 0;  // cases with more than one end
  std::size_t max_concurrency = 0;
};

RunLogAudit audit_run_log(const fs::path& path);

}  // namespace floodgsa::campaign
