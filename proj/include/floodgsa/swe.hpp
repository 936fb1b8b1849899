#pragma once

// Two-dimensional shallow water solver on a regular grid: hydrostatic
// reconstruction, HLL fluxes, optional minmod MUSCL with Heun time stepping,
// and semi-implicit Manning friction.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "floodgsa/raster.hpp"

namespace floodgsa::swe {

inline constexpr double kGravity = 9.81;

/// Conserved variables of one cell or one flux triple: (h, hu, hv).
struct Conserved {
  double h = 0.0;
  double hu = 0.0;
  double hv = 0.0;

  bool operator==(const Conserved&) const = default;
};

enum class Axis { x, y };

/// HLL flux across a face normal to `axis`; `left` lies on the negative side.
Conserved hll_flux(const Conserved& left, const Conserved& right, Axis axis, double g = kGravity,
                   double h_dry = 1e-6);

struct ReconstructedDepths {
  double left = 0.0;
  double right = 0.0;
};

/// Interface depths against the higher of the two bed elevations.
ReconstructedDepths hydrostatic_reconstruction(double h_left, double z_left, double h_right, double z_right);

double minmod(double a, double b);

/// Limited slope of the middle value of a three-cell stencil.
double muscl_slope(double previous, double current, double next);

struct SolverConfig {
  double cfl = 0.45;
  double manning_n = 0.015;
  double h_dry = 1e-6;
  int order = 2;
  double g = kGravity;
  double t_end = 600.0;
  double output_stride = 60.0;

  void validate() const;
};

/// Piecewise-linear discharge series; held constant beyond either end.
struct Hydrograph {
  std::vector<std::pair<double, double>> samples;  // (t [s], Q [m3/s])

  double operator()(double t) const;
  /// Exact integral of the piecewise-linear series over [t0, t1].
  double volume(double t0, double t1) const;
  void validate() const;

  static Hydrograph constant(double q);
  /// Base flow, linear rise to peak, plateau, linear recession back to base.
  static Hydrograph trapezoid(double base, double peak, double t_rise_start, double t_peak, double t_fall_start,
                              double t_end);
  /// Parses `t:Q, t:Q, ...`.
  static Hydrograph parse(const std::string& text);
  std::string to_string() const;
};

enum class Edge { north, south, east, west };

std::string to_string(Edge edge);
Edge parse_edge(const std::string& text);

struct InflowBoundary {
  Edge edge = Edge::west;
  std::size_t first = 0;  // cell index along the edge (row for east/west, column for north/south)
  std::size_t last = 0;   // inclusive
  Hydrograph hydrograph;
};

struct OutflowBoundary {
  Edge edge = Edge::east;
  double sea_level = 0.0;
};

/// Edges without an inflow or outflow condition are reflective walls.
struct BoundarySpec {
  std::optional<InflowBoundary> upstream;
  std::optional<OutflowBoundary> downstream;

  void validate(const GridGeometry& geometry) const;
};

/// Cells of `edge` whose centre coordinate along the edge lies within [lo, hi].
std::pair<std::size_t, std::size_t> edge_cells_in_span(const GridGeometry& geometry, Edge edge, double lo,
                                                       double hi);

struct FlowState {
  Raster h;
  Raster hu;
  Raster hv;
  Raster h_max;
  Raster wse_max;  // nodata until the cell first gets wet
  double t = 0.0;

  static FlowState dry(const GridGeometry& geometry);
  /// Seeds the running maxima from the current depths.
  void reset_maxima(const Raster& topo, double h_dry);
};

double compute_dt(const FlowState& state, const SolverConfig& config);

FlowState apply_friction(const FlowState& state, double dt, const SolverConfig& config);

enum class BoundaryKind { wall, inflow, outflow };

/// Face or cell state seen from inside the domain, with the velocity split
/// into the component along the outward normal and the tangential one.
struct EdgeState {
  double h = 0.0;
  double u_normal = 0.0;
  double u_tangent = 0.0;
  double z = 0.0;
};

struct GhostRule {
  BoundaryKind kind = BoundaryKind::wall;
  double unit_discharge = 0.0;  // inflow only, m2/s into the domain
  double sea_level = 0.0;       // outflow only
};

/// Ghost state for one boundary face.
EdgeState ghost_state(const EdgeState& interior, const GhostRule& rule, double g, double h_dry);

struct GhostCell {
  Edge edge = Edge::west;
  std::size_t index = 0;  // along the edge
  BoundaryKind kind = BoundaryKind::wall;
  double h = 0.0;
  double hu = 0.0;
  double hv = 0.0;
  double z = 0.0;
};

/// First-order ghost values for every boundary cell, edge by edge.
std::vector<GhostCell> apply_boundaries(const FlowState& state, const BoundarySpec& boundary, const Raster& topo,
                                        const SolverConfig& config);

struct StepReport {
  double dt = 0.0;
  double inflow_volume = 0.0;   // through inflow faces, positive into the domain
  double outflow_volume = 0.0;  // through outflow faces, positive out of the domain
};

/// Reusable solver for one topography: owns the padded work arrays.
class Solver {
 public:
  Solver(const Raster& topo, BoundarySpec boundary, SolverConfig config);

  const SolverConfig& config() const noexcept { return config_; }
  const Raster& topography() const noexcept { return topo_; }
  /// The free compute_dt bound, further limited by wet ghost cells on open edges.
  double compute_dt(const FlowState& state) const;

  /// Advances by one CFL step, or by `max_dt` if smaller. Throws
  /// NumericalInstability on a non-finite value.
  StepReport advance(FlowState& state, double max_dt = 1e300);

  double storage(const FlowState& state) const;

 private:
  // Fills the ghost ring of h, u, v in place before computing face fluxes.
  void residual(std::vector<double>& h, std::vector<double>& u, std::vector<double>& v, double t,
                std::vector<double>& rh, std::vector<double>& rhu, std::vector<double>& rhv, double& inflow,
                double& outflow);
  void friction(std::vector<double>& h, std::vector<double>& hu, std::vector<double>& hv, double dt) const;
  GhostRule rule_for(Edge edge, std::size_t index, double t) const;

  Raster topo_;
  BoundarySpec boundary_;
  SolverConfig config_;
  std::size_t nr_ = 0;
  std::size_t nc_ = 0;
  double dx_ = 1.0;
  double outflow_drop_ = 0.0;
  std::vector<double> zp_;  // padded topography
  // Per-stage scratch, sized (nr + 2) * (nc + 2).
  std::vector<double> hp_, up_, vp_;
  std::vector<double> rh_, rhu_, rhv_;
  std::vector<double> h1_, hu1_, hv1_;
  // MUSCL face values, one slope set per axis.
  std::vector<double> sx_h_, sx_u_, sx_v_, sx_eta_;
  std::vector<double> sy_h_, sy_u_, sy_v_, sy_eta_;
};

/// One explicit update of `state`.
FlowState step(const FlowState& state, const Raster& topo, const BoundarySpec& boundary, const SolverConfig& config);

struct MassLedgerRow {
  double t = 0.0;
  double inflow_volume = 0.0;   // cumulative
  double outflow_volume = 0.0;  // cumulative
  double storage = 0.0;
};

struct SimulationOutput {
  Raster wse_max;
  Raster h_max;
  FlowState final_state;
  std::vector<MassLedgerRow> ledger;
  double wall_clock_seconds = 0.0;
  std::size_t steps = 0;

  /// inflow - outflow - (storage change) over the whole run.
  double mass_balance_error() const;
};

struct FailedRun {
  std::string reason;
  double t = 0.0;
  std::optional<std::pair<std::size_t, std::size_t>> cell;
  double wall_clock_seconds = 0.0;
};

class SimulationResult {
 public:
  SimulationResult(SimulationOutput out) : value_(std::move(out)) {}
  SimulationResult(FailedRun failure) : value_(std::move(failure)) {}

  bool ok() const noexcept { return std::holds_alternative<SimulationOutput>(value_); }
  const SimulationOutput& output() const { return std::get<SimulationOutput>(value_); }
  SimulationOutput& output() { return std::get<SimulationOutput>(value_); }
  const FailedRun& failure() const { return std::get<FailedRun>(value_); }

 private:
  std::variant<SimulationOutput, FailedRun> value_;
};

/// Advances `initial` to config.t_end. Never throws for numerical failures:
/// non-finite topography or state yields a FailedRun.
SimulationResult run_simulation(const Raster& topo, FlowState initial, const BoundarySpec& boundary,
                                const SolverConfig& config);

/// Moves a saved state onto a different topography on the same grid by
/// preserving the water surface elevation and velocities of wet cells.
FlowState transfer_state(const FlowState& state, const Raster& from_topo, const Raster& to_topo, double h_dry);

// Files

void write_hot_start(const FlowState& state, const std::filesystem::path& path);
FlowState read_hot_start(const std::filesystem::path& path);
void write_mass_ledger(const std::vector<MassLedgerRow>& ledger, const std::filesystem::path& path);

}  // namespace floodgsa::swe
