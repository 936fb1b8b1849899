#include "floodgsa/swe.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "floodgsa/error.hpp"
#include "floodgsa/kv_config.hpp"

namespace floodgsa::swe {

// ---------------------------------------------------------------------------
// Pointwise building blocks

namespace {

struct FaceState {
  double h;
  double un;  // velocity along the face normal (+axis)
  double ut;  // tangential velocity
  double z;
};

struct FaceFlux {
  double mass;
  double normal;
  double tangent;
  double pressure_left;   // g/2 (h_L^2 - h_L*^2), added to the left cell's normal flux
  double pressure_right;  // g/2 (h_R^2 - h_R*^2)
};

// HLL flux of the normal-frame system for primitive states.
inline void hll(double hl, double ul, double vl, double hr, double ur, double vr, double g, double& f0, double& f1,
                double& f2) {
  if (hl <= 0.0 && hr <= 0.0) {
    f0 = f1 = f2 = 0.0;
    return;
  }
  const double cl = std::sqrt(g * hl);
  const double cr = std::sqrt(g * hr);
  const double sl = std::min(ul - cl, ur - cr);
  const double sr = std::max(ul + cl, ur + cr);
  const double ql = hl * ul;
  const double qr = hr * ur;
  const double fl0 = ql;
  const double fl1 = ql * ul + 0.5 * g * hl * hl;
  const double fl2 = ql * vl;
  const double fr0 = qr;
  const double fr1 = qr * ur + 0.5 * g * hr * hr;
  const double fr2 = qr * vr;
  if (sl >= 0.0) {
    f0 = fl0;
    f1 = fl1;
    f2 = fl2;
  } else if (sr <= 0.0) {
    f0 = fr0;
    f1 = fr1;
    f2 = fr2;
  } else {
    const double inv = 1.0 / (sr - sl);
    const double slsr = sl * sr;
    f0 = ((sr * fl0 - sl * fr0) + slsr * (hr - hl)) * inv;
    f1 = ((sr * fl1 - sl * fr1) + slsr * (qr - ql)) * inv;
    f2 = ((sr * fl2 - sl * fr2) + slsr * (hr * vr - hl * vl)) * inv;
  }
}

inline FaceFlux face_flux(const FaceState& l, const FaceState& r, double g) {
  const double zs = std::max(l.z, r.z);
  const double hls = std::max(0.0, l.h + l.z - zs);
  const double hrs = std::max(0.0, r.h + r.z - zs);
  FaceFlux f{};
  hll(hls, l.un, l.ut, hrs, r.un, r.ut, g, f.mass, f.normal, f.tangent);
  f.pressure_left = 0.5 * g * (l.h * l.h - hls * hls);
  f.pressure_right = 0.5 * g * (r.h * r.h - hrs * hrs);
  return f;
}

inline double velocity(double h, double q, double h_dry) { return h > h_dry ? q / h : 0.0; }

}  // namespace

Conserved hll_flux(const Conserved& left, const Conserved& right, Axis axis, double g, double h_dry) {
  const bool x = axis == Axis::x;
  const double hl = std::max(0.0, left.h);
  const double hr = std::max(0.0, right.h);
  const double ul = velocity(hl, x ? left.hu : left.hv, h_dry);
  const double vl = velocity(hl, x ? left.hv : left.hu, h_dry);
  const double ur = velocity(hr, x ? right.hu : right.hv, h_dry);
  const double vr = velocity(hr, x ? right.hv : right.hu, h_dry);
  double f0 = 0.0, f1 = 0.0, f2 = 0.0;
  hll(hl, ul, vl, hr, ur, vr, g, f0, f1, f2);
  return x ? Conserved{f0, f1, f2} : Conserved{f0, f2, f1};
}

ReconstructedDepths hydrostatic_reconstruction(double h_left, double z_left, double h_right, double z_right) {
  const double zs = std::max(z_left, z_right);
  return {std::max(0.0, h_left + z_left - zs), std::max(0.0, h_right + z_right - zs)};
}

double minmod(double a, double b) {
  if (a > 0.0 && b > 0.0) return std::min(a, b);
  if (a < 0.0 && b < 0.0) return std::max(a, b);
  return 0.0;
}

double muscl_slope(double previous, double current, double next) {
  return minmod(current - previous, next - current);
}

// ---------------------------------------------------------------------------
// Configuration types

void SolverConfig::validate() const {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw ValidationError("cfl must lie in (0, 1]");
  if (!(manning_n >= 0.0) || !std::isfinite(manning_n)) throw ValidationError("manning_n must be >= 0");
  if (!(h_dry > 0.0)) throw ValidationError("h_dry must be positive");
  if (order != 1 && order != 2) throw ValidationError("order must be 1 or 2");
  if (!(g > 0.0)) throw ValidationError("g must be positive");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw ValidationError("t_end must be >= 0");
  if (!(output_stride > 0.0) || !std::isfinite(output_stride)) throw ValidationError("output_stride must be positive");
}

double Hydrograph::operator()(double t) const {
  if (samples.empty()) return 0.0;
  if (t <= samples.front().first) return samples.front().second;
  if (t >= samples.back().first) return samples.back().second;
  const auto it = std::upper_bound(samples.begin(), samples.end(), t,
                                   [](double v, const std::pair<double, double>& s) { return v < s.first; });
  const auto& [t1, q1] = *it;
  const auto& [t0, q0] = *(it - 1);
  return q0 + (q1 - q0) * (t - t0) / (t1 - t0);
}

double Hydrograph::volume(double t0, double t1) const {
  if (t1 <= t0 || samples.empty()) return 0.0;
  // Breakpoints inside (t0, t1) plus the ends; trapezoid rule is exact per piece.
  std::vector<double> knots{t0};
  for (const auto& s : samples) {
    if (s.first > t0 && s.first < t1) knots.push_back(s.first);
  }
  knots.push_back(t1);
  double v = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    v += 0.5 * ((*this)(knots[i]) + (*this)(knots[i + 1])) * (knots[i + 1] - knots[i]);
  }
  return v;
}

void Hydrograph::validate() const {
  if (samples.empty()) throw ValidationError("hydrograph needs at least one sample");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i].first) || !std::isfinite(samples[i].second)) {
      throw ValidationError("hydrograph samples must be finite");
    }
    if (samples[i].second < 0.0) throw ValidationError("hydrograph discharge must be >= 0");
    if (i > 0 && !(samples[i].first > samples[i - 1].first)) {
      throw ValidationError("hydrograph times must be strictly increasing");
    }
  }
}

Hydrograph Hydrograph::constant(double q) { return Hydrograph{{{0.0, q}}}; }

Hydrograph Hydrograph::trapezoid(double base, double peak, double t_rise_start, double t_peak, double t_fall_start,
                                 double t_end) {
  Hydrograph h{{{t_rise_start, base}, {t_peak, peak}, {t_fall_start, peak}, {t_end, base}}};
  h.validate();
  return h;
}

Hydrograph Hydrograph::parse(const std::string& text) {
  Hydrograph h;
  for (const auto& item : split(text, ',')) {
    if (item.empty()) continue;
    const auto parts = split(item, ':');
    if (parts.size() != 2) throw ValidationError("hydrograph sample '" + item + "' is not 't:Q'");
    h.samples.emplace_back(parse_double(parts[0], "hydrograph time"), parse_double(parts[1], "hydrograph discharge"));
  }
  h.validate();
  return h;
}

std::string Hydrograph::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i) out += ", ";
    out += format_exact(samples[i].first) + ":" + format_exact(samples[i].second);
  }
  return out;
}

std::string to_string(Edge edge) {
  switch (edge) {
    case Edge::north:
      return "north";
    case Edge::south:
      return "south";
    case Edge::east:
      return "east";
    case Edge::west:
      return "west";
  }
  return "?";
}

Edge parse_edge(const std::string& text) {
  if (text == "north") return Edge::north;
  if (text == "south") return Edge::south;
  if (text == "east") return Edge::east;
  if (text == "west") return Edge::west;
  throw ValidationError("unknown edge '" + text + "' (expected north, south, east or west)");
}

namespace {

std::size_t edge_length(const GridGeometry& g, Edge e) {
  return (e == Edge::east || e == Edge::west) ? g.nrows : g.ncols;
}

}  // namespace

void BoundarySpec::validate(const GridGeometry& geometry) const {
  if (upstream) {
    upstream->hydrograph.validate();
    if (upstream->first > upstream->last || upstream->last >= edge_length(geometry, upstream->edge)) {
      throw ValidationError("inflow cell range is empty or exceeds the " + to_string(upstream->edge) + " edge");
    }
  }
  if (downstream && !std::isfinite(downstream->sea_level)) throw ValidationError("sea level must be finite");
  if (upstream && downstream && upstream->edge == downstream->edge) {
    throw ValidationError("upstream and downstream boundaries must lie on different edges");
  }
}

std::pair<std::size_t, std::size_t> edge_cells_in_span(const GridGeometry& g, Edge edge, double lo, double hi) {
  const std::size_t n = edge_length(g, edge);
  std::size_t first = n, last = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double coord = (edge == Edge::east || edge == Edge::west) ? g.center_y(i) : g.center_x(i);
    if (coord >= lo && coord <= hi) {
      first = std::min(first, i);
      last = std::max(last, i);
    }
  }
  if (first == n) throw ValidationError("no " + to_string(edge) + " edge cell centre lies within the inflow span");
  return {first, last};
}

// ---------------------------------------------------------------------------
// Flow state helpers

FlowState FlowState::dry(const GridGeometry& geometry) {
  FlowState s;
  s.h = Raster(geometry, 0.0);
  s.hu = Raster(geometry, 0.0);
  s.hv = Raster(geometry, 0.0);
  s.h_max = Raster(geometry, 0.0);
  s.wse_max = Raster(geometry, geometry.nodata_value);
  return s;
}

void FlowState::reset_maxima(const Raster& topo, double h_dry) {
  const auto& g = h.geometry();
  h_max = h;
  wse_max = Raster(g, g.nodata_value);
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] > h_dry) wse_max[i] = h[i] + topo[i];
  }
}

double compute_dt(const FlowState& state, const SolverConfig& config) {
  double speed = 0.0;
  for (std::size_t i = 0; i < state.h.size(); ++i) {
    const double h = state.h[i];
    if (h <= config.h_dry) continue;
    const double c = std::sqrt(config.g * h);
    speed = std::max(speed, std::max(std::abs(state.hu[i] / h), std::abs(state.hv[i] / h)) + c);
  }
  if (speed <= 0.0) return config.output_stride;
  return config.cfl * state.h.cell_size() / speed;
}

namespace {

inline void friction_cell(double h, double& hu, double& hv, double dt, double g_n2) {
  const double speed = std::sqrt(hu * hu + hv * hv) / h;
  const double h43 = h * std::cbrt(h);
  const double factor = 1.0 / (1.0 + dt * g_n2 * speed / h43);
  hu *= factor;
  hv *= factor;
}

}  // namespace

FlowState apply_friction(const FlowState& state, double dt, const SolverConfig& config) {
  FlowState out = state;
  const double g_n2 = config.g * config.manning_n * config.manning_n;
  if (g_n2 == 0.0) return out;
  for (std::size_t i = 0; i < out.h.size(); ++i) {
    if (out.h[i] <= config.h_dry) continue;
    friction_cell(out.h[i], out.hu[i], out.hv[i], dt, g_n2);
  }
  return out;
}

EdgeState ghost_state(const EdgeState& in, const GhostRule& rule, double g, double h_dry) {
  switch (rule.kind) {
    case BoundaryKind::wall:
      return {in.h, -in.u_normal, in.u_tangent, in.z};
    case BoundaryKind::outflow: {
      EdgeState out = in;
      if (in.h + in.z < rule.sea_level) {
        out.h = rule.sea_level - in.z;
        if (in.h <= h_dry) out.u_normal = out.u_tangent = 0.0;
      }
      return out;
    }
    case BoundaryKind::inflow: {
      const double q = rule.unit_discharge;
      if (q <= 0.0) return {in.h, -in.u_normal, in.u_tangent, in.z};
      const double h_crit = std::cbrt(q * q / g);
      const double h = std::max(in.h, h_crit);
      return {h, -q / h, 0.0, in.z};
    }
  }
  return in;
}

// ---------------------------------------------------------------------------
// Solver

namespace {

// Outward normal sign and which velocity component is normal for each edge.
struct EdgeFrame {
  bool x_normal;
  double sign;  // +1 when the outward normal points along +axis
};

constexpr EdgeFrame frame(Edge e) {
  switch (e) {
    case Edge::east:
      return {true, 1.0};
    case Edge::west:
      return {true, -1.0};
    case Edge::north:
      return {false, 1.0};
    case Edge::south:
      return {false, -1.0};
  }
  return {true, 1.0};
}

// Mean fall of the bed towards an outflow edge, never negative. The outflow
// ghost bed sits this far below the edge cell so a uniform flow on a slope
// leaves through the last face as it crosses every interior one.
double outflow_bed_drop(const Raster& topo, Edge e) {
  const std::size_t nr = topo.rows(), nc = topo.cols();
  const bool x_normal = e == Edge::east || e == Edge::west;
  if ((x_normal ? nc : nr) < 2) return 0.0;
  double sum = 0.0;
  const std::size_t n = x_normal ? nr : nc;
  for (std::size_t i = 0; i < n; ++i) {
    switch (e) {
      case Edge::east: sum += topo(i, nc - 2) - topo(i, nc - 1); break;
      case Edge::west: sum += topo(i, 1) - topo(i, 0); break;
      case Edge::north: sum += topo(1, i) - topo(0, i); break;
      case Edge::south: sum += topo(nr - 2, i) - topo(nr - 1, i); break;
    }
  }
  return std::max(0.0, sum / static_cast<double>(n));
}

}  // namespace

Solver::Solver(const Raster& topo, BoundarySpec boundary, SolverConfig config)
    : topo_(topo), boundary_(std::move(boundary)), config_(config) {
  config_.validate();
  boundary_.validate(topo.geometry());
  nr_ = topo.rows();
  nc_ = topo.cols();
  dx_ = topo.cell_size();
  const std::size_t W = nc_ + 2;
  const std::size_t n = (nr_ + 2) * W;
  zp_.assign(n, 0.0);
  for (std::size_t r = 0; r < nr_; ++r) {
    for (std::size_t c = 0; c < nc_; ++c) zp_[(r + 1) * W + c + 1] = topo(r, c);
  }
  // Ghost bed copies the adjacent interior cell.
  for (std::size_t r = 1; r <= nr_; ++r) {
    zp_[r * W] = zp_[r * W + 1];
    zp_[r * W + nc_ + 1] = zp_[r * W + nc_];
  }
  for (std::size_t c = 1; c <= nc_; ++c) {
    zp_[c] = zp_[W + c];
    zp_[(nr_ + 1) * W + c] = zp_[nr_ * W + c];
  }
  if (boundary_.downstream) {
    const Edge e = boundary_.downstream->edge;
    outflow_drop_ = outflow_bed_drop(topo, e);
    for (std::size_t r = 1; r <= nr_; ++r) {
      if (e == Edge::west) zp_[r * W] -= outflow_drop_;
      if (e == Edge::east) zp_[r * W + nc_ + 1] -= outflow_drop_;
    }
    for (std::size_t c = 1; c <= nc_; ++c) {
      if (e == Edge::north) zp_[c] -= outflow_drop_;
      if (e == Edge::south) zp_[(nr_ + 1) * W + c] -= outflow_drop_;
    }
  }
  for (auto* v : {&hp_, &up_, &vp_, &rh_, &rhu_, &rhv_, &sx_h_, &sx_u_, &sx_v_, &sx_eta_, &sy_h_, &sy_u_, &sy_v_,
                  &sy_eta_}) {
    v->assign(n, 0.0);
  }
  h1_.assign(nr_ * nc_, 0.0);
  hu1_.assign(nr_ * nc_, 0.0);
  hv1_.assign(nr_ * nc_, 0.0);
}

double Solver::compute_dt(const FlowState& state) const {
  // Wet ghost cells on open edges bound the step too: a dry domain fed by an
  // inflow must not take an output_stride sized step.
  double speed = 0.0;
  const auto probe = [&](Edge e, std::size_t index, std::size_t k) {
    const GhostRule rule = rule_for(e, index, state.t);
    if (rule.kind == BoundaryKind::wall) return;
    const auto fr = frame(e);
    const double h = state.h[k];
    const double u = velocity(h, state.hu[k], config_.h_dry);
    const double v = velocity(h, state.hv[k], config_.h_dry);
    const double zg = rule.kind == BoundaryKind::outflow ? topo_[k] - outflow_drop_ : topo_[k];
    const EdgeState in{h, fr.sign * (fr.x_normal ? u : v), fr.x_normal ? v : u, zg};
    const EdgeState gs = ghost_state(in, rule, config_.g, config_.h_dry);
    if (gs.h <= config_.h_dry) return;
    speed = std::max(speed, std::max(std::abs(gs.u_normal), std::abs(gs.u_tangent)) + std::sqrt(config_.g * gs.h));
  };
  for (std::size_t r = 0; r < nr_; ++r) {
    probe(Edge::west, r, r * nc_);
    probe(Edge::east, r, r * nc_ + nc_ - 1);
  }
  for (std::size_t c = 0; c < nc_; ++c) {
    probe(Edge::north, c, c);
    probe(Edge::south, c, (nr_ - 1) * nc_ + c);
  }
  const double dt = swe::compute_dt(state, config_);
  return speed > 0.0 ? std::min(dt, config_.cfl * dx_ / speed) : dt;
}

double Solver::storage(const FlowState& state) const {
  double s = 0.0;
  for (double h : state.h.values()) s += h;
  return s * dx_ * dx_;
}

GhostRule Solver::rule_for(Edge edge, std::size_t index, double t) const {
  if (boundary_.upstream && boundary_.upstream->edge == edge && index >= boundary_.upstream->first &&
      index <= boundary_.upstream->last) {
    const auto& up = *boundary_.upstream;
    const double width = static_cast<double>(up.last - up.first + 1) * dx_;
    return {BoundaryKind::inflow, up.hydrograph(t) / width, 0.0};
  }
  if (boundary_.downstream && boundary_.downstream->edge == edge) {
    return {BoundaryKind::outflow, 0.0, boundary_.downstream->sea_level};
  }
  return {BoundaryKind::wall, 0.0, 0.0};
}

namespace {

// Fills interior primitives of the padded arrays from unpadded conserved arrays.
void load_primitives(std::span<const double> h, std::span<const double> hu, std::span<const double> hv,
                     std::size_t nr, std::size_t nc, double h_dry, std::vector<double>& hp, std::vector<double>& up,
                     std::vector<double>& vp) {
  const std::size_t W = nc + 2;
  for (std::size_t r = 0; r < nr; ++r) {
    const std::size_t src = r * nc;
    const std::size_t dst = (r + 1) * W + 1;
    for (std::size_t c = 0; c < nc; ++c) {
      const double hh = h[src + c];
      hp[dst + c] = hh;
      if (hh > h_dry) {
        up[dst + c] = hu[src + c] / hh;
        vp[dst + c] = hv[src + c] / hh;
      } else {
        up[dst + c] = 0.0;
        vp[dst + c] = 0.0;
      }
    }
  }
}

}  // namespace

void Solver::residual(std::vector<double>& hp, std::vector<double>& up, std::vector<double>& vp, double t,
                      std::vector<double>& rh, std::vector<double>& rhu, std::vector<double>& rhv,
                      double& inflow, double& outflow) {
  const std::size_t W = nc_ + 2;
  const double g = config_.g;
  const double h_dry = config_.h_dry;
  const std::vector<double>& z = zp_;

  // Ghost cells (used only as slope neighbours) from the cell-based boundary rule.
  const auto set_ghost = [&](Edge e, std::size_t index, std::size_t gi, std::size_t ii) {
    const auto fr = frame(e);
    const double un = fr.sign * (fr.x_normal ? up[ii] : vp[ii]);
    const double ut = fr.x_normal ? vp[ii] : up[ii];
    const EdgeState gs = ghost_state({hp[ii], un, ut, z[gi]}, rule_for(e, index, t), g, h_dry);
    hp[gi] = gs.h;
    (fr.x_normal ? up[gi] : vp[gi]) = fr.sign * gs.u_normal;
    (fr.x_normal ? vp[gi] : up[gi]) = gs.u_tangent;
  };
  for (std::size_t r = 1; r <= nr_; ++r) {
    set_ghost(Edge::west, r - 1, r * W, r * W + 1);
    set_ghost(Edge::east, r - 1, r * W + nc_ + 1, r * W + nc_);
  }
  for (std::size_t c = 1; c <= nc_; ++c) {
    set_ghost(Edge::north, c - 1, c, W + c);
    set_ghost(Edge::south, c - 1, (nr_ + 1) * W + c, nr_ * W + c);
  }

  if (config_.order == 2) {
    for (std::size_t r = 1; r <= nr_; ++r) {
      for (std::size_t c = 1; c <= nc_; ++c) {
        const std::size_t i = r * W + c;
        const std::size_t w = i - 1, e = i + 1, n = i - W, s = i + W;
        sx_h_[i] = minmod(hp[i] - hp[w], hp[e] - hp[i]);
        sx_u_[i] = minmod(up[i] - up[w], up[e] - up[i]);
        sx_v_[i] = minmod(vp[i] - vp[w], vp[e] - vp[i]);
        sx_eta_[i] = minmod((hp[i] + z[i]) - (hp[w] + z[w]), (hp[e] + z[e]) - (hp[i] + z[i]));
        sy_h_[i] = minmod(hp[i] - hp[s], hp[n] - hp[i]);
        sy_u_[i] = minmod(up[i] - up[s], up[n] - up[i]);
        sy_v_[i] = minmod(vp[i] - vp[s], vp[n] - vp[i]);
        sy_eta_[i] = minmod((hp[i] + z[i]) - (hp[s] + z[s]), (hp[n] + z[n]) - (hp[i] + z[i]));
      }
    }
  }

  std::fill(rh.begin(), rh.end(), 0.0);
  std::fill(rhu.begin(), rhu.end(), 0.0);
  std::fill(rhv.begin(), rhv.end(), 0.0);

  // Face values: sign = +1 for the east/north face, -1 for west/south.
  const auto x_face = [&](std::size_t i, double sign) {
    return FaceState{hp[i] + sign * 0.5 * sx_h_[i], up[i] + sign * 0.5 * sx_u_[i], vp[i] + sign * 0.5 * sx_v_[i],
                     z[i] + sign * 0.5 * (sx_eta_[i] - sx_h_[i])};
  };
  const auto y_face = [&](std::size_t i, double sign) {
    return FaceState{hp[i] + sign * 0.5 * sy_h_[i], vp[i] + sign * 0.5 * sy_v_[i], up[i] + sign * 0.5 * sy_u_[i],
                     z[i] + sign * 0.5 * (sy_eta_[i] - sy_h_[i])};
  };
  // Boundary face ghost from the interior face value, in the axis frame.
  const auto face_ghost = [&](const FaceState& in, Edge e, std::size_t index) {
    const auto fr = frame(e);
    const GhostRule rule = rule_for(e, index, t);
    // First order faces carry the bed step that a second order reconstruction smooths out.
    const double zg = rule.kind == BoundaryKind::outflow && config_.order == 1 ? in.z - outflow_drop_ : in.z;
    const EdgeState gs = ghost_state({in.h, fr.sign * in.un, in.ut, zg}, rule, g, h_dry);
    return FaceState{gs.h, fr.sign * gs.u_normal, gs.u_tangent, gs.z};
  };
  // Inflow faces pass the physical flux of the ghost state, so exactly the
  // imposed discharge enters.
  const auto edge_flux = [&](const FaceState& L, const FaceState& R, Edge e, std::size_t index, bool ghost_left) {
    const GhostRule rule = rule_for(e, index, t);
    if (rule.kind != BoundaryKind::inflow || rule.unit_discharge <= 0.0) {
      return face_flux(L, R, g);
    }
    const FaceState& s = ghost_left ? L : R;
    const double q = s.h * s.un;
    return FaceFlux{q, q * s.un + 0.5 * g * s.h * s.h, q * s.ut, 0.0, 0.0};
  };
  const double inv_dx = 1.0 / dx_;
  double in_flux = 0.0;
  double out_flux = 0.0;
  const auto tally = [&](Edge e, std::size_t index, double mass_along_axis) {
    const auto kind = rule_for(e, index, t).kind;
    const double outward = frame(e).sign * mass_along_axis;
    if (kind == BoundaryKind::inflow) in_flux -= outward;
    if (kind == BoundaryKind::outflow) out_flux += outward;
  };

  // x faces: between padded columns c and c + 1.
  for (std::size_t r = 1; r <= nr_; ++r) {
    for (std::size_t c = 0; c <= nc_; ++c) {
      const std::size_t li = r * W + c;
      const std::size_t ri = li + 1;
      FaceState L, R;
      FaceFlux f;
      if (c == 0) {
        R = x_face(ri, -1.0);
        L = face_ghost(R, Edge::west, r - 1);
        f = edge_flux(L, R, Edge::west, r - 1, true);
      } else if (c == nc_) {
        L = x_face(li, 1.0);
        R = face_ghost(L, Edge::east, r - 1);
        f = edge_flux(L, R, Edge::east, r - 1, false);
      } else {
        if (hp[li] == 0.0 && hp[ri] == 0.0) continue;  // dry faces carry no flux or pressure
        L = x_face(li, 1.0);
        R = x_face(ri, -1.0);
        f = face_flux(L, R, g);
      }
      if (c > 0) {
        rh[li] -= f.mass;
        rhu[li] -= f.normal + f.pressure_left;
        rhv[li] -= f.tangent;
      } else {
        tally(Edge::west, r - 1, f.mass);
      }
      if (c < nc_) {
        rh[ri] += f.mass;
        rhu[ri] += f.normal + f.pressure_right;
        rhv[ri] += f.tangent;
      } else {
        tally(Edge::east, r - 1, f.mass);
      }
    }
  }

  // y faces: between padded rows r (north) and r + 1 (south); +y points north.
  for (std::size_t r = 0; r <= nr_; ++r) {
    for (std::size_t c = 1; c <= nc_; ++c) {
      const std::size_t ni = r * W + c;
      const std::size_t si = ni + W;
      FaceState L, R;  // L = south side, R = north side
      FaceFlux f;
      if (r == 0) {
        L = y_face(si, 1.0);
        R = face_ghost(L, Edge::north, c - 1);
        f = edge_flux(L, R, Edge::north, c - 1, false);
      } else if (r == nr_) {
        R = y_face(ni, -1.0);
        L = face_ghost(R, Edge::south, c - 1);
        f = edge_flux(L, R, Edge::south, c - 1, true);
      } else {
        if (hp[si] == 0.0 && hp[ni] == 0.0) continue;
        L = y_face(si, 1.0);
        R = y_face(ni, -1.0);
        f = face_flux(L, R, g);
      }
      if (r < nr_) {
        rh[si] -= f.mass;
        rhv[si] -= f.normal + f.pressure_left;
        rhu[si] -= f.tangent;
      } else {
        tally(Edge::south, c - 1, f.mass);
      }
      if (r > 0) {
        rh[ni] += f.mass;
        rhv[ni] += f.normal + f.pressure_right;
        rhu[ni] += f.tangent;
      } else {
        tally(Edge::north, c - 1, f.mass);
      }
    }
  }

  // Centred bed source term of the second-order reconstruction.
  if (config_.order == 2) {
    for (std::size_t r = 1; r <= nr_; ++r) {
      for (std::size_t c = 1; c <= nc_; ++c) {
        const std::size_t i = r * W + c;
        const double hx_e = hp[i] + 0.5 * sx_h_[i], hx_w = hp[i] - 0.5 * sx_h_[i];
        const double dzx = sx_eta_[i] - sx_h_[i];
        rhu[i] -= 0.5 * g * (hx_w + hx_e) * dzx;
        const double hy_n = hp[i] + 0.5 * sy_h_[i], hy_s = hp[i] - 0.5 * sy_h_[i];
        const double dzy = sy_eta_[i] - sy_h_[i];
        rhv[i] -= 0.5 * g * (hy_s + hy_n) * dzy;
      }
    }
  }

  for (std::size_t i = 0; i < rh.size(); ++i) {
    rh[i] *= inv_dx;
    rhu[i] *= inv_dx;
    rhv[i] *= inv_dx;
  }
  inflow = in_flux * dx_;
  outflow = out_flux * dx_;
}

void Solver::friction(std::vector<double>& h, std::vector<double>& hu, std::vector<double>& hv, double dt) const {
  const double g_n2 = config_.g * config_.manning_n * config_.manning_n;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] < 0.0) h[i] = 0.0;
    if (h[i] <= config_.h_dry) {
      hu[i] = 0.0;
      hv[i] = 0.0;
    } else if (g_n2 > 0.0) {
      friction_cell(h[i], hu[i], hv[i], dt, g_n2);
    }
  }
}

namespace {

void check_finite(std::span<const double> h, std::span<const double> hu, std::span<const double> hv, std::size_t nc,
                  double t) {
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!std::isfinite(h[i]) || !std::isfinite(hu[i]) || !std::isfinite(hv[i])) {
      throw NumericalInstability(i / nc, i % nc, t, "non-finite flow state");
    }
  }
}

}  // namespace

StepReport Solver::advance(FlowState& state, double max_dt) {
  const std::size_t W = nc_ + 2;
  StepReport rep;
  rep.dt = std::min(compute_dt(state), max_dt);
  const double dt = rep.dt;
  auto h = state.h.values();
  auto hu = state.hu.values();
  auto hv = state.hv.values();

  double in1 = 0.0, out1 = 0.0;
  load_primitives(h, hu, hv, nr_, nc_, config_.h_dry, hp_, up_, vp_);
  residual(hp_, up_, vp_, state.t, rh_, rhu_, rhv_, in1, out1);
  for (std::size_t r = 0; r < nr_; ++r) {
    for (std::size_t c = 0; c < nc_; ++c) {
      const std::size_t k = r * nc_ + c;
      const std::size_t i = (r + 1) * W + c + 1;
      h1_[k] = h[k] + dt * rh_[i];
      hu1_[k] = hu[k] + dt * rhu_[i];
      hv1_[k] = hv[k] + dt * rhv_[i];
    }
  }
  friction(h1_, hu1_, hv1_, dt);

  if (config_.order == 1) {
    check_finite(h1_, hu1_, hv1_, nc_, state.t + dt);
    std::copy(h1_.begin(), h1_.end(), h.begin());
    std::copy(hu1_.begin(), hu1_.end(), hu.begin());
    std::copy(hv1_.begin(), hv1_.end(), hv.begin());
    rep.inflow_volume = in1 * dt;
    rep.outflow_volume = out1 * dt;
  } else {
    double in2 = 0.0, out2 = 0.0;
    load_primitives(h1_, hu1_, hv1_, nr_, nc_, config_.h_dry, hp_, up_, vp_);
    residual(hp_, up_, vp_, state.t + dt, rh_, rhu_, rhv_, in2, out2);
    for (std::size_t r = 0; r < nr_; ++r) {
      for (std::size_t c = 0; c < nc_; ++c) {
        const std::size_t k = r * nc_ + c;
        const std::size_t i = (r + 1) * W + c + 1;
        h1_[k] += dt * rh_[i];
        hu1_[k] += dt * rhu_[i];
        hv1_[k] += dt * rhv_[i];
      }
    }
    friction(h1_, hu1_, hv1_, dt);
    for (std::size_t k = 0; k < h1_.size(); ++k) {
      h1_[k] = 0.5 * (h[k] + h1_[k]);
      hu1_[k] = 0.5 * (hu[k] + hu1_[k]);
      hv1_[k] = 0.5 * (hv[k] + hv1_[k]);
      if (h1_[k] <= config_.h_dry) hu1_[k] = hv1_[k] = 0.0;
    }
    check_finite(h1_, hu1_, hv1_, nc_, state.t + dt);
    std::copy(h1_.begin(), h1_.end(), h.begin());
    std::copy(hu1_.begin(), hu1_.end(), hu.begin());
    std::copy(hv1_.begin(), hv1_.end(), hv.begin());
    rep.inflow_volume = 0.5 * (in1 + in2) * dt;
    rep.outflow_volume = 0.5 * (out1 + out2) * dt;
  }
  state.t += dt;

  const double nodata = state.wse_max.nodata();
  for (std::size_t k = 0; k < h.size(); ++k) {
    state.h_max[k] = std::max(state.h_max[k], h[k]);
    if (h[k] > config_.h_dry) {
      const double wse = h[k] + topo_[k];
      double& m = state.wse_max[k];
      m = (m == nodata) ? wse : std::max(m, wse);
    }
  }
  return rep;
}

FlowState step(const FlowState& state, const Raster& topo, const BoundarySpec& boundary, const SolverConfig& config) {
  if (!state.h.geometry().compatible(topo.geometry())) throw ValidationError("step: state and topography differ");
  Solver solver(topo, boundary, config);
  FlowState out = state;
  solver.advance(out);
  return out;
}

std::vector<GhostCell> apply_boundaries(const FlowState& state, const BoundarySpec& boundary, const Raster& topo,
                                        const SolverConfig& config) {
  Solver solver(topo, boundary, config);  // validates
  const auto& g = topo.geometry();
  const double drop = boundary.downstream ? outflow_bed_drop(topo, boundary.downstream->edge) : 0.0;
  std::vector<GhostCell> out;
  const auto emit = [&](Edge e, std::size_t index, std::size_t r, std::size_t c) {
    const auto fr = frame(e);
    const double h = state.h(r, c);
    const double u = velocity(h, state.hu(r, c), config.h_dry);
    const double v = velocity(h, state.hv(r, c), config.h_dry);
    GhostRule rule;
    if (boundary.upstream && boundary.upstream->edge == e && index >= boundary.upstream->first &&
        index <= boundary.upstream->last) {
      const double width = static_cast<double>(boundary.upstream->last - boundary.upstream->first + 1) * g.cell_size;
      rule = {BoundaryKind::inflow, boundary.upstream->hydrograph(state.t) / width, 0.0};
    } else if (boundary.downstream && boundary.downstream->edge == e) {
      rule = {BoundaryKind::outflow, 0.0, boundary.downstream->sea_level};
    }
    const double zg = rule.kind == BoundaryKind::outflow ? topo(r, c) - drop : topo(r, c);
    const EdgeState in{h, fr.sign * (fr.x_normal ? u : v), fr.x_normal ? v : u, zg};
    const EdgeState gs = ghost_state(in, rule, config.g, config.h_dry);
    const double gu = fr.x_normal ? fr.sign * gs.u_normal : gs.u_tangent;
    const double gv = fr.x_normal ? gs.u_tangent : fr.sign * gs.u_normal;
    out.push_back({e, index, rule.kind, gs.h, gs.h * gu, gs.h * gv, gs.z});
  };
  for (std::size_t c = 0; c < g.ncols; ++c) emit(Edge::north, c, 0, c);
  for (std::size_t c = 0; c < g.ncols; ++c) emit(Edge::south, c, g.nrows - 1, c);
  for (std::size_t r = 0; r < g.nrows; ++r) emit(Edge::east, r, r, g.ncols - 1);
  for (std::size_t r = 0; r < g.nrows; ++r) emit(Edge::west, r, r, 0);
  return out;
}

// ---------------------------------------------------------------------------
// Driver

double SimulationOutput::mass_balance_error() const {
  if (ledger.empty()) return 0.0;
  const auto& a = ledger.front();
  const auto& b = ledger.back();
  return (b.inflow_volume - a.inflow_volume) - (b.outflow_volume - a.outflow_volume) - (b.storage - a.storage);
}

SimulationResult run_simulation(const Raster& topo, FlowState initial, const BoundarySpec& boundary,
                                const SolverConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };
  const auto& g = topo.geometry();
  for (std::size_t i = 0; i < topo.size(); ++i) {
    if (!std::isfinite(topo[i]) || topo.is_nodata(i)) {
      return FailedRun{std::string(std::isfinite(topo[i]) ? "nodata" : "non-finite") + " topography at cell (" +
                           std::to_string(i / g.ncols) + ", " + std::to_string(i % g.ncols) + ")",
                       initial.t, std::pair{i / g.ncols, i % g.ncols}, elapsed()};
    }
  }
  if (!initial.h.geometry().compatible(g) || !initial.hu.geometry().compatible(g) ||
      !initial.hv.geometry().compatible(g)) {
    throw ValidationError("initial state geometry does not match the topography");
  }
  Solver solver(topo, boundary, config);
  FlowState state = std::move(initial);
  state.reset_maxima(topo, config.h_dry);

  SimulationOutput out;
  double inflow = 0.0;
  double outflow = 0.0;
  out.ledger.push_back({state.t, 0.0, 0.0, solver.storage(state)});
  const double t0 = state.t;
  const double eps = 1e-9 * std::max(1.0, config.t_end);
  std::size_t next_index = 1;
  const auto next_output = [&] {
    return std::min(config.t_end, t0 + static_cast<double>(next_index) * config.output_stride);
  };
  try {
    while (state.t < config.t_end - eps) {
      const double target = next_output();
      const auto rep = solver.advance(state, target - state.t);
      inflow += rep.inflow_volume;
      outflow += rep.outflow_volume;
      ++out.steps;
      if (state.t >= target - eps) {
        state.t = target;
        out.ledger.push_back({state.t, inflow, outflow, solver.storage(state)});
        ++next_index;
      }
    }
  } catch (const NumericalInstability& e) {
    return FailedRun{e.what(), e.time(), std::pair{e.row(), e.col()}, elapsed()};
  }
  out.wse_max = state.wse_max;
  out.h_max = state.h_max;
  out.final_state = std::move(state);
  out.wall_clock_seconds = elapsed();
  return out;
}

FlowState transfer_state(const FlowState& state, const Raster& from_topo, const Raster& to_topo, double h_dry) {
  const auto& g = to_topo.geometry();
  if (!state.h.geometry().compatible(g) || !from_topo.geometry().compatible(g)) {
    throw ValidationError("transfer_state: grids differ");
  }
  FlowState out = FlowState::dry(g);
  out.t = state.t;
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    const double h = state.h[i];
    if (h <= h_dry) continue;
    const double h_new = std::max(0.0, h + from_topo[i] - to_topo[i]);
    if (h_new <= h_dry) continue;
    out.h[i] = h_new;
    out.hu[i] = state.hu[i] / h * h_new;
    out.hv[i] = state.hv[i] / h * h_new;
  }
  out.reset_maxima(to_topo, h_dry);
  return out;
}

}  // namespace floodgsa::swe
