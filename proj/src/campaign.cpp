#include "floodgsa/campaign.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <thread>

#include "floodgsa/error.hpp"
#include "floodgsa/log.hpp"

namespace floodgsa::campaign {

namespace {

const std::vector<std::string> kKeys = {
    "dtm",          "layers",       "points",        "output",       "master_seed",  "m_levels",
    "n_levels",     "x_count",      "sigma",         "error_mean",   "max_workers",  "order",
    "cfl",          "manning_n",    "h_dry",         "t_end",        "output_stride", "inflow_edge",
    "inflow_span",  "hydrograph",   "outflow_edge",  "sea_level",    "spin_up_time", "spin_up_ramp",
    "inject_fault"};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path.lexically_normal() : (base / path).lexically_normal();
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out;
}

std::uint64_t parse_seed(const std::string& text, const std::string& source) {
  const std::string t = trim(text);
  if (t.empty() || !std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw ValidationError(source + ": master_seed must be a non-negative integer");
  }
  try {
    return std::stoull(t);
  } catch (const std::exception&) {
    throw ValidationError(source + ": master_seed out of range");
  }
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ';' || c == '\n' || c == '\r') c = ' ';
  }
  return s.empty() ? "unknown failure" : s;
}

std::int64_t monotonic_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Whole-line appends through O_APPEND so a killed process leaves at most one
// torn line at the end of the file.
void append_line(const fs::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw IoError("cannot open '" + path.string() + "' for appending");
  const std::string data = line + '\n';
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      ::close(fd);
      throw IoError("append to '" + path.string() + "' failed");
    }
    off += static_cast<std::size_t>(n);
  }
  ::close(fd);
}

void ensure_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  const fs::path probe = dir / ".write_probe";
  const int fd = ::open(probe.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw IoError("output directory '" + dir.string() + "' is not writable");
  ::close(fd);
  fs::remove(probe, ec);
}

struct Inputs {
  Raster dtm;
  std::vector<dem::FeatureLayer> layers;
  PointSet points;
};

Inputs load_inputs(const CampaignConfig& config) {
  Inputs in;
  in.dtm = read_ascii_grid(config.dtm);
  std::vector<dem::FeatureLayer> all;
  for (const auto& p : config.layers) {
    auto layers = dem::read_feature_layers(p);
    all.insert(all.end(), layers.begin(), layers.end());
  }
  in.layers = dem::canonical_layers(all);
  in.points = read_points(config.points);
  for (const auto& p : in.points) locate(in.dtm.geometry(), p.x, p.y, p.label);
  return in;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

CampaignConfig CampaignConfig::from_config(const KeyValueConfig& cfg, const fs::path& base_dir) {
  cfg.require_known(kKeys);
  CampaignConfig c;
  const std::string& src = cfg.source();
  for (const char* key : {"dtm", "points", "hydrograph", "inflow_span"}) {
    if (!cfg.has(key)) throw ValidationError(src + ": missing key '" + key + "'");
  }
  c.dtm = resolve(base_dir, cfg.get("dtm"));
  if (cfg.has("layers")) {
    for (const auto& p : cfg.get_list("layers")) c.layers.push_back(resolve(base_dir, trim(p)));
  }
  c.points = resolve(base_dir, cfg.get("points"));
  c.output_dir = resolve(base_dir, cfg.get_or("output", "out"));
  if (cfg.has("master_seed")) c.master_seed = parse_seed(cfg.get("master_seed"), src);
  if (cfg.has("m_levels")) c.m_levels = cfg.get_ints("m_levels");
  if (cfg.has("n_levels")) c.n_levels = cfg.get_ints("n_levels");
  c.x_count = static_cast<int>(cfg.get_int_or("x_count", c.x_count));
  c.sigma = cfg.get_double_or("sigma", c.sigma);
  c.error_mean = cfg.get_double_or("error_mean", c.error_mean);
  c.max_workers = static_cast<int>(cfg.get_int_or("max_workers", c.max_workers));

  c.solver.order = static_cast<int>(cfg.get_int_or("order", c.solver.order));
  c.solver.cfl = cfg.get_double_or("cfl", c.solver.cfl);
  c.solver.manning_n = cfg.get_double_or("manning_n", c.solver.manning_n);
  c.solver.h_dry = cfg.get_double_or("h_dry", c.solver.h_dry);
  c.solver.t_end = cfg.get_double_or("t_end", c.solver.t_end);
  c.solver.output_stride = cfg.get_double_or("output_stride", c.solver.output_stride);

  c.inflow_edge = swe::parse_edge(cfg.get_or("inflow_edge", "west"));
  const auto span = cfg.get_doubles("inflow_span");
  if (span.size() != 2) throw ValidationError(src + ": inflow_span needs two coordinates");
  c.inflow_from = span[0];
  c.inflow_to = span[1];
  c.hydrograph = swe::Hydrograph::parse(cfg.get("hydrograph"));
  const std::string out_edge = cfg.get_or("outflow_edge", "east");
  if (out_edge == "none") {
    c.outflow_edge.reset();
  } else {
    c.outflow_edge = swe::parse_edge(out_edge);
  }
  c.sea_level = cfg.get_double_or("sea_level", c.sea_level);
  c.spin_up_time = cfg.get_double_or("spin_up_time", c.spin_up_time);
  c.spin_up_ramp = cfg.get_double_or("spin_up_ramp", c.spin_up_ramp);
  if (cfg.has("inject_fault") && !trim(cfg.get("inject_fault")).empty()) {
    c.inject_fault = dem::CaseId::parse(trim(cfg.get("inject_fault")));
  }
  c.validate(false);
  return c;
}

CampaignConfig CampaignConfig::load(const fs::path& path) {
  const auto cfg = KeyValueConfig::load(path);
  return from_config(cfg, fs::absolute(path).parent_path());
}

KeyValueConfig CampaignConfig::to_config() const {
  KeyValueConfig cfg;
  cfg.set("dtm", fs::absolute(dtm).string());
  std::string ls;
  for (std::size_t i = 0; i < layers.size(); ++i) ls += (i ? ", " : "") + fs::absolute(layers[i]).string();
  cfg.set("layers", ls);
  cfg.set("points", fs::absolute(points).string());
  cfg.set("output", fs::absolute(output_dir).string());
  cfg.set("master_seed", std::to_string(master_seed));
  cfg.set("m_levels", join_ints(m_levels));
  cfg.set("n_levels", join_ints(n_levels));
  cfg.set("x_count", std::to_string(x_count));
  cfg.set("sigma", format_exact(sigma));
  cfg.set("error_mean", format_exact(error_mean));
  cfg.set("max_workers", std::to_string(max_workers));
  cfg.set("order", std::to_string(solver.order));
  cfg.set("cfl", format_exact(solver.cfl));
  cfg.set("manning_n", format_exact(solver.manning_n));
  cfg.set("h_dry", format_exact(solver.h_dry));
  cfg.set("t_end", format_exact(solver.t_end));
  cfg.set("output_stride", format_exact(solver.output_stride));
  cfg.set("inflow_edge", swe::to_string(inflow_edge));
  cfg.set("inflow_span", format_exact(inflow_from) + ", " + format_exact(inflow_to));
  cfg.set("hydrograph", hydrograph.to_string());
  cfg.set("outflow_edge", outflow_edge ? swe::to_string(*outflow_edge) : "none");
  cfg.set("sea_level", format_exact(sea_level));
  cfg.set("spin_up_time", format_exact(spin_up_time));
  cfg.set("spin_up_ramp", format_exact(spin_up_ramp));
  if (inject_fault) cfg.set("inject_fault", inject_fault->to_string());
  return cfg;
}

void CampaignConfig::validate(bool check_paths) const {
  if (max_workers < 1) throw ValidationError("max_workers must be >= 1");
  const auto ids = cases();  // validates the level lists
  if (!(sigma >= 0.0) || !std::isfinite(sigma) || !std::isfinite(error_mean)) {
    throw ValidationError("sigma must be >= 0 and error_mean finite");
  }
  for (int m : m_levels) {
    if (static_cast<std::size_t>(m) > layers.size() + 1) {
      throw ValidationError("scheme S" + std::to_string(m) + " needs " + std::to_string(m - 1) + " layer files");
    }
  }
  solver.validate();
  hydrograph.validate();
  if (!(inflow_to > inflow_from)) throw ValidationError("inflow_span must be increasing");
  if (outflow_edge && *outflow_edge == inflow_edge) throw ValidationError("inflow and outflow edges must differ");
  if (!std::isfinite(sea_level)) throw ValidationError("sea_level must be finite");
  if (!(spin_up_time >= 0.0) || !(spin_up_ramp >= 0.0) || spin_up_ramp > spin_up_time) {
    throw ValidationError("spin_up_time and spin_up_ramp must satisfy 0 <= ramp <= time");
  }
  if (inject_fault) inject_fault->validate();
  if (output_dir.empty()) throw ValidationError("output directory is not set");
  if (check_paths) {
    std::vector<fs::path> inputs{dtm, points};
    inputs.insert(inputs.end(), layers.begin(), layers.end());
    for (const auto& p : inputs) {
      if (!fs::is_regular_file(p)) throw ValidationError("input file '" + p.string() + "' does not exist");
    }
  }
}

std::vector<dem::CaseId> CampaignConfig::cases() const { return dem::enumerate_cases(m_levels, n_levels, x_count); }

dem::ErrorFieldSpec CampaignConfig::error_spec() const {
  dem::ErrorFieldSpec s;
  s.sigma = sigma;
  s.mean = error_mean;
  s.master_seed = master_seed;
  return s;
}

swe::BoundarySpec CampaignConfig::boundary(const GridGeometry& geometry) const {
  swe::BoundarySpec b;
  const auto [first, last] = swe::edge_cells_in_span(geometry, inflow_edge, inflow_from, inflow_to);
  b.upstream = swe::InflowBoundary{inflow_edge, first, last, hydrograph};
  if (outflow_edge) b.downstream = swe::OutflowBoundary{*outflow_edge, sea_level};
  b.validate(geometry);
  return b;
}

swe::Hydrograph CampaignConfig::spin_up_hydrograph() const {
  const double base = hydrograph(0.0);
  if (spin_up_ramp > 0.0) return swe::Hydrograph{{{0.0, 0.0}, {spin_up_ramp, base}}};
  return swe::Hydrograph::constant(base);
}

// ---------------------------------------------------------------------------
// Records

std::string to_string(CaseStatus status) {
  switch (status) {
    case CaseStatus::pending: return "pending";
    case CaseStatus::running: return "running";
    case CaseStatus::done: return "done";
    case CaseStatus::failed: return "failed";
  }
  return "?";
}

CaseStatus parse_status(const std::string& text) {
  if (text == "pending") return CaseStatus::pending;
  if (text == "running") return CaseStatus::running;
  if (text == "done") return CaseStatus::done;
  if (text == "failed") return CaseStatus::failed;
  throw ValidationError("unknown case status '" + text + "'");
}

std::string CaseRecord::to_line() const {
  char clock[32];
  std::snprintf(clock, sizeof clock, "%.3f", wall_clock);
  std::string p;
  for (std::size_t i = 0; i < paths.size(); ++i) p += (i ? "," : "") + paths[i];
  return id.to_string() + ';' + to_string(status) + ';' + clock + ';' + reason + ';' + p;
}

CaseRecord CaseRecord::parse_line(const std::string& line, const std::string& source, std::size_t line_no) {
  const auto f = split(line, ';');
  if (f.size() != 5) throw ParseError(source, line_no, "expected 'case;status;wall_clock;reason;paths'");
  CaseRecord r;
  try {
    r.id = dem::CaseId::parse(f[0]);
    r.status = parse_status(f[1]);
    r.wall_clock = parse_double(f[2], "wall_clock");
  } catch (const Error& e) {
    throw ParseError(source, line_no, e.what());
  }
  r.reason = f[3];
  if (r.status == CaseStatus::failed && r.reason.empty()) {
    throw ParseError(source, line_no, "failed record without a reason");
  }
  for (auto& p : split(f[4], ',')) {
    if (!p.empty()) r.paths.push_back(std::move(p));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Store

ResultStore::ResultStore(fs::path root) : root_(std::move(root)) {}

ResultStore::ResultStore(ResultStore&& other) noexcept : root_(std::move(other.root_)) {
  std::lock_guard lock(other.mutex_);
  records_ = std::move(other.records_);
}

bool ResultStore::exists(const fs::path& root) { return fs::is_regular_file(root / "manifest.log"); }

ResultStore ResultStore::open(const fs::path& root) {
  if (!exists(root)) throw EmptyStoreError("no campaign store at '" + root.string() + "' (run campaign-plan first)");
  ResultStore store(root);
  store.replay();
  return store;
}

void ResultStore::replay() {
  const std::string text = read_file(manifest_path());
  std::size_t start = 0, line_no = 0;
  bool torn = false;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    ++line_no;
    if (end == std::string::npos) {
      // A write cut short by a crash; its transition never happened.
      torn = true;
      break;
    }
    const std::string line = trim(std::string_view(text).substr(start, end - start));
    start = end + 1;
    if (line.empty()) continue;
    auto rec = CaseRecord::parse_line(line, manifest_path().string(), line_no);
    records_[rec.id] = std::move(rec);
  }
  if (torn) compact();
}

fs::path ResultStore::hot_start_path(int resolution) const {
  return root_ / "hotstart" / ("R" + std::to_string(resolution) + ".txt");
}

std::vector<CaseRecord> ResultStore::records() const {
  std::lock_guard lock(mutex_);
  std::vector<CaseRecord> out;
  for (const auto& [id, rec] : records_) out.push_back(rec);
  return out;
}

std::optional<CaseRecord> ResultStore::find(const dem::CaseId& id) const {
  std::lock_guard lock(mutex_);
  auto it = records_.find(id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

StatusCounts ResultStore::counts() const {
  std::lock_guard lock(mutex_);
  StatusCounts c;
  for (const auto& [id, rec] : records_) {
    switch (rec.status) {
      case CaseStatus::pending: ++c.pending; break;
      case CaseStatus::running: ++c.running; break;
      case CaseStatus::done: ++c.done; break;
      case CaseStatus::failed: ++c.failed; break;
    }
  }
  return c;
}

std::vector<dem::CaseId> ResultStore::done_cases() const {
  std::lock_guard lock(mutex_);
  std::vector<dem::CaseId> out;
  for (const auto& [id, rec] : records_) {
    if (rec.status == CaseStatus::done) out.push_back(id);
  }
  return out;
}

std::vector<dem::CaseId> ResultStore::failed_cases() const {
  std::lock_guard lock(mutex_);
  std::vector<dem::CaseId> out;
  for (const auto& [id, rec] : records_) {
    if (rec.status == CaseStatus::failed) out.push_back(id);
  }
  return out;
}

void ResultStore::record(const CaseRecord& rec) {
  std::lock_guard lock(mutex_);
  append_line(manifest_path(), rec.to_line());
  records_[rec.id] = rec;
}

void ResultStore::compact() {
  std::lock_guard lock(mutex_);
  std::string out;
  for (const auto& [id, rec] : records_) out += rec.to_line() + '\n';
  write_file_atomic(manifest_path(), out);
}

void ResultStore::log_run(const std::string& event, const dem::CaseId& id) {
  std::lock_guard lock(mutex_);
  append_line(run_log_path(),
              event + ' ' + id.to_string() + ' ' + std::to_string(monotonic_ns()) + ' ' + std::to_string(::getpid()));
}

void ResultStore::log_invocation(std::size_t workers) {
  std::lock_guard lock(mutex_);
  append_line(run_log_path(), "invoke " + std::to_string(::getpid()) + ' ' + std::to_string(monotonic_ns()) +
                                  " workers=" + std::to_string(workers));
}

// ---------------------------------------------------------------------------
// Planning and execution

ResultStore plan_campaign(const CampaignConfig& config) {
  config.validate(true);
  ensure_writable(config.output_dir);
  if (!ResultStore::exists(config.output_dir)) write_file_atomic(config.output_dir / "manifest.log", "");
  ResultStore store = ResultStore::open(config.output_dir);
  config.to_config().save(store.config_path());
  for (const auto& id : config.cases()) {
    if (!store.find(id)) store.record(CaseRecord{id, CaseStatus::pending, 0.0, {}, {}});
  }
  store.compact();
  return store;
}

swe::FlowState spin_up(const CampaignConfig& config, const Raster& dtm, int resolution) {
  const Raster topo = resample(dtm, static_cast<double>(resolution), ResampleMethod::block_mean);
  CampaignConfig c = config;
  c.hydrograph = config.spin_up_hydrograph();
  swe::SolverConfig sc = config.solver;
  sc.t_end = config.spin_up_time;
  sc.output_stride = config.spin_up_time;
  auto result = swe::run_simulation(topo, swe::FlowState::dry(topo.geometry()), c.boundary(topo.geometry()), sc);
  if (!result.ok()) {
    throw Error("spin-up at R" + std::to_string(resolution) + " failed: " + result.failure().reason);
  }
  swe::FlowState state = std::move(result.output().final_state);
  state.t = 0.0;
  return state;
}

CaseOutcome run_case(const CampaignConfig& config, const Raster& dtm, const std::vector<dem::FeatureLayer>& layers,
                     const PointSet& points, const dem::CaseId& id, const swe::FlowState* hot_start,
                     const Raster* hot_start_topo, const fs::path& dir) {
  const auto started = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };
  CaseOutcome out;
  Raster topo = dem::compose_dem(dtm, layers, id, config.error_spec());
  if (config.inject_fault && *config.inject_fault == id) {
    topo(topo.rows() / 2, topo.cols() / 2) = std::numeric_limits<double>::quiet_NaN();
  }
  const swe::BoundarySpec boundary = config.boundary(topo.geometry());
  swe::FlowState initial = hot_start ? swe::transfer_state(*hot_start, *hot_start_topo, topo, config.solver.h_dry)
                                     : swe::FlowState::dry(topo.geometry());
  initial.t = 0.0;
  auto result = swe::run_simulation(topo, std::move(initial), boundary, config.solver);
  if (!result.ok()) {
    out.reason = result.failure().reason;
    out.wall_clock = elapsed();
    return out;
  }
  const auto& sim = result.output();
  fs::create_directories(dir);
  write_ascii_grid(sim.wse_max, dir / "wse_max.asc");
  write_ascii_grid(topo, dir / "dem.asc");
  swe::write_mass_ledger(sim.ledger, dir / "mass_ledger.csv");
  // Sampled from the written rasters so the per-case table matches collect_samples.
  const Raster wse = read_ascii_grid(dir / "wse_max.asc");
  const Raster ground = read_ascii_grid(dir / "dem.asc");
  const auto w = sample_at_points(wse, points);
  const auto z = sample_at_points(ground, points);
  std::string csv = "point,x,y,wse_max,ground,wet\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const bool wet = w[i] != wse.nodata();
    csv += points[i].label + ',' + format_exact(points[i].x) + ',' + format_exact(points[i].y) + ',' +
           (wet ? format_exact(w[i]) : "NA") + ',' + format_exact(z[i]) + ',' + (wet ? "1" : "0") + '\n';
  }
  write_file_atomic(dir / "samples.csv", csv);
  out.ok = true;
  out.files = {"wse_max.asc", "dem.asc", "samples.csv", "mass_ledger.csv"};
  out.wall_clock = elapsed();
  return out;
}

ExecuteReport execute(ResultStore& store, const CampaignConfig& config, const ExecuteOptions& options) {
  config.validate(true);
  ensure_writable(store.root());
  std::vector<dem::CaseId> todo;
  for (const auto& rec : store.records()) {
    if (rec.status == CaseStatus::pending || rec.status == CaseStatus::running) todo.push_back(rec.id);
  }
  ExecuteReport report;
  if (todo.empty()) return report;

  const Inputs in = load_inputs(config);
  const std::size_t workers =
      std::max<std::size_t>(1, options.workers ? options.workers : static_cast<std::size_t>(config.max_workers));
  store.log_invocation(workers);

  // Hot starts per resolution, computed once and reused by later invocations.
  std::map<int, swe::FlowState> hot;
  std::map<int, Raster> hot_topo;
  if (config.spin_up_time > 0.0) {
    std::set<int> res;
    for (const auto& id : todo) res.insert(id.resolution);
    std::vector<int> missing;
    for (int n : res) {
      if (!fs::exists(store.hot_start_path(n))) missing.push_back(n);
    }
    fs::create_directories(store.root() / "hotstart");
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::string error;
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < std::min(workers, missing.size()); ++w) {
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < missing.size(); i = next++) {
            try {
              swe::write_hot_start(spin_up(config, in.dtm, missing[i]), store.hot_start_path(missing[i]));
            } catch (const std::exception& e) {
              std::lock_guard lock(err_mutex);
              if (error.empty()) error = e.what();
            }
          }
        });
      }
    }
    if (!error.empty()) throw Error(error);
    for (int n : res) {
      hot[n] = swe::read_hot_start(store.hot_start_path(n));
      hot[n].t = 0.0;
      hot_topo[n] = resample(in.dtm, static_cast<double>(n), ResampleMethod::block_mean);
    }
  }

  const fs::path scratch = store.root() / ".tmp";
  fs::create_directories(scratch);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0}, failed{0}, executed{0};
  std::mutex cb_mutex;
  const auto work = [&] {
    while (!options.stop.stop_requested()) {
      const std::size_t i = next++;
      if (i >= todo.size()) return;
      const dem::CaseId id = todo[i];
      store.record(CaseRecord{id, CaseStatus::running, 0.0, {}, {}});
      store.log_run("start", id);
      const fs::path tmp = scratch / id.to_string();
      const fs::path final_dir = store.case_dir(id);
      CaseRecord rec{id, CaseStatus::failed, 0.0, {}, {}};
      std::error_code ec;
      fs::remove_all(tmp, ec);
      try {
        const auto it = hot.find(id.resolution);
        const bool use_hot = it != hot.end();
        const CaseOutcome outcome = run_case(config, in.dtm, in.layers, in.points, id, use_hot ? &it->second : nullptr,
                                             use_hot ? &hot_topo.at(id.resolution) : nullptr, tmp);
        rec.wall_clock = outcome.wall_clock;
        if (outcome.ok) {
          fs::remove_all(final_dir);
          fs::rename(tmp, final_dir);
          rec.status = CaseStatus::done;
          for (const auto& f : outcome.files) rec.paths.push_back(id.to_string() + "/" + f);
        } else {
          rec.reason = sanitize(outcome.reason);
        }
      } catch (const std::exception& e) {
        rec.status = CaseStatus::failed;
        rec.reason = sanitize(e.what());
      }
      if (rec.status == CaseStatus::failed) {
        fs::remove_all(tmp, ec);
        fs::remove_all(final_dir, ec);
      }
      store.record(rec);
      store.log_run("end", id);
      ++executed;
      ++(rec.status == CaseStatus::done ? done : failed);
      if (options.on_finished) {
        std::lock_guard lock(cb_mutex);
        options.on_finished(rec);
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, todo.size()); ++w) pool.emplace_back(work);
  }
  store.compact();
  report.executed = executed;
  report.done = done;
  report.failed = failed;
  return report;
}

// ---------------------------------------------------------------------------
// Collection

SampleTable collect_samples(const ResultStore& store, const PointSet& points) {
  SampleTable table;
  table.points = points;
  table.cases = store.done_cases();
  table.excluded = store.failed_cases();
  if (table.cases.empty()) throw EmptyStoreError("campaign store has no completed cases");
  for (const auto& id : table.cases) {
    const Raster wse = read_ascii_grid(store.case_dir(id) / "wse_max.asc");
    const Raster ground = read_ascii_grid(store.case_dir(id) / "dem.asc");
    const auto w = sample_at_points(wse, points);
    const auto z = sample_at_points(ground, points);
    for (std::size_t j = 0; j < points.size(); ++j) table.y.push_back(w[j] == wse.nodata() ? z[j] : w[j]);
  }
  table.validate();
  return table;
}

gsa::MapLoader map_loader(const ResultStore& store) {
  const fs::path root = store.root();
  return [root](const dem::CaseId& id) {
    return gsa::MapCase{read_ascii_grid(root / id.to_string() / "wse_max.asc"),
                        read_ascii_grid(root / id.to_string() / "dem.asc")};
  };
}

RunLogAudit audit_run_log(const fs::path& path) {
  RunLogAudit a;
  if (!fs::exists(path)) return a;
  const std::string text = read_file(path);
  std::map<std::string, std::size_t> ends;
  std::set<std::string> open;
  const auto close_invocation = [&] {
    a.interrupted += open.size();
    open.clear();
  };
  std::size_t start = 0, line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) break;  // torn tail
    ++line_no;
    const auto f = split(trim(std::string_view(text).substr(start, end - start)), ' ');
    start = end + 1;
    if (f.empty() || f[0].empty()) continue;
    if (f[0] == "invoke") {
      close_invocation();
      ++a.invocations;
    } else if ((f[0] == "start" || f[0] == "end") && f.size() >= 2) {
      if (f[0] == "start") {
        ++a.starts;
        open.insert(f[1]);
        a.max_concurrency = std::max(a.max_concurrency, open.size());
      } else {
        ++a.completions;
        if (++ends[f[1]] == 2) ++a.repeated_completions;
        open.erase(f[1]);
      }
    } else {
      throw ParseError(path.string(), line_no, "unrecognised run log entry");
    }
  }
  close_invocation();
  return a;
}

}  // namespace floodgsa::campaign
