#include "floodgsa/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "floodgsa/campaign.hpp"
#include "floodgsa/dem.hpp"
#include "floodgsa/error.hpp"
#include "floodgsa/gsa.hpp"
#include "floodgsa/log.hpp"
#include "floodgsa/raster.hpp"
#include "floodgsa/sample_table.hpp"
#include "floodgsa/swe.hpp"

namespace floodgsa::cli {

namespace {

namespace fs = std::filesystem;
using campaign::CampaignConfig;
using campaign::ResultStore;

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string point;
  std::vector<std::string> fix;
  std::string case_id;
};

CampaignConfig load_config(const Flags& f) {
  if (f.config.empty()) throw ValidationError("--config is required");
  CampaignConfig c = CampaignConfig::load(f.config);
  if (f.seed) c.master_seed = *f.seed;
  if (f.workers) c.max_workers = *f.workers;
  return c;
}

// The store lives at --out when given, else at the config's output directory.
fs::path store_root(const Flags& f) {
  if (!f.out.empty()) return f.out;
  if (f.config.empty()) throw ValidationError("give --config or --out to locate the campaign store");
  return CampaignConfig::load(f.config).output_dir;
}

// Analysis commands read the store named by --config and write to --out.
struct Analysis {
  ResultStore store;
  CampaignConfig config;
  fs::path out;
  std::uint64_t seed;
};

Analysis open_analysis(const Flags& f) {
  if (f.config.empty()) throw ValidationError("--config is required");
  const fs::path root = CampaignConfig::load(f.config).output_dir;
  ResultStore store = ResultStore::open(root);
  CampaignConfig planned = CampaignConfig::load(store.config_path());
  fs::path out = f.out.empty() ? root / "gsa" : fs::path(f.out);
  fs::create_directories(out);
  const std::uint64_t seed = f.seed.value_or(planned.master_seed);
  return Analysis{std::move(store), std::move(planned), std::move(out), seed};
}

std::vector<dem::FeatureLayer> load_layers(const CampaignConfig& c) {
  std::vector<dem::FeatureLayer> all;
  for (const auto& p : c.layers) {
    auto l = dem::read_feature_layers(p);
    all.insert(all.end(), l.begin(), l.end());
  }
  return dem::canonical_layers(all);
}

void write_sample_meta(const SampleTable& table, const fs::path& path) {
  std::string meta = "cases " + std::to_string(table.cases.size()) + "\npoints " +
                     std::to_string(table.points.size()) + "\nexcluded " + std::to_string(table.excluded.size()) +
                     "\nexcluded_cases";
  for (const auto& id : table.excluded) meta += ' ' + id.to_string();
  meta += "\nnever_wet_value ground_elevation\n";
  write_file_atomic(path, meta);
}

SampleTable samples_for(const Analysis& a) {
  SampleTable table = campaign::collect_samples(a.store, read_points(a.config.points));
  write_sample_table(table, a.out / "samples.csv");
  write_sample_meta(table, a.out / "samples_meta.txt");
  std::cout << "samples: " << table.cases.size() << " cases x " << table.points.size() << " points, excluded "
            << table.excluded.size() << " failed case(s)\n";
  return table;
}

std::string campaign_template(const dem::ValleyConfig& v, std::uint64_t seed) {
  const double sea = v.outlet_elevation - v.channel_depth - 0.3;
  const double lo = v.channel_center_y - v.channel_width / 2.0;
  const double hi = v.channel_center_y + v.channel_width / 2.0;
  std::string t;
  t += "# Mini campaign over the synthetic valley. Paths are relative to this file.\n";
  t += "dtm = dtm.asc\n";
  t += "layers = buildings.txt, walls.txt, street_features.txt\n";
  t += "points = points.csv\n";
  t += "output = out\n";
  t += "master_seed = " + std::to_string(seed) + "\n";
  t += "m_levels = 1, 2, 3, 4\n";
  t += "n_levels = 2, 3, 5\n";
  t += "x_count = 20\n";
  t += "sigma = 0.2\n";
  t += "error_mean = 0\n";
  t += "max_workers = 30\n";
  t += "\n# solver\n";
  t += "order = 1\n";
  t += "cfl = 0.45\n";
  t += "manning_n = 0.015\n";
  t += "h_dry = 1e-06\n";
  t += "t_end = 240\n";
  t += "output_stride = 60\n";
  t += "\n# boundaries: channel inflow on the west edge, free outlet to the east\n";
  t += "inflow_edge = west\n";
  t += "inflow_span = " + format_exact(lo) + ", " + format_exact(hi) + "\n";
  t += "hydrograph = 0:100, 60:247, 180:247, 240:100\n";
  t += "outflow_edge = east\n";
  t += "sea_level = " + format_exact(sea) + "\n";
  t += "\n# base flow ramped in over 300 s on the bare ground, 900 s in total\n";
  t += "spin_up_time = 900\n";
  t += "spin_up_ramp = 300\n";
  return t;
}

// ---------------------------------------------------------------------------

void cmd_synth_valley(const Flags& f) {
  if (f.out.empty()) throw ValidationError("--out is required");
  dem::ValleyConfig vc;
  if (!f.config.empty()) vc = dem::ValleyConfig::from_config(KeyValueConfig::load(f.config));
  const dem::Valley v = dem::synth_valley(vc);
  const fs::path out = f.out;
  fs::create_directories(out);
  write_ascii_grid(v.dtm, out / "dtm.asc", ValueFormat::exact);
  const char* names[] = {"buildings.txt", "walls.txt", "street_features.txt"};
  for (std::size_t i = 0; i < v.layers.size(); ++i) dem::write_feature_layer(v.layers[i], out / names[i]);
  write_points(v.points, out / "points.csv");
  vc.to_config().save(out / "valley.cfg");
  write_file_atomic(out / "campaign.cfg", campaign_template(vc, f.seed.value_or(42)));
  std::cout << "valley " << v.dtm.cols() << " x " << v.dtm.rows() << " cells, " << v.points.size()
            << " points of interest -> " << out.string() << "\n";
}

void cmd_dem_build(const Flags& f) {
  const CampaignConfig c = load_config(f);
  if (f.out.empty()) throw ValidationError("--out is required");
  c.validate(true);
  const Raster dtm = read_ascii_grid(c.dtm);
  const auto layers = load_layers(c);
  fs::create_directories(f.out);
  for (int m : c.m_levels) {
    Raster s = dtm;
    for (int k = 0; k + 1 < m; ++k) s = dem::extrude_features(s, layers[static_cast<std::size_t>(k)], dtm);
    const fs::path p = fs::path(f.out) / ("S" + std::to_string(m) + ".asc");
    write_ascii_grid(s, p);
    std::cout << p.string() << "\n";
  }
}

dem::CaseId case_flag(const Flags& f, const CampaignConfig& c) {
  if (!f.case_id.empty()) return dem::CaseId::parse(f.case_id);
  return dem::CaseId{c.m_levels.front(), c.n_levels.front(), 1};
}

void cmd_dem_perturb(const Flags& f) {
  const CampaignConfig c = load_config(f);
  if (f.out.empty()) throw ValidationError("--out is required");
  c.validate(true);
  const dem::CaseId id = case_flag(f, c);
  const Raster dem = dem::compose_dem(read_ascii_grid(c.dtm), load_layers(c), id, c.error_spec());
  fs::create_directories(f.out);
  const fs::path p = fs::path(f.out) / (id.to_string() + ".asc");
  write_ascii_grid(dem, p);
  std::cout << p.string() << "\n";
}

int cmd_simulate(const Flags& f) {
  const CampaignConfig c = load_config(f);
  if (f.out.empty()) throw ValidationError("--out is required");
  c.validate(true);
  const dem::CaseId id = case_flag(f, c);
  const Raster dtm = read_ascii_grid(c.dtm);
  std::optional<swe::FlowState> hot;
  std::optional<Raster> hot_topo;
  if (c.spin_up_time > 0.0) {
    hot = campaign::spin_up(c, dtm, id.resolution);
    hot_topo = resample(dtm, static_cast<double>(id.resolution), ResampleMethod::block_mean);
  }
  const auto outcome = campaign::run_case(c, dtm, load_layers(c), read_points(c.points), id,
                                          hot ? &*hot : nullptr, hot_topo ? &*hot_topo : nullptr, f.out);
  if (!outcome.ok) {
    std::cerr << "error: " << id.to_string() << " failed: " << outcome.reason << "\n";
    return 1;
  }
  std::printf("%s done in %.2f s -> %s\n", id.to_string().c_str(), outcome.wall_clock, f.out.c_str());
  return 0;
}

void print_counts(const ResultStore& store) {
  const auto c = store.counts();
  std::cout << "done " << c.done << "\nfailed " << c.failed << "\npending " << c.pending << "\nrunning " << c.running
            << "\nexcluded " << c.failed << "\n";
}

void cmd_campaign_plan(const Flags& f) {
  CampaignConfig c = load_config(f);
  if (!f.out.empty()) c.output_dir = fs::absolute(f.out);
  const ResultStore store = campaign::plan_campaign(c);
  std::cout << "store " << store.root().string() << "\n";
  print_counts(store);
}

void cmd_campaign_run(const Flags& f) {
  ResultStore store = ResultStore::open(store_root(f));
  CampaignConfig c = CampaignConfig::load(store.config_path());
  if (f.workers) c.max_workers = *f.workers;
  campaign::ExecuteOptions opt;
  opt.on_finished = [](const campaign::CaseRecord& r) {
    std::printf("%s %s %.2f s%s%s\n", r.id.to_string().c_str(), campaign::to_string(r.status).c_str(), r.wall_clock,
                r.reason.empty() ? "" : ": ", r.reason.c_str());
    std::fflush(stdout);
  };
  const auto rep = campaign::execute(store, c, opt);
  std::cout << "executed " << rep.executed << " (done " << rep.done << ", failed " << rep.failed << ")\n";
  print_counts(store);
}

void cmd_campaign_status(const Flags& f) { print_counts(ResultStore::open(store_root(f))); }

void cmd_gsa_converge(const Flags& f) {
  if (f.point.empty()) throw ValidationError("--point is required");
  if (f.fix.empty() || f.fix.size() > 2) throw ValidationError("give --fix S=<m> and/or --fix R=<n>");
  const Analysis a = open_analysis(f);
  const SampleTable table = samples_for(a);
  std::optional<int> m, n;
  for (const auto& s : f.fix) {
    const auto fl = gsa::FixedLevel::parse(s);
    (fl.factor == gsa::Factor::S ? m : n) = fl.level;
  }
  if (m && n) {
    const auto rep = gsa::convergence_curve(table, f.point, *m, *n, a.seed);
    const fs::path p = a.out / ("convergence_" + f.point + "_S" + std::to_string(*m) + "R" + std::to_string(*n) + ".csv");
    gsa::write_convergence_csv(rep, p);
    std::cout << p.string() << "\n";
    if (rep.stable_at) {
      std::cout << "stable at N = " << *rep.stable_at << "\n";
    } else {
      std::cout << "not stable within N = " << rep.rows.back().n << "\n";
    }
    return;
  }
  const gsa::FixedLevel fix{m ? gsa::Factor::S : gsa::Factor::R, m ? *m : *n};
  const auto dists = gsa::fixed_factor_distributions(table, f.point, fix);
  const std::string tag = f.point + "_" + std::string(gsa::to_string(fix.factor)) + std::to_string(fix.level);
  gsa::write_distributions_csv(dists, a.out / ("distributions_" + tag + ".csv"));
  gsa::write_distribution_values_csv(dists, a.out / ("distribution_values_" + tag + ".csv"));
  std::cout << (a.out / ("distributions_" + tag + ".csv")).string() << "\n";
}

void cmd_gsa_indices(const Flags& f) {
  const Analysis a = open_analysis(f);
  const SampleTable table = samples_for(a);
  std::vector<gsa::SobolIndices> all;
  if (!f.point.empty()) {
    all.push_back(gsa::sobol_first_order_factorial(table, f.point, a.seed));
  } else {
    for (const auto& p : table.points) {
      try {
        all.push_back(gsa::sobol_first_order_factorial(table, p.label, a.seed));
      } catch (const DegenerateOutput&) {
        std::cerr << "warning: " << p.label << " has zero output variance; indices undefined\n";
        gsa::SobolIndices none;
        none.point = p.label;
        none.n_samples = table.cases.size();
        for (auto fac : gsa::kFactors) {
          none.factors.push_back({std::string(gsa::to_string(fac)), std::nullopt, std::nan(""), std::nan("")});
        }
        all.push_back(std::move(none));
      }
    }
  }
  for (const auto& ix : all) gsa::check_range(ix);
  if (!all.empty() && !all.front().balanced) {
    log::warn("unbalanced design: indices use available-case means over " + std::to_string(table.cases.size()) +
              " cases");
  }
  gsa::write_indices_csv(all, a.out / "indices.csv");
  std::cout << (a.out / "indices.csv").string() << "\n";
}

void cmd_gsa_map(const Flags& f) {
  const Analysis a = open_analysis(f);
  const auto done = a.store.done_cases();
  const auto failed = a.store.failed_cases();
  const auto maps = gsa::sobol_map(done, campaign::map_loader(a.store));
  write_ascii_grid(maps.s_s, a.out / "sobol_S.asc");
  write_ascii_grid(maps.s_r, a.out / "sobol_R.asc");
  write_ascii_grid(maps.s_e, a.out / "sobol_E.asc");
  std::string meta = "cases " + std::to_string(done.size()) + "\nexcluded " + std::to_string(failed.size()) +
                     "\nexcluded_cases";
  for (const auto& id : failed) meta += ' ' + id.to_string();
  meta += "\nnever_wet_value ground_elevation\n";
  write_file_atomic(a.out / "map_meta.txt", meta);
  std::cout << "maps from " << done.size() << " cases, excluded " << failed.size() << " failed case(s) -> "
            << a.out.string() << "\n";
}

}  // namespace

int dispatch(int argc, char** argv) {
  CLI::App app{"Flood DEM uncertainty campaigns and Sobol sensitivity analysis", "floodgsa"};
  app.require_subcommand(1);
  Flags f;

  const auto config = [&](CLI::App* s, bool required = false) {
    auto* o = s->add_option("--config", f.config, "Campaign (or valley) config file");
    if (required) o->required();
  };
  const auto out = [&](CLI::App* s, const char* what) { return s->add_option("--out", f.out, what); };
  const auto seed = [&](CLI::App* s) { s->add_option("--seed", f.seed, "Random seed"); };

  auto* synth = app.add_subcommand("synth-valley", "Write the synthetic valley and a mini campaign template");
  config(synth);
  out(synth, "Output directory")->required();
  seed(synth);

  auto* build = app.add_subcommand("dem-build", "Extrude each scheme's feature layers onto the DTM");
  config(build, true);
  out(build, "Output directory")->required();

  auto* perturb = app.add_subcommand("dem-perturb", "Compose one case DEM");
  config(perturb, true);
  out(perturb, "Output directory")->required();
  seed(perturb);
  perturb->add_option("--case", f.case_id, "Case id SmRnEx");

  auto* sim = app.add_subcommand("simulate", "Run a single case outside the store");
  config(sim, true);
  out(sim, "Output directory")->required();
  seed(sim);
  sim->add_option("--case", f.case_id, "Case id SmRnEx");

  auto* plan = app.add_subcommand("campaign-plan", "Create or extend the campaign store");
  config(plan, true);
  out(plan, "Store directory (overrides the config)");
  seed(plan);
  plan->add_option("--workers", f.workers, "Default worker count stored with the plan")->check(CLI::PositiveNumber);

  auto* run = app.add_subcommand("campaign-run", "Run every pending case");
  config(run);
  out(run, "Store directory (overrides the config)");
  run->add_option("--workers", f.workers, "Concurrent simulations")->check(CLI::PositiveNumber);

  auto* status = app.add_subcommand("campaign-status", "Print case counts");
  config(status);
  out(status, "Store directory (overrides the config)");

  const auto fix_check = [](const std::string& s) {
    try {
      gsa::FixedLevel::parse(s);
      return std::string();
    } catch (const Error& e) {
      return std::string(e.what());
    }
  };

  auto* converge = app.add_subcommand("gsa-converge", "Convergence curve (S and R fixed) or distributions (one fixed)");
  config(converge, true);
  out(converge, "Analysis output directory (default <store>/gsa)");
  seed(converge);
  converge->add_option("--point", f.point, "Point of interest label")->required();
  converge->add_option("--fix", f.fix, "S=<m> or R=<n>; repeat to fix both")->check(fix_check);

  auto* indices = app.add_subcommand("gsa-indices", "First-order indices at points of interest");
  config(indices, true);
  out(indices, "Analysis output directory (default <store>/gsa)");
  seed(indices);
  indices->add_option("--point", f.point, "Point of interest label (default: all)");

  auto* map = app.add_subcommand("gsa-map", "Per-cell first-order index maps");
  config(map, true);
  out(map, "Analysis output directory (default <store>/gsa)");
  seed(map);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "synth-valley") cmd_synth_valley(f);
    else if (name == "dem-build") cmd_dem_build(f);
    else if (name == "dem-perturb") cmd_dem_perturb(f);
    else if (name == "simulate") return cmd_simulate(f);
    else if (name == "campaign-plan") cmd_campaign_plan(f);
    else if (name == "campaign-run") cmd_campaign_run(f);
    else if (name == "campaign-status") cmd_campaign_status(f);
    else if (name == "gsa-converge") cmd_gsa_converge(f);
    else if (name == "gsa-indices") cmd_gsa_indices(f);
    else if (name == "gsa-map") cmd_gsa_map(f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int dispatch(const std::vector<std::string>& args) {
  std::vector<std::string> storage{"floodgsa"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  return dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace floodgsa::cli
