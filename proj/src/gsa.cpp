#include "floodgsa/gsa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "floodgsa/error.hpp"
#include "floodgsa/kv_config.hpp"
#include "floodgsa/random.hpp"

namespace floodgsa::gsa {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

bool all_equal(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

// 2.5 and 97.5 percentiles; NaN when there is nothing to rank.
std::pair<double, double> percentile_ci(std::vector<double>& reps) {
  if (reps.empty()) return {kNaN, kNaN};
  std::sort(reps.begin(), reps.end());
  return {quantile(reps, 0.025), quantile(reps, 0.975)};
}

// Variance explained by `factor`, from deviations about the grand mean.
std::optional<double> between_variance(std::span<const dem::CaseId> cases, std::span<const double> dev,
                                       Factor factor) {
  std::vector<int> levels;
  levels.reserve(cases.size());
  for (const auto& c : cases) levels.push_back(level_of(c, factor));
  std::vector<int> distinct = levels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) return std::nullopt;
  std::vector<double> sum(distinct.size(), 0.0);
  std::vector<std::size_t> count(distinct.size(), 0);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto k = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), levels[i]) -
                                            distinct.begin());
    sum[k] += dev[i];
    ++count[k];
  }
  double v = 0.0;
  for (std::size_t k = 0; k < distinct.size(); ++k) v += sum[k] * sum[k] / static_cast<double>(count[k]);
  return v / static_cast<double>(levels.size());
}

// Complete factorial with each level combination present once.
bool balanced(std::span<const dem::CaseId> cases) {
  std::size_t cells = 1;
  for (Factor f : kFactors) {
    std::map<int, std::size_t> count;
    for (const auto& c : cases) ++count[level_of(c, f)];
    for (const auto& [level, n] : count) {
      if (n != count.begin()->second) return false;
    }
    cells *= count.size();
  }
  return cells == cases.size();
}

SampleTable slice(const SampleTable& table, std::size_t col, Factor f1, int l1, std::optional<Factor> f2 = {},
                  int l2 = 0) {
  SampleTable out;
  out.points = {table.points[col]};
  for (std::size_t i = 0; i < table.cases.size(); ++i) {
    if (level_of(table.cases[i], f1) != l1) continue;
    if (f2 && level_of(table.cases[i], *f2) != l2) continue;
    out.cases.push_back(table.cases[i]);
    out.y.push_back(table.at(i, col));
  }
  return out;
}

}  // namespace

std::string_view to_string(Factor factor) {
  switch (factor) {
    case Factor::S: return "S";
    case Factor::R: return "R";
    case Factor::E: return "E";
  }
  return "?";
}

int level_of(const dem::CaseId& id, Factor factor) {
  switch (factor) {
    case Factor::S: return id.scheme;
    case Factor::R: return id.resolution;
    case Factor::E: return id.error;
  }
  return 0;
}

const FactorIndex& SobolIndices::at(std::string_view factor) const {
  for (const auto& f : factors) {
    if (f.factor == factor) return f;
  }
  throw LookupError("no index for factor '" + std::string(factor) + "'");
}

double SobolIndices::sum() const {
  double s = 0.0;
  for (const auto& f : factors) s += f.s.value_or(0.0);
  return s;
}

std::vector<std::optional<double>> factorial_indices(std::span<const dem::CaseId> cases, std::span<const double> y) {
  if (cases.size() != y.size()) throw ValidationError("factorial_indices: cases and values differ in length");
  if (y.empty()) throw ValidationError("factorial_indices: no samples");
  if (all_equal(y)) throw DegenerateOutput("output has zero variance; first-order indices are undefined");
  const double m = mean_of(y);
  std::vector<double> dev(y.size());
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    dev[i] = y[i] - m;
    total += dev[i] * dev[i];
  }
  total /= static_cast<double>(y.size());
  std::vector<std::optional<double>> out;
  for (Factor f : kFactors) {
    const auto v = between_variance(cases, dev, f);
    out.push_back(v ? std::optional<double>(*v / total) : std::nullopt);
  }
  return out;
}

SobolIndices sobol_first_order_factorial(const SampleTable& table, std::string_view point, std::uint64_t seed,
                                         int resamples) {
  const std::vector<double> y = table.column(point);
  if (y.empty()) throw EmptyStoreError("sample table has no cases");
  const auto estimate = factorial_indices(table.cases, y);

  // Rows grouped by error realization; a bootstrap draw relabels each picked
  // realization by its draw position so repeats stay distinct levels.
  std::map<int, std::vector<std::size_t>> by_error;
  for (std::size_t i = 0; i < table.cases.size(); ++i) by_error[table.cases[i].error].push_back(i);
  std::vector<const std::vector<std::size_t>*> groups;
  for (const auto& [e, rows] : by_error) groups.push_back(&rows);

  auto eng = rng::make_engine(seed, 0);
  std::vector<std::vector<double>> reps(3);
  std::vector<dem::CaseId> bc;
  std::vector<double> by;
  for (int b = 0; b < resamples; ++b) {
    bc.clear();
    by.clear();
    for (std::size_t k = 0; k < groups.size(); ++k) {
      const auto* rows = groups[rng::uniform_index(eng, groups.size())];
      for (std::size_t i : *rows) {
        dem::CaseId id = table.cases[i];
        id.error = static_cast<int>(k) + 1;
        bc.push_back(id);
        by.push_back(y[i]);
      }
    }
    if (all_equal(by)) continue;
    const auto s = factorial_indices(bc, by);
    for (std::size_t f = 0; f < 3; ++f) {
      if (s[f]) reps[f].push_back(*s[f]);
    }
  }

  SobolIndices out;
  out.point = std::string(point);
  out.n_samples = y.size();
  out.balanced = balanced(table.cases);
  for (std::size_t f = 0; f < 3; ++f) {
    FactorIndex fi;
    fi.factor = std::string(to_string(kFactors[f]));
    fi.s = estimate[f];
    if (fi.s) {
      std::tie(fi.ci_low, fi.ci_high) = percentile_ci(reps[f]);
    } else {
      fi.ci_low = fi.ci_high = kNaN;
    }
    out.factors.push_back(std::move(fi));
  }
  return out;
}

SobolIndices sobol_pick_freeze(const Model& model, std::span<const InputSpec> inputs, std::size_t n,
                               std::uint64_t seed, int resamples) {
  const std::size_t p = inputs.size();
  if (p == 0) throw ValidationError("pick-freeze needs at least one input");
  if (n < 100) throw ValidationError("pick-freeze needs N >= 100");
  for (const auto& in : inputs) {
    if (!(in.upper > in.lower)) throw ValidationError("input '" + in.name + "' has an empty range");
  }
  auto eng = rng::make_engine(seed, 0);
  std::vector<double> a(n * p), b(n * p);
  for (auto* m : {&a, &b}) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < p; ++i) {
        (*m)[j * p + i] = inputs[i].lower + (inputs[i].upper - inputs[i].lower) * rng::uniform01(eng);
      }
    }
  }
  const auto eval = [&](std::span<const double> x) {
    const double v = model(x);
    if (!std::isfinite(v)) throw PropagationError("model returned a non-finite value");
    return v;
  };
  std::vector<double> fa(n), fb(n), fab(n * p);
  std::vector<double> row(p);
  for (std::size_t j = 0; j < n; ++j) {
    fa[j] = eval(std::span(a).subspan(j * p, p));
    fb[j] = eval(std::span(b).subspan(j * p, p));
    for (std::size_t i = 0; i < p; ++i) {
      std::copy_n(a.begin() + static_cast<std::ptrdiff_t>(j * p), p, row.begin());
      row[i] = b[j * p + i];
      fab[j * p + i] = eval(row);
    }
  }

  // Variance over both base samples; V_i = E[(f(B) - mean) (f(A_B^i) - f(A))].
  // Centring makes the estimate exactly invariant to shifts of Y.
  const auto estimate = [&](const std::vector<std::size_t>& idx, std::vector<double>& s) {
    double sum = 0.0;
    for (std::size_t j : idx) sum += fa[j] + fb[j];
    const double m2 = 2.0 * static_cast<double>(idx.size());
    const double mean = sum / m2;
    double var = 0.0;
    for (std::size_t j : idx) var += (fa[j] - mean) * (fa[j] - mean) + (fb[j] - mean) * (fb[j] - mean);
    var /= m2;
    if (!(var > 0.0)) return false;
    for (std::size_t i = 0; i < p; ++i) {
      double vi = 0.0;
      for (std::size_t j : idx) vi += (fb[j] - mean) * (fab[j * p + i] - fa[j]);
      s[i] = vi / static_cast<double>(idx.size()) / var;
    }
    return true;
  };

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<double> s(p);
  if (!estimate(all, s)) throw DegenerateOutput("model output has zero variance");

  auto beng = rng::make_engine(seed, 1);
  std::vector<std::vector<double>> reps(p);
  std::vector<std::size_t> idx(n);
  std::vector<double> sb(p);
  for (int r = 0; r < resamples; ++r) {
    for (auto& j : idx) j = rng::uniform_index(beng, n);
    if (!estimate(idx, sb)) continue;
    for (std::size_t i = 0; i < p; ++i) reps[i].push_back(sb[i]);
  }

  SobolIndices out;
  out.n_samples = n;
  for (std::size_t i = 0; i < p; ++i) {
    FactorIndex fi;
    fi.factor = inputs[i].name;
    fi.s = s[i];
    std::tie(fi.ci_low, fi.ci_high) = percentile_ci(reps[i]);
    out.factors.push_back(std::move(fi));
  }
  return out;
}

void check_range(const SobolIndices& indices) {
  for (const auto& f : indices.factors) {
    if (f.s && (*f.s < -kRangeTolerance || *f.s > 1.0 + kRangeTolerance)) {
      throw ValidationError("index S_" + f.factor + " = " + format_significant(*f.s) + " at '" + indices.point +
                            "' is outside [-0.05, 1.05]");
    }
  }
}

// ---------------------------------------------------------------------------

double quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw ValidationError("summary of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  Summary s;
  s.count = v.size();
  s.mean = mean_of(v);
  s.std = sample_std(v);
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile(v, 0.25);
  s.median = quantile(v, 0.5);
  s.q3 = quantile(v, 0.75);
  return s;
}

ConvergenceReport convergence_curve(const SampleTable& table, std::string_view point, int scheme, int resolution,
                                    std::uint64_t seed, int resamples) {
  const std::size_t col = table.point_index(point);
  SampleTable sl = slice(table, col, Factor::S, scheme, Factor::R, resolution);
  if (sl.cases.empty()) {
    throw LookupError("no cases for S" + std::to_string(scheme) + "R" + std::to_string(resolution));
  }
  if (sl.cases.size() < kConvergenceStep) {
    throw ValidationError("convergence needs at least 5 realizations, slice has " + std::to_string(sl.cases.size()));
  }
  // Canonical order by realization, then a seeded permutation.
  std::vector<std::size_t> order(sl.cases.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return sl.cases[i].error < sl.cases[j].error; });
  auto peng = rng::make_engine(seed, 0);
  rng::shuffle(order.begin(), order.end(), peng);
  std::vector<double> y;
  for (std::size_t i : order) y.push_back(sl.y[i]);

  ConvergenceReport rep;
  rep.point = std::string(point);
  rep.scheme = scheme;
  rep.resolution = resolution;
  const double ref = sample_std(y);
  std::vector<std::size_t> sizes;
  for (std::size_t n = kConvergenceStep; n <= y.size(); n += kConvergenceStep) sizes.push_back(n);
  if (sizes.back() != y.size()) sizes.push_back(y.size());

  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (std::size_t n : sizes) {
    const std::span<const double> prefix(y.data(), n);
    ConvergenceRow r;
    r.n = n;
    r.mean = mean_of(prefix);
    r.std = sample_std(prefix);
    auto beng = rng::make_engine(seed, 1 + n);
    for (auto& m : means) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += prefix[rng::uniform_index(beng, n)];
      m = s / static_cast<double>(n);
    }
    std::vector<double> sorted = means;
    std::tie(r.ci_low, r.ci_high) = percentile_ci(sorted);
    rep.rows.push_back(r);
  }
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    auto& r = rep.rows[k];
    if (ref == 0.0) {
      r.stable = true;
    } else if (k >= 3) {
      r.stable = true;
      for (std::size_t j = k - 2; j <= k; ++j) {
        const double hw1 = (rep.rows[j].ci_high - rep.rows[j].ci_low) / 2.0;
        const double hw0 = (rep.rows[j - 1].ci_high - rep.rows[j - 1].ci_low) / 2.0;
        if (!(std::abs(hw1 - hw0) < kStabilityTolerance * ref)) r.stable = false;
      }
    }
    if (r.stable && !rep.stable_at) rep.stable_at = r.n;
  }
  return rep;
}

FixedLevel FixedLevel::parse(std::string_view text) {
  const std::string t = trim(text);
  if (t.size() < 3 || t[1] != '=' || (t[0] != 'S' && t[0] != 'R')) {
    throw ValidationError("expected S=<m> or R=<n>, got '" + t + "'");
  }
  FixedLevel f;
  f.factor = t[0] == 'S' ? Factor::S : Factor::R;
  f.level = static_cast<int>(parse_int(t.substr(2), "fixed level"));
  const int top = f.factor == Factor::S ? 4 : 5;
  if (f.level < 1 || f.level > top) {
    throw ValidationError("fixed level out of range [1, " + std::to_string(top) + "]: '" + t + "'");
  }
  return f;
}

std::vector<LevelDistribution> fixed_factor_distributions(const SampleTable& table, std::string_view point,
                                                          FixedLevel fix) {
  const std::size_t col = table.point_index(point);
  if (fix.factor == Factor::E) throw ValidationError("only S or R can be fixed");
  const SampleTable sl = slice(table, col, fix.factor, fix.level);
  if (sl.cases.empty()) {
    throw LookupError("no cases with " + std::string(to_string(fix.factor)) + "=" + std::to_string(fix.level));
  }
  const Factor free = fix.factor == Factor::S ? Factor::R : Factor::S;
  std::map<int, std::vector<double>> groups;
  for (std::size_t i = 0; i < sl.cases.size(); ++i) groups[level_of(sl.cases[i], free)].push_back(sl.y[i]);
  std::vector<LevelDistribution> out;
  for (auto& [level, values] : groups) {
    LevelDistribution d;
    d.factor = free;
    d.level = level;
    std::sort(values.begin(), values.end());
    d.summary = summarize(values);
    d.values = std::move(values);
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------

SobolMaps sobol_map(std::span<const dem::CaseId> cases, const MapLoader& load) {
  if (cases.empty()) throw EmptyStoreError("no completed cases to map");
  // The coarsest case fixes the analysis grid, so load it first.
  std::vector<std::size_t> order(cases.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto coarsest = std::max_element(cases.begin(), cases.end(), [](const auto& a, const auto& b) {
    return a.resolution < b.resolution;
  }) - cases.begin();
  std::swap(order[0], order[static_cast<std::size_t>(coarsest)]);

  GridGeometry grid;
  std::size_t cells = 0;
  std::vector<double> y;                // case-major, cases.size() x cells
  std::vector<std::uint8_t> wet, valid;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t ci = order[k];
    MapCase mc = load(cases[ci]);
    if (!mc.wse_max.geometry().compatible(mc.dem.geometry())) {
      throw ValidationError("wse_max and dem grids differ for " + cases[ci].to_string());
    }
    if (k == 0) {
      grid = mc.dem.geometry();
      cells = grid.cell_count();
      y.assign(cases.size() * cells, 0.0);
      wet.assign(cells, 0);
      valid.assign(cells, 1);
    }
    const GridGeometry& g = mc.dem.geometry();
    Raster field(g), wet_frac(g, 0.0);
    for (std::size_t i = 0; i < g.cell_count(); ++i) {
      if (mc.dem.is_nodata(i)) {
        field[i] = g.nodata_value;
        wet_frac[i] = g.nodata_value;
      } else if (mc.wse_max.is_nodata(i)) {
        field[i] = mc.dem[i];
      } else {
        field[i] = mc.wse_max[i];
        wet_frac[i] = 1.0;
      }
    }
    GridGeometry target = grid;
    target.nodata_value = g.nodata_value;
    if (!(g == target)) {
      field = regrid_mean(field, target);
      wet_frac = regrid_mean(wet_frac, target);
    }
    for (std::size_t c = 0; c < cells; ++c) {
      if (field.is_nodata(c)) {
        valid[c] = 0;
        continue;
      }
      y[ci * cells + c] = field[c];
      if (wet_frac[c] > 0.0) wet[c] = 1;
    }
  }

  SobolMaps maps{Raster(grid, grid.nodata_value), Raster(grid, grid.nodata_value), Raster(grid, grid.nodata_value)};
  std::vector<double> column(cases.size());
  for (std::size_t c = 0; c < cells; ++c) {
    if (!wet[c] || !valid[c]) continue;
    for (std::size_t i = 0; i < cases.size(); ++i) column[i] = y[i * cells + c];
    if (all_equal(column)) continue;
    const auto s = factorial_indices(cases, column);
    if (s[0]) maps.s_s[c] = *s[0];
    if (s[1]) maps.s_r[c] = *s[1];
    if (s[2]) maps.s_e[c] = *s[2];
  }
  return maps;
}

// ---------------------------------------------------------------------------

namespace {

std::string num_or_na(double v) { return std::isfinite(v) ? format_exact(v) : "NA"; }

}  // namespace

void write_indices_csv(std::span<const SobolIndices> indices, const std::filesystem::path& path) {
  std::string out = "point,factor,s,ci_low,ci_high,n\n";
  for (const auto& ix : indices) {
    for (const auto& f : ix.factors) {
      out += ix.point + ',' + f.factor + ',' + (f.s ? format_exact(*f.s) : "NA") + ',' + num_or_na(f.ci_low) + ',' +
             num_or_na(f.ci_high) + ',' + std::to_string(ix.n_samples) + '\n';
    }
  }
  write_file_atomic(path, out);
}

void write_convergence_csv(const ConvergenceReport& report, const std::filesystem::path& path) {
  std::string out = "n,mean,ci_low,ci_high,std,stable\n";
  for (const auto& r : report.rows) {
    out += std::to_string(r.n) + ',' + format_exact(r.mean) + ',' + num_or_na(r.ci_low) + ',' +
           num_or_na(r.ci_high) + ',' + format_exact(r.std) + ',' + (r.stable ? "1" : "0") + '\n';
  }
  write_file_atomic(path, out);
}

void write_distributions_csv(std::span<const LevelDistribution> dists, const std::filesystem::path& path) {
  std::string out = "factor,level,count,mean,std,min,q1,median,q3,max\n";
  for (const auto& d : dists) {
    const auto& s = d.summary;
    out += std::string(to_string(d.factor)) + ',' + std::to_string(d.level) + ',' + std::to_string(s.count);
    for (double v : {s.mean, s.std, s.min, s.q1, s.median, s.q3, s.max}) out += ',' + format_exact(v);
    out += '\n';
  }
  write_file_atomic(path, out);
}

void write_distribution_values_csv(std::span<const LevelDistribution> dists, const std::filesystem::path& path) {
  std::string out = "factor,level,y\n";
  for (const auto& d : dists) {
    for (double v : d.values) {
      out += std::string(to_string(d.factor)) + ',' + std::to_string(d.level) + ',' + format_exact(v) + '\n';
    }
  }
  write_file_atomic(path, out);
}

}  // namespace floodgsa::gsa
