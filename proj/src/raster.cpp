#include "floodgsa/raster.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <system_error>

#include "floodgsa/error.hpp"
#include "floodgsa/kv_config.hpp"
#include "floodgsa/log.hpp"

namespace floodgsa {

bool GridGeometry::compatible(const GridGeometry& o) const noexcept {
  return ncols == o.ncols && nrows == o.nrows && x_origin == o.x_origin && y_origin == o.y_origin &&
         cell_size == o.cell_size;
}

void GridGeometry::validate() const {
  if (ncols < 1 || nrows < 1) throw ValidationError("grid must have at least one row and one column");
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) throw ValidationError("cell size must be positive");
  if (!std::isfinite(x_origin) || !std::isfinite(y_origin)) throw ValidationError("grid origin must be finite");
}

Raster::Raster(GridGeometry geometry, double fill) : geometry_(geometry) {
  geometry_.validate();
  values_.assign(geometry_.cell_count(), fill);
}

Raster::Raster(GridGeometry geometry, std::vector<double> values) : geometry_(geometry), values_(std::move(values)) {
  geometry_.validate();
  if (values_.size() != geometry_.cell_count()) {
    throw ValidationError("raster value count " + std::to_string(values_.size()) + " does not match " +
                          std::to_string(geometry_.ncols) + " x " + std::to_string(geometry_.nrows));
  }
}

RasterStats statistics(const Raster& raster) {
  RasterStats s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < raster.size(); ++i) {
    if (raster.is_nodata(i)) continue;
    const double v = raster[i];
    ++s.count;
    s.sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  if (s.count == 0) return RasterStats{};
  s.mean = s.sum / static_cast<double>(s.count);
  double ss = 0.0;
  for (std::size_t i = 0; i < raster.size(); ++i) {
    if (raster.is_nodata(i)) continue;
    ss += (raster[i] - s.mean) * (raster[i] - s.mean);
  }
  s.stddev = std::sqrt(ss / static_cast<double>(s.count));
  return s;
}

Raster add(const Raster& a, const Raster& b) {
  if (!a.geometry().compatible(b.geometry())) throw ValidationError("add: incompatible raster geometries");
  Raster out(a.geometry());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = (a.is_nodata(i) || b.is_nodata(i)) ? a.nodata() : a[i] + b[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Points

PointSet read_points(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  PointSet points;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool header_seen = false;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    const std::string line = trim(std::string_view(text).substr(start, end - start));
    start = end + 1;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line == "label,x,y") continue;
      throw ParseError(path.string(), line_no, "expected header 'label,x,y'");
    }
    const auto fields = split(line, ',');
    if (fields.size() != 3 || fields[0].empty()) throw ParseError(path.string(), line_no, "expected 'label,x,y'");
    try {
      points.push_back({parse_double(fields[1], "x"), parse_double(fields[2], "y"), fields[0]});
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return points;
}

void write_points(const PointSet& points, const std::filesystem::path& path) {
  std::string out = "label,x,y\n";
  for (const auto& p : points) out += p.label + "," + format_exact(p.x) + "," + format_exact(p.y) + "\n";
  write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// ASCII grid

namespace {

struct LineCursor {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line_no;

  // Next non-blank line, or false at end of input.
  bool next(std::string_view& line) {
    while (pos < text.size()) {
      auto end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string_view::npos) return true;
    }
    return false;
  }
};

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto ca = static_cast<unsigned char>(a[i]);
    const auto cb = static_cast<unsigned char>(b[i]);
    if (std::tolower(ca) != std::tolower(cb)) return false;
  }
  return true;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

// Parses whitespace separated reals from `line` into `out`; returns count or -1 on a bad token.
long parse_reals(std::string_view line, double* out, std::size_t capacity) {
  std::size_t i = 0;
  std::size_t count = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    const char* b = line.data() + i;
    const char* e = line.data() + j;
    if (*b == '+') ++b;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) return -1;
    if (count < capacity) out[count] = v;
    ++count;
    i = j;
  }
  return static_cast<long>(count);
}

}  // namespace

Raster parse_ascii_grid(std::string_view text, const std::string& source, std::size_t first_line,
                        std::size_t* bytes_consumed) {
  LineCursor cur{text, 0, first_line - 1};
  static constexpr std::array<std::string_view, 6> keys = {"ncols",     "nrows",    "xllcorner",
                                                           "yllcorner", "cellsize", "NODATA_value"};
  std::array<double, 6> header{};
  std::string_view line;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    if (!cur.next(line)) throw ParseError(source, cur.line_no, "truncated header, expected '" + std::string(keys[k]) + "'");
    std::size_t i = 0;
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (!iequals(line.substr(i, j - i), keys[k])) {
      throw ParseError(source, cur.line_no, "malformed header, expected '" + std::string(keys[k]) + "'");
    }
    double v = 0.0;
    if (parse_reals(line.substr(j), &v, 1) != 1) {
      throw ParseError(source, cur.line_no, "malformed header value for '" + std::string(keys[k]) + "'");
    }
    header[k] = v;
  }
  const auto as_count = [&](double v, std::string_view key) {
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e9) {
      throw ParseError(source, cur.line_no, std::string(key) + " must be a positive integer");
    }
    return static_cast<std::size_t>(v);
  };
  GridGeometry g;
  g.ncols = as_count(header[0], "ncols");
  g.nrows = as_count(header[1], "nrows");
  g.x_origin = header[2];
  g.y_origin = header[3];
  g.cell_size = header[4];
  g.nodata_value = header[5];
  if (!(g.cell_size > 0.0) || !std::isfinite(g.cell_size)) {
    throw ParseError(source, cur.line_no - 1, "cellsize must be positive");
  }

  std::vector<double> values(g.cell_count());
  for (std::size_t r = 0; r < g.nrows; ++r) {
    if (!cur.next(line)) {
      throw ParseError(source, cur.line_no + 1, "value count mismatch: expected " + std::to_string(g.nrows) +
                                                " rows, found " + std::to_string(r));
    }
    const long n = parse_reals(line, values.data() + r * g.ncols, g.ncols);
    if (n < 0) throw ParseError(source, cur.line_no, "malformed value");
    if (static_cast<std::size_t>(n) != g.ncols) {
      throw ParseError(source, cur.line_no, "value count mismatch: expected " + std::to_string(g.ncols) +
                                                " values, found " + std::to_string(n));
    }
  }
  if (bytes_consumed != nullptr) {
    *bytes_consumed = cur.pos;
  } else {
    std::string_view extra;
    if (cur.next(extra)) throw ParseError(source, cur.line_no, "value count mismatch: trailing data after last row");
  }
  return Raster(g, std::move(values));
}

Raster read_ascii_grid(const std::filesystem::path& path) {
  return parse_ascii_grid(read_file(path), path.string());
}

std::string format_ascii_grid(const Raster& raster, ValueFormat format) {
  const auto& g = raster.geometry();
  std::string out;
  out.reserve(64 + raster.size() * (format == ValueFormat::exact ? 20 : 10));
  out += "ncols " + std::to_string(g.ncols) + "\n";
  out += "nrows " + std::to_string(g.nrows) + "\n";
  out += "xllcorner " + format_exact(g.x_origin) + "\n";
  out += "yllcorner " + format_exact(g.y_origin) + "\n";
  out += "cellsize " + format_exact(g.cell_size) + "\n";
  out += "NODATA_value " + format_exact(g.nodata_value) + "\n";
  std::array<char, 64> buf{};
  for (std::size_t r = 0; r < g.nrows; ++r) {
    for (std::size_t c = 0; c < g.ncols; ++c) {
      const double v = raster(r, c);
      std::to_chars_result res{};
      if (v == g.nodata_value || format == ValueFormat::exact) {
        res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
      } else {
        res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 6);
      }
      if (c) out += ' ';
      out.append(buf.data(), res.ptr);
    }
    out += '\n';
  }
  return out;
}

void write_ascii_grid(const Raster& raster, const std::filesystem::path& path, ValueFormat format) {
  write_file_atomic(path, format_ascii_grid(raster, format));
}

// ---------------------------------------------------------------------------
// Resampling

Raster resample(const Raster& raster, double target_cell_size, ResampleMethod method) {
  const auto& src = raster.geometry();
  const double ratio = target_cell_size / src.cell_size;
  const double k_round = std::round(ratio);
  if (!(target_cell_size > 0.0) || k_round < 1.0 || std::abs(ratio - k_round) > 1e-9 * ratio) {
    throw UnsupportedResolution("cannot resample from " + format_exact(src.cell_size) + " m to " +
                                format_exact(target_cell_size) + " m: ratio must be a positive integer");
  }
  const auto k = static_cast<std::size_t>(k_round);
  if (k == 1) return raster;
  if (src.ncols < k || src.nrows < k) throw UnsupportedResolution("raster smaller than one resampling block");

  GridGeometry dst = src;
  dst.ncols = src.ncols / k;
  dst.nrows = src.nrows / k;
  dst.cell_size = target_cell_size;
  const std::size_t drop_rows = src.nrows - dst.nrows * k;  // dropped at the top
  if (drop_rows != 0 || src.ncols % k != 0) {
    log::warn("resample: " + std::to_string(src.ncols) + " x " + std::to_string(src.nrows) +
              " grid not divisible by " + std::to_string(k) + ", truncating " + std::to_string(src.ncols % k) +
              " east column(s) and " + std::to_string(drop_rows) + " north row(s)");
  }

  Raster out(dst, dst.nodata_value);
  for (std::size_t br = 0; br < dst.nrows; ++br) {
    for (std::size_t bc = 0; bc < dst.ncols; ++bc) {
      double acc = method == ResampleMethod::block_max ? -std::numeric_limits<double>::infinity() : 0.0;
      std::size_t n = 0;
      for (std::size_t r = drop_rows + br * k; r < drop_rows + (br + 1) * k; ++r) {
        for (std::size_t c = bc * k; c < (bc + 1) * k; ++c) {
          const double v = raster(r, c);
          if (v == src.nodata_value) continue;
          acc = method == ResampleMethod::block_max ? std::max(acc, v) : acc + v;
          ++n;
        }
      }
      if (n == 0) continue;
      out(br, bc) = method == ResampleMethod::block_max ? acc : acc / static_cast<double>(n);
    }
  }
  return out;
}

namespace {

struct Overlap {
  std::size_t src;
  double length;
};

// For each target interval [t0 + i*dt, t0 + (i+1)*dt), the source intervals it overlaps.
std::vector<std::vector<Overlap>> axis_overlaps(double s0, double ds, std::size_t ns, double t0, double dt,
                                                std::size_t nt) {
  std::vector<std::vector<Overlap>> out(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    const double a = t0 + static_cast<double>(i) * dt;
    const double b = a + dt;
    const double first = std::floor((a - s0) / ds);
    const double last = std::ceil((b - s0) / ds);
    for (double j = std::max(first, 0.0); j < std::min(last, static_cast<double>(ns)); j += 1.0) {
      const double lo = std::max(a, s0 + j * ds);
      const double hi = std::min(b, s0 + (j + 1.0) * ds);
      if (hi - lo > 1e-9 * dt) out[i].push_back({static_cast<std::size_t>(j), hi - lo});
    }
  }
  return out;
}

}  // namespace

Raster regrid_mean(const Raster& raster, const GridGeometry& target) {
  target.validate();
  const auto& src = raster.geometry();
  // Axes measured from the north edge for rows so indices run top-down.
  const auto cols = axis_overlaps(src.x_origin, src.cell_size, src.ncols, target.x_origin, target.cell_size,
                                  target.ncols);
  const auto rows = axis_overlaps(-src.y_max(), src.cell_size, src.nrows, -target.y_max(), target.cell_size,
                                  target.nrows);
  Raster out(target, target.nodata_value);
  for (std::size_t r = 0; r < target.nrows; ++r) {
    for (std::size_t c = 0; c < target.ncols; ++c) {
      double acc = 0.0;
      double weight = 0.0;
      for (const auto& ro : rows[r]) {
        for (const auto& co : cols[c]) {
          const double v = raster(ro.src, co.src);
          if (v == src.nodata_value) continue;
          const double w = ro.length * co.length;
          acc += w * v;
          weight += w;
        }
      }
      if (weight > 0.0) out(r, c) = acc / weight;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Point sampling

CellIndex locate(const GridGeometry& g, double x, double y, std::string_view label) {
  if (!(x >= g.x_origin && x <= g.x_max() && y >= g.y_origin && y <= g.y_max())) {
    throw ExtentError("point '" + std::string(label) + "' (" + format_exact(x) + ", " + format_exact(y) +
                      ") lies outside the raster extent");
  }
  auto col = static_cast<std::size_t>(std::floor((x - g.x_origin) / g.cell_size));
  auto row = static_cast<std::size_t>(std::floor((g.y_max() - y) / g.cell_size));
  col = std::min(col, g.ncols - 1);
  row = std::min(row, g.nrows - 1);
  return {row, col};
}

std::vector<double> sample_at_points(const Raster& raster, const PointSet& points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const auto idx = locate(raster.geometry(), p.x, p.y, p.label);
    out.push_back(raster(idx.row, idx.col));
  }
  return out;
}

}  // namespace floodgsa
