#include "floodgsa/sample_table.hpp"

#include <cmath>
#include <map>

#include "floodgsa/error.hpp"
#include "floodgsa/kv_config.hpp"

namespace floodgsa {

std::size_t SampleTable::point_index(std::string_view label) const {
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (points[j].label == label) return j;
  }
  throw LookupError("unknown point of interest '" + std::string(label) + "'");
}

std::vector<double> SampleTable::column(std::string_view label) const {
  const std::size_t j = point_index(label);
  std::vector<double> out(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) out[i] = at(i, j);
  return out;
}

void SampleTable::validate() const {
  if (y.size() != cases.size() * points.size()) throw ValidationError("sample table shape mismatch");
  for (double v : y) {
    if (!std::isfinite(v)) throw ValidationError("sample table holds a non-finite value");
  }
}

void write_sample_table(const SampleTable& table, const std::filesystem::path& path) {
  table.validate();
  std::string out = "case,point,y\n";
  for (std::size_t i = 0; i < table.cases.size(); ++i) {
    const std::string id = table.cases[i].to_string();
    for (std::size_t j = 0; j < table.points.size(); ++j) {
      out += id + ',' + table.points[j].label + ',' + format_exact(table.at(i, j)) + '\n';
    }
  }
  write_file_atomic(path, out);
}

SampleTable read_sample_table(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const std::string source = path.string();
  SampleTable table;
  std::map<std::string, std::size_t> point_of;
  std::size_t line_no = 0, start = 0;
  bool header = false;
  std::size_t col = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    const std::string line = trim(std::string_view(text).substr(start, end - start));
    start = end + 1;
    if (line.empty()) continue;
    if (!header) {
      if (line != "case,point,y") throw ParseError(source, line_no, "expected header 'case,point,y'");
      header = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 3) throw ParseError(source, line_no, "expected 'case,point,y'");
    dem::CaseId id;
    double v = 0.0;
    try {
      id = dem::CaseId::parse(f[0]);
      v = parse_double(f[2], "y");
    } catch (const Error& e) {
      throw ParseError(source, line_no, e.what());
    }
    if (table.cases.empty() || (col == table.points.size() && !table.points.empty() && table.cases.back() != id)) {
      for (const auto& seen : table.cases) {
        if (seen == id) throw ParseError(source, line_no, "duplicate case " + id.to_string());
      }
      table.cases.push_back(id);
      col = 0;
    } else if (table.cases.back() != id) {
      throw ParseError(source, line_no, "case " + table.cases.back().to_string() + " is missing points");
    }
    if (table.cases.size() == 1 && !point_of.count(f[1])) {
      point_of[f[1]] = table.points.size();
      table.points.push_back({0.0, 0.0, f[1]});
    } else if (col >= table.points.size() || table.points[col].label != f[1]) {
      throw ParseError(source, line_no, "point '" + f[1] + "' out of order");
    }
    table.y.push_back(v);
    ++col;
  }
  if (!header) throw ParseError(source, 1, "missing header");
  if (!table.cases.empty() && col != table.points.size()) {
    throw ParseError(source, line_no, "case " + table.cases.back().to_string() + " is missing points");
  }
  table.validate();
  return table;
}

}  // namespace floodgsa
