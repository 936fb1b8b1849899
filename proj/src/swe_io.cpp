#include <algorithm>
#include <string>

#include "floodgsa/error.hpp"
#include "floodgsa/kv_config.hpp"
#include "floodgsa/swe.hpp"

namespace floodgsa::swe {

void write_hot_start(const FlowState& state, const std::filesystem::path& path) {
  std::string out = "hotstart 1\n";
  out += "t " + format_exact(state.t) + "\n";
  out += "[h]\n" + format_ascii_grid(state.h, ValueFormat::exact);
  out += "[hu]\n" + format_ascii_grid(state.hu, ValueFormat::exact);
  out += "[hv]\n" + format_ascii_grid(state.hv, ValueFormat::exact);
  write_file_atomic(path, out);
}

FlowState read_hot_start(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const std::string source = path.string();
  std::size_t pos = 0;
  std::size_t line_no = 0;
  const auto next_line = [&]() {
    if (pos >= text.size()) throw ParseError(source, line_no + 1, "unexpected end of hot start file");
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string line = trim(std::string_view(text).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    return line;
  };
  if (next_line() != "hotstart 1") throw ParseError(source, line_no, "not a version 1 hot start file");
  const std::string tline = next_line();
  if (tline.rfind("t ", 0) != 0) throw ParseError(source, line_no, "expected 't <seconds>'");
  FlowState state;
  try {
    state.t = parse_double(tline.substr(2), "hot start time");
  } catch (const ValidationError& e) {
    throw ParseError(source, line_no, e.what());
  }
  const auto section = [&](const char* name) {
    if (next_line() != name) throw ParseError(source, line_no, std::string("expected section ") + name);
    std::size_t consumed = 0;
    Raster r = parse_ascii_grid(std::string_view(text).substr(pos), source, line_no + 1, &consumed);
    line_no += static_cast<std::size_t>(std::count(text.begin() + static_cast<std::ptrdiff_t>(pos),
                                                   text.begin() + static_cast<std::ptrdiff_t>(pos + consumed), '\n'));
    pos += consumed;
    return r;
  };
  state.h = section("[h]");
  state.hu = section("[hu]");
  state.hv = section("[hv]");
  const auto& g = state.h.geometry();
  if (!state.hu.geometry().compatible(g) || !state.hv.geometry().compatible(g)) {
    throw ParseError(source, line_no, "hot start sections have different grids");
  }
  state.h_max = state.h;
  state.wse_max = Raster(g, g.nodata_value);
  return state;
}

void write_mass_ledger(const std::vector<MassLedgerRow>& ledger, const std::filesystem::path& path) {
  std::string out = "t,inflow_volume,outflow_volume,storage,balance_error\n";
  if (!ledger.empty()) {
    const auto& a = ledger.front();
    for (const auto& row : ledger) {
      const double err = (row.inflow_volume - a.inflow_volume) - (row.outflow_volume - a.outflow_volume) -
                         (row.storage - a.storage);
      out += format_exact(row.t) + "," + format_exact(row.inflow_volume) + "," + format_exact(row.outflow_volume) +
             "," + format_exact(row.storage) + "," + format_exact(err) + "\n";
    }
  }
  write_file_atomic(path, out);
}

}  // namespace floodgsa::swe
