#include "pmesh/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include "pmesh/errors.hpp"
#include "pmesh/powersim.hpp"

namespace pmesh {

std::string format_fixed3(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

CsvTable parse_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  CsvTable t;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto cells = split(line);
    if (row == 1) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ParseError("csv line " + std::to_string(row) + ": expected " + std::to_string(t.header.size()) +
                       " cells, found " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (row == 0) throw ParseError("csv: empty text");
  return t;
}

void write_csv(const CsvTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_csv(table);
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

namespace {

const std::regex kInt(R"(-?\d+)");
const std::regex kFixed3(R"(-?\d+\.\d{3})");
const std::regex kPerm(R"(\d+(-\d+)*)");

void expect(bool ok, const std::string& where, const std::string& what) {
  if (!ok) throw ParseError(where + ": expected " + what);
}

std::string at(std::size_t r, std::size_t c) {
  return "row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1);
}

void check_port_header(const CsvTable& t, const char* first, bool allow_empty_header) {
  expect(!t.header.empty() && t.header[0] == first, "header", std::string("first cell \"") + first + "\"");
  expect(allow_empty_header || t.header.size() > 1, "header", "at least one data column");
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    expect(std::regex_match(t.header[c], kInt), "header column " + std::to_string(c + 1), "an integer");
  }
}

}  // namespace

void check_schema(const CsvTable& t, CsvSchema schema) {
  switch (schema) {
    case CsvSchema::SwitchMatrix:
    case CsvSchema::PortMatrix:
    case CsvSchema::MulticastFunnel: {
      const bool funnel = schema == CsvSchema::MulticastFunnel;
      check_port_header(t, funnel ? "port" : "input", false);
      expect(!t.rows.empty(), "table", "at least one row");
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        expect(std::regex_match(t.rows[r][0], kInt), at(r, 0), "a port number");
        for (std::size_t c = 1; c < t.header.size(); ++c) {
          const auto& cell = t.rows[r][c];
          const bool blank_ok = schema != CsvSchema::SwitchMatrix;
          expect(std::regex_match(cell, kFixed3) || (blank_ok && cell.empty()), at(r, c),
                 blank_ok ? "a 3-decimal dB value or an empty cell" : "a 3-decimal dB value");
        }
      }
      break;
    }
    case CsvSchema::Feasibility: {
      expect(t.header == std::vector<std::string>{"permutation", "solved", "iterations", "total_weight"}, "header",
             "permutation,solved,iterations,total_weight");
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        expect(std::regex_match(row[0], kPerm), at(r, 0), "dash-joined output indices");
        expect(row[1] == "0" || row[1] == "1", at(r, 1), "0 or 1");
        expect(std::regex_match(row[2], kInt), at(r, 2), "an integer");
        expect(row[1] == "1" ? std::regex_match(row[3], kFixed3) : row[3].empty(), at(r, 3),
               "a 3-decimal weight when solved, else empty");
      }
      break;
    }
  }
}

CsvTable matrix_table(const PowerMatrix& m) {
  CsvTable t;
  t.header.push_back("input");
  for (int o : m.outputs) t.header.push_back(std::to_string(o));
  for (std::size_t i = 0; i < m.inputs.size(); ++i) {
    auto& row = t.rows.emplace_back();
    row.push_back(std::to_string(m.inputs[i]));
    for (double v : m.db[i]) row.push_back(format_fixed3(v));
  }
  return t;
}

}  // namespace pmesh
