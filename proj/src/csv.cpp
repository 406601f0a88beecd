#include "obslab/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace obslab::csv {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  return f;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& s, const std::string& path, int line) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw std::runtime_error(path + ":" + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

void write_row(std::ostream& out, const std::vector<double>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << format_double(row[i]);
  }
  out << '\n';
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> trace_header(int n, int k) {
  std::vector<std::string> h{"t"};
  for (int i = 0; i < n; ++i) h.push_back("x[" + std::to_string(i) + "]");
  for (int i = 0; i < n; ++i) h.push_back("xhat[" + std::to_string(i) + "]");
  for (int i = 0; i < k; ++i) h.push_back("w[" + std::to_string(i) + "]");
  for (int i = 0; i < k; ++i) h.push_back("y[" + std::to_string(i) + "]");
  h.insert(h.end(), {"err_sup", "V", "envelope"});
  return h;
}

void write_trace(const SimTrace& tr, const std::string& path) {
  if (tr.empty()) throw std::invalid_argument("write_trace: empty trace");
  auto out = open_out(path);
  const auto header = trace_header(tr.n, tr.k);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  const double nan = std::nan("");
  std::vector<double> row;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    row.clear();
    row.push_back(tr.t[i]);
    for (int j = 0; j < tr.n; ++j) row.push_back(tr.x[i * tr.n + j]);
    for (int j = 0; j < tr.n; ++j) row.push_back(tr.xhat[i * tr.n + j]);
    for (int j = 0; j < tr.k; ++j) row.push_back(tr.w[i * tr.k + j]);
    for (int j = 0; j < tr.k; ++j) row.push_back(tr.y[i * tr.k + j]);
    row.push_back(tr.err_sup[i]);
    row.push_back(i < tr.V.size() ? tr.V[i] : nan);
    row.push_back(i < tr.envelope.size() ? tr.envelope[i] : nan);
    write_row(out, row);
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

SimTrace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  const auto header = split(line);
  int n = 0, k = 0;
  for (const auto& h : header) {
    if (h.rfind("x[", 0) == 0) ++n;
    if (h.rfind("w[", 0) == 0) ++k;
  }
  if (header != trace_header(n, k)) throw std::runtime_error(path + ": unexpected header");
  SimTrace tr(n, k);
  int lineno = 1;
  bool any_env = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": wrong column count");
    std::size_t c = 0;
    const double t = parse_cell(cells[c++], path, lineno);
    for (int j = 0; j < n; ++j) tr.x.push_back(parse_cell(cells[c++], path, lineno));
    for (int j = 0; j < n; ++j) tr.xhat.push_back(parse_cell(cells[c++], path, lineno));
    for (int j = 0; j < k; ++j) tr.w.push_back(parse_cell(cells[c++], path, lineno));
    for (int j = 0; j < k; ++j) tr.y.push_back(parse_cell(cells[c++], path, lineno));
    tr.err_sup.push_back(parse_cell(cells[c++], path, lineno));
    tr.V.push_back(parse_cell(cells[c++], path, lineno));
    const double env = parse_cell(cells[c++], path, lineno);
    any_env = any_env || !std::isnan(env);
    tr.envelope.push_back(env);
    // A repeated time stamp marks the post-reset copy of an event row.
    RowKind kind = RowKind::regular;
    if (!tr.t.empty() && tr.t.back() == t) {
      tr.kind.back() = RowKind::pre_reset;
      kind = RowKind::post_reset;
    }
    tr.t.push_back(t);
    tr.kind.push_back(kind);
  }
  if (!any_env) tr.envelope.clear();
  return tr;
}

void write_aux(const SimTrace& tr, const std::string& path) {
  auto out = open_out(path);
  out << 't';
  for (const auto& [name, col] : tr.aux) out << ',' << name;
  out << '\n';
  std::vector<double> row;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    row.assign(1, tr.t[i]);
    for (const auto& [name, col] : tr.aux) row.push_back(col.at(i));
    write_row(out, row);
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void read_aux(const std::string& path, SimTrace& into) {
  const Table t = read_table(path);
  if (t.header.empty() || t.header[0] != "t") throw std::runtime_error(path + ": bad header");
  if (t.rows.size() != into.size()) throw std::runtime_error(path + ": row count mismatch");
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    auto& col = into.aux[t.header[c]];
    col.clear();
    for (const auto& r : t.rows) col.push_back(r[c]);
  }
}

void write_table(const Table& table, const std::string& path) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& r : table.rows) {
    if (r.size() != table.header.size())
      throw std::invalid_argument("write_table: row width differs from header");
    write_row(out, r);
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  t.header = split(line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size())
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": wrong column count");
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(parse_cell(c, path, lineno));
    t.rows.push_back(std::move(r));
  }
  return t;
}

}  // namespace obslab::csv
