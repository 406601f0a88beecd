#pragma once

#include <string>
#include <vector>

#include "obslab/trace.hpp"

namespace obslab::csv {

// 17 significant digits, enough for an exact double round trip.
std::string format_double(double v);

// Columns: t, x[0..n), xhat[0..n), w[0..k), y[0..k), err_sup, V, envelope.
// Rows at resets appear twice (pre and post).
std::vector<std::string> trace_header(int n, int k);
void write_trace(const SimTrace& trace, const std::string& path);
SimTrace read_trace(const std::string& path);

// Auxiliary channels, one column each after t.
void write_aux(const SimTrace& trace, const std::string& path);
void read_aux(const std::string& path, SimTrace& into);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

void write_table(const Table& table, const std::string& path);
Table read_table(const std::string& path);

}  // namespace obslab::csv
