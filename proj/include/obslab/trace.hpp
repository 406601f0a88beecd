#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace obslab {

enum class RowKind : std::uint8_t { regular = 0, pre_reset = 1, post_reset = 2 };

// Time-indexed record of one run. Vector channels are stored row-major.
struct SimTrace {
  int n = 0;  // plant / estimate dimension
  int k = 0;  // output dimension

  std::vector<double> t;
  std::vector<double> x, xhat, w, y;
  std::vector<double> err_sup, V, envelope;
  std::vector<RowKind> kind;
  std::map<std::string, std::vector<double>> aux;

  SimTrace() = default;
  SimTrace(int n_state, int n_output) : n(n_state), k(n_output) {}

  std::size_t size() const { return t.size(); }
  bool empty() const { return t.empty(); }

  void push(double time, const Eigen::VectorXd& x_row,
            const Eigen::VectorXd& xhat_row, const Eigen::VectorXd& w_row,
            const Eigen::VectorXd& y_row, double err, double v, double env,
            RowKind row_kind = RowKind::regular);
  void push_aux(const std::string& name, double value);

  Eigen::VectorXd x_row(std::size_t i) const;
  Eigen::VectorXd xhat_row(std::size_t i) const;
  Eigen::VectorXd w_row(std::size_t i) const;
  Eigen::VectorXd y_row(std::size_t i) const;

  // "err_sup", "V", "envelope", "x[i]", "xhat[i]", "w[i]", "y[i]" or an aux name.
  std::vector<double> channel(const std::string& name) const;
  bool has_channel(const std::string& name) const;
};

}  // namespace obslab
