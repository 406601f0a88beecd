#include "obslab/trace.hpp"

#include <stdexcept>

namespace obslab {

namespace {

Eigen::VectorXd row(const std::vector<double>& flat, std::size_t i, int d) {
  return Eigen::Map<const Eigen::VectorXd>(flat.data() + i * d, d);
}

void append(std::vector<double>& flat, const Eigen::VectorXd& v, int d) {
  if (v.size() != d) throw std::invalid_argument("SimTrace: row dimension mismatch");
  flat.insert(flat.end(), v.data(), v.data() + d);
}

bool parse_indexed(const std::string& name, const std::string& prefix,
                   int& index) {
  if (name.size() < prefix.size() + 3 || name.compare(0, prefix.size(), prefix) != 0)
    return false;
  if (name[prefix.size()] != '[' || name.back() != ']') return false;
  const std::string digits =
      name.substr(prefix.size() + 1, name.size() - prefix.size() - 2);
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
    return false;
  index = std::stoi(digits);
  return true;
}

}  // namespace

void SimTrace::push(double time, const Eigen::VectorXd& x_row,
                    const Eigen::VectorXd& xhat_row,
                    const Eigen::VectorXd& w_row, const Eigen::VectorXd& y_row,
                    double err, double v, double env, RowKind row_kind) {
  t.push_back(time);
  append(x, x_row, n);
  append(xhat, xhat_row, n);
  append(w, w_row, k);
  append(y, y_row, k);
  err_sup.push_back(err);
  V.push_back(v);
  envelope.push_back(env);
  kind.push_back(row_kind);
}

void SimTrace::push_aux(const std::string& name, double value) {
  aux[name].push_back(value);
}

Eigen::VectorXd SimTrace::x_row(std::size_t i) const { return row(x, i, n); }
Eigen::VectorXd SimTrace::xhat_row(std::size_t i) const { return row(xhat, i, n); }
Eigen::VectorXd SimTrace::w_row(std::size_t i) const { return row(w, i, k); }
Eigen::VectorXd SimTrace::y_row(std::size_t i) const { return row(y, i, k); }

bool SimTrace::has_channel(const std::string& name) const {
  try {
    channel(name);
    return true;
  } catch (const std::out_of_range&) {
    return false;
  }
}

std::vector<double> SimTrace::channel(const std::string& name) const {
  if (name == "t") return t;
  if (name == "err_sup") return err_sup;
  if (name == "V") return V;
  if (name == "envelope") return envelope;
  if (auto it = aux.find(name); it != aux.end()) return it->second;
  struct Block {
    const char* prefix;
    const std::vector<double>* data;
    int dim;
  };
  for (const Block& b : {Block{"xhat", &xhat, n}, Block{"x", &x, n},
                         Block{"w", &w, k}, Block{"y", &y, k}}) {
    int idx = -1;
    if (parse_indexed(name, b.prefix, idx)) {
      if (idx >= b.dim) break;
      std::vector<double> out(size());
      for (std::size_t i = 0; i < size(); ++i) out[i] = (*b.data)[i * b.dim + idx];
      return out;
    }
  }
  throw std::out_of_range("SimTrace: unknown channel '" + name + "'");
}

}  // namespace obslab
