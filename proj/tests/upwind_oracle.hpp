#pragma once

#include <functional>
#include <vector>

// First-order upwind finite differences for the reactor loop, written
// independently of the library so tests can compare against it.
namespace oracle {

struct UpwindParams {
  double mu = 1.0, zeta = 1.0, c = 1.0;
  std::function<double(double)> theta;
};

struct UpwindResult {
  std::vector<double> t, xbar, outlet;
  std::vector<double> profile;  // final profile on the grid
};

UpwindResult upwind_reactor(const std::function<double(double)>& v0,
                            double xbar0, const UpwindParams& p,
                            const std::function<double(double)>& u,
                            double horizon, int cells, double cfl);

}  // namespace oracle
