#include "upwind_oracle.hpp"

#include <cmath>

namespace oracle {

UpwindResult upwind_reactor(const std::function<double(double)>& v0,
                            double xbar0, const UpwindParams& p,
                            const std::function<double(double)>& u,
                            double horizon, int cells, double cfl) {
  const double dz = 1.0 / cells;
  const int steps = static_cast<int>(std::ceil(horizon * p.c / (cfl * dz)));
  const double dt = horizon / steps;
  const double nu = p.c * dt / dz;

  std::vector<double> v(cells + 1), nv(cells + 1);
  for (int j = 0; j <= cells; ++j) v[j] = v0(j * dz);
  double xb = xbar0;

  UpwindResult out;
  auto record = [&](double t) {
    out.t.push_back(t);
    out.xbar.push_back(xb);
    out.outlet.push_back(v[cells]);
  };
  record(0.0);
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    double mean = 0.5 * (v[0] + v[cells]);
    for (int j = 1; j < cells; ++j) mean += v[j];
    mean *= dz;
    const double dx = p.theta(xb) - (p.mu + 1.0) * xb + p.mu * mean + (u ? u(t) : 0.0);
    nv[0] = 0.0;
    for (int j = 1; j <= cells; ++j)
      nv[j] = v[j] - nu * (v[j] - v[j - 1]) + dt * p.zeta * (xb - v[j]);
    v.swap(nv);
    xb += dt * dx;
    record(t + dt);
  }
  out.profile = v;
  return out;
}

}  // namespace oracle
