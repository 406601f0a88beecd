#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "obslab/reactor.hpp"

namespace obslab::reactor {

ReactorPlant::ReactorPlant(const ReactorField& init, const ReactorParams& p)
    : p_(p), M_(init.M()) {
  p_.validate();
  if (M_ < 1) throw std::invalid_argument("ReactorPlant: need M >= 1");
  H_ = p_.delay() / M_;
  decay_H_ = std::exp(-p_.zeta * H_);
  v_ = init.profile;
  v_[0] = 0.0;
  cum_.assign(M_ + 1, 0.0);
  for (int j = 1; j <= M_; ++j) cum_[j] = cum_[j - 1] + 0.5 * (v_[j - 1] + v_[j]) / M_;
}

double ReactorPlant::interp(double z) const {
  const double pos = std::clamp(z, 0.0, 1.0) * M_;
  const int j = std::min(static_cast<int>(pos), M_ - 1);
  const double f = pos - j;
  return v_[j] + f * (v_[j + 1] - v_[j]);
}

double ReactorPlant::cumulative(double z) const {
  const double pos = std::clamp(z, 0.0, 1.0) * M_;
  const int j = std::min(static_cast<int>(pos), M_ - 1);
  const double f = pos - j;
  const double vz = v_[j] + f * (v_[j + 1] - v_[j]);
  return cum_[j] + 0.5 * f / M_ * (v_[j] + vz);
}

double ReactorPlant::outlet(double s, double B) const {
  const double cs = std::clamp(p_.c * s, 0.0, 1.0 / M_);
  return interp(1.0 - cs) * std::exp(-p_.zeta * s) + B;
}

double ReactorPlant::mean(double s, double B) const {
  const double cs = std::clamp(p_.c * s, 0.0, 1.0 / M_);
  return std::exp(-p_.zeta * s) * cumulative(1.0 - cs) + B * (1.0 - cs) +
         0.5 * cs * B;
}

std::vector<double> ReactorPlant::profile_at(double s, double B) const {
  const double cs = std::clamp(p_.c * s, 0.0, 1.0 / M_);
  const double decay = std::exp(-p_.zeta * s);
  std::vector<double> out(M_ + 1);
  for (int j = 0; j <= M_; ++j) {
    const double z = double(j) / M_;
    out[j] = z >= cs ? interp(z - cs) * decay + B : (cs > 0 ? B * z / cs : 0.0);
  }
  out[0] = 0.0;
  return out;
}

double ReactorPlant::xbar_rate(double xbar, double mean_v, double u) const {
  return p_.theta(xbar) - (p_.mu + 1.0) * xbar + p_.mu * mean_v + u;
}

double ReactorPlant::source_rate(double xbar, double B) const {
  return p_.zeta * (xbar - B);
}

void ReactorPlant::shift(double B_H) {
  for (int j = M_; j >= 1; --j) v_[j] = v_[j - 1] * decay_H_ + B_H;
  v_[0] = 0.0;
  for (int j = 1; j <= M_; ++j) cum_[j] = cum_[j - 1] + 0.5 * (v_[j - 1] + v_[j]) / M_;
}

FieldTrace solve_pde_reactor(const ReactorField& init, const Scalar& u,
                             const ReactorParams& p, double horizon, double h,
                             int M, const PdeOptions& opts) {
  p.validate();
  if (init.M() != M) throw std::invalid_argument("solve_pde_reactor: field has wrong grid");
  if (std::abs(h * p.c * M - 1.0) > 1e-12)
    throw std::invalid_argument("solve_pde_reactor: step must equal r/M (unit CFL)");
  if (!(horizon > 0.0)) throw std::invalid_argument("solve_pde_reactor: horizon must be > 0");
  if (init.profile.front() != 0.0)
    throw std::invalid_argument("solve_pde_reactor: profile violates v(t,0) = 0");

  ReactorPlant plant(init, p);
  auto input = [&](double t) { return u ? u(t) : 0.0; };

  FieldTrace out;
  out.xbar_history = HistoryBuffer(1, p.delay());
  out.xbar_history.set_retain_all(true);
  if (opts.xbar_prehistory) {
    const auto& pre = *opts.xbar_prehistory;
    for (std::size_t i = 0; i < pre.size(); ++i)
      out.xbar_history.append(pre.time(i), pre.value(i), pre.slope_left(i),
                              pre.slope_right(i));
    if (pre.back_time() != 0.0)
      throw std::invalid_argument("solve_pde_reactor: prehistory must end at 0");
    out.xbar_history.jump_back(Vec::Constant(1, init.xbar));
  }

  auto record = [&](double t, double xb) {
    out.t.push_back(t);
    out.xbar.push_back(xb);
    out.outlet.push_back(plant.outlet(0.0, 0.0));
    out.mean.push_back(plant.mean(0.0, 0.0));
    const double slope =
        opts.freeze_xbar ? 0.0 : plant.xbar_rate(xb, plant.mean(0.0, 0.0), input(t));
    if (out.xbar_history.empty() || out.xbar_history.back_time() < t)
      out.xbar_history.append(t, Vec::Constant(1, xb), Vec::Constant(1, slope));
    else
      out.xbar_history.set_back_slope(Vec::Constant(1, slope));
  };

  HistoryBuffer state(2, 0.0);
  Vec s0(2);
  s0 << init.xbar, 0.0;
  state.append(0.0, s0, Vec::Zero(2));
  record(0.0, init.xbar);

  double t_base = 0.0;
  auto rhs = [&](double t, const HistoryView& v) {
    const Vec now = v.now();
    const double s = t - t_base;
    Vec d(2);
    d[0] = opts.freeze_xbar ? 0.0
                            : plant.xbar_rate(now[0], plant.mean(s, now[1]), input(t));
    d[1] = plant.source_rate(now[0], now[1]);
    return d;
  };

  const auto steps = static_cast<long>(std::ceil(horizon / h - 1e-9));
  for (long k = 1; k <= steps; ++k) {
    const double t1 = k * h;
    dde::integrate_interval(rhs, state, t_base, t1, h);
    const Vec now = state.back_value();
    plant.shift(now[1]);
    state.jump_back(1, 0.0);
    t_base = t1;
    record(t1, now[0]);
    if (opts.store_profile_every > 0 && k % opts.store_profile_every == 0) {
      out.profile_times.push_back(t1);
      out.profiles.push_back(plant.profile());
    }
  }
  if (out.profiles.empty() || out.profile_times.back() != t_base) {
    out.profile_times.push_back(t_base);
    out.profiles.push_back(plant.profile());
  }
  return out;
}

}  // namespace obslab::reactor
