#include "obslab/dde.hpp"

#include <cmath>
#include <sstream>

namespace obslab::dde {

namespace {

bool all_finite(const Vec& v) { return v.allFinite(); }

[[noreturn]] void fail(const char* what, double t) {
  std::ostringstream os;
  os.precision(17);
  os << "integration failed: " << what << " at t=" << t;
  throw IntegrationError(os.str(), t);
}

}  // namespace

StateDerivative bind_inputs(DelayFunctional f, Input u, Input d) {
  return [f = std::move(f), u = std::move(u), d = std::move(d)](
             double t, const HistoryView& x) { return f(t, x, u(t), d(t)); };
}

void integrate_interval(const StateDerivative& rhs, HistoryBuffer& buf,
                        double t0, double t1, double h,
                        const IntegrateOptions& opts) {
  if (!(h > 0.0)) throw IntegrationError("integrate_interval: h must be > 0", t0);
  if (!(t1 > t0)) throw IntegrationError("integrate_interval: t1 must be > t0", t0);
  if (buf.empty()) throw IntegrationError("integrate_interval: empty history", t0);
  const double w = buf.window();
  if (w > 0.0 && h > w * (1 + 1e-12))
    throw IntegrationError("integrate_interval: h exceeds the history window", t0);
  const double back = buf.back_time();
  if (std::abs(back - t0) > 1e-12 * std::max(1.0, std::abs(t0)))
    throw IntegrationError("integrate_interval: history does not end at t0", t0);
  if (buf.front_time() > t0 - w + 1e-9 * std::max(1.0, w))
    throw OutOfRangeError("integrate_interval: history does not cover [t0-r, t0]");

  const auto steps = static_cast<long>(std::ceil((t1 - t0) / h - 1e-9));
  double t = back;
  Vec x = buf.back_value();
  // Slope at the restart point; may differ from the left slope after a jump.
  Vec k1 = rhs(t, HistoryView(buf));
  if (!all_finite(k1)) fail("non-finite derivative", t);
  buf.set_back_slope(k1);

  Vec xs(x.size()), k2, k3, k4;
  for (long k = 1; k <= steps; ++k) {
    const double tn = k == steps ? t1 : t0 + k * h;
    const double dt = tn - t;
    if (!(dt > 0.0)) continue;

    StageExtension ext{t, t + 0.5 * dt, &x, &k1, &xs};
    xs = x + 0.5 * dt * k1;
    k2 = rhs(ext.t1, HistoryView(buf, ext));
    xs = x + 0.5 * dt * k2;
    k3 = rhs(ext.t1, HistoryView(buf, ext));
    ext.t1 = tn;
    xs = x + dt * k3;
    k4 = rhs(tn, HistoryView(buf, ext));
    Vec xn = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!all_finite(xn)) fail("non-finite state", tn);

    xs = xn;
    Vec fn = rhs(tn, HistoryView(buf, ext));
    if (!all_finite(fn)) fail("non-finite derivative", tn);
    buf.append(tn, xn, fn);
    if (w > 0.0)
      buf.prune_before(tn - w - h);
    else
      buf.prune_before(tn);
    t = tn;
    x = std::move(xn);
    k1 = std::move(fn);
    if (opts.on_step) opts.on_step(t, buf);
  }
}

}  // namespace obslab::dde
