#include <cmath>
#include <numbers>
#include <stdexcept>

#include "obslab/reactor.hpp"

namespace obslab::reactor {

void ReactorParams::validate() const {
  if (!(mu > 0.0)) throw std::invalid_argument("reactor: mu must be > 0");
  if (!(zeta > 0.0)) throw std::invalid_argument("reactor: zeta must be > 0");
  if (!(c > 0.0) || !std::isfinite(c))
    throw std::invalid_argument("reactor: c must be > 0");
  if (!(Phi > 0.0)) throw std::invalid_argument("reactor: Phi must be > 0");
  if (!theta) throw std::invalid_argument("reactor: missing reaction function");
  if (theta(0.0) != 0.0) throw std::invalid_argument("reactor: theta(0) must be 0");
}

ProfileFunction ProfileFunction::zero() {
  return {[](double) { return 0.0; }, [](double) { return 0.0; },
          [](double) { return 0.0; }};
}

ProfileFunction ProfileFunction::half_sine(double A) {
  constexpr double k = std::numbers::pi / 2;
  return {[A](double z) { return A * std::sin(k * z); },
          [A](double z) { return A * k * std::cos(k * z); },
          [A](double z) { return -A * k * k * std::sin(k * z); }};
}

ReactorField ReactorField::sample(const ProfileFunction& v0, double xbar0,
                                  int M) {
  if (M < 1) throw std::invalid_argument("reactor: M must be >= 1");
  ReactorField f;
  f.xbar = xbar0;
  f.profile.resize(M + 1);
  for (int j = 0; j <= M; ++j) f.profile[j] = v0.v(double(j) / M);
  f.profile[0] = 0.0;
  return f;
}

Compatibility check_compatibility(const ProfileFunction& v0, double xbar0,
                                  const ReactorParams& p) {
  Compatibility out;
  out.boundary_residual = std::abs(v0.v(0.0));
  out.slope_residual = std::abs(p.c * v0.dv(0.0) - p.zeta * xbar0);
  out.ok = out.boundary_residual <= 1e-12 &&
           out.slope_residual <= 1e-9 * (1.0 + std::abs(xbar0));
  return out;
}

double compatible_xbar(const ProfileFunction& v0, const ReactorParams& p) {
  return p.c * v0.dv(0.0) / p.zeta;
}

ReactorDelayState lift_initial_condition(const ProfileFunction& v0,
                                         double xbar0, const ReactorParams& p,
                                         double spacing) {
  p.validate();
  const auto comp = check_compatibility(v0, xbar0, p);
  if (!comp.ok)
    throw std::invalid_argument(
        "reactor: initial data violate the compatibility conditions");
  const double r = p.delay(), zeta = p.zeta;
  const double x1 = v0.v(1.0);
  auto xbar = [&](double s) {
    return std::exp(-zeta * s) * v0.dv(-s / r) / (r * zeta);
  };
  auto value = [&](double s) {
    Vec v(2);
    v << x1, xbar(s);
    return v;
  };
  std::function<Vec(double)> slope;
  if (v0.d2v) {
    slope = [&](double s) {
      const double z = -s / r;
      Vec d(2);
      d << 0.0, std::exp(-zeta * s) *
                    (-zeta * v0.dv(z) - v0.d2v(z) / r) / (r * zeta);
      return d;
    };
  }
  ReactorDelayState st{HistoryBuffer::sample(2, r, 0.0, spacing, value, slope),
                       0.0};

  // Reconstruction v0(z) = zeta * int_{-rz}^0 exp(zeta q) xbar(q) dq, with the
  // exact integral of the Hermite interpolant of exp(zeta q) xbar(q).
  const auto& h = st.history;
  double acc = 0.0, worst = std::abs(v0.v(0.0));
  auto f = [&](std::size_t i) { return std::exp(zeta * h.time(i)) * h.value_ptr(i)[1]; };
  auto df = [&](std::size_t i, bool left) {
    const double t = h.time(i);
    const double d = left ? h.slope_left(i)[1] : h.slope_right(i)[1];
    return std::exp(zeta * t) * (zeta * h.value_ptr(i)[1] + d);
  };
  for (std::size_t i = h.size() - 1; i > 0; --i) {
    const double a = h.time(i - 1), b = h.time(i), w = b - a;
    acc += 0.5 * w * (f(i - 1) + f(i)) + w * w / 12.0 * (df(i - 1, false) - df(i, true));
    worst = std::max(worst, std::abs(v0.v(-a / r) - zeta * acc));
  }
  st.reconstruction_residual = worst;
  return st;
}

ReactorGains design_reactor_gains(const ReactorParams& p) {
  if (!(p.mu > 0.0)) throw std::invalid_argument("reactor gains: mu must be > 0");
  if (!(p.zeta > 0.0)) throw std::invalid_argument("reactor gains: zeta must be > 0");
  if (!(p.c > 0.0) || !std::isfinite(p.c))
    throw std::invalid_argument("reactor gains: r must be > 0");
  if (!(p.Phi > 0.0)) throw std::invalid_argument("reactor gains: Phi must be > 0");
  const double z = p.zeta, r = p.delay(), mu = p.mu, Phi = p.Phi;
  const double one_minus = -std::expm1(-z * r);
  ReactorGains g;
  g.R = 2.0 * mu * one_minus / (z * z);
  g.b = (4.0 * Phi + (mu + g.R + 1.0) * z) / (z * one_minus);
  g.Q = 0.5 * (g.b + g.R) * z;
  g.k1 = z * g.b + (g.b + g.R) * g.b * g.b * z / (2.0 * g.R) +
         Phi * g.b * g.b / (4.0 * g.R) + 0.5 * z * std::exp(-z * r) + 1.0;
  g.k2 = g.R * z + g.b * (g.b + g.R) * z + g.b * (g.k1 + z) -
         (mu + 1.0 + g.b * z) * g.b;
  if (!std::isfinite(g.k1) || !std::isfinite(g.k2) || !std::isfinite(g.b))
    throw std::invalid_argument("reactor gains: non-finite result");
  return g;
}

ReoConstants reactor_reo_constants(const ReactorParams& p,
                                   const ReactorGains& g, double sigma) {
  const double z = p.zeta, r = p.delay();
  if (!(sigma > 0.0) || !(sigma < z / 4.0))
    throw std::invalid_argument("reactor: sigma must lie in (0, zeta/4)");
  Eigen::Matrix2d S;
  S << 0.5 * g.R + 0.5 * g.b * g.b, -0.5 * g.b, -0.5 * g.b, 0.5;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(S);
  ReoConstants c;
  c.sigma = sigma;
  c.K1 = es.eigenvalues()[0];
  c.K2 = es.eigenvalues()[1] + g.Q * (-std::expm1(-z * r)) / z;
  const double num = std::pow(g.k2 - g.b * g.k1, 2) + g.R * g.k1 * g.k1;
  c.noise_v_coef = 0.25 * num;
  c.gamma = std::sqrt(num / (2.0 * c.K1 * (z - 4.0 * sigma))) * std::exp(sigma * r);
  c.a_coef = std::sqrt(c.K2 / c.K1) * std::exp(sigma * r);
  c.L = z * (std::numbers::sqrt2 + std::exp(-z * r));
  return c;
}

double delay_output_identity(const HistoryBuffer& xbar, double t,
                             const ReactorParams& p, int component) {
  const double r = p.delay(), z = p.zeta;
  const HistoryView v = HistoryView(xbar).slice(component, 1);
  return z * v.integrate(t - r, t, [&](double s, const Vec& x) {
    return std::exp(z * (s - t)) * x[0];
  });
}

double delay_output_identity(const HistoryView& xbar, double t,
                             const ReactorParams& p, int panels) {
  const double r = p.delay(), z = p.zeta;
  return z * xbar.integrate_uniform(t - r, t, panels, [&](double s, const Vec& x) {
    return std::exp(z * (s - t)) * x[0];
  });
}

std::vector<double> reconstruct_profile(const HistoryView& z2, double t,
                                        const ReactorParams& p, int M) {
  if (M < 1) throw std::invalid_argument("reconstruct_profile: M must be >= 1");
  const double r = p.delay(), z = p.zeta, dz = 1.0 / M;
  std::vector<double> out(M + 1, 0.0);
  auto f = [&](int j) {
    const double tau = r * j * dz;
    return z * std::exp(-z * tau) * z2.at(t - tau, 0);
  };
  double prev = f(0);
  for (int j = 1; j <= M; ++j) {
    const double cur = f(j);
    out[j] = out[j - 1] + 0.5 * r * dz * (prev + cur);
    prev = cur;
  }
  return out;
}

std::vector<double> reconstruct_profile(const HistoryBuffer& z2, double t,
                                        const ReactorParams& p, int M,
                                        int component) {
  return reconstruct_profile(HistoryView(z2).slice(component, 1), t, p, M);
}

double nested_double_integral(const HistoryView& x, double t,
                              const ReactorParams& p, int n) {
  const double r = p.delay(), z = p.zeta, ds = r / n;
  std::vector<double> f(n + 1);
  for (int j = 0; j <= n; ++j)
    f[j] = x.at(t - j * ds, 0) * std::exp(-z * j * ds);
  // inner[i] = trapezoid of f over [t - r i/n, t]
  std::vector<double> inner(n + 1, 0.0);
  for (int i = 1; i <= n; ++i) {
    double s = 0.5 * (f[0] + f[i]);
    for (int j = 1; j < i; ++j) s += f[j];
    inner[i] = s * ds;
  }
  double outer = 0.5 * (inner[0] + inner[n]);
  for (int i = 1; i < n; ++i) outer += inner[i];
  return outer / n;
}

double kernel_double_integral(const HistoryView& x, double t,
                              const ReactorParams& p) {
  const double r = p.delay(), z = p.zeta;
  return x.integrate(t - r, t, [&](double s, const Vec& v) {
    const double tau = t - s;
    return v[0] * std::exp(-z * tau) * (1.0 - tau / r);
  });
}

double lyapunov_V_reactor(double e1, double e2, double weighted_integral,
                          const ReactorGains& g) {
  const double cross = e2 - g.b * e1;
  return 0.5 * g.R * e1 * e1 + g.Q * weighted_integral + 0.5 * cross * cross;
}

double lyapunov_V_reactor(const HistoryView& x, const HistoryView& z, double t,
                          const ReactorGains& g, const ReactorParams& p,
                          int panels) {
  const double r = p.delay(), zeta = p.zeta;
  if (panels < 1) throw std::invalid_argument("lyapunov_V_reactor: panels >= 1");
  const double ds = r / panels;
  double integral = 0.0;
  for (int j = 0; j <= panels; ++j) {
    const double s = t - j * ds;
    const double e = z.at(s, 1) - x.at(s, 1);
    const double w = (j == 0 || j == panels) ? 0.5 : 1.0;
    integral += w * e * e * std::exp(-zeta * j * ds);
  }
  integral *= ds;
  return lyapunov_V_reactor(z.at(t, 0) - x.at(t, 0), z.at(t, 1) - x.at(t, 1),
                            integral, g);
}

double trapezoid_unit(std::span<const double> v) {
  if (v.size() < 2) throw std::invalid_argument("trapezoid_unit: need >= 2 samples");
  double s = 0.5 * (v.front() + v.back());
  for (std::size_t j = 1; j + 1 < v.size(); ++j) s += v[j];
  return s / double(v.size() - 1);
}

double reactor_feedback(double xhat2, std::span<const double> vhat,
                        double Q_fb, const ReactorParams& p) {
  if (!(p.mu + 1.0 + Q_fb > p.Phi))
    throw std::invalid_argument("reactor feedback: need mu + 1 + Q_fb > Phi");
  return reactor_feedback(xhat2, trapezoid_unit(vhat), Q_fb, p);
}

double reactor_feedback(double xhat2, double vhat_mean, double Q_fb,
                        const ReactorParams& p) {
  if (!(p.mu + 1.0 + Q_fb > p.Phi))
    throw std::invalid_argument("reactor feedback: need mu + 1 + Q_fb > Phi");
  return -Q_fb * xhat2 - p.mu * vhat_mean;
}

// ---------------------------------------------------------------------------

observer::ObservedSystem reactor_delay_system(const ReactorParams& p) {
  p.validate();
  const double z = p.zeta, r = p.delay(), E = std::exp(-z * r);
  observer::ObservedSystem sys;
  sys.n = 2;
  sys.k = 1;
  sys.m = 1;
  sys.q = 1;
  sys.delay = r;
  sys.output_lipschitz = z * (std::numbers::sqrt2 + E);
  sys.plant = [p, z, r, E](double t, const HistoryView& x, const Vec& u,
                           const Vec&) {
    const Vec now = x.now();
    const double x2d = x.at(t - r, 1);
    Vec d(2);
    d[0] = z * now[1] - z * E * x2d - z * now[0];
    d[1] = p.theta(now[1]) - (p.mu + 1.0) * now[1] +
           p.mu * z * kernel_double_integral(x.slice(1, 1), t, p) + u[0];
    return d;
  };
  sys.output = [](const HistoryView& x) { return Vec::Constant(1, x.now()[0]); };
  sys.output_derivative = [z, r, E](const HistoryView& x, const Vec&, const Vec&) {
    const Vec now = x.now();
    const double t = x.now_time();
    return Vec::Constant(1, z * now[1] - z * E * x.at(t - r, 1) - z * now[0]);
  };
  return sys;
}

observer::ReoSpec reactor_reo(const ReactorParams& p, const ReactorGains& g,
                              double sigma) {
  const auto c = reactor_reo_constants(p, g, sigma);
  const double z = p.zeta, r = p.delay(), E = std::exp(-z * r);
  observer::ReoSpec reo;
  reo.l = 2;
  reo.gamma = c.gamma;
  reo.sigma = c.sigma;
  reo.a = [k = c.a_coef](double s) { return k * s; };
  reo.g = [](double) { return 0.0; };
  reo.rhs = [p, g, z, r, E](double t, const HistoryView& zv, const Vec& y,
                            const Vec& u) {
    const Vec now = zv.now();
    const double innov = now[0] - y[0];
    Vec d(2);
    d[0] = z * now[1] - z * E * zv.at(t - r, 1) - z * now[0] - g.k1 * innov;
    d[1] = p.theta(now[1]) - (p.mu + 1.0) * now[1] +
           p.mu * z * kernel_double_integral(zv.slice(1, 1), t, p) + u[0] -
           g.k2 * innov;
    return d;
  };
  return reo;
}

}  // namespace obslab::reactor
