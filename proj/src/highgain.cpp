#include "obslab/highgain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace obslab::highgain {

CompanionPair companion_pair(int n) {
  if (n < 1) throw std::invalid_argument("companion_pair: n must be >= 1");
  CompanionPair out{Mat::Zero(n, n), Vec::Zero(n)};
  for (int i = 0; i + 1 < n; ++i) out.A(i, i + 1) = 1.0;
  out.c[0] = 1.0;
  return out;
}

Vec place_K(int n, double pole) {
  if (n < 1) throw std::invalid_argument("place_K: n must be >= 1");
  if (!(pole < 0.0)) throw std::invalid_argument("place_K: pole must be negative");
  Vec K(n);
  double binom = 1.0;
  for (int i = 1; i <= n; ++i) {
    binom = binom * (n - i + 1) / i;
    K[i - 1] = -binom * std::pow(-pole, i);
  }
  return K;
}

double max_real_eigenvalue(const Mat& M) {
  Eigen::EigenSolver<Mat> es(M, false);
  return es.eigenvalues().real().maxCoeff();
}

Mat solve_lyapunov_P(const Mat& Acl, double mu) {
  const int n = static_cast<int>(Acl.rows());
  if (n < 1 || Acl.cols() != n) throw std::invalid_argument("solve_lyapunov_P: matrix must be square");
  if (n > 10) throw std::invalid_argument("solve_lyapunov_P: n > 10 not supported");
  if (!(mu > 0.0)) throw std::invalid_argument("solve_lyapunov_P: mu must be > 0");
  const Mat I = Mat::Identity(n, n);
  const Mat At = Acl.transpose();
  // vec(P A) = (A^T kron I) vec P, vec(A^T P) = (I kron A^T) vec P
  Mat L = Mat::Zero(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      L.block(i * n, j * n, n, n) += At(i, j) * I;
      if (i == j) L.block(i * n, j * n, n, n) += At;
    }
  Eigen::FullPivLU<Mat> lu(L);
  if (!lu.isInvertible())
    throw std::domain_error("solve_lyapunov_P: singular Lyapunov operator (matrix not Hurwitz)");
  const Mat rhs = -2.0 * mu * I;
  const Vec p = lu.solve(Eigen::Map<const Vec>(rhs.data(), n * n));
  Mat P = Eigen::Map<const Mat>(p.data(), n, n);
  P = 0.5 * (P + P.transpose()).eval();
  Eigen::LLT<Mat> llt(P);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("solve_lyapunov_P: solution is not positive definite (matrix not Hurwitz)");
  return P;
}

double lyapunov_residual(const Mat& P, const Mat& Acl, double mu) {
  const Mat R = P * Acl + Acl.transpose() * P +
                2.0 * mu * Mat::Identity(P.rows(), P.cols());
  return spectral_norm(R);
}

double spectral_norm(const Mat& M, double tol) {
  if (M.size() == 0) return 0.0;
  const Mat G = M.transpose() * M;
  Vec v = Vec::Ones(G.cols());
  // A fixed irregular start avoids being orthogonal to the top eigenvector.
  for (int i = 0; i < v.size(); ++i) v[i] += 0.1 * (i + 1) / v.size();
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Vec w = G * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    const double next = v.dot(w);
    v = w / nw;
    if (std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next))) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

double omega_of_theta(double theta, double normP, double c1, double mu,
                      double Lt, double r, int n) {
  const double phi = theta * mu / (2.0 * normP);
  const double n3 = double(n) * n * n;
  return std::sqrt(3.0 * n3 * normP * normP * Lt * Lt * std::exp(phi * r) /
                   (theta * mu * c1 * phi));
}

namespace {

double smallest_eigenvalue(const Mat& P) {
  Eigen::SelfAdjointEigenSolver<Mat> es(P, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

ThetaSelection select_theta(const Mat& P, double mu, double Lt, double r, int n,
                            double search_max) {
  if (!(mu > 0.0) || !(r > 0.0) || n < 1 || !(search_max >= 1.0) || Lt < 0.0)
    throw std::invalid_argument("select_theta: nonpositive design input");
  const double normP = spectral_norm(P);
  const double c1 = smallest_eigenvalue(P);
  if (!(c1 > 0.0)) throw std::invalid_argument("select_theta: P must be positive definite");
  ThetaSelection out;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0;; ++k) {
    const double theta = std::pow(1.05, k);
    if (theta > search_max * (1 + 1e-12)) break;
    const double Om = omega_of_theta(theta, normP, c1, mu, Lt, r, n);
    if (!(Om < 1.0)) continue;
    if (!out.feasible) out.window_lo = theta;
    out.window_hi = theta;
    out.feasible = true;
    if (Om < best) {
      best = Om;
      out.theta = theta;
      out.Omega = Om;
    }
  }
  return out;
}

Mat delta_theta(double theta, int n) {
  Vec d(n);
  double p = 1.0;
  for (int i = 0; i < n; ++i) d[i] = (p *= theta);
  return d.asDiagonal();
}

std::optional<double> HighGainDesign::max_delta() const {
  return observer::max_sampling_diameter(gamma(), L(), sigma);
}

HighGainDesign design_highgain(const DesignInputs& in) {
  if (in.n < 1) throw std::invalid_argument("highgain design: n must be >= 1");
  if (!(in.mu > 0.0)) throw std::invalid_argument("highgain design: mu must be > 0");
  if (!(in.r > 0.0)) throw std::invalid_argument("highgain design: r must be > 0");
  if (in.Lt < 0.0) throw std::invalid_argument("highgain design: L must be >= 0");

  HighGainDesign d;
  d.n = in.n;
  d.mu = in.mu;
  d.pole = in.pole;
  d.Lt = in.Lt;
  d.r = in.r;
  auto cp = companion_pair(in.n);
  d.A = cp.A;
  d.c = cp.c;
  d.K = place_K(in.n, in.pole);
  const Mat Acl = d.A + d.K * d.c.transpose();
  d.P = solve_lyapunov_P(Acl, in.mu);
  d.normP = spectral_norm(d.P);
  d.normPK = (d.P * d.K).norm();
  d.c1 = smallest_eigenvalue(d.P);

  if (in.theta) {
    if (!(*in.theta >= 1.0)) throw std::invalid_argument("highgain design: theta must be >= 1");
    d.theta = *in.theta;
    d.Omega = omega_of_theta(d.theta, d.normP, d.c1, d.mu, d.Lt, d.r, d.n);
    if (!(d.Omega < 1.0))
      throw std::domain_error("highgain design: Omega >= 1 at the requested theta");
  } else {
    const auto sel = select_theta(d.P, d.mu, d.Lt, d.r, d.n, in.search_max);
    if (!sel.feasible)
      throw std::domain_error("highgain design: no theta on the search grid gives Omega < 1");
    d.theta = sel.theta;
    d.Omega = sel.Omega;
  }

  const double th = d.theta, n = d.n;
  d.phi = th * d.mu / (2.0 * d.normP);
  d.sigma = d.phi / 2.0;
  const double inv = 1.0 / (1.0 - d.Omega);
  const double esr = std::exp(d.sigma * d.r);
  const double den = th * d.mu * d.c1 * d.phi;
  // |e| <= theta^n |eps| and |eps_0| <= |e_0| / theta give theta^(n-1) on the
  // initial term.
  d.Q1 = inv * (std::sqrt(d.normP / d.c1) + d.Omega) * std::pow(th, n - 1) * esr;
  d.Q2 = inv * std::pow(th, n) * std::sqrt(3.0 * d.normPK * d.normPK / den) * esr;
  d.Q3 = inv * std::pow(th, n - 1) * std::sqrt(3.0 * d.normP * d.normP / den) * esr;
  return d;
}

void TriangularSystem::validate() const {
  if (n < 1) throw std::invalid_argument("triangular system: n must be >= 1");
  if (static_cast<int>(f.size()) != n)
    throw std::invalid_argument("triangular system: need one f_i per state");
  if (!(r > 0.0)) throw std::invalid_argument("triangular system: r must be > 0");
  if (Lt < 0.0) throw std::invalid_argument("triangular system: L must be >= 0");
  for (const auto& fi : f)
    if (!fi) throw std::invalid_argument("triangular system: empty f_i");
}

bool TriangularSystem::vanishes_at_zero() const {
  const auto zero = HistoryBuffer::constant(Vec::Zero(n), r, 0.0, r / 8);
  const HistoryView v(zero);
  const Vec u = Vec::Zero(m);
  for (const auto& fi : f)
    if (std::abs(fi(0.0, v, u)) > 1e-14) return false;
  return true;
}

TriangularSystem example_system(double r) {
  TriangularSystem s;
  s.n = 2;
  s.m = 1;
  s.r = r;
  s.Lt = 0.1;
  s.f.push_back([r](double t, const HistoryView& x, const Vec&) {
    return 0.05 * x.at(t - r, 0);
  });
  s.f.push_back([](double, const HistoryView& x, const Vec& u) {
    return 0.05 * std::clamp(x.now()[1], -1.0, 1.0) + u[0];
  });
  return s;
}

observer::ObservedSystem as_observed(const TriangularSystem& sys) {
  sys.validate();
  observer::ObservedSystem o;
  o.n = sys.n;
  o.k = 1;
  o.m = sys.m;
  o.q = sys.n;
  o.delay = sys.r;
  o.output_lipschitz = sys.Lt + 1.0;
  o.plant = [sys](double t, const HistoryView& x, const Vec& u, const Vec& d) {
    const Vec now = x.now();
    Vec dx(sys.n);
    for (int i = 0; i < sys.n; ++i)
      dx[i] = sys.f[i](t, x, u) + (i + 1 < sys.n ? now[i + 1] : 0.0) + d[i];
    return dx;
  };
  o.output = [](const HistoryView& x) { return Vec::Constant(1, x.now()[0]); };
  o.output_derivative = [sys](const HistoryView& x, const Vec& u, const Vec& d) {
    const double t = x.now_time();
    const double x2 = sys.n > 1 ? x.now()[1] : 0.0;
    return Vec::Constant(1, sys.f[0](t, x, u) + x2 + d[0]);
  };
  return o;
}

observer::ReoSpec highgain_reo(const TriangularSystem& sys,
                               const HighGainDesign& d) {
  sys.validate();
  if (sys.n != d.n) throw std::invalid_argument("highgain: design order differs from system");
  observer::ReoSpec reo;
  reo.l = sys.n;
  Vec gain(sys.n);
  double p = 1.0;
  for (int i = 0; i < sys.n; ++i) gain[i] = (p *= d.theta) * d.K[i];
  reo.rhs = [sys, gain](double t, const HistoryView& z, const Vec& y, const Vec& u) {
    const Vec now = z.now();
    const double innov = now[0] - y[0];
    Vec dz(sys.n);
    for (int i = 0; i < sys.n; ++i)
      dz[i] = sys.f[i](t, z, u) + (i + 1 < sys.n ? now[i + 1] : 0.0) + gain[i] * innov;
    return dz;
  };
  reo.gamma = d.Q2;
  reo.sigma = d.sigma;
  const double q1 = d.Q1, q3 = d.Q3;
  reo.a = [q1](double s) { return q1 * s; };
  reo.g = [q3](double s) { return q3 * s; };
  return reo;
}

double lyapunov_V(const HighGainDesign& d, const Vec& e) {
  const Vec eps = delta_theta(d.theta, d.n).diagonal().cwiseInverse().cwiseProduct(e);
  return eps.dot(d.P * eps);
}

double forward_completeness_bound(int n, double Lt, double t, double x0_norm,
                                  double d_sup, double f0_sup) {
  if (n < 1 || Lt < 0.0 || t < 0.0)
    throw std::invalid_argument("forward_completeness_bound: bad arguments");
  return std::exp((n * Lt + 1.0) * t) * (x0_norm + t * d_sup + t * f0_sup);
}

SimTrace run_highgain_observer(const TriangularSystem& sys,
                               const HighGainDesign& design,
                               const signals::SamplingSchedule& sched,
                               const HistoryBuffer& init_x,
                               const HistoryBuffer& init_z,
                               const observer::Exogenous& in,
                               const HighGainRun& run) {
  const auto obs = as_observed(sys);
  const auto reo = highgain_reo(sys, design);
  observer::RunOptions opts;
  opts.h = run.h > 0.0 ? run.h : std::min(sched.min_gap(), sys.r / 10.0);
  if (opts.h > sys.r * (1 + 1e-12))
    throw std::invalid_argument("highgain run: step h must not exceed r");
  opts.horizon = run.horizon;
  opts.record_interval = run.record_interval;
  opts.lyapunov = [design](double, const HistoryView& x, const HistoryView& z) {
    return lyapunov_V(design, z.now() - x.now());
  };
  if (run.envelope) {
    const auto omega =
        observer::certified_rate(design.gamma(), design.L(), design.sigma, sched.diameter);
    if (omega) {
      try {
        opts.envelope = observer::EnvelopeParams::make(*omega, sched.diameter,
                                                       design.L(), design.gamma());
      } catch (const std::domain_error&) {
      }
    }
  }
  return observer::run_sampled_observer(obs, reo, sched, init_x, init_z, in, opts);
}

}  // namespace obslab::highgain
