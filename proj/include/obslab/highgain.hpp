#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "obslab/dde.hpp"
#include "obslab/observer.hpp"
#include "obslab/signals.hpp"
#include "obslab/trace.hpp"

namespace obslab::highgain {

using dde::HistoryBuffer;
using dde::HistoryView;

struct CompanionPair {
  Mat A;
  Vec c;
};

CompanionPair companion_pair(int n);

// Gains with char poly of A + K c^T equal to (s - pole)^n.
Vec place_K(int n, double pole);

// Solves P Acl + Acl^T P = -2 mu I. Throws std::domain_error when the result
// is not positive definite.
Mat solve_lyapunov_P(const Mat& Acl, double mu);

double lyapunov_residual(const Mat& P, const Mat& Acl, double mu);
double spectral_norm(const Mat& M, double tol = 1e-10);
double max_real_eigenvalue(const Mat& M);

// Omega(theta) for the design inequality.
double omega_of_theta(double theta, double normP, double c1, double mu,
                      double Lt, double r, int n);

struct ThetaSelection {
  bool feasible = false;
  double theta = 0.0;
  double Omega = 0.0;
  // First and last grid points with Omega < 1.
  double window_lo = 0.0;
  double window_hi = 0.0;
};

ThetaSelection select_theta(const Mat& P, double mu, double Lt, double r, int n,
                            double search_max = 1e6);

struct HighGainDesign {
  int n = 0;
  Mat A;
  Vec c;
  Vec K;
  Mat P;
  double mu = 1.0;
  double pole = -1.0;
  double theta = 1.0;
  double normP = 0.0;
  double normPK = 0.0;
  double c1 = 0.0;
  double phi = 0.0;
  double Omega = 0.0;
  double sigma = 0.0;
  double Q1 = 0.0, Q2 = 0.0, Q3 = 0.0;
  double Lt = 0.0;
  double r = 0.0;

  double gamma() const { return Q2; }
  // Lipschitz constant of the output derivative f_1 + x_2.
  double L() const { return Lt + 1.0; }
  std::optional<double> max_delta() const;
};

struct DesignInputs {
  int n = 2;
  double pole = -1.0;
  double mu = 1.0;
  double Lt = 0.1;
  double r = 0.1;
  double search_max = 1e6;
  std::optional<double> theta;  // override; must still give Omega < 1
};

// Throws std::domain_error when no theta on the grid satisfies Omega < 1.
HighGainDesign design_highgain(const DesignInputs& in);

// Delta_theta = diag(theta, ..., theta^n)
Mat delta_theta(double theta, int n);

struct TriangularSystem {
  int n = 0;
  int m = 1;
  double r = 0.0;
  double Lt = 0.0;
  // f_i(t, x view, u) for i = 0..n-1; f_i may only read components 0..i.
  std::vector<std::function<double(double t, const HistoryView& x, const Vec& u)>> f;

  void validate() const;
  // Checks that every f_i vanishes on zero histories with u = 0.
  bool vanishes_at_zero() const;
};

// n = 2 example: f_1 = 0.05 x_1(t - r), f_2 = 0.05 sat(x_2(t)) + u.
TriangularSystem example_system(double r);

observer::ObservedSystem as_observed(const TriangularSystem& sys);
observer::ReoSpec highgain_reo(const TriangularSystem& sys,
                               const HighGainDesign& d);

// V = eps^T P eps with eps = Delta_theta^{-1}(z - x).
double lyapunov_V(const HighGainDesign& d, const Vec& e);

// Forward completeness estimate exp(rate t) (|x_0| + t sup|d| + t sup sum|f_i(0,u)|)
// with rate = n L~ + 1. The chain terms x_{i+1} contribute the + 1.
double forward_completeness_bound(int n, double Lt, double t, double x0_norm,
                                  double d_sup, double f0_sup);

struct HighGainRun {
  double h = 0.0;
  double horizon = 0.0;
  double record_interval = 0.0;
  bool envelope = true;
};

SimTrace run_highgain_observer(const TriangularSystem& sys,
                               const HighGainDesign& design,
                               const signals::SamplingSchedule& sched,
                               const HistoryBuffer& init_x,
                               const HistoryBuffer& init_z,
                               const observer::Exogenous& in,
                               const HighGainRun& run);

}  // namespace obslab::highgain
