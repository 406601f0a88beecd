#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "obslab/dde.hpp"
#include "obslab/observer.hpp"
#include "obslab/signals.hpp"
#include "obslab/trace.hpp"

namespace obslab::reactor {

using dde::HistoryBuffer;
using dde::HistoryView;
using Scalar = std::function<double(double)>;

struct ReactorParams {
  double mu = 1.0;
  double zeta = 1.0;
  double c = 1.0;
  double Phi = 1.0;  // Lipschitz constant of theta
  Scalar theta = [](double x) { return std::tanh(x); };

  double delay() const { return 1.0 / c; }
  void validate() const;
};

// Initial profile v0 on [0, 1] with its derivatives. d2v is optional.
struct ProfileFunction {
  Scalar v;
  Scalar dv;
  Scalar d2v;

  static ProfileFunction zero();
  // v0(z) = A sin(pi z / 2), compatible with xbar0 = c A pi / (2 zeta).
  static ProfileFunction half_sine(double amplitude);
};

struct ReactorField {
  double xbar = 0.0;
  std::vector<double> profile;  // M + 1 nodes on [0, 1]

  int M() const { return static_cast<int>(profile.size()) - 1; }
  static ReactorField sample(const ProfileFunction& v0, double xbar0, int M);
};

struct Compatibility {
  bool ok = false;
  double boundary_residual = 0.0;
  double slope_residual = 0.0;
};

Compatibility check_compatibility(const ProfileFunction& v0, double xbar0,
                                  const ReactorParams& p);
double compatible_xbar(const ProfileFunction& v0, const ReactorParams& p);

// Histories of (x1, x2) on [-r, 0] for the delay representation.
struct ReactorDelayState {
  HistoryBuffer history;
  double reconstruction_residual = 0.0;
};

ReactorDelayState lift_initial_condition(const ProfileFunction& v0,
                                         double xbar0, const ReactorParams& p,
                                         double spacing = 1e-3);

struct ReactorGains {
  double R = 0, b = 0, Q = 0, k1 = 0, k2 = 0;
};

ReactorGains design_reactor_gains(const ReactorParams& p);

// Constants of the continuous-measurement error estimate for the observer,
// read off the Lyapunov argument for a chosen sigma in (0, zeta/4).
struct ReoConstants {
  double sigma = 0.0;
  double K1 = 0.0;       // smallest eigenvalue of the quadratic form S
  double K2 = 0.0;       // V <= K2 |e_t|^2
  double a_coef = 0.0;   // a(s) = a_coef s
  double gamma = 0.0;    // noise gain
  double L = 0.0;        // Lipschitz constant of the output derivative
  double noise_v_coef = 0.0;  // (|k2 - b k1|^2 + R k1^2) / 4
};

ReoConstants reactor_reo_constants(const ReactorParams& p,
                                   const ReactorGains& g, double sigma);

// zeta * int_{t-r}^t exp(zeta (s - t)) x(s) ds, trapezoid on the knot grid of
// the given component.
double delay_output_identity(const HistoryBuffer& xbar, double t,
                             const ReactorParams& p, int component = 0);
// Same integral with `panels` uniform trapezoid panels.
double delay_output_identity(const HistoryView& xbar, double t,
                             const ReactorParams& p, int panels);

// v_hat(t, z_j) on z_j = j/M, cumulative trapezoid on the nodes t - r z_j.
std::vector<double> reconstruct_profile(const HistoryView& z2, double t,
                                        const ReactorParams& p, int M);
std::vector<double> reconstruct_profile(const HistoryBuffer& z2, double t,
                                        const ReactorParams& p, int M,
                                        int component = 0);

// int_0^1 int_{t-r l}^t x(s) exp(-zeta (t-s)) ds dl by nested trapezoid with
// n panels in l and on the same uniform grid in s.
double nested_double_integral(const HistoryView& x, double t,
                              const ReactorParams& p, int n);
// Same quantity as a single integral with kernel exp(-zeta tau)(1 - tau/r),
// trapezoid on the knot grid.
double kernel_double_integral(const HistoryView& x, double t,
                              const ReactorParams& p);

// Lyapunov functional on error histories. x and z are 2-component views;
// the integral uses `panels` uniform panels.
double lyapunov_V_reactor(const HistoryView& x, const HistoryView& z, double t,
                          const ReactorGains& g, const ReactorParams& p,
                          int panels = 400);
double lyapunov_V_reactor(double e1, double e2, double weighted_integral,
                          const ReactorGains& g);

double reactor_feedback(double xhat2, std::span<const double> vhat,
                        double Q_fb, const ReactorParams& p);
// Same law given the mean of v_hat over [0, 1].
double reactor_feedback(double xhat2, double vhat_mean, double Q_fb,
                        const ReactorParams& p);

// Trapezoid of samples on a uniform grid over [0, 1].
double trapezoid_unit(std::span<const double> v);

// ---------------------------------------------------------------------------
// Transport plant advanced along characteristics.

class ReactorPlant {
 public:
  ReactorPlant(const ReactorField& init, const ReactorParams& p);

  int M() const { return M_; }
  double cell_dt() const { return H_; }
  const std::vector<double>& profile() const { return v_; }

  // Field quantities at elapsed time s in [0, H] since the last shift, where
  // B is the source integral zeta * int_0^s exp(-zeta (s - q)) xbar dq.
  double outlet(double s, double B) const;
  double mean(double s, double B) const;
  std::vector<double> profile_at(double s, double B) const;

  double xbar_rate(double xbar, double mean_v, double u) const;
  double source_rate(double xbar, double B) const;

  // Commits a full cell step with source value B_H.
  void shift(double B_H);

 private:
  double interp(double z) const;
  double cumulative(double z) const;

  ReactorParams p_;
  int M_;
  double H_;
  double decay_H_;
  std::vector<double> v_;
  std::vector<double> cum_;
};

struct PdeOptions {
  bool freeze_xbar = false;
  int store_profile_every = 0;  // 0: only the final profile
  // Optional x-bar history on [-r, 0] prepended to the output history.
  const HistoryBuffer* xbar_prehistory = nullptr;
};

struct FieldTrace {
  std::vector<double> t;
  std::vector<double> xbar;
  std::vector<double> outlet;
  std::vector<double> mean;
  std::vector<double> profile_times;
  std::vector<std::vector<double>> profiles;
  HistoryBuffer xbar_history;  // dim 1, full record
};

FieldTrace solve_pde_reactor(const ReactorField& init, const Scalar& u,
                             const ReactorParams& p, double horizon, double h,
                             int M, const PdeOptions& opts = {});

// ---------------------------------------------------------------------------
// Delay-system representation as an ObservedSystem with its REO.

observer::ObservedSystem reactor_delay_system(const ReactorParams& p);
observer::ReoSpec reactor_reo(const ReactorParams& p, const ReactorGains& g,
                              double sigma);

// ---------------------------------------------------------------------------
// PDE plant co-simulated with the sampled-data observer.

struct ReactorRun {
  ReactorParams params;
  ReactorGains gains;
  int M = 400;
  double h = 0.0;                // observer step; 0 picks min(H, smallest gap)
  double horizon = 0.0;
  double record_interval = 0.0;  // multiple of H; 0 means H
  Scalar u;                      // open loop input
  Scalar xi;                     // measurement noise
  double sigma = 0.0;            // envelope rate bound; 0 means zeta/8
  bool envelope = true;
  double Q_fb = 0.0;             // closed loop only
};

struct ReactorInit {
  ProfileFunction v0;
  double xbar0 = 0.0;
};

// Observer history that matches the lifted plant history.
HistoryBuffer matched_observer_history(const ReactorInit& init,
                                       const ReactorParams& p, double spacing);

// Default sampling diameter: 0.1 times the diameter bound at omega = sigma,
// rounded down so that it divides the cell step r/M.
double default_sampling_diameter(const ReactorParams& p, const ReactorGains& g,
                                 double sigma, int M);

SimTrace run_reactor_observer(const ReactorInit& init,
                              const HistoryBuffer& init_z,
                              const signals::SamplingSchedule& sched,
                              const ReactorRun& cfg);

SimTrace run_reactor_closed_loop(const ReactorInit& init,
                                 const HistoryBuffer& init_z,
                                 const signals::SamplingSchedule& sched,
                                 const ReactorRun& cfg);

}  // namespace obslab::reactor
