#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "obslab/dde.hpp"
#include "obslab/signals.hpp"
#include "obslab/trace.hpp"

namespace obslab::observer {

using dde::HistoryBuffer;
using dde::HistoryView;
using dde::Input;

// Plant x' = f(x_t, u, d) with output y = h(x_t) and dy/dt = R(x_t, u, d).
struct ObservedSystem {
  int n = 0, k = 0, m = 1, q = 1;
  double delay = 0.0;
  // Lipschitz constant of R with respect to the state history.
  double output_lipschitz = 0.0;
  dde::DelayFunctional plant;
  std::function<Vec(const HistoryView& x)> output;
  std::function<Vec(const HistoryView& x, const Vec& u, const Vec& d)>
      output_derivative;

  // Throws std::invalid_argument when dims are inconsistent or h(0), R(0,0,0)
  // are not zero on the zero history.
  void validate() const;
};

// Observer z' = F(z_t, y, u) with estimate x_hat = the first n components of z
// (the lift used by both shipped designs selects a block of z).
struct ReoSpec {
  int l = 0;
  std::function<Vec(double t, const HistoryView& z, const Vec& y,
                    const Vec& u)>
      rhs;
  double gamma = 0.0;
  double sigma = 0.0;
  std::function<double(double)> a;
  std::function<double(double)> g = [](double) { return 0.0; };

  void validate(int n) const;
};

// Constants of the sampled-data error estimate.
struct EnvelopeParams {
  double omega = 0.0;
  double delta = 0.0;
  double L = 0.0;
  double gamma = 0.0;
  double B = 0.0;
  double amplification = 1.0;

  // Throws std::domain_error when B >= 1.
  static EnvelopeParams make(double omega, double delta, double L,
                             double gamma);
};

// (1/omega) ln(1 + omega/(gamma L)); nullopt means no restriction (L = 0).
std::optional<double> max_sampling_diameter(double gamma, double L,
                                            double omega);
// Largest omega in (0, sigma] for which delta stays below the diameter bound,
// or nullopt if none exists.
std::optional<double> certified_rate(double gamma, double L, double sigma,
                                     double delta);

// g~(s) = (1-B)^-1 (g(s) + gamma delta s).
double disturbance_gain(const EnvelopeParams& p,
                        const std::function<double(double)>& g, double s);

// Envelope at every grid time; the sups run over the grid.
std::vector<double> envelope_series(const EnvelopeParams& p, double a_of_init,
                                    std::span<const double> times,
                                    std::span<const double> noise,
                                    std::span<const double> dist,
                                    const std::function<double(double)>& g);

double error_envelope(const EnvelopeParams& p, double a_of_init,
                      const std::function<double(double)>& noise,
                      const std::function<double(double)>& dist, double t,
                      std::span<const double> grid,
                      const std::function<double(double)>& g = {});

struct Exogenous {
  Input u;   // m-dim, ignored in closed loop
  Input d;   // q-dim
  Input xi;  // k-dim
};

using Lyapunov = std::function<double(double t, const HistoryView& x,
                                      const HistoryView& xhat)>;
using Feedback = std::function<Vec(double t, const HistoryView& xhat)>;

struct RunOptions {
  double h = 0.0;
  double horizon = 0.0;          // sampled runs default to the last instant
  double record_interval = 0.0;  // 0 records every step
  std::optional<EnvelopeParams> envelope;
  Lyapunov lyapunov;
};

SimTrace run_continuous_reo(const ObservedSystem& sys, const ReoSpec& reo,
                            const HistoryBuffer& init_x,
                            const HistoryBuffer& init_z, const Exogenous& in,
                            const RunOptions& opts);

SimTrace run_sampled_observer(const ObservedSystem& sys, const ReoSpec& reo,
                              const signals::SamplingSchedule& sched,
                              const HistoryBuffer& init_x,
                              const HistoryBuffer& init_z,
                              const Exogenous& in, const RunOptions& opts);

SimTrace run_closed_loop(const ObservedSystem& sys, const ReoSpec& reo,
                         const Feedback& feedback,
                         const signals::SamplingSchedule& sched,
                         const HistoryBuffer& init_x,
                         const HistoryBuffer& init_z, const Exogenous& in,
                         const RunOptions& opts);

// Least-squares slope of -log(channel) against t on [t_start, t_end].
double estimate_decay_rate(const SimTrace& trace, const std::string& channel,
                           double t_start,
                           double t_end = std::numeric_limits<double>::infinity());
double estimate_decay_rate(std::span<const double> t,
                           std::span<const double> values, double t_start,
                           double t_end = std::numeric_limits<double>::infinity());

// Event times: sampling instants merged with extra boundaries; near-equal
// times (within 1e-12 relative) collapse onto the sampling instant.
std::vector<double> merge_events(std::span<const double> instants,
                                 std::span<const double> extra, double horizon);

}  // namespace obslab::observer
