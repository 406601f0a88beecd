#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace obslab::signals {

struct SamplingSchedule {
  std::vector<double> instants;
  double diameter = 0.0;

  double min_gap() const;
  double max_gap() const;
};

SamplingSchedule uniform_schedule(double delta, double horizon);
SamplingSchedule jittered_schedule(double delta, double horizon,
                                   std::uint64_t seed);
bool validate_schedule(const SamplingSchedule& s, double delta);

enum class SignalKind { zero, constant, sinusoid, uniform_random };

// Scalar signal. Random values are a hash of (seed, t) so evaluation order
// never matters.
struct SignalSpec {
  SignalKind kind = SignalKind::zero;
  double amplitude = 0.0;  // constant value for `constant`
  double frequency = 0.0;  // angular
  double phase = 0.0;
  std::uint64_t seed = 0;

  static SignalSpec zero() { return {}; }
  static SignalSpec constant(double c);
  static SignalSpec sinusoid(double amplitude, double omega, double phase = 0);
  static SignalSpec uniform_random(double amplitude, std::uint64_t seed);

  double operator()(double t) const;
  // Upper bound on |value| over all t.
  double bound() const;
};

std::string to_string(SignalKind k);
SignalKind signal_kind_from_string(const std::string& s);

// SignalSpec scaled along a fixed direction.
struct VectorSignal {
  SignalSpec spec;
  Eigen::VectorXd direction;

  static VectorSignal scalar(const SignalSpec& s);
  Eigen::VectorXd operator()(double t) const;
  int dim() const { return static_cast<int>(direction.size()); }
};

}  // namespace obslab::signals
