#include "obslab/signals.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace obslab::signals {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_from_bits(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::invalid_argument(std::string(what) + " must be positive");
}

}  // namespace

double SamplingSchedule::min_gap() const {
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < instants.size(); ++i)
    g = std::min(g, instants[i] - instants[i - 1]);
  return g;
}

double SamplingSchedule::max_gap() const {
  double g = 0.0;
  for (std::size_t i = 1; i < instants.size(); ++i)
    g = std::max(g, instants[i] - instants[i - 1]);
  return g;
}

SamplingSchedule uniform_schedule(double delta, double horizon) {
  require_positive(delta, "sampling diameter");
  require_positive(horizon, "horizon");
  SamplingSchedule s;
  s.diameter = delta;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * delta;
    s.instants.push_back(t);
    if (t >= horizon * (1 - 1e-12)) break;
  }
  return s;
}

SamplingSchedule jittered_schedule(double delta, double horizon,
                                   std::uint64_t seed) {
  require_positive(delta, "sampling diameter");
  require_positive(horizon, "horizon");
  std::mt19937_64 gen(seed);
  SamplingSchedule s;
  s.diameter = delta;
  double t = 0.0;
  s.instants.push_back(t);
  while (t < horizon) {
    // Manual conversion keeps the stream identical across standard libraries.
    const double u = unit_from_bits(gen());
    t += delta * (0.5 + 0.5 * u);
    s.instants.push_back(t);
  }
  return s;
}

bool validate_schedule(const SamplingSchedule& s, double delta) {
  if (s.instants.empty() || s.instants.front() != 0.0) return false;
  if (!(delta > 0.0)) return false;
  for (std::size_t i = 1; i < s.instants.size(); ++i) {
    const double a = s.instants[i - 1], b = s.instants[i];
    if (!(b > a)) return false;
    // Gaps of k*delta - (k-1)*delta may exceed delta by rounding only.
    if (b - a > delta + 1e-12 * std::max(1.0, std::abs(b))) return false;
  }
  return true;
}

SignalSpec SignalSpec::constant(double c) {
  SignalSpec s;
  s.kind = SignalKind::constant;
  s.amplitude = c;
  return s;
}

SignalSpec SignalSpec::sinusoid(double amplitude, double omega, double phase) {
  SignalSpec s;
  s.kind = SignalKind::sinusoid;
  s.amplitude = amplitude;
  s.frequency = omega;
  s.phase = phase;
  return s;
}

SignalSpec SignalSpec::uniform_random(double amplitude, std::uint64_t seed) {
  SignalSpec s;
  s.kind = SignalKind::uniform_random;
  s.amplitude = amplitude;
  s.seed = seed;
  return s;
}

double SignalSpec::operator()(double t) const {
  switch (kind) {
    case SignalKind::zero:
      return 0.0;
    case SignalKind::constant:
      return amplitude;
    case SignalKind::sinusoid:
      return amplitude * std::sin(frequency * t + phase);
    case SignalKind::uniform_random: {
      const double tt = t == 0.0 ? 0.0 : t;  // fold -0 onto +0
      const std::uint64_t key =
          splitmix64(seed ^ splitmix64(std::bit_cast<std::uint64_t>(tt)));
      return amplitude * (2.0 * unit_from_bits(key) - 1.0);
    }
  }
  return 0.0;
}

double SignalSpec::bound() const {
  return kind == SignalKind::zero ? 0.0 : std::abs(amplitude);
}

std::string to_string(SignalKind k) {
  switch (k) {
    case SignalKind::zero: return "zero";
    case SignalKind::constant: return "constant";
    case SignalKind::sinusoid: return "sinusoid";
    case SignalKind::uniform_random: return "uniform_random";
  }
  return "zero";
}

SignalKind signal_kind_from_string(const std::string& s) {
  if (s == "zero") return SignalKind::zero;
  if (s == "constant") return SignalKind::constant;
  if (s == "sinusoid") return SignalKind::sinusoid;
  if (s == "uniform_random") return SignalKind::uniform_random;
  throw std::invalid_argument("unknown signal kind '" + s + "'");
}

VectorSignal VectorSignal::scalar(const SignalSpec& s) {
  return {s, Eigen::VectorXd::Ones(1)};
}

Eigen::VectorXd VectorSignal::operator()(double t) const {
  return spec(t) * direction;
}

}  // namespace obslab::signals
