#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "obslab/observer.hpp"

namespace obslab::observer {

EnvelopeParams EnvelopeParams::make(double omega, double delta, double L,
                                    double gamma) {
  if (!(omega > 0.0)) throw std::invalid_argument("envelope: omega must be > 0");
  if (!(delta >= 0.0)) throw std::invalid_argument("envelope: delta must be >= 0");
  if (!(L >= 0.0)) throw std::invalid_argument("envelope: L must be >= 0");
  if (!(gamma > 0.0)) throw std::invalid_argument("envelope: gamma must be > 0");
  EnvelopeParams p;
  p.omega = omega;
  p.delta = delta;
  p.L = L;
  p.gamma = gamma;
  p.B = gamma * L * std::expm1(omega * delta) / omega;
  if (!(p.B < 1.0))
    throw std::domain_error("envelope: B = " + std::to_string(p.B) +
                            " >= 1, sampling diameter too large");
  p.amplification = 1.0 / (1.0 - p.B);
  return p;
}

std::optional<double> max_sampling_diameter(double gamma, double L,
                                            double omega) {
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
  if (!(omega > 0.0)) throw std::invalid_argument("omega must be > 0");
  if (!(L >= 0.0)) throw std::invalid_argument("L must be >= 0");
  if (L == 0.0) return std::nullopt;
  return std::log1p(omega / (gamma * L)) / omega;
}

std::optional<double> certified_rate(double gamma, double L, double sigma,
                                     double delta) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be > 0");
  auto ok = [&](double w) {
    auto b = max_sampling_diameter(gamma, L, w);
    return !b || delta < *b;
  };
  if (ok(sigma)) return sigma;
  // The bound decreases in omega toward 1/(gamma L) as omega -> 0.
  if (!(delta < 1.0 / (gamma * L))) return std::nullopt;
  double lo = 0.0, hi = sigma;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  if (lo <= 0.0) return std::nullopt;
  return lo;
}

double disturbance_gain(const EnvelopeParams& p,
                        const std::function<double(double)>& g, double s) {
  const double gs = g ? g(s) : 0.0;
  return p.amplification * (gs + p.gamma * p.delta * s);
}

std::vector<double> envelope_series(const EnvelopeParams& p, double a_of_init,
                                    std::span<const double> times,
                                    std::span<const double> noise,
                                    std::span<const double> dist,
                                    const std::function<double(double)>& g) {
  if (noise.size() != times.size() || dist.size() != times.size())
    throw std::invalid_argument("envelope_series: length mismatch");
  std::vector<double> out(times.size());
  double noise_sup = 0.0, dist_sup = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (i > 0) noise_sup *= std::exp(-p.omega * (times[i] - times[i - 1]));
    noise_sup = std::max(noise_sup, std::abs(noise[i]));
    dist_sup = std::max(dist_sup, disturbance_gain(p, g, std::abs(dist[i])));
    out[i] = p.amplification * std::exp(-p.omega * times[i]) * a_of_init +
             p.amplification * p.gamma * std::exp(p.omega * p.delta) * noise_sup +
             dist_sup;
  }
  return out;
}

double error_envelope(const EnvelopeParams& p, double a_of_init,
                      const std::function<double(double)>& noise,
                      const std::function<double(double)>& dist, double t,
                      std::span<const double> grid,
                      const std::function<double(double)>& g) {
  std::vector<double> ts, ns, ds;
  for (double s : grid) {
    if (s > t) break;
    ts.push_back(s);
    ns.push_back(noise ? noise(s) : 0.0);
    ds.push_back(dist ? dist(s) : 0.0);
  }
  if (ts.empty() || ts.back() < t) {
    ts.push_back(t);
    ns.push_back(noise ? noise(t) : 0.0);
    ds.push_back(dist ? dist(t) : 0.0);
  }
  return envelope_series(p, a_of_init, ts, ns, ds, g).back();
}

double estimate_decay_rate(std::span<const double> t,
                           std::span<const double> values, double t_start,
                           double t_end) {
  if (t.size() != values.size())
    throw std::invalid_argument("estimate_decay_rate: length mismatch");
  constexpr double floor = 1e-12;
  double n = 0, st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_start || t[i] > t_end || !(values[i] > floor)) continue;
    const double y = -std::log(values[i]);
    n += 1;
    st += t[i];
    sy += y;
    stt += t[i] * t[i];
    sty += t[i] * y;
  }
  if (n < 4)
    throw std::invalid_argument(
        "estimate_decay_rate: fewer than 4 samples above the floor");
  const double den = n * stt - st * st;
  if (!(den > 0.0)) throw std::invalid_argument("estimate_decay_rate: degenerate window");
  return (n * sty - st * sy) / den;
}

double estimate_decay_rate(const SimTrace& trace, const std::string& channel,
                           double t_start, double t_end) {
  const auto values = trace.channel(channel);
  return estimate_decay_rate(trace.t, values, t_start, t_end);
}

std::vector<double> merge_events(std::span<const double> instants,
                                 std::span<const double> extra,
                                 double horizon) {
  std::vector<double> out;
  std::size_t i = 0, j = 0;
  auto near = [](double a, double b) {
    return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a));
  };
  bool last_is_instant = false;
  while (i < instants.size() || j < extra.size()) {
    double next;
    bool is_instant;
    if (j >= extra.size() || (i < instants.size() && instants[i] <= extra[j])) {
      next = instants[i++];
      is_instant = true;
    } else {
      next = extra[j++];
      is_instant = false;
    }
    if (next > horizon && !near(next, horizon)) continue;
    if (!out.empty() && near(out.back(), next)) {
      // Keep the sampling instant's exact value.
      if (is_instant && !last_is_instant) {
        out.back() = next;
        last_is_instant = true;
      }
      continue;
    }
    out.push_back(next);
    last_is_instant = is_instant;
  }
  return out;
}

}  // namespace obslab::observer
