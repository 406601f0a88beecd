#include <gtest/gtest.h>

#include <cmath>

#include "obslab/observer.hpp"
#include "obslab/reactor.hpp"

using namespace obslab;
using namespace obslab::observer;

namespace {

// x' = -x + 0.5 x(t - 1) + u, y = x.
ObservedSystem scalar_system() {
  ObservedSystem s;
  s.n = 1;
  s.k = 1;
  s.m = 1;
  s.q = 1;
  s.delay = 1.0;
  s.output_lipschitz = 1.5;
  s.plant = [](double t, const HistoryView& x, const Vec& u, const Vec& d) {
    return Vec::Constant(1, -x.now()[0] + 0.5 * x.at(t - 1.0, 0) + u[0] + d[0]);
  };
  s.output = [](const HistoryView& x) { return Vec::Constant(1, x.now()[0]); };
  s.output_derivative = [](const HistoryView& x, const Vec& u, const Vec& d) {
    const double t = x.now_time();
    return Vec::Constant(1, -x.now()[0] + 0.5 * x.at(t - 1.0, 0) + u[0] + d[0]);
  };
  return s;
}

ReoSpec scalar_reo(double k) {
  ReoSpec r;
  r.l = 1;
  r.rhs = [k](double t, const HistoryView& z, const Vec& y, const Vec& u) {
    return Vec::Constant(1, -z.now()[0] + 0.5 * z.at(t - 1.0, 0) + u[0] -
                                k * (z.now()[0] - y[0]));
  };
  r.gamma = k;
  r.sigma = 0.5;
  r.a = [](double s) { return 4.0 * s; };
  return r;
}

HistoryBuffer const1(double v, double r = 1.0) {
  return HistoryBuffer::constant(Vec::Constant(1, v), r, 0.0, 0.01);
}

}  // namespace

TEST(Envelope, DiameterBoundFormula) {
  EXPECT_NEAR(*max_sampling_diameter(1, 1, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(*max_sampling_diameter(2, 0.5, 0.1), std::log1p(0.1) / 0.1, 1e-15);
  EXPECT_FALSE(max_sampling_diameter(1, 0, 1).has_value());
  EXPECT_THROW(max_sampling_diameter(0, 1, 1), std::invalid_argument);
  EXPECT_THROW(max_sampling_diameter(1, 1, 0), std::invalid_argument);
}

TEST(Envelope, DiameterDecreasingAndBelowLimit) {
  for (double g : {0.5, 1.0, 2.0})
    for (double L : {0.5, 1.0, 2.0}) {
      double prev = std::numeric_limits<double>::infinity();
      for (int i = 1; i <= 50; ++i) {
        const double d = *max_sampling_diameter(g, L, 0.04 * i);
        EXPECT_LT(d, prev);
        EXPECT_LT(d, 1.0 / (g * L));
        prev = d;
      }
    }
}

TEST(Envelope, CertifiedRate) {
  // Small delta keeps sigma; larger delta lowers the rate to the bound.
  EXPECT_EQ(*certified_rate(1, 1, 0.5, 0.01), 0.5);
  const double om = *certified_rate(1, 1, 2.0, 0.6);
  EXPECT_LT(om, 2.0);
  EXPECT_NEAR(*max_sampling_diameter(1, 1, om), 0.6, 1e-9);
  EXPECT_FALSE(certified_rate(1, 1, 0.5, 1.0).has_value());
}

TEST(Envelope, ParamsAndSeries) {
  const auto p = EnvelopeParams::make(0.5, 0.1, 1.0, 2.0);
  EXPECT_NEAR(p.B, 2.0 * std::expm1(0.05) / 0.5, 1e-15);
  EXPECT_NEAR(p.amplification, 1.0 / (1.0 - p.B), 1e-15);
  EXPECT_THROW(EnvelopeParams::make(0.5, 1.0, 1.0, 2.0), std::domain_error);
  const std::vector<double> t{0.0, 1.0, 2.0}, z(3, 0.0);
  const auto env = envelope_series(p, 3.0, t, z, z, {});
  for (int i = 0; i < 3; ++i)
    EXPECT_NEAR(env[i], p.amplification * 3.0 * std::exp(-0.5 * t[i]), 1e-14);
  // Constant noise adds a constant floor.
  const std::vector<double> nz(3, 0.2);
  const auto env2 = envelope_series(p, 0.0, t, nz, z, {});
  EXPECT_NEAR(env2[2], p.amplification * 2.0 * std::exp(0.05) * 0.2, 1e-14);
  EXPECT_NEAR(error_envelope(p, 3.0, {}, {}, 1.0, t), env[1], 1e-14);
}

TEST(DecayRate, ExponentialFit) {
  std::vector<double> t, v;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(0.1 * i);
    v.push_back(5.0 * std::exp(-2.0 * t.back()));
  }
  EXPECT_NEAR(estimate_decay_rate(t, v, 0.0), 2.0, 1e-10);
  EXPECT_NEAR(estimate_decay_rate(t, v, 2.0, 5.0), 2.0, 1e-10);
  // Values below the floor are ignored.
  v[100] = 0.0;
  EXPECT_NEAR(estimate_decay_rate(t, v, 0.0), 2.0, 1e-10);
  EXPECT_THROW(estimate_decay_rate(t, v, 9.75), std::invalid_argument);
}

TEST(Events, MergeKeepsOrderAndUniqueness) {
  const std::vector<double> ins{0.0, 0.3, 0.6, 0.9}, extra{0.3, 0.5, 1.0};
  const auto m = merge_events(ins, extra, 1.0);
  const std::vector<double> want{0.0, 0.3, 0.5, 0.6, 0.9, 1.0};
  EXPECT_EQ(m, want);
}

TEST(Engine, MatchedInitialDataGivesZeroError) {
  const auto sys = scalar_system();
  const auto reo = scalar_reo(2.0);
  RunOptions o;
  o.h = 0.01;
  o.horizon = 3.0;
  Exogenous ex;
  ex.u = [](double t) { return Vec::Constant(1, std::sin(t)); };
  const auto c = run_continuous_reo(sys, reo, const1(1.0), const1(1.0), ex, o);
  for (double e : c.err_sup) EXPECT_LT(e, 1e-13);
  const auto s = run_sampled_observer(sys, reo, signals::uniform_schedule(0.1, 3.0),
                                      const1(1.0), const1(1.0), ex, o);
  for (double e : s.err_sup) EXPECT_LT(e, 1e-9);
}

TEST(Engine, ContinuousErrorDecaysBelowEnvelope) {
  const auto sys = scalar_system();
  const auto reo = scalar_reo(2.0);
  RunOptions o;
  o.h = 0.01;
  o.horizon = 8.0;
  const auto tr = run_continuous_reo(sys, reo, const1(1.0), const1(0.0), {}, o);
  ASSERT_EQ(tr.envelope.size(), tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) EXPECT_LE(tr.err_sup[i], 1.05 * tr.envelope[i]);
  EXPECT_GT(estimate_decay_rate(tr, "err_sup", 1.0), 0.5);
}

TEST(Engine, SampledResetsPredictor) {
  const auto sys = scalar_system();
  const auto reo = scalar_reo(2.0);
  RunOptions o;
  o.h = 0.01;
  Exogenous ex;
  ex.xi = [](double t) { return Vec::Constant(1, 0.01 * std::cos(7 * t)); };
  const auto sched = signals::jittered_schedule(0.1, 2.0, 7);
  const auto tr = run_sampled_observer(sys, reo, sched, const1(1.0), const1(0.0), ex, o);
  std::size_t pre = 0;
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
    if (tr.kind[i] != RowKind::pre_reset) continue;
    ++pre;
    EXPECT_EQ(tr.kind[i + 1], RowKind::post_reset);
    EXPECT_EQ(tr.t[i], tr.t[i + 1]);
    EXPECT_EQ(tr.w[i + 1], tr.y[i + 1]);
  }
  EXPECT_GE(pre + 1, sched.instants.size() - 1);
  EXPECT_TRUE(tr.has_channel("w[0]"));
}

TEST(Engine, ClosedLoopHoldsInputBetweenSamples) {
  auto sys = scalar_system();
  // Unstable open loop: x' = x + u.
  sys.plant = [](double, const HistoryView& x, const Vec& u, const Vec& d) {
    return Vec::Constant(1, x.now()[0] + u[0] + d[0]);
  };
  sys.output_derivative = [](const HistoryView& x, const Vec& u, const Vec& d) {
    return Vec::Constant(1, x.now()[0] + u[0] + d[0]);
  };
  ReoSpec reo = scalar_reo(3.0);
  reo.rhs = [](double, const HistoryView& z, const Vec& y, const Vec& u) {
    return Vec::Constant(1, z.now()[0] + u[0] - 3.0 * (z.now()[0] - y[0]));
  };
  std::vector<double> calls;
  Feedback fb = [&calls](double t, const HistoryView& z) {
    calls.push_back(t);
    return Vec::Constant(1, -3.0 * z.now()[0]);
  };
  RunOptions o;
  o.h = 0.01;
  const auto sched = signals::uniform_schedule(0.05, 6.0);
  const auto tr = run_closed_loop(sys, reo, fb, sched, const1(1.0), const1(0.0), {}, o);
  EXPECT_EQ(calls.size(), sched.instants.size());
  EXPECT_LT(std::abs(tr.x.back()), 1e-3);
}

TEST(Engine, RejectsBadOptions) {
  const auto sys = scalar_system();
  const auto reo = scalar_reo(2.0);
  RunOptions o;
  o.h = 0.0;
  o.horizon = 1.0;
  EXPECT_THROW(run_continuous_reo(sys, reo, const1(1.0), const1(0.0), {}, o),
               std::invalid_argument);
  o.h = 0.2;
  EXPECT_THROW(run_sampled_observer(sys, reo, signals::uniform_schedule(0.1, 1.0),
                                    const1(1.0), const1(0.0), {}, o),
               std::invalid_argument);
  o.h = 0.01;
  EXPECT_THROW(run_continuous_reo(sys, reo, const1(1.0, 0.5), const1(0.0), {}, o),
               std::exception);
}

TEST(Engine, ReactorInstanceSampledMatchesContinuous) {
  using namespace obslab::reactor;
  const ReactorParams p;
  const auto g = design_reactor_gains(p);
  const auto sys = reactor_delay_system(p);
  const auto reo = reactor_reo(p, g, p.zeta / 8);
  ReactorInit init{ProfileFunction::half_sine(1.0), 0.0};
  init.xbar0 = compatible_xbar(init.v0, p);
  auto gap = [&](double h) {
    const auto x0 = lift_initial_condition(init.v0, init.xbar0, p, h).history;
    const auto z0 = HistoryBuffer::constant(Vec::Zero(2), 1.0, 0.0, h);
    RunOptions o;
    o.h = h;
    o.horizon = 2.0;
    o.record_interval = 0.05;
    const auto c = run_continuous_reo(sys, reo, x0, z0, {}, o);
    const auto s = run_sampled_observer(sys, reo, signals::uniform_schedule(h, 2.0),
                                        x0, z0, {}, o);
    std::vector<double> a, b;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c.kind[i] != RowKind::pre_reset) a.push_back(c.err_sup[i]);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s.kind[i] != RowKind::pre_reset) b.push_back(s.err_sup[i]);
    EXPECT_EQ(a.size(), b.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
      worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
  };
  const double g1 = gap(0.0025), g2 = gap(0.00125);
  EXPECT_LE(g1, 100 * 0.0025);
  EXPECT_LE(g2, 100 * 0.00125);
  EXPECT_GT(g1 / g2, 1.6);
}
